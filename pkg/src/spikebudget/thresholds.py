"""Firing-threshold distributions sampled once per training batch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("fixed", "continuous_uniform", "discrete_uniform")

DEFAULT_DISCRETE_STEP = 0.1


@dataclass(frozen=True)
class ThresholdDistribution:
    """How the hidden-layer firing threshold is drawn during training.

    fixed               always theta_min (requires theta_min == theta_max)
    continuous_uniform  uniform on [theta_min, theta_max]
    discrete_uniform    uniform over {theta_min, theta_min + step, ..., theta_max},
                        or over explicit_set when given
    """

    kind: str
    theta_min: float
    theta_max: float
    step: float | None = None
    explicit_set: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        for name, v in (("theta_min", self.theta_min), ("theta_max", self.theta_max)):
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.theta_min > self.theta_max:
            raise ValueError(
                f"theta_min ({self.theta_min}) exceeds theta_max ({self.theta_max})"
            )
        if self.kind == "fixed" and self.theta_min != self.theta_max:
            raise ValueError("fixed distribution requires theta_min == theta_max")
        if self.kind == "discrete_uniform":
            values = self.support()
            if len(values) == 0:
                raise ValueError("discrete threshold set is empty")
            if np.any(values <= 0) or np.any(np.diff(values) <= 0):
                raise ValueError("discrete threshold set must be sorted and positive")

    def support(self) -> np.ndarray:
        """Discrete value set; only meaningful for discrete_uniform."""
        if self.explicit_set is not None:
            return np.asarray(self.explicit_set, dtype=np.float64)
        step = self.step if self.step is not None else DEFAULT_DISCRETE_STEP
        if step <= 0:
            raise ValueError(f"step must be positive, got {step}")
        n = int(round((self.theta_max - self.theta_min) / step)) + 1
        return np.round(self.theta_min + step * np.arange(n), 12)

    @property
    def mean(self) -> float:
        if self.kind == "discrete_uniform":
            return float(self.support().mean())
        return 0.5 * (self.theta_min + self.theta_max)

    @classmethod
    def fixed(cls, theta: float) -> "ThresholdDistribution":
        return cls("fixed", theta, theta)

    @classmethod
    def continuous(cls, lo: float, hi: float) -> "ThresholdDistribution":
        return cls("continuous_uniform", lo, hi)

    @classmethod
    def discrete(
        cls, lo: float, hi: float, step: float = DEFAULT_DISCRETE_STEP
    ) -> "ThresholdDistribution":
        return cls("discrete_uniform", lo, hi, step=step)


def sample_threshold(dist: ThresholdDistribution, rng: np.random.Generator) -> float:
    """Draw one threshold value; fixed distributions consume no randomness."""
    if dist.kind == "fixed":
        return float(dist.theta_min)
    if dist.kind == "continuous_uniform":
        return float(rng.uniform(dist.theta_min, dist.theta_max))
    values = dist.support()
    return float(values[rng.integers(len(values))])
