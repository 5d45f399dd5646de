"""Discretized leaky integrate-and-fire neuron dynamics.

Per-step update (exponential Euler, exact on the linear segments):

    i_s' = a_s * i_s + (1 - a_s) * input        a_s = exp(-dt / tau_s)
    v_m' = a_m * v_m + (1 - a_m) * (i_s' + b)   a_m = exp(-dt / tau_m)
    spike = 1 where v_m' >= theta
    v_m' -> v_reset where spiked                (hard reset)

The spike nonlinearity is a hard step on the forward pass.  Training
substitutes its derivative with a triangular surrogate (`surrogate_grad`);
the exact antiderivative of that surrogate (`smooth_spike`, a
piecewise-quadratic ramp) backs the relaxed forward pass used for
finite-difference validation of the backward machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LifParams",
    "LifState",
    "SpikeRaster",
    "lif_step",
    "heaviside",
    "surrogate_grad",
    "smooth_spike",
    "spike_count",
]


@dataclass
class LifParams:
    """Per-layer neuron constants.

    tau_s and tau_m are in milliseconds and must be >= dt so that the
    decay factors stay inside (0, 1).  tau_s may be a per-neuron array.
    """

    tau_s: np.ndarray | float
    tau_m: np.ndarray | float
    theta0: float = 1.0
    v_reset: float = 0.0
    bias: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        self.tau_s = np.asarray(self.tau_s, dtype=np.float64)
        self.tau_m = np.asarray(self.tau_m, dtype=np.float64)
        if self.dt <= 0 or not np.isfinite(self.dt):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        for name, tau in (("tau_s", self.tau_s), ("tau_m", self.tau_m)):
            if not np.all(np.isfinite(tau)):
                raise ValueError(f"{name} must be finite")
            if np.any(tau < self.dt):
                raise ValueError(f"{name} must be >= dt ({self.dt} ms)")
        if self.theta0 <= 0:
            raise ValueError(f"theta0 must be > 0, got {self.theta0}")
        if self.theta0 <= self.v_reset:
            raise ValueError(
                f"theta0 ({self.theta0}) must exceed v_reset ({self.v_reset})"
            )

    @property
    def alpha_s(self) -> np.ndarray:
        return np.exp(-self.dt / self.tau_s)

    @property
    def alpha_m(self) -> np.ndarray:
        return np.exp(-self.dt / self.tau_m)


@dataclass
class LifState:
    """Evolving neuron state: synaptic current and membrane potential."""

    i_s: np.ndarray
    v_m: np.ndarray

    def __post_init__(self):
        self.i_s = np.asarray(self.i_s, dtype=np.float64)
        self.v_m = np.asarray(self.v_m, dtype=np.float64)

    @classmethod
    def zeros(cls, n: int) -> "LifState":
        return cls(np.zeros(n), np.zeros(n))


@dataclass
class SpikeRaster:
    """Binary spike matrix, rows = time steps, cols = channels."""

    data: np.ndarray
    dt_ms: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValueError(f"raster must be 2-D, got shape {self.data.shape}")
        if self.data.size and not np.isin(self.data, (0, 1)).all():
            raise ValueError("raster entries must be 0 or 1")
        self.data = self.data.astype(np.uint8)
        if self.dt_ms <= 0:
            raise ValueError(f"dt_ms must be positive, got {self.dt_ms}")

    @property
    def n_steps(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]


def spike_count(raster: SpikeRaster) -> int:
    """Total number of spike events in a raster."""
    return int(raster.data.sum())


def lif_step(
    state: LifState,
    params: LifParams,
    input_current: np.ndarray,
    theta_eff: float,
) -> tuple[LifState, np.ndarray]:
    """Advance one population of LIF neurons by a single time step.

    Returns the new state and the binary spike vector.  Neurons whose
    updated potential reaches theta_eff (boundary included) emit a spike
    and are hard-reset to v_reset.
    """
    if not theta_eff > 0:
        raise ValueError(f"theta_eff must be > 0, got {theta_eff}")
    input_current = np.asarray(input_current, dtype=np.float64)
    bad = ~np.isfinite(input_current)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"non-finite input current at index {idx}: {input_current.flat[idx]!r}"
        )

    a_s = params.alpha_s
    a_m = params.alpha_m
    i_s = a_s * state.i_s + (1.0 - a_s) * input_current
    v_m = a_m * state.v_m + (1.0 - a_m) * (i_s + params.bias)
    spikes = (v_m >= theta_eff).astype(np.uint8)
    v_m = np.where(spikes, params.v_reset, v_m)
    return LifState(i_s, v_m), spikes


def heaviside(v, theta):
    """Spike indicator: 1 where v >= theta, else 0 (boundary spikes)."""
    return np.where(np.asarray(v, dtype=np.float64) >= theta, 1.0, 0.0)


def surrogate_grad(v, theta, width: float = 1.0):
    """Triangular stand-in derivative for the spike step.

    max(0, 1 - |v - theta| / (width * theta)): peak 1 at v = theta,
    support [theta * (1 - width), theta * (1 + width)].  The default
    width 1 gives support [0, 2 * theta].
    """
    if theta <= 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    v = np.asarray(v, dtype=np.float64)
    return np.maximum(0.0, 1.0 - np.abs(v - theta) / (width * theta))


def smooth_spike(v, theta, width: float = 1.0):
    """Antiderivative of `surrogate_grad` in v: a piecewise-quadratic ramp.

    Rises from 0 at v = theta * (1 - width) to width * theta at
    v = theta * (1 + width); constant outside.  Used only by the relaxed
    forward pass that finite differences are checked against.
    """
    if theta <= 0:
        raise ValueError(f"theta must be > 0, got {theta}")
    v = np.asarray(v, dtype=np.float64)
    w = width * theta
    lo = theta - w
    hi = theta + w
    rising = (v - lo) ** 2 / (2.0 * w)
    falling = w / 2.0 + (v - theta) - (v - theta) ** 2 / (2.0 * w)
    return np.select(
        [v <= lo, v <= theta, v <= hi],
        [np.zeros_like(v), rising, falling],
        default=w,
    )
