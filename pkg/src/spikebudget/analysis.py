"""Spike-probability analysis, threshold sweeps, and relative metrics.

The spiking probability of a neuron whose membrane potential follows a
density p(v) is the upper tail P(V >= theta).  Averaging that tail over
a uniform threshold distribution gives the expected spike probability;
the continuous case is evaluated with adaptive Simpson quadrature, the
discrete case as a finite mean.  `jensen_gap` reports
tail(mean threshold) - expected tail, whose sign is positive exactly
where the tail is concave over the sampling interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import NetworkModel, simulate_batch

__all__ = [
    "MembraneDistribution",
    "OperatingPoint",
    "SweepCurve",
    "spike_prob_fixed",
    "expected_spike_prob_continuous",
    "expected_spike_prob_discrete",
    "jensen_gap",
    "sweep",
    "delta_metrics",
    "collect_membrane_samples",
    "default_theta_grid",
    "write_sweep_csv",
    "read_sweep_csv",
]

_SWEEP_MAGIC = "# spikebudget-sweep v1"


@dataclass
class MembraneDistribution:
    """Membrane-potential distribution: gaussian(mean, std) or empirical."""

    kind: str
    mean: float = 0.0
    std: float = 1.0
    samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.std <= 0 or not np.isfinite(self.std):
                raise ValueError(f"gaussian std must be > 0, got {self.std}")
        elif self.kind == "empirical":
            if self.samples is None or len(self.samples) == 0:
                raise ValueError("empirical distribution needs at least one sample")
            self.samples = np.sort(np.asarray(self.samples, dtype=np.float64))
            if not np.all(np.isfinite(self.samples)):
                raise ValueError("empirical samples must be finite")
        else:
            raise ValueError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean: float, std: float) -> "MembraneDistribution":
        return cls("gaussian", mean=mean, std=std)

    @classmethod
    def empirical(cls, samples) -> "MembraneDistribution":
        return cls("empirical", samples=np.asarray(samples, dtype=np.float64))

    def tail(self, theta: float) -> float:
        """P(V >= theta); the boundary counts, matching the spike rule."""
        if self.kind == "gaussian":
            z = (theta - self.mean) / (self.std * math.sqrt(2.0))
            return 0.5 * math.erfc(z)
        n = len(self.samples)
        return float(n - np.searchsorted(self.samples, theta, side="left")) / n


def spike_prob_fixed(dist: MembraneDistribution, theta: float) -> float:
    """Spiking probability at a fixed threshold: the upper tail at theta."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    return dist.tail(theta)


def _adaptive_simpson(f, a, b, tol, max_depth=50):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2.0, depth + 1) + recurse(
            m, b, fm, frm, fb, right, tol / 2.0, depth + 1
        )

    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def expected_spike_prob_continuous(
    dist: MembraneDistribution,
    theta_min: float,
    theta_max: float,
    tol: float = 1e-8,
) -> float:
    """Expected spike probability under theta ~ U(theta_min, theta_max).

    (1 / (theta_max - theta_min)) * integral of tail(theta).  Gaussian
    tails go through adaptive Simpson quadrature; empirical tails are
    piecewise constant, so their integral is computed exactly.
    """
    if not theta_min < theta_max:
        raise ValueError(
            f"require theta_min < theta_max, got ({theta_min}, {theta_max})"
        )
    width = theta_max - theta_min
    if dist.kind == "empirical":
        pts = dist.samples[(dist.samples > theta_min) & (dist.samples < theta_max)]
        edges = np.concatenate(([theta_min], np.unique(pts), [theta_max]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        total = sum(
            dist.tail(m) * (hi - lo) for lo, hi, m in zip(edges[:-1], edges[1:], mids)
        )
        return total / width
    integral = _adaptive_simpson(dist.tail, theta_min, theta_max, tol * width)
    return integral / width


def expected_spike_prob_discrete(dist: MembraneDistribution, theta_set) -> float:
    """Expected spike probability over a finite threshold set: mean tail."""
    theta_set = np.asarray(theta_set, dtype=np.float64)
    if theta_set.size == 0:
        raise ValueError("threshold set is empty")
    return float(np.mean([dist.tail(t) for t in theta_set]))


def jensen_gap(
    dist: MembraneDistribution, theta_min: float, theta_max: float
) -> float:
    """tail(mean theta) minus the expected tail over U(theta_min, theta_max).

    Positive where the tail is concave on the interval (for a gaussian,
    whenever the interval sits at or below the mean); the sign is
    reported, not asserted.
    """
    if theta_min == theta_max:
        return 0.0
    fixed = spike_prob_fixed(dist, 0.5 * (theta_min + theta_max))
    return fixed - expected_spike_prob_continuous(dist, theta_min, theta_max)


@dataclass(frozen=True)
class OperatingPoint:
    """(theta, accuracy, mean spike count) for one inference configuration."""

    theta: float
    accuracy: float
    mean_spikes: float


@dataclass
class SweepCurve:
    model_id: str
    points: list

    def __post_init__(self):
        thetas = [p.theta for p in self.points]
        if any(b <= a for a, b in zip(thetas, thetas[1:])):
            raise ValueError("sweep thetas must be strictly increasing")

    def thetas(self) -> np.ndarray:
        return np.array([p.theta for p in self.points])

    def accuracies(self) -> np.ndarray:
        return np.array([p.accuracy for p in self.points])

    def spikes(self) -> np.ndarray:
        return np.array([p.mean_spikes for p in self.points])

    def point_at(self, theta: float, atol: float = 1e-9) -> OperatingPoint:
        for p in self.points:
            if abs(p.theta - theta) <= atol:
                return p
        raise KeyError(f"no sweep point at theta={theta}")


def default_theta_grid() -> np.ndarray:
    """The evaluation grid 0.6 to 2.4 in steps of 0.2 (10 points)."""
    return np.round(np.linspace(0.6, 2.4, 10), 10)


def _eval_point(model, inputs, labels, theta: float, batch_size: int) -> OperatingPoint:
    correct = 0
    spikes = 0.0
    for start in range(0, len(inputs), batch_size):
        sim = simulate_batch(model, inputs[start : start + batch_size], theta)
        correct += int(
            (sim.logits.argmax(axis=1) == labels[start : start + batch_size]).sum()
        )
        spikes += float(sim.hidden_spike_counts.sum())
    return OperatingPoint(
        theta=theta, accuracy=correct / len(inputs), mean_spikes=spikes / len(inputs)
    )


def sweep(
    model: NetworkModel,
    dataset,
    theta_grid=None,
    model_id: str = "model",
    batch_size: int = 64,
    threads: int = 1,
) -> SweepCurve:
    """Evaluate the full dataset at every threshold with no updates.

    Records classification accuracy and the mean hidden spike count per
    sample at each grid point.  Grid points are independent; with
    threads > 1 they run concurrently and are collected in grid order so
    the result is identical either way.
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.intp)
    if len(inputs) == 0:
        raise ValueError("dataset is empty")
    grid = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("theta grid is empty")

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(
                pool.map(
                    lambda th: _eval_point(model, inputs, labels, float(th), batch_size),
                    grid,
                )
            )
    else:
        points = [_eval_point(model, inputs, labels, float(th), batch_size) for th in grid]
    return SweepCurve(model_id=model_id, points=points)


def delta_metrics(
    model_point: OperatingPoint, baseline_point: OperatingPoint
) -> tuple[float, float]:
    """Signed relative accuracy and spike-count change versus a baseline.

    Returned as fractions; formatting as percentages belongs to the CLI.
    """
    if baseline_point.accuracy <= 0:
        raise ValueError("baseline accuracy must be > 0")
    if baseline_point.mean_spikes <= 0:
        raise ValueError("baseline spike count must be > 0")
    d_acc = (model_point.accuracy - baseline_point.accuracy) / baseline_point.accuracy
    d_spk = (model_point.mean_spikes - baseline_point.mean_spikes) / baseline_point.mean_spikes
    return d_acc, d_spk


def collect_membrane_samples(
    model: NetworkModel,
    inputs: np.ndarray,
    theta: float,
    max_samples: int = 100000,
    seed: int = 0,
) -> np.ndarray:
    """Pool pre-reset membrane potentials over hidden neurons and time.

    Links the probability analysis to trained networks: the pooled values
    form an empirical membrane distribution.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[None]
    sim = simulate_batch(model, inputs, theta, keep_history=True)
    pooled = np.concatenate([v.ravel() for v in sim.v_pre])
    if pooled.size > max_samples:
        rng = np.random.default_rng(seed)
        pooled = rng.choice(pooled, size=max_samples, replace=False)
    return pooled


def _baseline_for(curve: SweepCurve) -> OperatingPoint:
    """Default baseline: the theta = 1.0 grid point when present, else the first."""
    try:
        return curve.point_at(1.0)
    except KeyError:
        return curve.points[0]


def write_sweep_csv(
    curve: SweepCurve,
    path,
    baseline: OperatingPoint | None = None,
    baseline_id: str | None = None,
    model_file: str | None = None,
) -> None:
    """Sweep report CSV; the baseline used for the delta columns is named
    in a header row."""
    base = baseline if baseline is not None else _baseline_for(curve)
    base_id = baseline_id if baseline_id is not None else curve.model_id
    lines = [
        _SWEEP_MAGIC,
        f"# model_id {curve.model_id}",
        f"# model_file {model_file if model_file else '-'}",
        (
            f"# baseline model_id={base_id} theta={base.theta!r} "
            f"accuracy={base.accuracy!r} mean_spikes={base.mean_spikes!r}"
        ),
        "model_id,theta,accuracy,mean_spikes,dAcc_rel,dSpk_rel",
    ]
    degenerate = base.accuracy <= 0 or base.mean_spikes <= 0
    for p in curve.points:
        if degenerate:
            d_acc, d_spk = float("nan"), float("nan")
        else:
            d_acc, d_spk = delta_metrics(p, base)
        lines.append(
            f"{curve.model_id},{p.theta!r},{p.accuracy!r},{p.mean_spikes!r},"
            f"{d_acc!r},{d_spk!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path):
    """Parse a sweep CSV; returns (curve, baseline_point, model_file)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SWEEP_MAGIC:
        raise ValueError(f"{path}: not a spikebudget sweep file")
    model_id = lines[1].split(" ", 2)[2]
    model_file = lines[2].split(" ", 2)[2]
    base_tokens = dict(
        item.split("=", 1) for item in lines[3].removeprefix("# baseline ").split()
    )
    baseline = OperatingPoint(
        theta=float(base_tokens["theta"]),
        accuracy=float(base_tokens["accuracy"]),
        mean_spikes=float(base_tokens["mean_spikes"]),
    )
    points = []
    for line in lines[5:]:
        if not line:
            continue
        mid, theta, acc, spk, _, _ = line.split(",")
        points.append(
            OperatingPoint(theta=float(theta), accuracy=float(acc), mean_spikes=float(spk))
        )
    curve = SweepCurve(model_id=model_id, points=points)
    return curve, baseline, (None if model_file == "-" else model_file)
