"""Pareto front over (accuracy, spike count) operating points and the
budget-driven selection rules, plus the spike-to-power and battery model.

A point dominates another when it is at least as accurate and at most as
spiky, with at least one strict inequality.  The front keeps every
non-dominated (model, theta) point; per model, maximal runs of
consecutive sweep-grid thresholds on the front form its segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analysis import OperatingPoint, SweepCurve

__all__ = [
    "ParetoEntry",
    "ParetoFront",
    "EnergyModel",
    "Budget",
    "dominates",
    "build_front",
    "select_single",
    "select_multi",
    "spikes_to_power",
    "battery_days",
    "write_front_csv",
    "read_front_csv",
    "write_manifest",
    "read_manifest",
]

_FRONT_MAGIC = "# spikebudget-front v1"
_MANIFEST_MAGIC = "# spikebudget-manifest v1"

# 23 pJ per spike is the published per-event cost of current digital
# neuromorphic cores; at that scale the dynamic term is nanowatts and
# total power is idle-dominated (see README energy notes).
DEFAULT_E_SPIKE_J = 23e-12
DEFAULT_P_IDLE_W = 120e-6
DEFAULT_WINDOW_S = 2.56


@dataclass(frozen=True)
class ParetoEntry:
    model_id: str
    theta: float
    accuracy: float
    mean_spikes: float
    segment_index: int = 0


@dataclass
class ParetoFront:
    """Non-dominated entries sorted by spike count plus per-model segments."""

    entries: list
    segments: dict = field(default_factory=dict)  # model_id -> list of theta tuples


@dataclass(frozen=True)
class EnergyModel:
    e_spike_j: float = DEFAULT_E_SPIKE_J
    p_idle_w: float = DEFAULT_P_IDLE_W
    window_s: float = DEFAULT_WINDOW_S

    def __post_init__(self):
        if self.e_spike_j < 0 or self.p_idle_w < 0 or self.window_s <= 0:
            raise ValueError("energy model constants must be nonnegative, window > 0")


@dataclass(frozen=True)
class Budget:
    """Inference budget: a cap on mean spikes or on joules per window."""

    kind: str  # "spike_cap" | "energy_cap"
    cap: float

    def __post_init__(self):
        if self.kind not in ("spike_cap", "energy_cap"):
            raise ValueError(f"unknown budget kind {self.kind!r}")
        if self.cap <= 0 or not np.isfinite(self.cap):
            raise ValueError(f"budget cap must be positive and finite, got {self.cap}")

    def spike_cap(self, energy_model: EnergyModel | None = None) -> float:
        """The cap expressed in mean spikes; energy caps convert through
        the energy model and may come out negative (nothing feasible)."""
        if self.kind == "spike_cap":
            return self.cap
        if energy_model is None:
            raise ValueError("energy_cap budgets need an EnergyModel to convert")
        return (self.cap - energy_model.p_idle_w * energy_model.window_s) / energy_model.e_spike_j


def dominates(a, b) -> bool:
    """True when a is at least as good on both axes and better on one."""
    return (
        a.accuracy >= b.accuracy
        and a.mean_spikes <= b.mean_spikes
        and (a.accuracy > b.accuracy or a.mean_spikes < b.mean_spikes)
    )


def build_front(curves: list) -> ParetoFront:
    """Non-dominated subset over all (model, theta) points of all curves.

    Exactly coincident points keep only the lowest (model_id, theta).
    Segments are maximal runs of consecutive grid thetas per model.
    """
    if not curves:
        raise ValueError("no sweep curves given")
    pool = []
    for curve in curves:
        for p in curve.points:
            pool.append((curve.model_id, p))

    kept = []
    for mid, p in pool:
        if any(dominates(q, p) for _, q in pool):
            continue
        kept.append((mid, p))

    # Deduplicate coincident survivors.
    by_value = {}
    for mid, p in kept:
        key = (p.accuracy, p.mean_spikes)
        if key not in by_value or (mid, p.theta) < (
            by_value[key][0],
            by_value[key][1].theta,
        ):
            by_value[key] = (mid, p)
    kept = sorted(
        by_value.values(), key=lambda e: (e[1].mean_spikes, e[1].accuracy, e[0], e[1].theta)
    )

    front_thetas = {}
    for mid, p in kept:
        front_thetas.setdefault(mid, set()).add(p.theta)

    segments = {}
    seg_of = {}
    for curve in curves:
        mine = front_thetas.get(curve.model_id)
        if not mine:
            continue
        runs = []
        run = []
        for p in curve.points:
            if p.theta in mine:
                run.append(p.theta)
            elif run:
                runs.append(tuple(run))
                run = []
        if run:
            runs.append(tuple(run))
        segments[curve.model_id] = runs
        for k, r in enumerate(runs):
            for theta in r:
                seg_of[(curve.model_id, theta)] = k

    entries = [
        ParetoEntry(
            model_id=mid,
            theta=p.theta,
            accuracy=p.accuracy,
            mean_spikes=p.mean_spikes,
            segment_index=seg_of.get((mid, p.theta), 0),
        )
        for mid, p in kept
    ]
    return ParetoFront(entries=entries, segments=segments)


def select_single(
    curve: SweepCurve, budget: Budget, energy_model: EnergyModel | None = None
) -> OperatingPoint | None:
    """Accuracy-maximizing grid point with spikes within budget.

    Ties break toward the larger theta (fewer spikes).  Returns None when
    no point is feasible; the caller decides the fallback.
    """
    if not curve.points:
        raise ValueError("sweep curve is empty")
    cap = budget.spike_cap(energy_model)
    feasible = [p for p in curve.points if p.mean_spikes <= cap]
    if not feasible:
        return None
    return max(feasible, key=lambda p: (p.accuracy, p.theta))


def select_multi(
    front: ParetoFront, budget: Budget, energy_model: EnergyModel | None = None
) -> ParetoEntry | None:
    """Accuracy-maximizing feasible front entry.

    Ties break toward fewer spikes, then lexicographic model_id.
    """
    if not front.entries:
        raise ValueError("pareto front is empty")
    cap = budget.spike_cap(energy_model)
    feasible = [e for e in front.entries if e.mean_spikes <= cap]
    if not feasible:
        return None
    return min(feasible, key=lambda e: (-e.accuracy, e.mean_spikes, e.model_id))


def spikes_to_power(mean_spikes: float, em: EnergyModel) -> float:
    """Average power in watts: per-spike energy over the window plus idle."""
    if mean_spikes < 0:
        raise ValueError(f"mean_spikes must be >= 0, got {mean_spikes}")
    return mean_spikes * em.e_spike_j / em.window_s + em.p_idle_w


def battery_days(capacity_mah: float, voltage_v: float, avg_power_w: float) -> float:
    """Runtime in days of a battery at a constant average power draw.

    capacity (mAh) * voltage (V) * 3.6 gives joules; divided by watts
    gives seconds.
    """
    for name, v in (
        ("capacity_mah", capacity_mah),
        ("voltage_v", voltage_v),
        ("avg_power_w", avg_power_w),
    ):
        if v <= 0 or not np.isfinite(v):
            raise ValueError(f"{name} must be positive and finite, got {v}")
    joules = capacity_mah * voltage_v * 3.6
    return joules / avg_power_w / 86400.0


def write_front_csv(front: ParetoFront, path) -> None:
    lines = [_FRONT_MAGIC, "model_id,theta,accuracy,mean_spikes,segment_index"]
    for e in front.entries:
        lines.append(
            f"{e.model_id},{e.theta!r},{e.accuracy!r},{e.mean_spikes!r},{e.segment_index}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_front_csv(path) -> ParetoFront:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _FRONT_MAGIC:
        raise ValueError(f"{path}: not a spikebudget front file")
    entries = []
    for line in lines[2:]:
        if not line:
            continue
        mid, theta, acc, spk, seg = line.split(",")
        entries.append(
            ParetoEntry(
                model_id=mid,
                theta=float(theta),
                accuracy=float(acc),
                mean_spikes=float(spk),
                segment_index=int(seg),
            )
        )
    segments = {}
    for e in entries:
        segments.setdefault(e.model_id, {}).setdefault(e.segment_index, []).append(e.theta)
    segments = {
        mid: [tuple(sorted(runs[k])) for k in sorted(runs)] for mid, runs in segments.items()
    }
    return ParetoFront(entries=entries, segments=segments)


def write_manifest(model_files: dict, path) -> None:
    """Manifest mapping model_id to its model file path."""
    lines = [_MANIFEST_MAGIC]
    for mid in sorted(model_files):
        lines.append(f"{mid}\t{model_files[mid]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MANIFEST_MAGIC:
        raise ValueError(f"{path}: not a spikebudget manifest")
    out = {}
    for line in lines[1:]:
        if not line:
            continue
        mid, file = line.split("\t", 1)
        out[mid] = file
    return out
