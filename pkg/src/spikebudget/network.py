"""Feed-forward spiking network with a pyramidal synaptic time-constant map.

The reference architecture is 15 input channels, three hidden layers of
48 LIF neurons, and a non-spiking readout layer.  Hidden layer l uses
tau_config[l] distinct synaptic time constants 2^1..2^tau_config[l] ms,
each assigned to an equal block of neurons; the membrane time constant
is 2 ms everywhere.  The inference threshold theta_eff applies uniformly
to all hidden neurons and can differ from the training threshold.

Simulation is layer-sequential: the synaptic filter is a linear
recurrence evaluated with scipy.signal.lfilter per time-constant block,
and only the fire-reset update runs in a per-step loop.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .lif import SpikeRaster, smooth_spike
from .thresholds import ThresholdDistribution

__all__ = [
    "SYNNET_N_IN",
    "SYNNET_HIDDEN_SIZES",
    "NetworkModel",
    "ForwardTrace",
    "SimResult",
    "build_network",
    "build_synnet",
    "simulate_batch",
    "forward",
    "count_spikes",
    "save_model",
    "load_model",
]

SYNNET_N_IN = 15
SYNNET_HIDDEN_SIZES = (48, 48, 48)
SCHEMA_VERSION = 1
_MODEL_MAGIC = "spikebudget-model v1"


@dataclass
class NetworkModel:
    """Weights, time-constant assignment, and training metadata."""

    weights: list  # per layer (n_pre, n_post), hidden layers then readout
    tau_s_layers: list  # per hidden layer, per-neuron tau_s in ms
    n_in: int
    hidden_sizes: tuple
    n_out: int
    tau_config: tuple
    dt_ms: float = 1.0
    tau_m_ms: float = 2.0
    theta0: float = 1.0
    v_reset: float = 0.0
    bias: float = 0.0
    readout_tau_s_ms: float = 2.0
    train_dist: ThresholdDistribution | None = None
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @property
    def n_hidden_layers(self) -> int:
        return len(self.hidden_sizes)

    @property
    def alpha_m(self) -> float:
        return float(np.exp(-self.dt_ms / self.tau_m_ms))

    def hidden_alpha_s(self, layer: int) -> np.ndarray:
        return np.exp(-self.dt_ms / self.tau_s_layers[layer])

    @property
    def readout_alpha_s(self) -> float:
        return float(np.exp(-self.dt_ms / self.readout_tau_s_ms))

    def copy(self) -> "NetworkModel":
        return copy.deepcopy(self)


@dataclass
class ForwardTrace:
    """Per-layer spike rasters and the readout accumulator for one input."""

    hidden_rasters: tuple
    output_accumulator: np.ndarray
    total_hidden_spikes: int

    @property
    def decision(self) -> int:
        """argmax over class accumulators; ties go to the lowest index."""
        return int(np.argmax(self.output_accumulator))


@dataclass
class SimResult:
    """Batched simulation output; history fields are None unless kept."""

    logits: np.ndarray  # (batch, n_out), time-summed readout potentials
    hidden_spike_counts: np.ndarray  # (batch,)
    spikes: list | None = None  # per hidden layer (batch, n_steps, n)
    v_pre: list | None = None  # pre-reset membrane potentials, same shapes


def _tau_pyramid(size: int, n_values: int) -> np.ndarray:
    """Per-neuron tau_s in ms: 2^1..2^n_values, equal contiguous blocks."""
    if size % n_values != 0:
        raise ValueError(f"layer size {size} not divisible by tau count {n_values}")
    values = 2.0 ** np.arange(1, n_values + 1)
    return np.repeat(values, size // n_values)


def build_network(
    n_in: int,
    hidden_sizes: tuple,
    n_out: int,
    tau_config: tuple,
    rng_seed: int = 0,
    dt_ms: float = 1.0,
    tau_m_ms: float = 2.0,
    theta0: float = 1.0,
) -> NetworkModel:
    """Construct a model with block tau assignment and uniform weight init.

    Weights are drawn uniformly in +-1/sqrt(fan_in) from a generator
    seeded with rng_seed; the seed is recorded on the model.
    """
    hidden_sizes = tuple(int(h) for h in hidden_sizes)
    tau_config = tuple(int(t) for t in tau_config)
    if len(tau_config) != len(hidden_sizes):
        raise ValueError(
            f"tau_config has {len(tau_config)} entries for {len(hidden_sizes)} hidden layers"
        )
    if n_out < 1 or n_in < 1:
        raise ValueError("n_in and n_out must be >= 1")
    for t in tau_config:
        if t < 1:
            raise ValueError(f"tau_config entries must be >= 1, got {t}")
    tau_layers = [_tau_pyramid(h, t) for h, t in zip(hidden_sizes, tau_config)]
    min_tau = min(min(t.min() for t in tau_layers), tau_m_ms)
    if min_tau < dt_ms:
        raise ValueError(f"time constants must be >= dt ({dt_ms} ms)")

    rng = np.random.default_rng(rng_seed)
    sizes = [n_in, *hidden_sizes, n_out]
    weights = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    return NetworkModel(
        weights=weights,
        tau_s_layers=tau_layers,
        n_in=n_in,
        hidden_sizes=hidden_sizes,
        n_out=n_out,
        tau_config=tau_config,
        dt_ms=dt_ms,
        tau_m_ms=tau_m_ms,
        theta0=theta0,
        seed=int(rng_seed),
    )


def build_synnet(
    n_out: int, tau_config: tuple = (2, 4, 8), rng_seed: int = 0
) -> NetworkModel:
    """The reference 15 -> 48x3 -> n_out architecture."""
    return build_network(
        SYNNET_N_IN, SYNNET_HIDDEN_SIZES, n_out, tau_config, rng_seed=rng_seed
    )


def _alpha_runs(alpha: np.ndarray):
    """Contiguous runs of equal values: [(start, stop, value), ...].

    Tau pyramids assign equal time constants to consecutive neuron
    blocks, so slicing by runs avoids fancy-indexing copies.
    """
    edges = np.flatnonzero(np.diff(alpha)) + 1
    bounds = [0, *edges.tolist(), len(alpha)]
    return [(a, b, float(alpha[a])) for a, b in zip(bounds[:-1], bounds[1:])]


def _filter_synaptic(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Apply i_s[t] = a * i_s[t-1] + (1 - a) * x[t] along axis 1.

    alpha is scalar or per-neuron; per-neuron values come in contiguous
    blocks, each handled by one lfilter call.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim == 0:
        a = float(alpha)
        return signal.lfilter([1.0 - a], [1.0, -a], x, axis=1)
    out = np.empty_like(x)
    for start, stop, a in _alpha_runs(alpha):
        out[:, :, start:stop] = signal.lfilter(
            [1.0 - a], [1.0, -a], x[:, :, start:stop], axis=1
        )
    return out


def run_hidden_layer(
    model: NetworkModel,
    layer: int,
    prev: np.ndarray,
    theta_eff: float,
    relaxed: bool = False,
    surrogate_width: float = 1.0,
    keep_v_pre: bool = False,
):
    """Simulate one hidden layer given its input spikes (batch, n_steps, n_pre).

    Returns (spikes, v_pre); v_pre is None unless requested.
    """
    n_batch, n_steps, _ = prev.shape
    a_m = model.alpha_m
    w = model.weights[layer]
    n = w.shape[1]
    x = (prev.reshape(-1, w.shape[0]) @ w).reshape(n_batch, n_steps, n)
    drive = _filter_synaptic(x, model.hidden_alpha_s(layer))
    del x
    if model.bias:
        drive += model.bias
    drive *= 1.0 - a_m

    s = np.empty((n_batch, n_steps, n))
    v_pre = np.empty((n_batch, n_steps, n)) if keep_v_pre else None
    v = np.zeros((n_batch, n))
    v_next = np.empty_like(v)
    for t in range(n_steps):
        np.multiply(v, a_m, out=v_next)
        v_next += drive[:, t]
        v, v_next = v_next, v
        if keep_v_pre:
            v_pre[:, t] = v
        st = s[:, t]
        if relaxed:
            st[...] = smooth_spike(v, theta_eff, surrogate_width)
        else:
            np.greater_equal(v, theta_eff, out=st, casting="unsafe")
        # hard reset: v -> v_reset where spiked (exact for st in {0,1})
        v -= (v - model.v_reset) * st
    return s, v_pre


def simulate_batch(
    model: NetworkModel,
    inputs: np.ndarray,
    theta_eff: float,
    relaxed: bool = False,
    surrogate_width: float = 1.0,
    keep_history: bool = False,
) -> SimResult:
    """Run the network over a batch of input rasters.

    inputs: (batch, n_steps, n_in).  With relaxed=True the hard spike step
    is replaced by the piecewise-quadratic ramp whose derivative is the
    training surrogate; that mode exists for gradient validation only.
    """
    if not theta_eff > 0:
        raise ValueError(f"theta_eff must be > 0, got {theta_eff}")
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3 or inputs.shape[2] != model.n_in:
        raise ValueError(
            f"expected inputs shaped (batch, n_steps, {model.n_in}), got {inputs.shape}"
        )
    if not np.all(np.isfinite(inputs)):
        raise ValueError("inputs contain non-finite values")

    n_batch, n_steps, _ = inputs.shape
    a_m = model.alpha_m
    kept_spikes = [] if keep_history else None
    kept_v_pre = [] if keep_history else None
    hidden_count = np.zeros(n_batch)

    prev = inputs
    for layer in range(model.n_hidden_layers):
        s, v_pre = run_hidden_layer(
            model,
            layer,
            prev,
            theta_eff,
            relaxed=relaxed,
            surrogate_width=surrogate_width,
            keep_v_pre=keep_history,
        )
        hidden_count += s.sum(axis=(1, 2))
        if keep_history:
            kept_spikes.append(s)
            kept_v_pre.append(v_pre)
        prev = s

    # Non-spiking readout: same synaptic and membrane dynamics, no reset;
    # the class score is the membrane potential summed over time.
    w = model.weights[-1]
    x = (prev.reshape(-1, w.shape[0]) @ w).reshape(n_batch, n_steps, model.n_out)
    i_out = _filter_synaptic(x, np.asarray(model.readout_alpha_s))
    v_out = signal.lfilter([1.0 - a_m], [1.0, -a_m], i_out + model.bias, axis=1)
    logits = v_out.sum(axis=1)

    return SimResult(
        logits=logits,
        hidden_spike_counts=hidden_count,
        spikes=kept_spikes,
        v_pre=kept_v_pre,
    )


def forward(model: NetworkModel, raster, theta_eff: float) -> ForwardTrace:
    """Run one input raster through the network and keep the spike trace."""
    if isinstance(raster, SpikeRaster):
        if raster.n_channels != model.n_in:
            raise ValueError(
                f"raster has {raster.n_channels} channels, model expects {model.n_in}"
            )
        if abs(raster.dt_ms - model.dt_ms) > 1e-12:
            raise ValueError(
                f"raster dt {raster.dt_ms} ms does not match model dt {model.dt_ms} ms"
            )
        data = raster.data
    else:
        data = np.asarray(raster)
    sim = simulate_batch(model, data[None], theta_eff, keep_history=True)
    rasters = tuple(
        SpikeRaster(layer[0].astype(np.uint8), dt_ms=model.dt_ms) for layer in sim.spikes
    )
    return ForwardTrace(
        hidden_rasters=rasters,
        output_accumulator=sim.logits[0],
        total_hidden_spikes=int(sim.hidden_spike_counts[0]),
    )


def count_spikes(trace: ForwardTrace) -> int:
    """Hidden-layer spike total, recounted from the stored rasters."""
    return int(sum(int(r.data.sum()) for r in trace.hidden_rasters))


def _fmt(x: float) -> str:
    return repr(float(x))


def _dist_to_line(dist: ThresholdDistribution | None) -> str:
    if dist is None:
        return "train_dist none"
    step = _fmt(dist.step) if dist.step is not None else "-"
    if dist.explicit_set is not None:
        exp = ",".join(_fmt(v) for v in dist.explicit_set)
    else:
        exp = "-"
    return f"train_dist {dist.kind} {_fmt(dist.theta_min)} {_fmt(dist.theta_max)} {step} {exp}"


def _dist_from_tokens(tokens: list) -> ThresholdDistribution | None:
    if tokens[0] == "none":
        return None
    kind, tmin, tmax, step, exp = tokens
    return ThresholdDistribution(
        kind=kind,
        theta_min=float(tmin),
        theta_max=float(tmax),
        step=None if step == "-" else float(step),
        explicit_set=None if exp == "-" else tuple(float(v) for v in exp.split(",")),
    )


def save_model(model: NetworkModel, path) -> None:
    """Write the versioned text container; load_model round-trips bit-exactly."""
    lines = [
        _MODEL_MAGIC,
        f"schema_version {model.schema_version}",
        f"seed {model.seed}",
        f"n_in {model.n_in}",
        "hidden_sizes " + " ".join(str(h) for h in model.hidden_sizes),
        f"n_out {model.n_out}",
        "tau_config " + " ".join(str(t) for t in model.tau_config),
        f"dt_ms {_fmt(model.dt_ms)}",
        f"tau_m_ms {_fmt(model.tau_m_ms)}",
        f"theta0 {_fmt(model.theta0)}",
        f"v_reset {_fmt(model.v_reset)}",
        f"bias {_fmt(model.bias)}",
        f"readout_tau_s_ms {_fmt(model.readout_tau_s_ms)}",
        _dist_to_line(model.train_dist),
    ]
    for i, taus in enumerate(model.tau_s_layers):
        lines.append(f"tau_s {i} " + " ".join(_fmt(t) for t in taus))
    for i, w in enumerate(model.weights):
        lines.append(f"weights {i} {w.shape[0]} {w.shape[1]} float64-repr")
        for row in w:
            lines.append(" ".join(_fmt(v) for v in row))
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _expect(cond: bool, lineno: int, message: str) -> None:
    if not cond:
        raise ValueError(f"model file line {lineno}: {message}")


def load_model(path) -> NetworkModel:
    with open(path) as fh:
        lines = fh.read().splitlines()
    _expect(bool(lines) and lines[0] == _MODEL_MAGIC, 1, f"expected header {_MODEL_MAGIC!r}")

    fields = {}
    i = 1
    order = [
        "schema_version", "seed", "n_in", "hidden_sizes", "n_out", "tau_config",
        "dt_ms", "tau_m_ms", "theta0", "v_reset", "bias", "readout_tau_s_ms",
        "train_dist",
    ]
    for key in order:
        _expect(i < len(lines), i + 1, f"missing field {key}")
        tokens = lines[i].split()
        _expect(tokens and tokens[0] == key, i + 1, f"expected field {key}")
        fields[key] = tokens[1:]
        i += 1
    version = int(fields["schema_version"][0])
    _expect(version == SCHEMA_VERSION, 2, f"unsupported schema_version {version}")

    hidden_sizes = tuple(int(h) for h in fields["hidden_sizes"])
    tau_layers = []
    for layer in range(len(hidden_sizes)):
        tokens = lines[i].split()
        _expect(
            tokens[:2] == ["tau_s", str(layer)], i + 1, f"expected tau_s block {layer}"
        )
        tau_layers.append(np.array([float(v) for v in tokens[2:]]))
        _expect(len(tau_layers[-1]) == hidden_sizes[layer], i + 1, "tau_s length mismatch")
        i += 1

    weights = []
    for layer in range(len(hidden_sizes) + 1):
        tokens = lines[i].split()
        _expect(
            len(tokens) == 5 and tokens[:2] == ["weights", str(layer)],
            i + 1,
            f"expected weights block {layer}",
        )
        rows, cols = int(tokens[2]), int(tokens[3])
        _expect(tokens[4] == "float64-repr", i + 1, f"unknown precision {tokens[4]!r}")
        i += 1
        w = np.empty((rows, cols))
        for r in range(rows):
            _expect(i < len(lines), i + 1, "truncated weight matrix")
            vals = lines[i].split()
            _expect(len(vals) == cols, i + 1, f"expected {cols} values, got {len(vals)}")
            w[r] = [float(v) for v in vals]
            i += 1
        weights.append(w)
    _expect(i < len(lines) and lines[i] == "end", i + 1, "missing end marker")

    return NetworkModel(
        weights=weights,
        tau_s_layers=tau_layers,
        n_in=int(fields["n_in"][0]),
        hidden_sizes=hidden_sizes,
        n_out=int(fields["n_out"][0]),
        tau_config=tuple(int(t) for t in fields["tau_config"]),
        dt_ms=float(fields["dt_ms"][0]),
        tau_m_ms=float(fields["tau_m_ms"][0]),
        theta0=float(fields["theta0"][0]),
        v_reset=float(fields["v_reset"][0]),
        bias=float(fields["bias"][0]),
        readout_tau_s_ms=float(fields["readout_tau_s_ms"][0]),
        train_dist=_dist_from_tokens(fields["train_dist"]),
        seed=int(fields["seed"][0]),
        schema_version=version,
    )
