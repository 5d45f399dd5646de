"""Supervised training: BPTT with surrogate gradients, Adam, threshold sampling.

One threshold is drawn per batch and applied uniformly to every hidden
neuron; the forward pass stays hard-spiking while the backward pass
substitutes the spike step's derivative with the triangular surrogate.
The same backward engine differentiates the relaxed (smooth-ramp)
forward exactly, which is what the finite-difference harness checks.

Backward recurrences, per hidden layer, t running from the last step down
(g is the surrogate derivative at the pre-reset potential v, s the spike
output, ds the gradient arriving at the spike output):

    dv[t] = ds[t] * g[t] + a_m * dv[t+1] * ((1 - s[t]) + (v_reset - v[t]) * g[t])
    di[t] = (1 - a_m) * dv[t] + a_s * di[t+1]
    dx[t] = (1 - a_s) * di[t]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .network import NetworkModel, SimResult, simulate_batch
from .thresholds import ThresholdDistribution, sample_threshold

__all__ = [
    "ThresholdDistribution",
    "sample_threshold",
    "TrainConfig",
    "BatchRecord",
    "TrainHistory",
    "TrainingDivergedError",
    "scheduler_lr",
    "softmax_cross_entropy",
    "calibrate_drive",
    "loss_and_grads",
    "relaxed_forward",
    "relaxed_loss_and_grads",
    "train",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingDivergedError(RuntimeError):
    """Raised when the loss turns non-finite; records where it happened."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    dist: ThresholdDistribution
    epochs: int
    lr: float = 1e-3
    batch_size: int = 32
    scheduler: str = "constant"  # or "cosine_warm_restarts"
    t0: int = 10
    t_mult: int = 2
    seed: int = 0
    surrogate_width: float = 1.0
    drive_calibration: bool = True
    calibration_target_std: float = 0.5
    calibration_samples: int = 64

    def __post_init__(self):
        if self.lr < 0 or not np.isfinite(self.lr):
            raise ValueError(f"lr must be nonnegative and finite, got {self.lr}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.scheduler not in ("constant", "cosine_warm_restarts"):
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        if self.scheduler == "cosine_warm_restarts" and (self.t0 < 1 or self.t_mult < 1):
            raise ValueError("cosine_warm_restarts requires t0 >= 1 and t_mult >= 1")
        if self.drive_calibration and not 0 < self.calibration_target_std:
            raise ValueError("calibration_target_std must be > 0")


@dataclass
class BatchRecord:
    epoch: int
    batch: int
    loss: float
    lr: float
    theta: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,batch,loss,lr,theta_sampled\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.batch},{r.loss!r},{r.lr!r},{r.theta!r}\n")


def scheduler_lr(config: TrainConfig, step_index: int) -> float:
    """Learning rate at a given optimizer step.

    cosine_warm_restarts: lr * (1 + cos(pi * t_cur / T_i)) / 2 where T_i
    doubles (by t_mult) after each restart; every restart boundary
    returns the initial lr.
    """
    if step_index < 0:
        raise ValueError(f"step_index must be >= 0, got {step_index}")
    if config.scheduler == "constant":
        return config.lr
    t_cur = step_index
    period = config.t0
    while t_cur >= period:
        t_cur -= period
        period *= config.t_mult
    return config.lr * 0.5 * (1.0 + np.cos(np.pi * t_cur / period))


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits."""
    labels = np.asarray(labels, dtype=np.intp).reshape(-1)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    n = logits.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return float(loss), dlogits / n


def _filter_reverse(x: np.ndarray, alpha) -> np.ndarray:
    """y[t] = x[t] + a * y[t+1] along axis 1 (reverse-time accumulation)."""
    from .network import _alpha_runs

    alpha = np.asarray(alpha, dtype=np.float64)
    rev = np.ascontiguousarray(x[:, ::-1])
    if alpha.ndim == 0:
        a = float(alpha)
        out = signal.lfilter([1.0], [1.0, -a], rev, axis=1)
    else:
        out = np.empty_like(rev)
        for start, stop, a in _alpha_runs(alpha):
            out[:, :, start:stop] = signal.lfilter(
                [1.0], [1.0, -a], rev[:, :, start:stop], axis=1
            )
    return out[:, ::-1]


def _backward(
    model: NetworkModel,
    sim: SimResult,
    inputs: np.ndarray,
    dlogits: np.ndarray,
    theta: float,
    surrogate_width: float,
) -> list:
    """Gradients of the loss w.r.t. every weight matrix (BPTT)."""
    n_batch, n_steps, _ = inputs.shape
    a_m = model.alpha_m

    # Readout: logits = sum_t v_out[t]; v_out and i_out are linear chains.
    decay = a_m ** np.arange(n_steps + 1)
    v_factor = (1.0 - decay[1:][::-1]) / (1.0 - a_m)  # sum_{k<=T-1-t} a_m^k
    dv_out = dlogits[:, None, :] * v_factor[None, :, None]
    di_out = _filter_reverse((1.0 - a_m) * dv_out, np.asarray(model.readout_alpha_s))
    dx = (1.0 - model.readout_alpha_s) * di_out

    grads = [None] * len(model.weights)
    s_last = sim.spikes[-1]
    w = model.weights[-1]
    grads[-1] = s_last.reshape(-1, w.shape[0]).T @ dx.reshape(-1, w.shape[1])
    ds = (dx.reshape(-1, w.shape[1]) @ w.T).reshape(n_batch, n_steps, w.shape[0])

    for layer in range(model.n_hidden_layers - 1, -1, -1):
        v_pre = sim.v_pre[layer]
        s = sim.spikes[layer]
        # g = surrogate derivative, built in place to limit temporaries
        g = np.abs(v_pre - theta)
        g *= -1.0 / (surrogate_width * theta)
        g += 1.0
        np.maximum(g, 0.0, out=g)
        reset_coeff = (model.v_reset - v_pre) * g
        reset_coeff += 1.0
        reset_coeff -= s
        ds *= g  # ds now holds ds * g
        dsg = ds

        dv = g  # reuse g's storage for the dv history
        carry = np.zeros((n_batch, v_pre.shape[2]))
        tmp = np.empty_like(carry)
        for t in range(n_steps - 1, -1, -1):
            np.multiply(carry, a_m, out=tmp)
            tmp *= reset_coeff[:, t]
            tmp += dsg[:, t]
            carry, tmp = tmp, carry
            dv[:, t] = carry

        a_s = model.hidden_alpha_s(layer)
        di = _filter_reverse((1.0 - a_m) * dv, a_s)
        dx = (1.0 - a_s) * di

        s_in = inputs if layer == 0 else sim.spikes[layer - 1]
        w = model.weights[layer]
        grads[layer] = s_in.reshape(-1, w.shape[0]).T @ dx.reshape(-1, w.shape[1])
        if layer > 0:
            ds = (dx.reshape(-1, w.shape[1]) @ w.T).reshape(
                n_batch, n_steps, w.shape[0]
            )
    return grads


def loss_and_grads(
    model: NetworkModel,
    inputs: np.ndarray,
    labels: np.ndarray,
    theta: float,
    relaxed: bool = False,
    surrogate_width: float = 1.0,
) -> tuple[float, list, SimResult]:
    """Forward, loss, and weight gradients for one batch."""
    inputs = np.asarray(inputs, dtype=np.float64)
    sim = simulate_batch(
        model,
        inputs,
        theta,
        relaxed=relaxed,
        surrogate_width=surrogate_width,
        keep_history=True,
    )
    loss, dlogits = softmax_cross_entropy(sim.logits, labels)
    grads = _backward(model, sim, inputs, dlogits, theta, surrogate_width)
    return loss, grads, sim


def relaxed_forward(model: NetworkModel, inputs, theta: float, labels) -> float:
    """Loss of the smooth-ramp forward pass; finite-difference target only."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[None]
    labels = np.atleast_1d(labels)
    sim = simulate_batch(model, inputs, theta, relaxed=True)
    loss, _ = softmax_cross_entropy(sim.logits, labels)
    return loss


def relaxed_loss_and_grads(model: NetworkModel, inputs, theta: float, labels):
    """Backward pass through the relaxed forward; compares against FD."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 2:
        inputs = inputs[None]
    labels = np.atleast_1d(labels)
    loss, grads, _ = loss_and_grads(model, inputs, labels, theta, relaxed=True)
    return loss, grads


def calibrate_drive(
    model: NetworkModel,
    inputs: np.ndarray,
    theta_ref: float | None = None,
    target_std: float = 0.5,
    max_samples: int = 64,
    max_gain: float = 1e6,
) -> list:
    """Rescale each hidden layer's weights so pre-reset potentials have a
    usable spread before training starts.

    Fan-in-only initialization leaves every layer silent under sparse
    spike input; silent layers have exactly zero surrogate gradient, so
    training cannot begin.  Scaling layer by layer until std(v_pre)
    reaches target_std * theta_ref puts membrane mass inside the
    surrogate support across the whole training threshold range
    (theta_ref defaults to the model's base threshold; the trainer passes
    the distribution's upper bound).  Deterministic: uses the first
    max_samples inputs, no randomness.  Returns the per-layer gains.
    """
    from .network import run_hidden_layer

    theta_ref = model.theta0 if theta_ref is None else theta_ref
    prev = np.asarray(inputs[:max_samples], dtype=np.float64)
    gains = []
    for layer in range(model.n_hidden_layers):
        _, v_pre = run_hidden_layer(model, layer, prev, theta_ref, keep_v_pre=True)
        spread = float(v_pre.std())
        gain = min(target_std * theta_ref / spread, max_gain) if spread > 0 else 1.0
        model.weights[layer] *= gain
        gains.append(gain)
        prev, _ = run_hidden_layer(model, layer, prev, theta_ref)
    return gains


@dataclass
class _AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_weights(cls, weights: list) -> "_AdamState":
        return cls(
            m=[np.zeros_like(w) for w in weights],
            v=[np.zeros_like(w) for w in weights],
        )

    def step(self, weights: list, grads: list, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for w, g, m, v in zip(weights, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            w -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def train(
    model: NetworkModel, dataset, config: TrainConfig
) -> tuple[NetworkModel, TrainHistory]:
    """Train a copy of the model on an encoded dataset.

    dataset must expose .inputs (n, n_steps, n_in) and .labels (n,).
    Per batch: draw one threshold, hard forward at that threshold,
    surrogate BPTT, Adam update with the scheduled learning rate.
    Separate generator streams for threshold draws and shuffling keep a
    degenerate continuous distribution byte-identical to a fixed one.
    """
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    labels = np.asarray(dataset.labels, dtype=np.intp)
    if len(inputs) == 0:
        raise ValueError("dataset is empty")
    if labels.min() < 0 or labels.max() >= model.n_out:
        raise ValueError(
            f"labels must lie in [0, {model.n_out}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )

    model = model.copy()
    model.train_dist = config.dist
    if config.drive_calibration:
        calibrate_drive(
            model,
            inputs,
            theta_ref=config.dist.theta_max,
            target_std=config.calibration_target_std,
            max_samples=config.calibration_samples,
        )
    rng_theta = np.random.default_rng([config.seed, 1])
    rng_shuffle = np.random.default_rng([config.seed, 2])
    adam = _AdamState.for_weights(model.weights)
    history = TrainHistory()

    step = 0
    for epoch in range(config.epochs):
        order = rng_shuffle.permutation(len(inputs))
        for batch_idx, start in enumerate(range(0, len(inputs), config.batch_size)):
            sel = order[start : start + config.batch_size]
            theta = sample_threshold(config.dist, rng_theta)
            lr = scheduler_lr(config, step)
            loss, grads, _ = loss_and_grads(
                model,
                inputs[sel],
                labels[sel],
                theta,
                surrogate_width=config.surrogate_width,
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch_idx, loss)
            adam.step(model.weights, grads, lr)
            history.records.append(BatchRecord(epoch, batch_idx, loss, lr, theta))
            step += 1
    return model, history
