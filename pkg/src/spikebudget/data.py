"""Dataset ingestion and persistence.

Covers the raw-inertial-signal flavor of UCI-HAR style datasets
(per-axis text files, 128 samples per row at 50 Hz, parallel label
file), a seeded synthetic generator whose classes are separable by
frequency-band energy, and versioned, checksummed archives for both raw
windows and encoded spike rasters.
"""

from __future__ import annotations

import hashlib
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .encoder import DEFAULT_BAND_EDGES

__all__ = [
    "LabeledWindow",
    "WindowDataset",
    "EncodedDataset",
    "SyntheticSpec",
    "make_synthetic",
    "load_ucihar_raw",
    "save_dataset",
    "load_dataset",
    "save_rasters",
    "load_rasters",
]

_DATASET_MAGIC = "spikebudget-dataset v1"
_RASTERS_MAGIC = "spikebudget-rasters v1"

UCIHAR_SAMPLE_RATE_HZ = 50.0
_UCIHAR_AXES = ("x", "y", "z")


@dataclass(frozen=True)
class LabeledWindow:
    """One fixed-length 3-axis IMU window (accelerometer units: gravities)."""

    imu: np.ndarray  # (n_samples, 3)
    label: int


@dataclass
class WindowDataset:
    """Stack of same-shape labeled windows at a common sample rate."""

    imu: np.ndarray  # (n_windows, n_samples, 3)
    labels: np.ndarray  # (n_windows,)
    sample_rate_hz: float

    def __post_init__(self):
        self.imu = np.asarray(self.imu, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.imu.ndim != 3 or self.imu.shape[2] != 3:
            raise ValueError(f"imu must be (n, t, 3), got {self.imu.shape}")
        if len(self.labels) != len(self.imu):
            raise ValueError("labels and windows disagree in count")

    def __len__(self) -> int:
        return len(self.imu)

    def window(self, i: int) -> LabeledWindow:
        return LabeledWindow(imu=self.imu[i], label=int(self.labels[i]))

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


@dataclass
class EncodedDataset:
    """Spike rasters ready for the network: (n, n_steps, n_channels)."""

    inputs: np.ndarray
    labels: np.ndarray
    dt_ms: float

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.inputs.ndim != 3:
            raise ValueError(f"inputs must be (n, t, c), got {self.inputs.shape}")
        if len(self.labels) != len(self.inputs):
            raise ValueError("labels and rasters disagree in count")

    def __len__(self) -> int:
        return len(self.inputs)


def _band_of(freq_hz: float) -> int:
    for i, (lo, hi) in enumerate(DEFAULT_BAND_EDGES):
        if lo <= freq_hz < hi:
            return i
    return -1


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for HAR data; geometry mirrors UCI-HAR.

    Each class is a sinusoid at its own frequency, scaled per axis by
    axis_amplitudes, with random phase, mild amplitude jitter, and
    additive gaussian noise.  Class frequencies must land in distinct
    encoder bands so band energy separates the classes by construction.
    """

    n_classes: int = 3
    windows_per_class: int = 20
    window_len_steps: int = 128
    sample_rate_hz: float = 50.0
    class_freqs_hz: tuple = (3.0, 6.0, 12.0)
    axis_amplitudes: tuple = (1.0, 0.7, 0.5)
    amplitude_jitter: float = 0.2
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError("n_classes must be >= 1")
        if len(self.class_freqs_hz) < self.n_classes:
            raise ValueError("need one frequency per class")
        if self.windows_per_class < 0:
            raise ValueError("windows_per_class must be >= 0")
        if self.window_len_steps < 1 or self.sample_rate_hz <= 0:
            raise ValueError("invalid window geometry")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        bands = [_band_of(f) for f in self.class_freqs_hz[: self.n_classes]]
        if -1 in bands or len(set(bands)) != len(bands):
            raise ValueError(
                "class frequencies must fall in distinct encoder bands, got "
                f"{self.class_freqs_hz[: self.n_classes]}"
            )


def make_synthetic(spec: SyntheticSpec) -> WindowDataset:
    """Generate the synthetic dataset; fully reproducible from spec.seed."""
    if spec.windows_per_class == 0:
        warnings.warn("windows_per_class is 0: returning an empty dataset")
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.window_len_steps) / spec.sample_rate_hz
    windows = []
    labels = []
    for cls in range(spec.n_classes):
        freq = spec.class_freqs_hz[cls]
        for _ in range(spec.windows_per_class):
            w = np.empty((spec.window_len_steps, 3))
            scale = 1.0 + spec.amplitude_jitter * (2.0 * rng.random() - 1.0)
            for axis in range(3):
                phase = rng.uniform(0.0, 2.0 * np.pi)
                w[:, axis] = (
                    spec.axis_amplitudes[axis]
                    * scale
                    * np.sin(2.0 * np.pi * freq * t + phase)
                )
            if spec.noise_std > 0:
                w += rng.normal(0.0, spec.noise_std, size=w.shape)
            windows.append(w)
            labels.append(cls)
    imu = np.stack(windows) if windows else np.empty((0, spec.window_len_steps, 3))
    return WindowDataset(imu=imu, labels=np.array(labels, dtype=np.intp), sample_rate_hz=spec.sample_rate_hz)


def _read_signal_file(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ValueError(f"missing file: {path}")
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                values = [float(tok) for tok in tokens]
            except ValueError as exc:
                raise ValueError(f"{path} line {lineno}: non-numeric token ({exc})") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path} line {lineno}: expected {width} values, got {len(values)}"
                )
            if not all(np.isfinite(values)):
                raise ValueError(f"{path} line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def load_ucihar_raw(dir_path: str) -> WindowDataset:
    """Load a raw-inertial-signals split directory (train/ or test/).

    Expects y_<split>.txt beside an "Inertial Signals" directory holding
    total_acc_{x,y,z}_<split>.txt.  Accelerometer channels only; labels
    are shifted from 1-based to 0-based.  Ordering follows the files.
    """
    if not os.path.isdir(dir_path):
        raise ValueError(f"not a directory: {dir_path}")
    label_files = sorted(
        f for f in os.listdir(dir_path) if f.startswith("y_") and f.endswith(".txt")
    )
    if not label_files:
        raise ValueError(f"{dir_path}: no y_<split>.txt label file found")
    label_path = os.path.join(dir_path, label_files[0])
    split = label_files[0][len("y_") : -len(".txt")]

    raw_labels = []
    with open(label_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                raw_labels.append(int(float(tok)))
            except ValueError:
                raise ValueError(f"{label_path} line {lineno}: non-numeric label {tok!r}") from None
    if not raw_labels:
        raise ValueError(f"{label_path}: empty label file")

    signals_dir = os.path.join(dir_path, "Inertial Signals")
    axes = []
    for axis in _UCIHAR_AXES:
        path = os.path.join(signals_dir, f"total_acc_{axis}_{split}.txt")
        axes.append(_read_signal_file(path))
    n_rows = {a.shape[0] for a in axes}
    if len(n_rows) != 1:
        raise ValueError(
            f"{signals_dir}: axis files disagree in row count: "
            + ", ".join(str(a.shape[0]) for a in axes)
        )
    if axes[0].shape[0] != len(raw_labels):
        raise ValueError(
            f"{dir_path}: {axes[0].shape[0]} signal rows but {len(raw_labels)} labels"
        )
    imu = np.stack(axes, axis=2)
    labels = np.asarray(raw_labels, dtype=np.intp) - 1
    if labels.min() < 0:
        raise ValueError(f"{label_path}: labels must be 1-based positive integers")
    return WindowDataset(imu=imu, labels=labels, sample_rate_hz=UCIHAR_SAMPLE_RATE_HZ)


def _checksum(body: str) -> str:
    return hashlib.sha256(body.encode()).hexdigest()


def _write_checksummed(path, magic: str, header_lines: list, body: str) -> None:
    head = "\n".join([magic, *header_lines, f"body_sha256 {_checksum(body)}"])
    with open(path, "w") as fh:
        fh.write(head + "\n" + body)


def _read_checksummed(path, magic: str, n_header: int):
    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or lines[0] != magic:
        raise ValueError(f"{path}: expected header {magic!r}")
    header = lines[1 : 1 + n_header]
    if len(header) != n_header or not lines[1 + n_header].startswith("body_sha256 "):
        raise ValueError(f"{path}: malformed header")
    recorded = lines[1 + n_header].split()[1]
    body = "\n".join(lines[2 + n_header :])
    if _checksum(body) != recorded:
        raise ValueError(f"{path}: checksum mismatch (file corrupt or truncated)")
    return header, body


def save_dataset(ds: WindowDataset, path) -> None:
    """Versioned text archive; save -> load -> save is byte-identical."""
    n, t, _ = ds.imu.shape
    rows = []
    for i in range(n):
        rows.append(f"label {int(ds.labels[i])}")
        for sample in ds.imu[i]:
            rows.append(" ".join(repr(float(v)) for v in sample))
    body = "\n".join(rows) + ("\n" if rows else "")
    _write_checksummed(
        path,
        _DATASET_MAGIC,
        [
            f"sample_rate_hz {ds.sample_rate_hz!r}",
            f"n_windows {n}",
            f"window_len {t}",
            "n_channels 3",
        ],
        body,
    )


def load_dataset(path) -> WindowDataset:
    header, body = _read_checksummed(path, _DATASET_MAGIC, 4)
    meta = dict(line.split(" ", 1) for line in header)
    n = int(meta["n_windows"])
    t = int(meta["window_len"])
    lines = body.split("\n")
    imu = np.empty((n, t, 3))
    labels = np.empty(n, dtype=np.intp)
    pos = 0
    for i in range(n):
        if pos >= len(lines) or not lines[pos].startswith("label "):
            raise ValueError(f"{path}: truncated at window {i} (line offset {pos})")
        labels[i] = int(lines[pos].split()[1])
        pos += 1
        for s in range(t):
            if pos >= len(lines):
                raise ValueError(f"{path}: truncated at window {i} sample {s} (line offset {pos})")
            vals = lines[pos].split()
            if len(vals) != 3:
                raise ValueError(f"{path}: expected 3 values at line offset {pos}")
            imu[i, s] = [float(v) for v in vals]
            pos += 1
    return WindowDataset(imu=imu, labels=labels, sample_rate_hz=float(meta["sample_rate_hz"]))


def save_rasters(ds: EncodedDataset, path) -> None:
    """Raster archive: per-raster event list in the encoder's text format."""
    n, steps, channels = ds.inputs.shape
    rows = []
    for i in range(n):
        ts, cs = np.nonzero(ds.inputs[i])
        rows.append(f"raster {i} label {int(ds.labels[i])} events {len(ts)}")
        rows.extend(f"{t} {c}" for t, c in zip(ts, cs))
    body = "\n".join(rows) + ("\n" if rows else "")
    _write_checksummed(
        path,
        _RASTERS_MAGIC,
        [
            f"dt_ms {ds.dt_ms!r}",
            f"n_rasters {n}",
            f"n_steps {steps}",
            f"n_channels {channels}",
        ],
        body,
    )


def load_rasters(path) -> EncodedDataset:
    header, body = _read_checksummed(path, _RASTERS_MAGIC, 4)
    meta = dict(line.split(" ", 1) for line in header)
    n = int(meta["n_rasters"])
    steps = int(meta["n_steps"])
    channels = int(meta["n_channels"])
    inputs = np.zeros((n, steps, channels), dtype=np.uint8)
    labels = np.empty(n, dtype=np.intp)
    lines = body.split("\n")
    pos = 0
    for i in range(n):
        if pos >= len(lines) or not lines[pos].startswith("raster "):
            raise ValueError(f"{path}: truncated at raster {i} (line offset {pos})")
        tokens = lines[pos].split()
        if len(tokens) != 6 or tokens[2] != "label" or tokens[4] != "events":
            raise ValueError(f"{path}: malformed raster header at line offset {pos}")
        labels[i] = int(tokens[3])
        n_events = int(tokens[5])
        pos += 1
        for _ in range(n_events):
            if pos >= len(lines) or not lines[pos]:
                raise ValueError(f"{path}: truncated events in raster {i} (line offset {pos})")
            t, c = lines[pos].split()
            inputs[i, int(t), int(c)] = 1
            pos += 1
    return EncodedDataset(inputs=inputs, labels=labels, dt_ms=float(meta["dt_ms"]))
