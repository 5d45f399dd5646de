"""Command-line pipeline: encode, train, sweep, pareto, select, energy, report.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.  All
failures print a single "error: ..." line on stderr.  Settings merge as
defaults < config file section < SPIKEBUDGET_OUT (output dir only) <
flags, and every writing subcommand snapshots its effective config to
the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, data, encoder, network, pareto, trainer

OUT_ENV_VAR = "SPIKEBUDGET_OUT"


class UsageError(Exception):
    pass


_DEFAULTS = {
    "encode": {
        "ucihar": None,
        "synthetic": False,
        "classes": 3,
        "windows_per_class": 20,
        "window_len": 128,
        "sample_rate": 50.0,
        "class_freqs": "3,6,12",
        "noise_std": 0.0,
        "amplitude_jitter": 0.2,
        "seed": 0,
        "filter_order": 4,
        "iaf_threshold": encoder.DEFAULT_IAF_THRESHOLD,
        "dt": 1.0,
        "save_windows": False,
        "out": None,
    },
    "train": {
        "data": None,
        "dist": "fixed",
        "theta_min": 1.0,
        "theta_max": 1.0,
        "theta_step": 0.1,
        "lr": 1e-3,
        "epochs": 50,
        "batch_size": 32,
        "scheduler": "constant",
        "t0": 10,
        "t_mult": 2,
        "seed": 0,
        "surrogate_width": 1.0,
        "tau_config": "2,4,8",
        "n_out": None,
        "model_id": "model",
        "out": None,
    },
    "sweep": {
        "model": None,
        "data": None,
        "grid": "0.6:2.4:0.2",
        "model_id": None,
        "baseline_theta": 1.0,
        "threads": 1,
        "out": None,
    },
    "pareto": {"sweeps": None, "out": None},
    "select": {
        "front": None,
        "spike_cap": None,
        "energy_cap": None,
        "e_spike": pareto.DEFAULT_E_SPIKE_J,
        "p_idle": pareto.DEFAULT_P_IDLE_W,
        "window": pareto.DEFAULT_WINDOW_S,
    },
    "energy": {
        "capacity_mah": None,
        "voltage_v": None,
        "avg_power_w": None,
        "spikes": None,
        "e_spike": pareto.DEFAULT_E_SPIKE_J,
        "p_idle": pareto.DEFAULT_P_IDLE_W,
        "window": pareto.DEFAULT_WINDOW_S,
    },
    "report": {"sweeps": None, "front": None, "history": None, "out": None},
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikebudget",
        description="Energy-aware spiking network training and threshold-modulated inference.",
    )
    parser.add_argument("--config", help="JSON config file with per-subcommand sections")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = {"argument_default": argparse.SUPPRESS}

    p = sub.add_parser("encode", help="encode IMU windows into spike rasters", **kw)
    p.add_argument("--ucihar", help="raw-inertial-signals split directory")
    p.add_argument("--synthetic", action="store_true", help="generate the synthetic dataset")
    p.add_argument("--classes", type=int)
    p.add_argument("--windows-per-class", type=int)
    p.add_argument("--window-len", type=int)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--class-freqs", help="comma-separated Hz, one per class")
    p.add_argument("--noise-std", type=float)
    p.add_argument("--amplitude-jitter", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--filter-order", type=int)
    p.add_argument("--iaf-threshold", type=float)
    p.add_argument("--dt", type=float, help="raster/network time step in ms")
    p.add_argument("--save-windows", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("train", help="train a model on encoded rasters", **kw)
    p.add_argument("--data", help="raster archive from encode")
    p.add_argument("--dist", choices=["fixed", "continuous", "discrete"])
    p.add_argument("--theta-min", type=float)
    p.add_argument("--theta-max", type=float)
    p.add_argument("--theta-step", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--scheduler", choices=["constant", "cosine_warm_restarts"])
    p.add_argument("--t0", type=int)
    p.add_argument("--t-mult", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--surrogate-width", type=float)
    p.add_argument("--tau-config", help="comma-separated tau counts per hidden layer")
    p.add_argument("--n-out", type=int, help="class count; default inferred from labels")
    p.add_argument("--model-id")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="evaluate a model across a threshold grid", **kw)
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--grid", help="start:stop:step")
    p.add_argument("--model-id")
    p.add_argument("--baseline-theta", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")

    p = sub.add_parser("pareto", help="build the global Pareto front from sweeps", **kw)
    p.add_argument("--sweeps", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("select", help="pick the best feasible operating point", **kw)
    p.add_argument("--front")
    p.add_argument("--spike-cap", type=float)
    p.add_argument("--energy-cap", type=float, help="joules per inference window")
    p.add_argument("--e-spike", type=float)
    p.add_argument("--p-idle", type=float)
    p.add_argument("--window", type=float)

    p = sub.add_parser("energy", help="power and battery-life arithmetic", **kw)
    p.add_argument("capacity_mah", type=float, nargs="?", default=None)
    p.add_argument("voltage_v", type=float, nargs="?", default=None)
    p.add_argument("avg_power_w", type=float, nargs="?", default=None)
    p.add_argument("--spikes", type=float, help="mean spikes per window; derives power")
    p.add_argument("--e-spike", type=float)
    p.add_argument("--p-idle", type=float)
    p.add_argument("--window", type=float)

    p = sub.add_parser("report", help="render figures from sweep/front CSVs", **kw)
    p.add_argument("--sweeps", nargs="+")
    p.add_argument("--front")
    p.add_argument("--history")
    p.add_argument("--out")

    return parser


def _effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS[args.command])
    config_path = getattr(args, "config", None)
    if config_path:
        if not os.path.isfile(config_path):
            raise UsageError(f"config file not found: {config_path}")
        with open(config_path) as fh:
            try:
                loaded = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {config_path}: invalid JSON ({exc})")
        section = loaded.get(args.command, {})
        for key, value in section.items():
            norm = key.replace("-", "_")
            if norm not in cfg:
                raise UsageError(f"config file {config_path}: unknown key {key!r} for {args.command}")
            cfg[norm] = value
    if "out" in cfg and os.environ.get(OUT_ENV_VAR):
        cfg["out"] = os.environ[OUT_ENV_VAR]
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    return cfg


def _require_out(cfg: dict) -> str:
    out = cfg.get("out")
    if not out:
        raise UsageError(f"no output directory: pass --out or set {OUT_ENV_VAR}")
    os.makedirs(out, exist_ok=True)
    return out


def _snapshot(cfg: dict, command: str, out: str) -> None:
    payload = {"command": command, **cfg}
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_file(path, what: str) -> str:
    if not path:
        raise UsageError(f"missing required input: {what}")
    if not os.path.exists(path):
        raise UsageError(f"{what} not found: {path}")
    return path


def _parse_floats(text: str, field: str) -> tuple:
    try:
        return tuple(float(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(f"{field}: expected comma-separated numbers, got {text!r}")


def _parse_grid(text: str) -> np.ndarray:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid: expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"grid: non-numeric component in {text!r}")
    if step <= 0:
        raise UsageError(f"grid: step must be > 0, got {step}")
    if stop < start:
        raise UsageError(f"grid: stop ({stop}) below start ({start})")
    n = int(round((stop - start) / step)) + 1
    grid = np.round(start + step * np.arange(n), 10)
    return grid[grid <= stop + 1e-9]


def _cmd_encode(cfg: dict) -> int:
    out = _require_out(cfg)
    if bool(cfg["ucihar"]) == bool(cfg["synthetic"]):
        raise UsageError("pick exactly one input: --ucihar DIR or --synthetic")
    if cfg["synthetic"]:
        freqs = _parse_floats(cfg["class_freqs"], "class_freqs")
        spec = data.SyntheticSpec(
            n_classes=cfg["classes"],
            windows_per_class=cfg["windows_per_class"],
            window_len_steps=cfg["window_len"],
            sample_rate_hz=cfg["sample_rate"],
            class_freqs_hz=freqs,
            noise_std=cfg["noise_std"],
            amplitude_jitter=cfg["amplitude_jitter"],
            seed=cfg["seed"],
        )
        windows = data.make_synthetic(spec)
    else:
        windows = data.load_ucihar_raw(_require_file(cfg["ucihar"], "ucihar directory"))

    bank_spec = encoder.FilterBankSpec.default(
        windows.sample_rate_hz, filter_order=cfg["filter_order"]
    )
    iaf = encoder.IafParams(threshold=cfg["iaf_threshold"], dt_ms=cfg["dt"])
    encoded = data.EncodedDataset(
        inputs=encoder.encode_dataset(windows.imu, bank_spec, iaf),
        labels=windows.labels,
        dt_ms=cfg["dt"],
    )
    data.save_rasters(encoded, os.path.join(out, "rasters.txt"))
    if cfg["save_windows"]:
        data.save_dataset(windows, os.path.join(out, "dataset.txt"))
    bank = encoder.design_filterbank(bank_spec)
    cfg["clipped_bands"] = {str(k): list(v) for k, v in bank.clipped_bands.items()}
    _snapshot(cfg, "encode", out)
    print(f"wrote {len(encoded)} rasters to {os.path.join(out, 'rasters.txt')}")
    return 0


def _make_dist(cfg: dict) -> trainer.ThresholdDistribution:
    tmin, tmax = cfg["theta_min"], cfg["theta_max"]
    if tmin > tmax:
        raise UsageError(f"theta_min ({tmin}) exceeds theta_max ({tmax})")
    kind = cfg["dist"]
    if kind == "fixed":
        if tmin != tmax:
            raise UsageError("theta_min: fixed dist requires theta_min == theta_max")
        return trainer.ThresholdDistribution.fixed(tmin)
    if kind == "continuous":
        return trainer.ThresholdDistribution.continuous(tmin, tmax)
    return trainer.ThresholdDistribution.discrete(tmin, tmax, step=cfg["theta_step"])


def _cmd_train(cfg: dict) -> int:
    out = _require_out(cfg)
    dataset = data.load_rasters(_require_file(cfg["data"], "raster archive"))
    dist = _make_dist(cfg)
    n_out = cfg["n_out"] if cfg["n_out"] else int(dataset.labels.max()) + 1
    tau_config = tuple(int(v) for v in _parse_floats(cfg["tau_config"], "tau_config"))
    model = network.build_network(
        n_in=dataset.inputs.shape[2],
        hidden_sizes=network.SYNNET_HIDDEN_SIZES,
        n_out=n_out,
        tau_config=tau_config,
        rng_seed=cfg["seed"],
        dt_ms=dataset.dt_ms,
    )
    config = trainer.TrainConfig(
        dist=dist,
        epochs=cfg["epochs"],
        lr=cfg["lr"],
        batch_size=cfg["batch_size"],
        scheduler=cfg["scheduler"],
        t0=cfg["t0"],
        t_mult=cfg["t_mult"],
        seed=cfg["seed"],
        surrogate_width=cfg["surrogate_width"],
    )
    trained, history = trainer.train(model, dataset, config)
    network.save_model(trained, os.path.join(out, "model.txt"))
    history.write_csv(os.path.join(out, "history.csv"))
    _snapshot(cfg, "train", out)
    print(
        f"trained {cfg['model_id']} for {cfg['epochs']} epochs "
        f"({len(history.records)} steps); final loss {history.records[-1].loss:.6f}"
    )
    return 0


def _cmd_sweep(cfg: dict) -> int:
    out = _require_out(cfg)
    model_path = _require_file(cfg["model"], "model file")
    dataset = data.load_rasters(_require_file(cfg["data"], "raster archive"))
    model = network.load_model(model_path)
    grid = _parse_grid(cfg["grid"])
    model_id = cfg["model_id"] or os.path.splitext(os.path.basename(model_path))[0]
    curve = analysis.sweep(
        model, dataset, grid, model_id=model_id, threads=cfg["threads"]
    )
    try:
        baseline = curve.point_at(cfg["baseline_theta"])
    except KeyError:
        baseline = None
    analysis.write_sweep_csv(
        curve,
        os.path.join(out, "sweep.csv"),
        baseline=baseline,
        model_file=cfg["model"],
    )
    _snapshot(cfg, "sweep", out)
    print(f"wrote {len(curve.points)} operating points to {os.path.join(out, 'sweep.csv')}")
    return 0


def _cmd_pareto(cfg: dict) -> int:
    out = _require_out(cfg)
    if not cfg["sweeps"]:
        raise UsageError("missing required input: sweep CSVs")
    curves = []
    model_files = {}
    for path in cfg["sweeps"]:
        curve, _, model_file = analysis.read_sweep_csv(_require_file(path, "sweep CSV"))
        curves.append(curve)
        model_files[curve.model_id] = model_file if model_file else "-"
    front = pareto.build_front(curves)
    pareto.write_front_csv(front, os.path.join(out, "front.csv"))
    pareto.write_manifest(model_files, os.path.join(out, "manifest.txt"))
    _snapshot(cfg, "pareto", out)
    print(f"front has {len(front.entries)} entries from {len(curves)} curves")
    return 0


def _energy_model(cfg: dict) -> pareto.EnergyModel:
    return pareto.EnergyModel(
        e_spike_j=cfg["e_spike"], p_idle_w=cfg["p_idle"], window_s=cfg["window"]
    )


def _cmd_select(cfg: dict) -> int:
    front = pareto.read_front_csv(_require_file(cfg["front"], "front CSV"))
    if (cfg["spike_cap"] is None) == (cfg["energy_cap"] is None):
        raise UsageError("pick exactly one budget: --spike-cap or --energy-cap")
    if cfg["spike_cap"] is not None:
        budget = pareto.Budget("spike_cap", cfg["spike_cap"])
    else:
        budget = pareto.Budget("energy_cap", cfg["energy_cap"])
    choice = pareto.select_multi(front, budget, _energy_model(cfg))
    if choice is None:
        print("INFEASIBLE")
    else:
        print(f"{choice.model_id} {choice.theta!r} {choice.accuracy!r} {choice.mean_spikes!r}")
    return 0


def _cmd_energy(cfg: dict) -> int:
    if cfg["spikes"] is not None:
        power = pareto.spikes_to_power(cfg["spikes"], _energy_model(cfg))
    elif cfg["avg_power_w"] is not None:
        power = cfg["avg_power_w"]
    else:
        raise UsageError("missing power: pass avg_power_w or --spikes")
    print(f"avg_power_w {power!r}")
    if cfg["capacity_mah"] is not None:
        if cfg["voltage_v"] is None:
            raise UsageError("voltage_v required alongside capacity_mah")
        days = pareto.battery_days(cfg["capacity_mah"], cfg["voltage_v"], power)
        print(f"battery_days {days!r}")
    return 0


def _cmd_report(cfg: dict) -> int:
    from . import report

    out = _require_out(cfg)
    if not cfg["sweeps"]:
        raise UsageError("missing required input: sweep CSVs")
    curves = []
    for path in cfg["sweeps"]:
        curve, _, _ = analysis.read_sweep_csv(_require_file(path, "sweep CSV"))
        curves.append(curve)
    written = [report.plot_sweeps(curves, os.path.join(out, "sweeps.png"))]
    if cfg["front"]:
        front = pareto.read_front_csv(_require_file(cfg["front"], "front CSV"))
        written.append(report.plot_front(curves, front, os.path.join(out, "front.png")))
    if cfg["history"]:
        records = _read_history(_require_file(cfg["history"], "history CSV"))
        written.append(report.plot_history(records, os.path.join(out, "history.png")))

    merged = os.path.join(out, "report.csv")
    with open(merged, "w") as fh:
        fh.write("model_id,theta,accuracy,mean_spikes\n")
        for curve in curves:
            for p in curve.points:
                fh.write(f"{curve.model_id},{p.theta!r},{p.accuracy!r},{p.mean_spikes!r}\n")
    written.append(merged)
    _snapshot(cfg, "report", out)
    print("wrote " + ", ".join(written))
    return 0


def _read_history(path):
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            if not line.strip():
                continue
            vals = dict(zip(header, line.strip().split(",")))
            records.append(
                trainer.BatchRecord(
                    epoch=int(vals["epoch"]),
                    batch=int(vals["batch"]),
                    loss=float(vals["loss"]),
                    lr=float(vals["lr"]),
                    theta=float(vals["theta_sampled"]),
                )
            )
    return records


_HANDLERS = {
    "encode": _cmd_encode,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "pareto": _cmd_pareto,
    "select": _cmd_select,
    "energy": _cmd_energy,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line diagnostics by contract
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
