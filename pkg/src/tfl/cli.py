"""Command-line pipeline: synth / stats / augment / train / transfer /
evaluate / report.

Every option can come from a key=value config file (``--config``); explicit
flags override the file, which overrides built-in defaults.  The fully
resolved configuration is echoed into the output directory so any run can
be reproduced with ``--config <echo file>``.  ``TFL_SEED`` serves as the
seed fallback when neither flag nor file provides one.

Exit codes: 0 ok, 1 usage or config contradiction, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import evaluation as ev
from . import model_io, network, training, wavelet
from .errors import DataError, NumericError, UsageError
from .numeric import Rng

_FMT = "%.15g"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Opt:
    name: str           # underscore form; the CLI flag is --name-with-dashes
    typ: object         # str -> value parser
    default: object
    help: str = ""


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _paths(text: str) -> list[str]:
    return [p for p in text.split(",") if p]


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def load_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}: line {lineno}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    return values


def write_config_echo(cfg: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{key}={_fmt_value(value)}"
        for key, value in sorted(cfg.items())
        if value is not None
    ]
    path.write_text("\n".join(lines) + "\n")


def _resolve(args: argparse.Namespace, opts: list[Opt]) -> dict:
    file_values = load_config_file(args.config) if args.config else {}
    resolved = {}
    for opt in opts:
        flag_value = getattr(args, opt.name)
        if flag_value is not None:
            resolved[opt.name] = flag_value
        elif opt.name in file_values:
            resolved[opt.name] = opt.typ(file_values[opt.name])
        elif opt.name == "seed" and "TFL_SEED" in os.environ:
            resolved[opt.name] = int(os.environ["TFL_SEED"])
        else:
            resolved[opt.name] = opt.default
    return resolved


def _register(sub: argparse.ArgumentParser, opts: list[Opt]) -> None:
    sub.add_argument("--config", help="key=value config file; flags override it")
    for opt in opts:
        flag = "--" + opt.name.replace("_", "-")
        if opt.typ is _bool:
            sub.add_argument(flag, action=argparse.BooleanOptionalAction,
                             default=None, help=opt.help)
        else:
            sub.add_argument(flag, type=opt.typ, default=None, help=opt.help)


def _require(cfg: dict, *names: str) -> None:
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(
            "--" + n.replace("_", "-") for n in missing))


_MODEL_OPTS = [
    Opt("n_past", int, 12, "input window length"),
    Opt("n_future", int, 6, "forecast horizon"),
    Opt("hidden", int, 100, "LSTM hidden units"),
    Opt("attention", _bool, False, "use the attention decoder"),
]

_TRAIN_COMMON = [
    Opt("batch", int, 32, "minibatch size"),
    Opt("seed", int, 42, "run seed (TFL_SEED env is the fallback)"),
    Opt("split", float, 0.8, "chronological train fraction"),
    Opt("delta", float, 1.0, "Huber transition point"),
]

SYNTH_OPTS = [
    Opt("out", str, None, "output CSV path"),
    Opt("length", int, 20000, "number of 5-minute samples"),
    Opt("base_bps", float, 5e8, "traffic level"),
    Opt("daily_amp", float, 0.0, "daily sinusoid amplitude"),
    Opt("weekly_amp", float, 0.0, "weekly sinusoid amplitude"),
    Opt("trend_per_day", float, 0.0, "linear trend per day"),
    Opt("noise_std", float, 0.0, "Gaussian noise level"),
    Opt("seed", int, 42, "generator seed"),
]

STATS_OPTS = [
    Opt("data", str, None, "input CSV"),
    Opt("out", str, None, "optional stats CSV"),
]

AUGMENT_OPTS = [
    Opt("data", str, None, "input CSV"),
    Opt("out_dir", str, None, "directory for augmented copies"),
    Opt("copies", int, 3, "number of perturbed variants"),
    Opt("wavelet", str, "db4", "filter: haar or db4"),
    Opt("levels", int, 3, "decomposition depth"),
    Opt("factor_lo", float, 0.5, "low end of the perturbation range"),
    Opt("factor_hi", float, 1.5, "high end of the perturbation range"),
    Opt("per_band", _bool, False, "one factor per band instead of per coefficient"),
    Opt("seed", int, 42, "perturbation seed"),
]

TRAIN_OPTS = _MODEL_OPTS + _TRAIN_COMMON + [
    Opt("data", str, None, "training CSV"),
    Opt("out", str, None, "model file to write"),
    Opt("out_dir", str, None, "artifact directory (default: model's directory)"),
    Opt("epochs", int, 100, "training epochs"),
    Opt("lr", float, 0.001, "Adam learning rate"),
]

TRANSFER_OPTS = _TRAIN_COMMON + [
    Opt("source_model", str, None, "trained source-domain model file"),
    Opt("data", str, None, "target-domain CSV"),
    Opt("out", str, None, "adapted model file to write"),
    Opt("out_dir", str, None, "artifact directory (default: model's directory)"),
    Opt("phase1_lr", float, training.DEFAULT_PHASE1_LR, "frozen-body phase rate"),
    Opt("phase1_epochs", int, 50, "frozen-body phase epochs"),
    Opt("phase2_lr", float, training.DEFAULT_PHASE2_LR, "fine-tune phase rate"),
    Opt("phase2_epochs", int, 50, "fine-tune phase epochs"),
    Opt("augment_copies", int, 0, "expand the target training series with N wavelet variants"),
    Opt("wavelet", str, "db4", "augmentation filter"),
    Opt("levels", int, 3, "augmentation decomposition depth"),
    Opt("factor_lo", float, 0.5, "low end of the perturbation range"),
    Opt("factor_hi", float, 1.5, "high end of the perturbation range"),
]

EVALUATE_OPTS = [
    Opt("model", _paths, None, "model file(s), comma-separated for several"),
    Opt("data", str, None, "evaluation CSV"),
    Opt("out_dir", str, None, "directory for metric tables"),
    Opt("split", float, 0.8, "chronological split; the test side is evaluated"),
    Opt("horizons", str, "6,9,12", "accepted forecast horizons"),
    Opt("jobs", int, 1, "parallel model evaluations"),
]

REPORT_OPTS = [
    Opt("before", str, None, "metrics CSV before the change"),
    Opt("after", str, None, "metrics CSV after the change"),
    Opt("out_dir", str, None, "directory for improvement/summary tables"),
]


def _load_series(path) -> ds.TimeSeries:
    series, gaps = ds.load_csv(path)
    if gaps:
        print(f"note: {path}: filled {gaps} missing sample(s) by interpolation",
              file=sys.stderr)
    return series


def _windows_for(series_values, scaler, n_past, n_future) -> ds.WindowedDataset:
    return ds.make_windows(ds.scale(series_values, scaler), n_past, n_future)


def cmd_synth(cfg: dict) -> int:
    _require(cfg, "out")
    profile = ds.SynthProfile(
        base_bps=cfg["base_bps"], daily_amp=cfg["daily_amp"],
        weekly_amp=cfg["weekly_amp"], trend_per_day=cfg["trend_per_day"],
        noise_std=cfg["noise_std"], seed=cfg["seed"],
    )
    series = ds.synth(profile, cfg["length"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.write_csv(series, out)
    write_config_echo(cfg, out.parent / "synth_config.txt")
    print(f"wrote {len(series)} samples to {out}")
    return 0


def cmd_stats(cfg: dict) -> int:
    _require(cfg, "data")
    series = _load_series(cfg["data"])
    stats = ds.summary_stats(series)
    skew = "undefined" if stats.skewness is None else _FMT % stats.skewness
    print(f"points={len(series)}")
    print(f"mean={_FMT % stats.mean}")
    print(f"std={_FMT % stats.std}")
    print(f"var={_FMT % stats.var}")
    print(f"skewness={skew}")
    if cfg["out"]:
        out = Path(cfg["out"])
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w") as fh:
            fh.write("mean,std,var,skewness\n")
            fh.write(f"{_FMT % stats.mean},{_FMT % stats.std},"
                     f"{_FMT % stats.var},{skew}\n")
        write_config_echo(cfg, out.parent / "stats_config.txt")
    return 0


def _augment_config(cfg: dict) -> wavelet.AugmentConfig:
    return wavelet.AugmentConfig(
        filter=wavelet.get_filter(cfg["wavelet"]),
        levels=cfg["levels"],
        factor_range=(cfg["factor_lo"], cfg["factor_hi"]),
        seed=cfg["seed"],
        per_band=cfg.get("per_band", False),
    )


def cmd_augment(cfg: dict) -> int:
    _require(cfg, "data", "out_dir")
    series = _load_series(cfg["data"])
    corpus = wavelet.expand_dataset(series, _augment_config(cfg), cfg["copies"])
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = []
    for k, entry in enumerate(corpus):
        name = "original.csv" if k == 0 else f"augmented_{k:03d}.csv"
        ds.write_csv(entry.series, out_dir / name)
        provenance.append({"file": name, **entry.provenance})
    (out_dir / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    write_config_echo(cfg, out_dir / "augment_config.txt")
    print(f"wrote {len(corpus)} series to {out_dir}")
    return 0


def _write_history(path: Path, rows: list[tuple]) -> None:
    with open(path, "w") as fh:
        fh.write("phase,epoch,lr,loss\n")
        for phase, epoch, lr, loss in rows:
            fh.write(f"{phase},{epoch},{repr(lr)},{_FMT % loss}\n")


def cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "out")
    series = _load_series(cfg["data"])
    mc = network.ModelConfig(
        n_past=cfg["n_past"], n_future=cfg["n_future"],
        hidden=cfg["hidden"], attention=cfg["attention"],
    )
    min_points = mc.n_past + mc.n_future
    train_series, _ = ds.split(series, cfg["split"], min_points=min_points)
    scaler = ds.fit_scaler(train_series.values)
    windows = _windows_for(train_series.values, scaler, mc.n_past, mc.n_future)

    model = network.init(mc, Rng(cfg["seed"]))
    tc = training.TrainConfig(epochs=cfg["epochs"], batch=cfg["batch"],
                              lr=cfg["lr"], seed=cfg["seed"])
    model, history = training.train(model, windows, tc,
                                    training.HuberConfig(cfg["delta"]))

    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    provenance = {
        "seed": cfg["seed"], "epochs": cfg["epochs"], "lr": cfg["lr"],
        "batch": cfg["batch"], "split": cfg["split"],
        "data_sha256": model_io.file_sha256(cfg["data"]),
        "parent_sha256": None,
    }
    model_io.save_model(model, scaler, provenance, out)
    out_dir = Path(cfg["out_dir"]) if cfg["out_dir"] else out.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_history(out_dir / "loss_history.csv",
                   [("train", e + 1, cfg["lr"], v) for e, v in enumerate(history)])
    write_config_echo(cfg, out_dir / "train_config.txt")
    print(f"trained {cfg['epochs']} epochs; final loss {history[-1]:.6g}; model at {out}")
    return 0


def cmd_transfer(cfg: dict) -> int:
    _require(cfg, "source_model", "data", "out")
    source, _, _ = model_io.load_model(cfg["source_model"])
    mc = source.config
    series = _load_series(cfg["data"])
    min_points = mc.n_past + mc.n_future
    train_series, _ = ds.split(series, cfg["split"], min_points=min_points)
    scaler = ds.fit_scaler(train_series.values)

    if cfg["augment_copies"] > 0:
        acfg = _augment_config(cfg)
        corpus = wavelet.expand_dataset(train_series, acfg, cfg["augment_copies"])
        windows = ds.concat_windows([
            _windows_for(entry.series.values, scaler, mc.n_past, mc.n_future)
            for entry in corpus
        ])
    else:
        windows = _windows_for(train_series.values, scaler, mc.n_past, mc.n_future)

    cfg1 = training.TrainConfig(epochs=cfg["phase1_epochs"], batch=cfg["batch"],
                                lr=cfg["phase1_lr"], seed=cfg["seed"])
    cfg2 = training.TrainConfig(epochs=cfg["phase2_epochs"], batch=cfg["batch"],
                                lr=cfg["phase2_lr"], seed=cfg["seed"])
    result = training.transfer(source, windows, cfg1, cfg2,
                               training.HuberConfig(cfg["delta"]))

    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    provenance = {
        "seed": cfg["seed"],
        "epochs": cfg["phase1_epochs"] + cfg["phase2_epochs"],
        "phase_lrs": [cfg["phase1_lr"], cfg["phase2_lr"]],
        "augment_copies": cfg["augment_copies"],
        "split": cfg["split"],
        "data_sha256": model_io.file_sha256(cfg["data"]),
        "parent_sha256": model_io.file_sha256(cfg["source_model"]),
    }
    model_io.save_model(result.model, scaler, provenance, out)
    out_dir = Path(cfg["out_dir"]) if cfg["out_dir"] else out.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for phase in result.phases:
        rows.extend((phase.name, e + 1, phase.lr, v) for e, v in enumerate(phase.history))
    _write_history(out_dir / "transfer_history.csv", rows)
    write_config_echo(cfg, out_dir / "transfer_config.txt")
    print(f"adapted model at {out} "
          f"(phases: {', '.join(f'{p.name}@{p.lr}' for p in result.phases)})")
    return 0


def _evaluate_one(model_path: str, series: ds.TimeSeries, split_ratio: float) -> dict[str, ev.MetricsTable]:
    model, scaler, _ = model_io.load_model(model_path)
    if scaler is None:
        raise DataError(f"{model_path}: model file carries no scaler; cannot evaluate")
    mc = model.config
    _, test_series = ds.split(series, split_ratio, min_points=mc.n_past + mc.n_future)
    test_windows = _windows_for(test_series.values, scaler, mc.n_past, mc.n_future)
    preds_scaled = network.predict_batch(model, test_windows.inputs)
    stem = Path(model_path).stem
    return {
        f"metrics_{stem}_scaled": ev.per_step_table(preds_scaled, test_windows.targets),
        f"metrics_{stem}_raw": ev.per_step_table(
            ds.inverse_scale(preds_scaled, scaler),
            ds.inverse_scale(test_windows.targets, scaler),
        ),
    }


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "model", "data", "out_dir")
    horizons = {int(h) for h in cfg["horizons"].split(",") if h}
    series = _load_series(cfg["data"])
    for path in cfg["model"]:
        model, _, _ = model_io.load_model(path)
        if model.config.n_future not in horizons:
            raise UsageError(
                f"{path}: model horizon {model.config.n_future} not in "
                f"accepted horizons {sorted(horizons)}"
            )
    tables: dict[str, ev.MetricsTable] = {}
    if cfg["jobs"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["jobs"]) as pool:
            futures = [pool.submit(_evaluate_one, p, series, cfg["split"])
                       for p in cfg["model"]]
            for future in futures:  # submission order keeps output deterministic
                tables.update(future.result())
    else:
        for path in cfg["model"]:
            tables.update(_evaluate_one(path, series, cfg["split"]))
    out_dir = Path(cfg["out_dir"])
    ev.emit_report(tables, None, out_dir)
    write_config_echo(cfg, out_dir / "evaluate_config.txt")
    for name, table in sorted(tables.items()):
        if name.endswith("_scaled"):
            print(f"{name}: average WAPE {table.average.wape:.4f}%")
    return 0


def cmd_report(cfg: dict) -> int:
    _require(cfg, "before", "after", "out_dir")
    before = ev.parse_metrics_csv(cfg["before"])
    after = ev.parse_metrics_csv(cfg["after"])
    stats = ev.improvements(before, after)
    out_dir = Path(cfg["out_dir"])
    ev.emit_report({}, stats, out_dir)
    write_config_echo(cfg, out_dir / "report_config.txt")
    print(f"average WAPE improvement {np.mean(stats.deltas):.4f} pp; "
          f"IQR {stats.iqr:.4f}; outliers {len(stats.outliers)}")
    return 0


_COMMANDS = {
    "synth": (SYNTH_OPTS, cmd_synth, "generate a synthetic traffic CSV"),
    "stats": (STATS_OPTS, cmd_stats, "summary statistics of a series"),
    "augment": (AUGMENT_OPTS, cmd_augment, "expand a series with wavelet-perturbed copies"),
    "train": (TRAIN_OPTS, cmd_train, "train a forecaster from scratch"),
    "transfer": (TRANSFER_OPTS, cmd_transfer, "adapt a trained model to new data"),
    "evaluate": (EVALUATE_OPTS, cmd_evaluate, "per-step metric tables on held-out data"),
    "report": (REPORT_OPTS, cmd_report, "improvement deltas and IQR/outlier summary"),
}


def build_parser() -> _Parser:
    parser = _Parser(prog="tfl", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    for name, (opts, _, help_text) in _COMMANDS.items():
        sub = subs.add_parser(name, help=help_text)
        _register(sub, opts)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts, handler, _ = _COMMANDS[args.command]
        cfg = _resolve(args, opts)
        return handler(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
