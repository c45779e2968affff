"""Command line front end: dataset generation, training, evaluation,
alpha sweeps and attention-trace export.

Configs are flat JSON objects; `--set key=value` overrides individual
entries (values parsed as JSON, bare words kept as strings). Every
subcommand writes a config echo into the output directory before doing any
real work, so a crashed run still documents what it was asked to do.

Exit codes: 0 ok, 1 config/usage error, 2 data or artifact error,
3 numeric failure during optimization.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from .data import BagFileError, SynthConfig, generate, load_bags, save_bags, split
from .model import ModelParams, forward
from .training import (
    DivergenceError,
    TrainConfig,
    evaluate,
    summarize_sweep,
    sweep,
    train,
)

CHECKPOINT_FORMAT = "smoothmil-checkpoint-v1"
METRIC_KEYS = ("acc", "pre", "rec", "f1")


class ConfigError(Exception):
    """Bad config file, unknown key, or invalid invocation."""


class DataError(Exception):
    """Dataset present but unusable (empty, ragged, wrong width)."""


class CheckpointError(Exception):
    """Missing or malformed checkpoint artifact."""


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: config must be a JSON object, got {type(cfg).__name__}")
    return cfg


def _apply_overrides(cfg: dict, overrides: list[str]) -> None:
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare words stay strings
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not a nested object")
        node[parts[-1]] = value


def _build_config(cls, cfg: dict, what: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} key(s): {', '.join(unknown)} "
                          f"(allowed: {', '.join(sorted(allowed))})")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}") from None


def _write_echo(outdir: Path, command: str, config: dict, **extras) -> None:
    echo = {"command": command, "config": config}
    echo.update({k: v for k, v in extras.items() if v is not None})
    _write_json(outdir / "config_echo.json", echo)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


# ---------------------------------------------------------------------------
# datasets and checkpoints


def _load_dataset(path: str) -> list:
    try:
        bags = load_bags(path)
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from None
    if not bags:
        raise DataError(f"{path}: dataset contains no bags")
    widths = {bag.features.shape[1] for bag in bags}
    if len(widths) > 1:
        raise DataError(f"{path}: bags disagree on feature dimension ({sorted(widths)})")
    return bags


def _check_width(bags: list, params: ModelParams, path: str) -> None:
    width = bags[0].features.shape[1]
    if width != params.input_dim:
        raise DataError(f"{path}: feature dimension {width} does not match "
                        f"checkpoint input dimension {params.input_dim}")


def save_checkpoint(path, params: ModelParams, cfg: TrainConfig) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "train_config": dataclasses.asdict(cfg),
        "input_dim": params.input_dim,
        "params": {
            name: {"shape": list(t.shape), "data": t.data.reshape(-1).tolist()}
            for name, t in params.named().items()
        },
    }
    _write_json(Path(path), payload)


@dataclasses.dataclass
class Checkpoint:
    params: ModelParams
    train_config: TrainConfig


def load_checkpoint(path) -> Checkpoint:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: invalid JSON ({e.msg})") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    try:
        cfg = _build_config(TrainConfig, payload["train_config"], "checkpoint train config")
        mcfg = cfg.model_config(input_dim=int(payload["input_dim"]))
        stored = payload["params"]
        params = ModelParams.init(mcfg, seed=0)
        expected = params.named()
        if set(stored) != set(expected):
            raise CheckpointError(f"{path}: parameter names do not match the architecture "
                                  f"described by its train config")
        for name, tensor in expected.items():
            entry = stored[name]
            arr = np.asarray(entry["data"], dtype=np.float64).reshape(tuple(entry["shape"]))
            if arr.shape != tensor.shape:
                raise CheckpointError(f"{path}: parameter {name} has shape {arr.shape}, "
                                      f"expected {tensor.shape}")
            tensor.data = arr
    except ConfigError as e:
        raise CheckpointError(f"{path}: {e}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: malformed checkpoint ({e})") from None
    return Checkpoint(params=params, train_config=cfg)


# ---------------------------------------------------------------------------
# metric tables


def _metric_cell(metrics: dict, key: str) -> str:
    value = metrics.get(key)
    return "" if value is None else f"{value:.6f}"


def _write_metrics_csv(path: Path, scan: dict | None, slice_: dict | None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "acc", "pre", "rec", "f1", "auc"])
        for level, metrics in (("scan", scan), ("slice", slice_)):
            if metrics is None:
                if level == "slice":
                    _warn("no instance labels in dataset; slice-level row omitted")
                continue
            if metrics.get("auc") is None:
                _warn(f"{level}-level AUC undefined (single class); cell left empty")
            writer.writerow([level] + [_metric_cell(metrics, k) for k in METRIC_KEYS]
                            + [_metric_cell(metrics, "auc")])


def _print_metrics(label: str, metrics: dict | None) -> None:
    if metrics is None:
        return
    cells = ", ".join(f"{k}={metrics[k]:.4f}" for k in METRIC_KEYS)
    aucv = metrics.get("auc")
    cells += ", auc=n/a" if aucv is None else f", auc={aucv:.4f}"
    print(f"{label}: {cells}")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args) -> int:
    cfg_dict = _load_config(args.config)
    _apply_overrides(cfg_dict, args.overrides)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = _build_config(SynthConfig, cfg_dict, "dataset config")
    outdir = _outdir(args)
    _write_echo(outdir, "gen-data", dataclasses.asdict(cfg))
    bags = generate(cfg)
    path = outdir / "bags.jsonl"
    save_bags(bags, path)
    sizes = [bag.n for bag in bags]
    positives = sum(bag.label for bag in bags)
    print(f"wrote {len(bags)} bags to {path} "
          f"({positives} positive, fraction {positives / len(bags):.2f}, "
          f"sizes {min(sizes)}-{max(sizes)})")
    return 0


def _cmd_train(args) -> int:
    if args.checkpoint is not None:
        raise ConfigError("resuming from a checkpoint is not supported; "
                          "train starts fresh (use --checkpoint only with eval/export-attention)")
    cfg_dict = _load_config(args.config)
    _apply_overrides(cfg_dict, args.overrides)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = _build_config(TrainConfig, cfg_dict, "train config")
    outdir = _outdir(args)
    _write_echo(outdir, "train", dataclasses.asdict(cfg), data=args.data)

    bags = _load_dataset(args.data)
    splits = split(bags, cfg.split_fractions, seed=np.random.SeedSequence([cfg.seed, 2]))
    started = time.perf_counter()
    params, report = train(splits, cfg)
    save_checkpoint(outdir / "checkpoint.json", params, cfg)
    _write_json(outdir / "report.json", report.to_dict())
    if report.scan_metrics is None:
        _warn("empty test split; metrics.csv not written")
    else:
        _write_metrics_csv(outdir / "metrics.csv", report.scan_metrics, report.slice_metrics)

    print(f"model: {report.model_tag}")
    print(f"best epoch {report.best_epoch}, stopped at epoch {report.stopped_epoch} "
          f"(val loss {min(report.val_losses):.6f})")
    _print_metrics("test scan ", report.scan_metrics)
    _print_metrics("test slice", report.slice_metrics)
    print(f"done in {time.perf_counter() - started:.1f}s; artifacts in {outdir}")
    return 0


def _cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    outdir = _outdir(args)
    _write_echo(outdir, "eval", dataclasses.asdict(ckpt.train_config),
                data=args.data, checkpoint=str(args.checkpoint))
    bags = _load_dataset(args.data)
    _check_width(bags, ckpt.params, args.data)
    result = evaluate(ckpt.params, bags, pooling=ckpt.train_config.pooling,
                      threshold=ckpt.train_config.bag_threshold)
    _write_metrics_csv(outdir / "metrics.csv", result.scan_metrics, result.slice_metrics)
    _print_metrics("scan ", result.scan_metrics)
    _print_metrics("slice", result.slice_metrics)
    print(f"evaluated {len(bags)} bags; metrics in {outdir / 'metrics.csv'}")
    return 0


DEFAULT_SWEEP = {"alphas": [0.0, 0.5], "modes": ["s1"], "repeats": 1}


def _cmd_sweep(args) -> int:
    cfg_dict = _load_config(args.config)
    _apply_overrides(cfg_dict, args.overrides)
    grid = {key: cfg_dict.pop(key, default) for key, default in DEFAULT_SWEEP.items()}
    master_seed = int(cfg_dict.pop("master_seed", 0))
    if args.seed is not None:
        master_seed = args.seed
    if not isinstance(grid["alphas"], (list, tuple)) or not grid["alphas"]:
        raise ConfigError("sweep config: alphas must be a non-empty list")
    if not isinstance(grid["modes"], (list, tuple)) or not grid["modes"]:
        raise ConfigError("sweep config: modes must be a non-empty list")
    repeats = int(grid["repeats"])
    base = _build_config(TrainConfig, cfg_dict, "train config")
    outdir = _outdir(args)
    _write_echo(outdir, "sweep", dataclasses.asdict(base),
                data=args.data, alphas=list(grid["alphas"]), modes=list(grid["modes"]),
                repeats=repeats, master_seed=master_seed, parallel=args.parallel)

    bags = _load_dataset(args.data)
    splits = split(bags, base.split_fractions, seed=np.random.SeedSequence([master_seed, 2]))
    try:
        rows = sweep(splits, base, alphas=grid["alphas"], modes=grid["modes"],
                     repeats=repeats, master_seed=master_seed, parallel=args.parallel)
    except ValueError as e:
        raise ConfigError(str(e)) from None

    with open(outdir / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "alpha", "repeat", "level", "acc", "pre", "rec", "f1", "auc"])
        for row in rows:
            writer.writerow([row["mode"], repr(float(row["alpha"])), row["repeat"], row["level"]]
                            + [_metric_cell(row, k) for k in (*METRIC_KEYS, "auc")])

    summary = summarize_sweep(rows)
    with open(outdir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["mode", "alpha", "level", "repeats"]
        for key in (*METRIC_KEYS, "auc"):
            header += [f"{key}_mean", f"{key}_sd"]
        writer.writerow(header)
        for entry in summary:
            cells = [entry["mode"], repr(float(entry["alpha"])), entry["level"], entry["repeats"]]
            for key in (*METRIC_KEYS, "auc"):
                cells += [_metric_cell(entry, f"{key}_mean"), _metric_cell(entry, f"{key}_sd")]
            writer.writerow(cells)

    print(f"swept {len(grid['modes'])} mode(s) x {len(grid['alphas'])} alpha(s) "
          f"x {repeats} repeat(s): {len(rows)} rows in {outdir / 'sweep.csv'}")
    return 0


def _cmd_export_attention(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.train_config.pooling != "attention":
        raise ConfigError(f"checkpoint uses {ckpt.train_config.pooling!r} pooling; "
                          "there are no attention values to export")
    outdir = _outdir(args)
    _write_echo(outdir, "export-attention", dataclasses.asdict(ckpt.train_config),
                data=args.data, checkpoint=str(args.checkpoint))
    bags = _load_dataset(args.data)
    _check_width(bags, ckpt.params, args.data)

    for bag in bags:
        fw = forward(bag.features, ckpt.params, "attention")
        name = re.sub(r"[^A-Za-z0-9_-]", "_", bag.bag_id)
        with open(outdir / f"trace_{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["index", "f", "s", "threshold"]
            if bag.instance_labels is not None:
                header.append("instance_truth")
            writer.writerow(header)
            threshold = repr(1.0 / bag.n)
            for i in range(bag.n):
                row = [i, repr(float(fw.f.data[i])), repr(float(fw.s.data[i])), threshold]
                if bag.instance_labels is not None:
                    row.append(int(bag.instance_labels[i]))
                writer.writerow(row)
    print(f"exported {len(bags)} attention traces to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; remap to 1 so exit code
    2 stays reserved for data problems."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}") from None

    def exit(self, status=0, message=None):
        if message:
            print(message, file=sys.stderr, end="")
        raise SystemExit(1 if status else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothmil",
                     description="attention MIL with smoothed attention values")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(p, *, config=False, data=False, checkpoint=False, seed=False, parallel=False):
        if config:
            p.add_argument("--config", help="JSON config file")
            p.add_argument("--set", action="append", default=[], dest="overrides",
                           metavar="KEY=VALUE", help="override one config entry")
        if data:
            p.add_argument("--data", required=True, help="JSON Lines bag file")
        if checkpoint:
            p.add_argument("--checkpoint", required=checkpoint == "required",
                           help="checkpoint JSON file")
        p.add_argument("--out", required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")
        if parallel:
            p.add_argument("--parallel", type=int, default=1, metavar="N",
                           help="number of concurrent training runs")

    p = sub.add_parser("gen-data", help="generate a synthetic bag dataset")
    common(p, config=True, seed=True)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train one model and save its artifacts")
    common(p, config=True, data=True, checkpoint=True, seed=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p, data=True, checkpoint="required")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="train a grid of modes and alphas")
    common(p, config=True, data=True, seed=True, parallel=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export-attention", help="write per-bag attention traces as CSV")
    common(p, data=True, checkpoint="required")
    p.set_defaults(func=_cmd_export_attention)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        if isinstance(e.code, str):
            print(e.code, file=sys.stderr)
            return 1
        return int(e.code or 0)
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (BagFileError, DataError, CheckpointError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
