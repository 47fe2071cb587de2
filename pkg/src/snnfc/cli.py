"""Command-line front end: prepare data, train, evaluate, simulate hardware, report.

Every command writes a JSON run manifest under ``<workdir>/manifests``
holding the resolved configuration, seeds, dataset hashes, metrics and
timings. ``snnfc rerun MANIFEST`` repeats a run and checks that its metrics
are bit-identical.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import hardware, uci
from .baseline import EPOCHS as LOGREG_EPOCHS, LR as LOGREG_LR, logreg_predict, logreg_train, LogRegModel
from .dataset import DataError, Dataset, FeatureSchema, dataset_manifest, one_hot_matrix, split
from .learning.model import TrainConfig, TrainedModel, TrainingError, load_model, save_model
from .learning.train import confusion, predict, train

log = logging.getLogger("snnfc")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3
RUNS_ENV = "SNNFC_RUNS"

# Per-system defaults; anything here can be overridden by a config file or flags.
PRESETS = {
    "1": {"kind": "stdp-sup", "epochs": 1},
    "2": {"kind": "prob-bp", "epochs": 40, "learning_rate": 0.02, "hidden_size": 64},
    "3": {"kind": "snu-bp", "epochs": 80, "learning_rate": 0.005, "hidden_size": 256},
    "logreg": {"kind": "logreg", "epochs": LOGREG_EPOCHS, "learning_rate": LOGREG_LR},
}


class UsageError(Exception):
    pass


class ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def artifact_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def workdir(args) -> Path:
    return Path(args.workdir or os.environ.get(RUNS_ENV, "runs"))


def write_manifest(args, command: str, body: dict) -> Path:
    """Store the manifest under a name derived from the command line."""
    argv = body["argv"]
    digest = hashlib.sha256(json.dumps(argv).encode()).hexdigest()[:12]
    path = workdir(args) / "manifests" / f"{command}-{digest}.json"
    dump_json(body, path)
    log.info("manifest written to %s", path)
    return path


def base_manifest(command: str, argv: list[str]) -> dict:
    return {"command": command, "argv": argv, "version": artifact_version(),
            "env": {uci.DATA_ENV: os.environ.get(uci.DATA_ENV)}}


# ---------------------------------------------------------------- datasets

def _cache_path(args, name: str, seed: int) -> Path:
    return workdir(args) / "prepared" / f"{name}-seed{seed}.npz"


def prepare_dataset(args, name: str, seed: int, train_fraction: float = 0.8) -> tuple[Dataset, dict]:
    uci.check_name(name)
    ds = uci.load(name, args.data_dir, seed=seed, train_fraction=train_fraction)
    info = dataset_manifest(ds, name)
    info["raw_sha256"] = uci.verify(name, args.data_dir)
    tr, te = split(ds)
    path = _cache_path(args, name, seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, values=ds.values, labels=ds.labels, train=tr, test=te,
             meta=np.frombuffer(json.dumps(info, sort_keys=True).encode(), dtype=np.uint8))
    return ds, info


def load_prepared(args, name: str, seed: int) -> tuple[Dataset, dict, np.ndarray, np.ndarray]:
    uci.check_name(name)
    path = _cache_path(args, name, seed)
    if not path.exists():
        log.info("no prepared copy of %s (seed %d); preparing it now", name, seed)
        prepare_dataset(args, name, seed)
    with np.load(path, allow_pickle=False) as z:
        info = json.loads(z["meta"].tobytes().decode())
        schema = FeatureSchema.from_dict(info["schema"])
        split_info = info["split"]
        ds = Dataset(schema, z["values"], z["labels"], split_seed=seed,
                     train_fraction=split_info["train_fraction"] or 0.8,
                     test_start=split_info["n_train"] if split_info["official"] else None)
        tr, te = z["train"], z["test"]
    return ds, info, tr, te


# ---------------------------------------------------------------- configs

def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, pairs: list[str]) -> dict:
    """Apply dotted ``key=value`` assignments, e.g. ``snu.pos_weight=5``."""
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        node = cfg
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_value(value)
    return cfg


def resolve_train_config(args) -> tuple[dict, TrainConfig]:
    """Merge preset, config file and flags (in that order) into a TrainConfig."""
    system = str(args.system)
    if system == "1":
        if args.target_seed is not None or args.spikes_per_neuron is not None:
            raise UsageError("system 1 decodes spike counts; target-pattern options do not apply")
        if args.layers not in (None, 1):
            raise UsageError("system 1 is a single STDP layer")
    elif args.mode is not None:
        raise UsageError("--mode only applies to system 1")
    if system == "logreg" and (args.layers or args.hidden or args.target_seed is not None):
        raise UsageError("the logistic-regression baseline has no layers or targets")

    preset = dict(PRESETS[system])
    file_cfg = load_config_file(args.config)
    hidden_size = file_cfg.pop("hidden_size", preset.pop("hidden_size", None))
    cfg = {**preset, **file_cfg}
    if system == "1":
        mode = args.mode or file_cfg.get("mode", "sup")
        cfg["kind"] = "stdp-unsup" if mode == "unsup" else "stdp-sup"
    cfg.pop("mode", None)
    if args.hidden is not None:
        hidden_size = args.hidden
    if system in ("2", "3") and ("hidden" not in file_cfg or args.layers or args.hidden):
        layers = args.layers if args.layers is not None else len(file_cfg.get("hidden", [0])) + 1
        if layers < 1:
            raise UsageError("--layers must be at least 1")
        cfg["hidden"] = [int(hidden_size)] * (layers - 1)
    for flag, key in (("epochs", "epochs"), ("lr", "learning_rate"),
                      ("batch_size", "batch_size"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            cfg[key] = v
    targets = cfg.setdefault("targets", {})
    if args.target_seed is not None:
        targets["seed"] = args.target_seed
    if args.spikes_per_neuron is not None:
        targets["spikes_per_neuron"] = args.spikes_per_neuron
    if args.neurons_per_class is not None:
        targets["neurons_per_class"] = args.neurons_per_class
    cfg = apply_overrides(cfg, args.set)
    try:
        return cfg, TrainConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


# ---------------------------------------------------------------- models

def train_logreg(ds: Dataset, tr, cfg: TrainConfig) -> TrainedModel:
    t0 = time.perf_counter()
    history: list[float] = []
    X = one_hot_matrix(ds.values[tr], ds.schema)
    m = logreg_train(X, ds.labels[tr], ds.schema.n_classes, l2=cfg.l2, epochs=cfg.epochs,
                     lr=cfg.learning_rate, seed=cfg.seed, history=history)
    manifest = {"loss_curve": history, "train_seconds": time.perf_counter() - t0}
    return TrainedModel("logreg", cfg, ds.schema.to_dict(), {}, {"W0": m.W, "b0": m.b},
                        {"argmax": True}, manifest)


def model_predict(model: TrainedModel, ds: Dataset, idx) -> np.ndarray:
    if model.kind == "logreg":
        lm = LogRegModel(model.arrays["W0"], model.arrays["b0"], model.config.l2)
        return logreg_predict(lm, one_hot_matrix(ds.values[idx], ds.schema))
    return predict(model, ds.values[idx])


def check_encoding(model: TrainedModel, ds: Dataset) -> None:
    if model.schema != ds.schema.to_dict():
        raise DataError("model and dataset encodings differ (encoding hash mismatch); "
                        "was the model trained on another dataset or split?")


def model_dataset(args, model: TrainedModel):
    seed = args.split_seed
    if seed is None:
        seed = model.manifest.get("split_seed", 0)
    ds, info, tr, te = load_prepared(args, args.dataset, seed)
    check_encoding(model, ds)
    return ds, info, tr, te


def _load_model(path) -> TrainedModel:
    try:
        return load_model(path)
    except FileNotFoundError as exc:
        raise DataError(f"model file not found: {path}") from exc


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- commands

def cmd_fetch(args) -> dict:
    uci.fetch(args.dataset, args.data_dir)
    return {"raw_sha256": uci.verify(args.dataset, args.data_dir)}


def cmd_prepare(args) -> dict:
    _, info = prepare_dataset(args, args.dataset, args.seed, args.train_fraction)
    s = info["split"]
    print(f"{args.dataset}: {info['n_records']} records, train {s['n_train']} / test {s['n_test']}"
          f" ({'official split' if s['official'] else 'seed ' + str(args.seed)})")
    print(f"train split {s['train_hash'][:16]}  test split {s['test_hash'][:16]}")
    return {"dataset": info, "seeds": {"split": s["seed"]},
            "cache": _cache_path(args, args.dataset, args.seed),
            "metrics": {"content_hash": info["content_hash"], "train_hash": s["train_hash"],
                        "test_hash": s["test_hash"]}}


def cmd_train(args) -> dict:
    cfg_dict, cfg = resolve_train_config(args)
    ds, info, tr, te = load_prepared(args, args.dataset, args.split_seed or 0)
    t0 = time.perf_counter()
    if cfg.kind == "logreg":
        model = train_logreg(ds, tr, cfg)
    else:
        model = train(ds.values[tr], ds.labels[tr], ds.schema, cfg)
    train_s = time.perf_counter() - t0
    model.manifest["split_seed"] = args.split_seed or 0
    model.manifest["dataset_content_hash"] = info["content_hash"]
    t1 = time.perf_counter()
    pred = model_predict(model, ds, te)
    acc = float(np.mean(pred == ds.labels[te]))
    cm = confusion(ds.labels[te], pred, ds.schema.n_classes)
    out = Path(args.out) if args.out else (
        workdir(args) / "models" / f"{args.dataset}-{cfg.kind}-{len(cfg.hidden) + 1}l-s{cfg.seed}.npz")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    print(f"{args.dataset} {cfg.kind} layers={len(cfg.hidden) + 1}: test accuracy {acc:.4f}"
          f" (train {train_s:.1f}s) -> {out}")
    return {
        "config": cfg.to_dict(), "config_input": cfg_dict, "dataset": info,
        "seeds": {"train": cfg.seed, "split": args.split_seed or 0, "targets": cfg.targets.seed},
        "model": {"path": out, "sha256": file_sha256(out), "kind": cfg.kind,
                  "encoding_hash": model.encoding_hash},
        "metrics": {"accuracy": acc, "confusion": cm,
                    "loss_curve": model.manifest.get("loss_curve")},
        "timings": {"train_seconds": train_s, "eval_seconds": time.perf_counter() - t1},
        "results": [{"dataset": args.dataset, "model": _label(model), "noise_scale": "",
                     "seed": cfg.seed, "accuracy": acc}],
    }


def _label(model: TrainedModel) -> str:
    n = len(model.layer_weights())
    return model.kind if model.kind.startswith(("stdp", "logreg")) else f"{model.kind}-{n}l"


def cmd_eval(args) -> dict:
    model = _load_model(args.model)
    ds, info, tr, te = model_dataset(args, model)
    idx = tr if args.on == "train" else te
    t0 = time.perf_counter()
    pred = model_predict(model, ds, idx)
    acc = float(np.mean(pred == ds.labels[idx]))
    cm = confusion(ds.labels[idx], pred, ds.schema.n_classes)
    print(f"{args.dataset} {_label(model)} on {args.on}: accuracy {acc:.4f}")
    print(format_confusion(cm, ds.schema.class_names))
    row = {"dataset": args.dataset, "model": _label(model), "noise_scale": "",
           "seed": model.config.seed, "accuracy": acc}
    return {"model": {"path": args.model, "sha256": file_sha256(args.model)}, "dataset": info,
            "seeds": {"split": model.manifest.get("split_seed", 0)},
            "metrics": {"accuracy": acc, "confusion": cm, "on": args.on},
            "timings": {"eval_seconds": time.perf_counter() - t0}, "results": [row]}


def _noise(args, scale: float, seed: int) -> hardware.NoiseModel:
    return hardware.NoiseModel(args.c0, args.c1, args.c2, scale, seed, hardware.G_MAX,
                               args.per_sample)


def _crossbar(args, model, ds, tr) -> hardware.CrossbarConfig:
    cfg = hardware.CrossbarConfig(adc_levels=None if args.ideal_adc else hardware.ADC_LEVELS,
                                  percentile=args.percentile)
    if not args.ideal_adc:
        cfg.output_scales = hardware.calibrate(model, ds.values[tr], args.percentile)
    return cfg


def _require_snu(model):
    if model.kind != "snu-bp":
        raise UsageError("hardware simulation needs a system 3 (snu-bp) model")


def cmd_hw_eval(args) -> dict:
    model = _load_model(args.model)
    _require_snu(model)
    ds, info, tr, te = model_dataset(args, model)
    t0 = time.perf_counter()
    xbar = _crossbar(args, model, ds, tr)
    noise = _noise(args, args.noise_scale, args.noise_seed)
    pred = hardware.hw_predict(model, ds.values[te], noise, xbar)
    acc = float(np.mean(pred == ds.labels[te]))
    print(f"{args.dataset} hardware noise x{args.noise_scale:g} seed {args.noise_seed}: "
          f"accuracy {acc:.4f}")
    row = {"dataset": args.dataset, "model": _label(model), "noise_scale": args.noise_scale,
           "seed": args.noise_seed, "accuracy": acc}
    return {"model": {"path": args.model, "sha256": file_sha256(args.model)}, "dataset": info,
            "noise": vars_of(noise), "crossbar": xbar.to_dict(),
            "seeds": {"noise": args.noise_seed},
            "metrics": {"accuracy": acc,
                        "confusion": confusion(ds.labels[te], pred, ds.schema.n_classes)},
            "timings": {"eval_seconds": time.perf_counter() - t0}, "results": [row]}


def vars_of(noise: hardware.NoiseModel) -> dict:
    from dataclasses import asdict
    return asdict(noise)


def cmd_sweep(args) -> dict:
    model = _load_model(args.model)
    _require_snu(model)
    ds, info, tr, te = model_dataset(args, model)
    t0 = time.perf_counter()
    xbar = _crossbar(args, model, ds, tr)
    rows = []
    for scale in args.scales:
        for seed in range(args.first_seed, args.first_seed + args.seeds):
            noise = _noise(args, scale, seed)
            acc = hardware.hw_evaluate(model, ds.values[te], ds.labels[te], noise, xbar)
            rows.append({"dataset": args.dataset, "model": _label(model),
                         "noise_scale": scale, "seed": seed, "accuracy": acc})
            log.info("noise x%g seed %d: %.4f", scale, seed, acc)
        mean = np.mean([r["accuracy"] for r in rows if r["noise_scale"] == scale])
        print(f"noise x{scale:g}: mean accuracy {mean:.4f} over {args.seeds} seeds")
    out = Path(args.csv) if args.csv else workdir(args) / "results" / f"sweep-{args.dataset}.csv"
    write_csv(rows, out)
    print(f"{len(rows)} rows -> {out}")
    return {"model": {"path": args.model, "sha256": file_sha256(args.model)}, "dataset": info,
            "noise": {**vars_of(_noise(args, 1.0, args.first_seed)), "scales": args.scales},
            "crossbar": xbar.to_dict(),
            "seeds": {"noise": list(range(args.first_seed, args.first_seed + args.seeds))},
            "metrics": {"rows": rows}, "csv": out,
            "timings": {"eval_seconds": time.perf_counter() - t0}, "results": rows}


CSV_FIELDS = ["dataset", "model", "noise_scale", "seed", "accuracy"]


def write_csv(rows, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in CSV_FIELDS})


def read_results(paths) -> list[dict]:
    rows = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise DataError(f"results file not found: {p}")
        if p.suffix == ".csv":
            with open(p, newline="") as fh:
                for r in csv.DictReader(fh):
                    r["accuracy"] = float(r["accuracy"])
                    rows.append(r)
        else:
            rows.extend(json.loads(p.read_text()).get("results", []))
    return rows


def render_tables(rows) -> tuple[str, str]:
    """Software accuracy per model and dataset, and mean hardware accuracy per
    noise scale, as aligned text and as CSV."""
    datasets = sorted({str(r["dataset"]) for r in rows})
    soft = [r for r in rows if r.get("noise_scale", "") in ("", None)]
    hw = [r for r in rows if r.get("noise_scale", "") not in ("", None)]
    text, buf = [], io.StringIO()
    w = csv.writer(buf)

    def table(title, labels, cell):
        width = max([len(title)] + [len(str(x)) for x in labels]) + 2
        text.append(title.ljust(width) + "".join(d.rjust(10) for d in datasets))
        w.writerow([title, *datasets])
        for lab in labels:
            cells = [cell(lab, d) for d in datasets]
            text.append(str(lab).ljust(width) + "".join(
                (f"{100 * c:.1f}%" if c is not None else "-").rjust(10) for c in cells))
            w.writerow([lab, *["" if c is None else f"{c:.4f}" for c in cells]])
        text.append("")

    def mean_of(sel):
        return float(np.mean([r["accuracy"] for r in sel])) if sel else None

    if soft:
        models = sorted({str(r["model"]) for r in soft})
        table("model", models, lambda m, d: mean_of(
            [r for r in soft if str(r["model"]) == m and str(r["dataset"]) == d]))
    if hw:
        scales = sorted({float(r["noise_scale"]) for r in hw})
        table("noise scale", [f"x{s:g}" for s in scales], lambda s, d: mean_of(
            [r for r in hw if f"x{float(r['noise_scale']):g}" == s and str(r["dataset"]) == d]))
    return "\n".join(text), buf.getvalue()


def cmd_report(args) -> dict:
    rows = read_results(args.results)
    if not rows:
        raise DataError("no result rows found")
    text, table_csv = render_tables(rows)
    print(text)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(table_csv)
    return {"inputs": [str(p) for p in args.results], "metrics": {"n_rows": len(rows)},
            "table_csv": table_csv}


def cmd_rerun(args) -> dict:
    path = Path(args.manifest)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    old = json.loads(path.read_text())
    argv = list(old["argv"])
    buf = io.StringIO()
    code, new = run(argv, stdout=buf)
    if code != EXIT_OK:
        raise TrainingError(f"replayed command failed with exit code {code}")
    same = json.dumps(old.get("metrics"), sort_keys=True, default=_json_default) == \
        json.dumps(new.get("metrics"), sort_keys=True, default=_json_default)
    print(f"replayed: {' '.join(argv)}")
    print("metrics identical" if same else "metrics DIFFER")
    if not same:
        raise TrainingError("replayed run did not reproduce the stored metrics")
    return {"replayed": str(path), "metrics": {"identical": same}}


def format_confusion(cm, names) -> str:
    width = max(len(n) for n in names) + 2
    lines = ["true \\ pred".ljust(width) + "".join(n[:8].rjust(9) for n in names)]
    for n, row in zip(names, cm):
        lines.append(n.ljust(width) + "".join(str(int(v)).rjust(9) for v in row))
    return "\n".join(lines)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = ArgParser(prog="snnfc", description="Spiking-network file classifiers on key-value data.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--data-dir", help=f"raw data directory (default ${uci.DATA_ENV} or ./data)")
    p.add_argument("--workdir", help=f"output root (default ${RUNS_ENV} or ./runs)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=ArgParser)

    s = sub.add_parser("fetch", help="download raw UCI files and verify checksums")
    s.add_argument("dataset")
    s.set_defaults(func=cmd_fetch)

    s = sub.add_parser("prepare", help="load, encode and split a dataset")
    s.add_argument("dataset")
    s.add_argument("--seed", type=int, default=0, help="split seed (ignored for adult)")
    s.add_argument("--train-fraction", type=float, default=0.8)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="train a system 1/2/3 network or the logreg baseline")
    s.add_argument("dataset")
    s.add_argument("--system", choices=["1", "2", "3", "logreg"], required=True)
    s.add_argument("--mode", choices=["sup", "unsup"], help="STDP mode (system 1)")
    s.add_argument("--layers", type=int, help="number of weight layers (systems 2 and 3)")
    s.add_argument("--hidden", type=int, help="neurons per hidden layer")
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--seed", type=int, help="training seed")
    s.add_argument("--split-seed", type=int, help="dataset split seed (default 0)")
    s.add_argument("--target-seed", type=int)
    s.add_argument("--spikes-per-neuron", type=int)
    s.add_argument("--neurons-per-class", type=int)
    s.add_argument("--config", help="JSON config file; flags override its values")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. snu.pos_weight=5")
    s.add_argument("--out", help="model file path")
    s.set_defaults(func=cmd_train)

    def model_args(s):
        s.add_argument("model")
        s.add_argument("dataset")
        s.add_argument("--split-seed", type=int, help="defaults to the seed stored in the model")

    s = sub.add_parser("eval", help="evaluate a stored model")
    model_args(s)
    s.add_argument("--on", choices=["test", "train"], default="test")
    s.set_defaults(func=cmd_eval)

    def hw_args(s):
        s.add_argument("--c0", type=float, default=0.3)
        s.add_argument("--c1", type=float, default=0.05)
        s.add_argument("--c2", type=float, default=-0.0008)
        s.add_argument("--per-sample", action="store_true",
                       help="resample device noise for every record")
        s.add_argument("--ideal-adc", action="store_true", help="skip output quantisation")
        s.add_argument("--percentile", type=float, default=99.9,
                       help="calibration percentile of |pre-activation|")

    s = sub.add_parser("hw-eval", help="evaluate a system 3 model on simulated crossbars")
    model_args(s)
    hw_args(s)
    s.add_argument("--noise-scale", type=float, default=1.0)
    s.add_argument("--noise-seed", type=int, default=0)
    s.set_defaults(func=cmd_hw_eval)

    s = sub.add_parser("sweep-noise", help="hardware accuracy over noise scales and seeds")
    model_args(s)
    hw_args(s)
    s.add_argument("--scales", type=float, nargs="+", default=[0.0, 1.0, 5.0, 10.0])
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--csv", help="output CSV path")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="render result CSV/JSON files as tables")
    s.add_argument("results", nargs="+")
    s.add_argument("--csv", help="also write the tables as CSV")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("rerun", help="replay a manifest and check metrics are identical")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_rerun)
    return p


def run(argv: list[str], stdout=None) -> tuple[int, dict]:
    """Parse and execute; returns (exit code, manifest)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), {}
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    old_stdout = sys.stdout
    if stdout is not None:
        sys.stdout = stdout
    t0 = time.perf_counter()
    try:
        body = args.func(args)
    except UsageError as exc:
        print(f"snnfc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, {}
    except (DataError, OSError) as exc:
        print(f"snnfc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA, {}
    except (TrainingError, FloatingPointError) as exc:
        print(f"snnfc: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAIN, {}
    except hardware.UncalibratedError as exc:
        print(f"snnfc: {exc}", file=sys.stderr)
        return EXIT_DATA, {}
    finally:
        sys.stdout = old_stdout
    manifest = {**base_manifest(args.command, argv), **body}
    manifest.setdefault("timings", {})["wall_seconds"] = time.perf_counter() - t0
    if args.command != "rerun":
        write_manifest(args, args.command, manifest)
    return EXIT_OK, json.loads(json.dumps(manifest, default=_json_default))


def main(argv=None) -> int:
    code, _ = run(sys.argv[1:] if argv is None else list(argv))
    return code


if __name__ == "__main__":
    sys.exit(main())
