"""Command-line front door for reproducible experiment runs.

Subcommands: synth, train, grid-search, evaluate, ablate, importance.
Every run writes its artifacts plus one manifest.json into --out. Artifacts
are byte-identical across reruns of the same inputs and seed; timestamps and
wall-clock timings live only in the manifest. Command-line flags override
config-file keys; the manifest records the merged result.

Exit codes: 0 success, 2 usage/config/data error, 3 numerical failure.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .data import parse_csv, split_train_test, validation_split, write_csv
from .errors import (
    ConfigError,
    IngestionError,
    ProtocolError,
    TrainingDivergedError,
    UnknownGradeError,
    UnknownStudentError,
)
from .evaluation import (
    ablation_suite,
    importance_by_partition,
    metrics,
    score_dataset,
    split_rows,
    export_predictions,
)
from .models import HyperParams, ModelSpec, load_params, save_params
from .synth import SynthConfig, generate_synthetic
from .training import TrainConfig, grid_search, train

_HYPER_INTS = ("k", "max_iter")
_HYPER_FLOATS = ("decay", "gamma", "alpha1", "alpha2", "eta")


def read_config(path):
    """Flat ``key = value`` text; '#' starts a comment, blank lines ignored."""
    cfg = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _as_bool(raw):
    if str(raw).lower() in ("1", "true", "yes", "on"):
        return True
    if str(raw).lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _coerce(key, raw):
    if key in _HYPER_INTS:
        return int(raw)
    if key in _HYPER_FLOATS:
        return float(raw)
    return raw


def build_hyper(cfg_file, args):
    values = {}
    for key in _HYPER_INTS + _HYPER_FLOATS:
        if key in cfg_file:
            values[key] = _coerce(key, cfg_file[key])
        cli = getattr(args, key, None)
        if cli is not None:
            values[key] = cli
    return HyperParams(**values)


def build_spec(cfg_file, args):
    values = {}
    for key in ("variant", "student_group", "course_group", "ck_normalization"):
        if key in cfg_file:
            values[key] = cfg_file[key]
    for key in ("use_academic_level", "use_instructor", "use_global"):
        if key in cfg_file:
            values[key] = _as_bool(cfg_file[key])
    if getattr(args, "variant", None) is not None:
        values["variant"] = args.variant
    if getattr(args, "student_group", None) is not None:
        values["student_group"] = args.student_group.replace("-", "_")
    if getattr(args, "course_group", None) is not None:
        values["course_group"] = args.course_group.replace("-", "_")
    if getattr(args, "ck_normalization", None) is not None:
        values["ck_normalization"] = args.ck_normalization
    if getattr(args, "no_academic_level", False):
        values["use_academic_level"] = False
    if getattr(args, "no_instructor", False):
        values["use_instructor"] = False
    if getattr(args, "no_global", False):
        values["use_global"] = False
    return ModelSpec(**values)


def build_train_config(cfg_file, args, hyper):
    values = {"hyper": hyper}
    if "l1_mode" in cfg_file:
        values["l1_mode"] = cfg_file["l1_mode"]
    if "stop_metric" in cfg_file:
        values["stop_metric"] = cfg_file["stop_metric"]
    if "shuffle" in cfg_file:
        values["shuffle"] = _as_bool(cfg_file["shuffle"])
    if "seed" in cfg_file:
        values["seed"] = int(cfg_file["seed"])
    if getattr(args, "l1_mode", None) is not None:
        values["l1_mode"] = args.l1_mode.replace("-", "_")
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return TrainConfig(**values)


def build_synth_config(cfg_file):
    values = {}
    fields = SynthConfig.__dataclass_fields__
    for key, raw in cfg_file.items():
        if key == "seed" or key.startswith("grid."):
            continue
        if key not in fields:
            raise ConfigError(f"unknown synthetic-data config key {key!r}")
        ftype = fields[key].type
        if ftype is int or ftype == "int":
            values[key] = int(raw)
        elif ftype is float or ftype == "float":
            values[key] = float(raw)
        else:
            values[key] = raw
    return SynthConfig(**values)


def build_grids(cfg_file):
    grids = {}
    for key, raw in cfg_file.items():
        if not key.startswith("grid."):
            continue
        name = key[len("grid."):]
        vals = [v.strip() for v in raw.split(",") if v.strip()]
        grids[name] = [_coerce(name, v) for v in vals]
    return grids


def _sha256(path):
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def write_manifest(out_dir, command, merged_config, inputs, outputs, seed, timing=None):
    manifest = {
        "command": command,
        "config": _json_ready(merged_config),
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
        "seed": seed,
        "timing": _json_ready(timing or {}),
        "version": __version__,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_json(path, payload):
    Path(path).write_text(
        json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args):
    return read_config(args.config) if getattr(args, "config", None) else {}


def _seed(args, cfg_file):
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in cfg_file:
        return int(cfg_file["seed"])
    return 0


def cmd_synth(args):
    cfg_file = _load_config(args)
    cfg = build_synth_config(cfg_file)
    seed = _seed(args, cfg_file)
    out = _out_dir(args)

    t0 = time.perf_counter()
    dataset, planted = generate_synthetic(cfg, seed)
    write_csv(dataset, out / "data.csv")
    save_params(planted, out / "planted_params.txt")
    write_manifest(
        out,
        "synth",
        {**asdict(cfg), "seed": seed},
        [args.config] if args.config else [],
        ["data.csv", "planted_params.txt"],
        seed,
        {"seconds": time.perf_counter() - t0},
    )
    print(f"wrote {len(dataset)} records across {len(dataset.terms())} terms to {out}")
    return 0


def _prepare(args, cfg_file):
    dataset = parse_csv(args.data)
    train_part, test_part = split_train_test(dataset, args.test_term)
    hyper = build_hyper(cfg_file, args)
    spec = build_spec(cfg_file, args)
    cfg = build_train_config(cfg_file, args, hyper)
    return dataset, train_part, test_part, spec, cfg


def _merged_config(spec, cfg, extra=None):
    merged = {**asdict(spec), **asdict(cfg.hyper)}
    merged.update(
        l1_mode=cfg.l1_mode,
        shuffle=cfg.shuffle,
        seed=cfg.seed,
        stop_metric=cfg.stop_metric,
    )
    merged.update(extra or {})
    return merged


def _write_train_log(path, report):
    lines = []
    for i in range(report.epochs_run):
        parts = [f"epoch={i + 1}", f"loss={report.loss[i]!r}",
                 f"train_mae={report.train_mae[i]!r}"]
        if report.val_mae:
            parts.append(f"val_mae={report.val_mae[i]!r}")
        lines.append(" ".join(parts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args):
    cfg_file = _load_config(args)
    _, train_part, _, spec, cfg = _prepare(args, cfg_file)
    out = _out_dir(args)

    t0 = time.perf_counter()
    if cfg.stop_metric == "validation_mae":
        inner, val = validation_split(train_part, args.test_term)
        params, report = train(spec, inner, cfg, validation=val)
    else:
        params, report = train(spec, train_part, cfg)
    save_params(params, out / "params.txt")
    _write_json(out / "report.json", report.to_dict())
    _write_train_log(out / "train_log.txt", report)
    write_manifest(
        out,
        "train",
        _merged_config(spec, cfg, {"test_term": args.test_term}),
        [args.data] + ([args.config] if args.config else []),
        ["params.txt", "report.json", "train_log.txt"],
        cfg.seed,
        {"seconds": time.perf_counter() - t0, "epoch_seconds": report.epoch_seconds},
    )
    print(
        f"trained {spec.variant} for {report.epochs_run} epochs, "
        f"final train MAE {report.train_mae[-1]:.4f}"
    )
    return 0


def cmd_grid_search(args):
    cfg_file = _load_config(args)
    _, train_part, _, spec, cfg = _prepare(args, cfg_file)
    grids = build_grids(cfg_file)
    if not grids:
        raise ConfigError("grid search needs at least one grid.<param> config key")
    out = _out_dir(args)

    t0 = time.perf_counter()
    result = grid_search(spec, train_part, args.test_term, grids, cfg, jobs=args.jobs)
    save_params(result.params, out / "params.txt")
    _write_json(out / "report.json", result.report.to_dict())
    _write_train_log(out / "train_log.txt", result.report)
    _write_json(out / "best_hyper.json", asdict(result.best))

    keys = list(grids)
    lines = [",".join(keys + ["val_mae"])]
    for point in result.table:
        lines.append(
            ",".join([repr(point.values[k]) for k in keys] + [f"{point.val_mae:.6f}"])
        )
    (out / "search_table.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    write_manifest(
        out,
        "grid-search",
        _merged_config(spec, cfg, {"test_term": args.test_term, "grids": grids}),
        [args.data] + ([args.config] if args.config else []),
        ["params.txt", "report.json", "train_log.txt", "best_hyper.json",
         "search_table.csv"],
        cfg.seed,
        {"seconds": time.perf_counter() - t0},
    )
    best = min(result.table, key=lambda p: p.val_mae)
    print(f"searched {len(result.table)} grid points, best val MAE {best.val_mae:.4f}")
    return 0


def cmd_evaluate(args):
    dataset = parse_csv(args.data)
    train_part, test_part = split_train_test(dataset, args.test_term)
    params = load_params(args.params)
    out = _out_dir(args)

    t0 = time.perf_counter()
    rows = score_dataset(params, test_part, train_part)
    groups = split_rows(rows, test_part, args.partition)
    payload = {
        label: metrics(subset, label).to_dict() for label, subset in groups.items()
    }
    export_predictions(rows, out / "predictions.csv")
    _write_json(out / "metrics.json", payload)
    write_manifest(
        out,
        "evaluate",
        {"partition": args.partition, "test_term": args.test_term},
        [args.data, args.params],
        ["predictions.csv", "metrics.json"],
        0,
        {"seconds": time.perf_counter() - t0},
    )
    all_metrics = payload["ALL"]
    print(
        f"evaluated {all_metrics['n']} records: MAE {all_metrics['mae']:.4f}, "
        f"PTA0 {all_metrics['pta0']:.4f}"
    )
    return 0


def cmd_ablate(args):
    cfg_file = _load_config(args)
    _, train_part, test_part, spec, cfg = _prepare(args, cfg_file)
    out = _out_dir(args)

    t0 = time.perf_counter()
    rows = ablation_suite(
        train_part,
        test_part,
        cfg.hyper,
        seed=cfg.seed,
        l1_mode=cfg.l1_mode,
        shuffle=cfg.shuffle,
        ck_normalization=spec.ck_normalization,
        partition=args.partition,
        jobs=args.jobs,
    )
    lines = ["partition,variant,pta0,n"]
    for row in rows:
        lines.append(f"{row.partition},{row.variant},{row.pta0:.6f},{row.n}")
    (out / "ablation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_manifest(
        out,
        "ablate",
        _merged_config(spec, cfg, {"test_term": args.test_term, "partition": args.partition}),
        [args.data] + ([args.config] if args.config else []),
        ["ablation.csv"],
        cfg.seed,
        {"seconds": time.perf_counter() - t0},
    )
    print(f"wrote ablation table with {len(rows)} rows")
    return 0


def cmd_importance(args):
    cfg_file = _load_config(args)
    _, train_part, test_part, spec, cfg = _prepare(args, cfg_file)
    if not spec.ale_family:
        raise ConfigError("importance analysis needs an ale-family variant")
    out = _out_dir(args)

    t0 = time.perf_counter()
    params, _ = train(spec, train_part, cfg)
    reports = importance_by_partition(params, test_part, train_part, args.partition)
    _write_json(
        out / "importance.json",
        {label: rep.to_dict() for label, rep in reports.items()},
    )
    write_manifest(
        out,
        "importance",
        _merged_config(spec, cfg, {"test_term": args.test_term, "partition": args.partition}),
        [args.data] + ([args.config] if args.config else []),
        ["importance.json"],
        cfg.seed,
        {"seconds": time.perf_counter() - t0},
    )
    rep = reports["ALL"]
    print(
        f"importance over {rep.n_used} records: knowledge {rep.i_ck:.3f}, "
        f"level {rep.i_al:.3f}, global {rep.i_g:.3f} ({rep.n_excluded} excluded)"
    )
    return 0


def _add_model_flags(p):
    p.add_argument("--variant", choices=("mf", "mf-b", "mf-d", "ack", "ack-b", "ale", "ale-b"))
    p.add_argument("--k", type=int)
    p.add_argument("--decay", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--no-academic-level", action="store_true")
    p.add_argument("--no-instructor", action="store_true")
    p.add_argument("--no-global", action="store_true")
    p.add_argument("--student-group", choices=("major", "academic-level", "none"))
    p.add_argument("--course-group", choices=("subject", "course-level", "none"))
    p.add_argument("--ck-normalization", dest="ck_normalization", choices=("count", "none"))
    p.add_argument("--l1-mode", dest="l1_mode", choices=("sign-aware", "paper-literal"))


def _add_common(p, data=True):
    if data:
        p.add_argument("--data", required=True)
        p.add_argument("--test-term", dest="test_term", type=int, required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nextterm", description="Next-term grade prediction experiments"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_common(p, data=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on data before the test term")
    _add_common(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="grid search on the validation term")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("evaluate", help="score the test term with a snapshot")
    _add_common(p)
    p.add_argument("--params", required=True)
    p.add_argument(
        "--partition", choices=("cohort", "start-term", "major", "all"), default="all"
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="compare ale against its single-effect ablations")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument(
        "--partition", choices=("cohort", "start-term", "major", "all"), default="all"
    )
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("importance", help="per-effect contribution analysis")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument(
        "--partition", choices=("cohort", "start-term", "major", "all"), default="all"
    )
    p.set_defaults(func=cmd_importance)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        IngestionError,
        ProtocolError,
        UnknownGradeError,
        UnknownStudentError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
