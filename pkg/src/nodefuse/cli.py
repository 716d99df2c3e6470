"""Command-line surface: train / eval / analyze over a declarative JSON config."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .errors import ContractError, FormatError, LoadError, NodefuseError, TrainingDiverged
from .evaluation import evaluate_clustering, linear_probe
from .graph import load_graph, make_splits, neighborhood_similarity
from .losses import ContrastConfig, ControllerConfig
from .model import load_checkpoint, save_checkpoint
from .training import TrainConfig, embed, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_MISMATCH = 4


class ConfigError(NodefuseError):
    pass


_SCHEMA = {
    "dataset_dir": str,
    "output_dir": str,
    "seed": int,
    "precision": str,
    "train": {
        "lr": float,
        "lr_controller": float,
        "epochs": int,
        "dropout": float,
        "patience": (int, type(None)),
        "dims": list,
    },
    "contrast": {"tau": float, "beta1": float, "beta2": float},
    "controller": {"alpha1": float, "alpha2": float, "epsilon": float},
    "augment": {"p_s": float, "p_c": float},
    "eval": {"task": str, "n_splits": int, "ratio": list, "restarts": int},
    "ablation": {
        "disable_semantic_contrast": bool,
        "disable_context_contrast": bool,
        "disable_fusion_contrast": bool,
        "fixed_lambda": (float, type(None)),
    },
}


def _check_keys(cfg: dict, schema: dict, prefix: str = ""):
    for key, val in cfg.items():
        if key not in schema:
            raise ConfigError(f"unknown config field: {prefix}{key}")
        expect = schema[key]
        if isinstance(expect, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config field {prefix}{key} must be a section")
            _check_keys(val, expect, prefix=f"{prefix}{key}.")
        else:
            kinds = expect if isinstance(expect, tuple) else (expect,)
            if float in kinds:
                kinds = kinds + (int,)
            if not isinstance(val, kinds) or (bool not in kinds and isinstance(val, bool)):
                raise ConfigError(
                    f"config field {prefix}{key} has wrong type "
                    f"{type(val).__name__}"
                )


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    _check_keys(cfg, _SCHEMA)
    if "dataset_dir" not in cfg:
        raise ConfigError("missing config field: dataset_dir")
    abl = cfg.get("ablation", {})
    if (abl.get("disable_semantic_contrast") and abl.get("disable_context_contrast")
            and abl.get("disable_fusion_contrast")):
        raise ConfigError("all three contrast terms are disabled; nothing to optimize")
    return cfg


def build_train_config(cfg: dict, seed_override: int | None = None) -> TrainConfig:
    tr = cfg.get("train", {})
    abl = cfg.get("ablation", {})
    dims = tr.get("dims", [256, 64, 30])
    if len(dims) != 3:
        raise ConfigError("train.dims must be [f_embed, f_proj, f_filter]")
    try:
        return TrainConfig(
            lr=tr.get("lr", 0.005),
            lr_controller=tr.get("lr_controller", 0.001),
            epochs=tr.get("epochs", 500),
            dropout=tr.get("dropout", 0.2),
            seed=seed_override if seed_override is not None else cfg.get("seed", 0),
            contrast=ContrastConfig(**cfg.get("contrast", {})),
            controller=ControllerConfig(**cfg.get("controller", {})),
            augment=AugmentConfig(**cfg.get("augment", {})),
            dims=tuple(int(d) for d in dims),
            patience=tr.get("patience", 50),
            precision=cfg.get("precision", "float64"),
            include_semantic=not abl.get("disable_semantic_contrast", False),
            include_context=not abl.get("disable_context_contrast", False),
            include_fusion=not abl.get("disable_fusion_contrast", False),
            fixed_lambda=abl.get("fixed_lambda"),
        )
    except (ContractError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_train(args) -> int:
    try:
        cfg = load_config(args.config)
        tcfg = build_train_config(cfg, seed_override=args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or cfg.get("output_dir", "."))
    try:
        g = load_graph(cfg["dataset_dir"])
    except (LoadError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = train(g, tcfg)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(report.params, out_dir / "model.ckpt")
    (out_dir / "train_report.jsonl").write_text(report.to_jsonl())
    snapshot = dict(cfg)
    if args.seed is not None:
        snapshot["seed"] = args.seed
    (out_dir / "config_snapshot.json").write_text(json.dumps(snapshot, indent=2) + "\n")
    print(f"trained {len(report.records)} epochs; outputs in {out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        params = load_checkpoint(args.checkpoint)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    try:
        g = load_graph(args.dataset)
    except (LoadError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    if g.n_features != params.dims.f_in:
        print(f"error: dataset has {g.n_features} features but the checkpoint "
              f"expects {params.dims.f_in}", file=sys.stderr)
        return EXIT_MISMATCH
    reps = embed(g, params, fixed_lambda=args.fixed_lambda)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    if args.task == "classify":
        ratio = tuple(float(r) for r in args.ratio.split("/"))
        ratio = tuple(r / sum(ratio) for r in ratio)
        splits = make_splits(g, ratio, n_splits=args.n_splits, seed=args.seed)
        result = linear_probe(reps, g.labels, splits, seed=args.seed)
        records.append({"dataset": g.name, "task": "classify", "metric": "accuracy",
                        "mean": result.mean, "std": result.std,
                        "values": result.accuracies})
        print(f"{g.name} classify accuracy: "
              f"{100 * result.mean:.2f} +- {100 * result.std:.2f}")
    else:
        result = evaluate_clustering(reps, g.labels, seed=args.seed,
                                     restarts=args.restarts)
        for metric, value in (("acc", result.acc), ("nmi", result.nmi),
                              ("ari", result.ari)):
            records.append({"dataset": g.name, "task": "cluster", "metric": metric,
                            "mean": value, "std": 0.0, "values": [value]})
        print(f"{g.name} cluster ACC {100 * result.acc:.2f} "
              f"NMI {100 * result.nmi:.2f} ARI {100 * result.ari:.2f}")
    with (out_dir / "eval_results.jsonl").open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        g = load_graph(args.dataset)
    except (LoadError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sims, isolated = neighborhood_similarity(g)
    counts, edges = np.histogram(sims[~isolated], bins=50, range=(-1.0, 1.0))
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "dataset": g.name,
        "similarity": [float(s) for s in sims],
        "isolated": [bool(b) for b in isolated],
        "bin_edges": [float(e) for e in edges],
        "bin_counts": [int(c) for c in counts],
    }
    out_path = out_dir / "similarity_histogram.json"
    out_path.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {out_path} ({int((~isolated).sum())} non-isolated nodes)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nodefuse",
        description="Self-supervised node representations via dual-view fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--task", choices=["classify", "cluster"], default="classify")
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--n-splits", type=int, default=10)
    p_eval.add_argument("--ratio", default="48/32/20")
    p_eval.add_argument("--restarts", type=int, default=10)
    p_eval.add_argument("--fixed-lambda", type=float, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_an = sub.add_parser("analyze", help="ego-neighborhood similarity histogram")
    p_an.add_argument("--dataset", required=True)
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
