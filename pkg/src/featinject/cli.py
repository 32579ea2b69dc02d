"""Command-line entry point.

Commands: extract, export-check, train, eval, compare.  All artifacts are
JSON (UTF-8) except EMB1 files (binary) and the comparison text table;
every artifact embeds the resolved configuration that produced it.  Exit
codes: 0 success, 1 operation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .embed import BACKBONES, check_backbone, read_embeddings_file
from .errors import ConfigError, FeatureInjectError
from .featx import FeatureSelection, extract_all, read_feature_cache, write_feature_cache
from .imgio import load_image, scan_dataset, split_dataset
from .pipeline import (
    ScenarioSpec,
    TrainConfig,
    build_fused_dataset,
    compare_scenarios,
    evaluate,
    load_model,
    save_model,
    train_head,
)

DEFAULT_SPLIT_RATIO = 0.8


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featinject",
        description="Traditional-feature injection toolkit for land-cover classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_train_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--epochs", type=int, default=16)
        p.add_argument("--batch", type=int, default=64)
        p.add_argument("--lr", type=float, default=TrainConfig.lr)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--split-ratio", type=float, default=DEFAULT_SPLIT_RATIO)
        p.add_argument("--hidden", type=int, default=TrainConfig.hidden_units)

    p = sub.add_parser("extract", help="write a traditional-feature cache (JSON lines)")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--features", default="all", help="comma list of groups, or all/none")
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-check", help="validate an EMB1 file against a backbone spec")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--backbone", required=True, choices=sorted(BACKBONES))
    p.add_argument("--out", help="optional JSON report path")

    p = sub.add_parser("train", help="train the fusion head and write a model file")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--features", default="all")
    p.add_argument("--cache", help="optional feature cache from `extract`")
    p.add_argument("--out", required=True)
    add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a model file on the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--cache")
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="run a scenario comparison and write report + table")
    p.add_argument("--data", required=True)
    p.add_argument("--scenarios", required=True, help="JSON list of {name, features, embeddings}")
    p.add_argument("--cache")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", required=True)
    add_train_flags(p)

    return parser


def _write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_bytes((json.dumps(obj, indent=2) + "\n").encode("utf-8"))


def _cmd_extract(args) -> int:
    manifest = scan_dataset(args.data)
    if manifest.skipped:
        print(f"warning: skipped {manifest.skipped} non-image file(s)", file=sys.stderr)
    sel = FeatureSelection.parse(args.features)
    entries = {}
    for image_id, _ in manifest.records:
        img = load_image(manifest.root / image_id)
        entries[image_id] = extract_all(img, sel)
    write_feature_cache(args.out, entries)
    print(f"wrote features for {len(entries)} image(s) to {args.out}")
    return 0


def _cmd_export_check(args) -> int:
    store = read_embeddings_file(args.embeddings)
    check = check_backbone(store, BACKBONES[args.backbone])
    report = {
        "config": {"embeddings": args.embeddings, "backbone": args.backbone},
        "backbone": check.backbone,
        "expected_dim": check.expected_dim,
        "actual_dim": check.actual_dim,
        "record_count": check.record_count,
        "ok": check.ok,
    }
    if args.out:
        _write_json(args.out, report)
    print(
        f"ok backbone={check.backbone} dim={check.actual_dim} records={check.record_count}"
    )
    return 0


def _train_config(args, repeats: int = 1) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        repeats=repeats,
        hidden_units=args.hidden,
    )


def _cmd_train(args) -> int:
    manifest = scan_dataset(args.data)
    split = split_dataset(manifest, args.split_ratio, args.seed)
    store = read_embeddings_file(args.embeddings)
    sel = FeatureSelection.parse(args.features)
    cache = read_feature_cache(args.cache) if args.cache else None
    fused = build_fused_dataset(split, manifest, store, sel, cache)
    cfg = _train_config(args)
    head, history = train_head(fused.train, cfg)
    config = {
        "train": cfg.to_dict(),
        "split": {"seed": args.seed, "ratio": args.split_ratio},
        "data": str(args.data),
        "embeddings": str(args.embeddings),
    }
    n_bytes = save_model(args.out, head, sel, store.backbone, config)
    print(
        f"trained {cfg.epochs} epoch(s); final loss {history[-1]:.6f}; "
        f"wrote {n_bytes} bytes to {args.out}"
    )
    return 0


def _cmd_eval(args) -> int:
    head, sel, backbone, config = load_model(args.model)
    split_cfg = config.get("split")
    if not split_cfg:
        raise ConfigError(f"model {args.model} does not record its split configuration")
    manifest = scan_dataset(args.data)
    split = split_dataset(manifest, split_cfg["ratio"], split_cfg["seed"])
    store = read_embeddings_file(args.embeddings)
    if store.backbone != backbone:
        raise ConfigError(
            f"model was trained on backbone {backbone!r}, store holds {store.backbone!r}"
        )
    cache = read_feature_cache(args.cache) if args.cache else None
    fused = build_fused_dataset(split, manifest, store, sel, cache)
    metrics = evaluate(head, fused.test)
    _write_json(
        args.out,
        {
            "config": {
                "model": str(args.model),
                "data": str(args.data),
                "embeddings": str(args.embeddings),
                "model_config": config,
            },
            **metrics.to_dict(),
        },
    )
    print(f"accuracy {metrics.accuracy:.4f} on {int(metrics.confusion.sum())} test image(s)")
    return 0


def _load_scenarios(path: str | Path) -> list[dict]:
    try:
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    if not isinstance(entries, list) or not all(isinstance(e, dict) for e in entries):
        raise ConfigError(f"scenario file {path} must hold a JSON list of objects")
    for entry in entries:
        for key in ("name", "features", "embeddings"):
            if key not in entry:
                raise ConfigError(f"scenario entry missing {key!r}: {entry}")
    return entries


def _cmd_compare(args) -> int:
    manifest = scan_dataset(args.data)
    split = split_dataset(manifest, args.split_ratio, args.seed)
    entries = _load_scenarios(args.scenarios)

    stores_by_path: dict[str, object] = {}
    stores = {}
    scenarios = []
    for entry in entries:
        path = entry["embeddings"]
        if path not in stores_by_path:
            store = read_embeddings_file(path)
            if store.backbone in stores:
                raise ConfigError(
                    f"backbone {store.backbone!r} loaded from more than one file "
                    f"(second was {path})"
                )
            stores_by_path[path] = store
            stores[store.backbone] = store
        scenarios.append(
            ScenarioSpec(
                name=entry["name"],
                selection=FeatureSelection.parse(entry["features"]),
                backbone=stores_by_path[path].backbone,
            )
        )

    cfg = _train_config(args, repeats=args.repeats)
    cache = read_feature_cache(args.cache) if args.cache else None
    report = compare_scenarios(scenarios, manifest, split, stores, cfg, cache)
    report.config = {
        "train": cfg.to_dict(),
        "split": {"seed": args.seed, "ratio": args.split_ratio},
        "data": str(args.data),
        "scenarios_file": str(args.scenarios),
        "scenarios": entries,
    }
    out = Path(args.out)
    out.write_bytes(report.to_json_bytes())
    table = report.render_table()
    out.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "export-check": _cmd_export_check,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
}


def dispatch(argv: list[str]) -> int:
    """Parse arguments and run one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except FeatureInjectError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
