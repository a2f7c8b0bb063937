"""``regae`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import os

# single-threaded BLAS keeps runs bit-reproducible; must precede the numpy import
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import CheckpointError, load_checkpoint, read_embedding, save_checkpoint, write_embedding
from .codec import decode, encode
from .config import TU_NAMES, ConfigError, RunConfig, get_preset, load_config, parse_override, save_config
from .datasets import (DataError, DatasetSplit, dataset_stats, format_edge_list, generate_grid_dataset,
                       grid_names, load_tu_dataset, memorization_set, read_edge_list, read_graph_dir,
                       read_manifest, split_dataset, split_from_manifest, write_manifest)
from .graph import Graph, canonical_order, to_patch_grid
from .metrics import MetricsReport, aggregate
from .training import NumericError, evaluate, resolve_max_blocks, train

log = logging.getLogger("regae")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def load_graphs(config: RunConfig) -> list[Graph]:
    name = config.dataset
    if name == "grid-medium":
        return generate_grid_dataset(range(2, 9))
    if name == "grid-small":
        return generate_grid_dataset(range(2, 5))
    if name == "desk-memorize":
        return memorization_set()
    if name in TU_NAMES:
        tu = TU_NAMES[name]
        root = Path(config.data_dir)
        root = root / tu if (root / tu).is_dir() else root
        return [g for g, _ in load_tu_dataset(root, tu)]
    path = Path(name)
    if path.is_dir() and (path / f"{path.name}_A.txt").exists():
        return [g for g, _ in load_tu_dataset(path, path.name)]
    if path.exists():
        return [g for _, g in read_graph_dir(path)]
    raise DataError(f"unknown dataset {name!r} (not a preset name, TU name or existing path)")


def make_split(config: RunConfig, graphs, manifest: dict | None = None) -> DatasetSplit:
    if config.dataset == "desk-memorize":
        cgs = [canonical_order(g) for g in graphs]
        return DatasetSplit(cgs, cgs, cgs, 0, {"train": list(range(len(cgs))), "valid": [], "test": []},
                            config.seed)
    if manifest is not None:
        return split_from_manifest(graphs, manifest)
    return split_dataset(graphs, tuple(config.split_ratios), config.augmentation, config.seed)


def resolve_config(args) -> RunConfig:
    if getattr(args, "config", None):
        config = load_config(args.config)
    elif getattr(args, "preset", None):
        config = get_preset(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    changes = {}
    for item in getattr(args, "set", None) or []:
        changes.update(parse_override(item))
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return config.replace(**changes) if changes else config


# commands -------------------------------------------------------------------

def cmd_gen_grids(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sizes = range(args.min_side, args.max_side + 1)
    graphs = generate_grid_dataset(sizes)
    for name, g in zip(grid_names(sizes), graphs):
        (out / f"{name}.txt").write_text(format_edge_list(g))
    stats = dataset_stats(graphs)
    (out / "stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    print(f"graphs {stats['size']}  avg nodes {stats['avg_nodes']:.1f}  max nodes {stats['max_nodes']}  "
          f"avg edges {stats['avg_edges']:.1f}")
    return 0


def _run_one(config: RunConfig, out: Path, graphs, threads: int, manifest=None) -> MetricsReport:
    out.mkdir(parents=True, exist_ok=True)
    split = make_split(config, graphs, manifest)
    save_config(out / "config.toml", config)
    write_manifest(out / "split.json", split)
    history_path = out / "history.jsonl"
    history_path.write_text("")
    run_id = f"{config.dataset}-seed{config.seed}"

    def append(record):
        with history_path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    params, history = train(split, config, on_epoch=append, run_id=run_id)
    max_blocks = resolve_max_blocks(config, split.train)
    save_checkpoint(out / "checkpoint.bin", params, config,
                    {"run_id": run_id, "epochs": len(history), "max_blocks": max_blocks})
    test = split.test or split.train
    report = evaluate([g.graph for g in test], params, config.l, max_blocks, config.stop_rule,
                      config.threshold, threads)
    (out / "test_metrics.json").write_text(json.dumps({"run_id": run_id, "seed": config.seed,
                                                        **report.to_dict()}, sort_keys=True) + "\n")
    print(f"seed {config.seed}: epochs {len(history)}  f1 {report.f1:.3f}  "
          f"size acc {report.size_accuracy:.3f}  size err {report.mean_size_error:.3f}")
    return report


def cmd_train(args) -> int:
    config = resolve_config(args)
    graphs = load_graphs(config)
    out = Path(args.out)
    if args.seeds <= 1:
        _run_one(config, out, graphs, args.threads)
        return 0
    reports = []
    for k in range(args.seeds):
        cfg = config.replace(seed=config.seed + k)
        reports.append(_run_one(cfg, out / f"seed_{cfg.seed}", graphs, args.threads))
    summary = aggregate(reports)
    (out / "aggregate.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    for key in ("f1", "size_accuracy", "mean_size_error"):
        print(f"{key}: {summary[key]['mean']:.3f} +- {summary[key]['std']:.3f}")
    return 0


def _checkpoint(args):
    params, config, meta = load_checkpoint(args.checkpoint)
    max_blocks = getattr(args, "max_blocks", None) or meta.get("max_blocks") or 64
    return params, config, meta, max_blocks


def _report_dict(report: MetricsReport) -> dict:
    return report.to_dict()


def cmd_roundtrip(args) -> int:
    params, config, _, max_blocks = _checkpoint(args)
    if args.m is not None and args.m != config.m:
        raise ConfigError(f"m: checkpoint has {config.m}, requested {args.m}")
    if args.l is not None and args.l != config.l:
        raise ConfigError(f"l: checkpoint has {config.l}, requested {args.l}")
    named = read_graph_dir(args.graphs)
    graphs = [canonical_order(g).graph for _, g in named]
    report = evaluate(graphs, params, config.l, max_blocks, config.stop_rule, config.threshold, args.threads)
    doc = {"graphs": [name for name, _ in named], **_report_dict(report)}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"{'graph':<20} {'n':>6} {'n_hat':>6} {'f1':>6}")
    for name, s in zip(doc["graphs"], report.per_graph):
        print(f"{name:<20} {s.n:>6} {s.n_hat:>6} {s.f1:>6.3f}")
    print(f"f1 {report.f1:.3f}  precision {report.precision:.3f}  recall {report.recall:.3f}  "
          f"size acc {report.size_accuracy:.3f}  size err {report.mean_size_error:.3f}")
    return 0


def cmd_encode(args) -> int:
    params, config, _, _ = _checkpoint(args)
    g = canonical_order(read_edge_list(args.graph)).graph
    with ad.no_grad():
        x = encode(to_patch_grid(g, config.l), params).root.data
    write_embedding(args.out, x)
    print(f"wrote {x.size}-dim embedding to {args.out}")
    return 0


def cmd_decode(args) -> int:
    params, config, _, max_blocks = _checkpoint(args)
    x = read_embedding(args.embedding, config.m)
    res = decode(x, params, config.l, max_blocks, config.stop_rule, config.threshold)
    g = Graph.from_adjacency(res.A_hat)
    Path(args.out).write_text(format_edge_list(g))
    print(f"n_hat {res.n_hat}  blocks {res.n_blocks}  truncated {str(res.truncated).lower()}")
    return 0


def cmd_eval(args) -> int:
    params, ck_config, meta, max_blocks = _checkpoint(args)
    config = resolve_config(args) if (args.config or args.preset) else ck_config
    if (config.m, config.l) != (ck_config.m, ck_config.l):
        raise ConfigError(f"m/l mismatch: checkpoint ({ck_config.m}, {ck_config.l}) vs config ({config.m}, {config.l})")
    graphs = load_graphs(config)
    manifest = read_manifest(args.split) if args.split else None
    split = make_split(config, graphs, manifest)
    subset = getattr(split, args.subset) or split.train
    report = evaluate([g.graph for g in subset], params, config.l, max_blocks, config.stop_rule,
                      config.threshold, args.threads)
    text = json.dumps(_report_dict(report), indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"{args.subset}: f1 {report.f1:.3f}  size acc {report.size_accuracy:.3f}  "
          f"size err {report.mean_size_error:.3f}  graphs {report.num_graphs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regae", description="Recursive graph autoencoder")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-grids", help="write the p x q grid dataset as edge-list files")
    p.add_argument("--out", required=True)
    p.add_argument("--min-side", type=int, default=2)
    p.add_argument("--max-side", type=int, default=8)
    p.set_defaults(func=cmd_gen_grids)

    def config_args(p, required=True):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--config")
        g.add_argument("--preset")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model and evaluate it on the test split")
    config_args(p)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("roundtrip", help="encode and decode every graph in a file or directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graphs", required=True)
    p.add_argument("--out")
    p.add_argument("--m", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--max-blocks", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("encode", help="write the embedding of one graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an embedding file into an edge-list graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-blocks", type=int)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    config_args(p, required=False)
    p.add_argument("--split", help="split manifest written by train")
    p.add_argument("--subset", choices=("train", "valid", "test"), default="test")
    p.add_argument("--out")
    p.add_argument("--max-blocks", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError, ad.ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
