"""Dataset generation, TU-format loading, edge-list files and train/valid/test splits."""

from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import CanonicalGraph, Graph, canonical_order, permute_graph

log = logging.getLogger(__name__)


class DataError(Exception):
    """Malformed or inconsistent dataset files."""


# grids ----------------------------------------------------------------------

def grid_graph(p: int, q: int) -> Graph:
    """p x q lattice; vertex ``r*q + c`` sits at row r, column c."""
    edges = set()
    for r in range(p):
        for c in range(q):
            v = r * q + c
            if c + 1 < q:
                edges.add((v, v + 1))
            if r + 1 < p:
                edges.add((v, v + q))
    return Graph(p * q, frozenset(edges))


def generate_grid_dataset(sizes=range(2, 9)) -> list[Graph]:
    """All p x q grids with p, q drawn from ``sizes`` (49 graphs by default)."""
    return [grid_graph(p, q) for p in sizes for q in sizes]


def grid_names(sizes=range(2, 9)) -> list[str]:
    return [f"grid_{p}x{q}" for p in sizes for q in sizes]


def dataset_stats(graphs) -> dict:
    ns = np.array([g.n for g in graphs], dtype=np.float64)
    es = np.array([g.num_edges for g in graphs], dtype=np.float64)
    return {
        "size": len(graphs),
        "avg_nodes": float(ns.mean()) if len(ns) else 0.0,
        "max_nodes": int(ns.max()) if len(ns) else 0,
        "avg_edges": float(es.mean()) if len(es) else 0.0,
    }


# edge-list files ------------------------------------------------------------

def format_edge_list(g: Graph) -> str:
    lines = [str(g.n)] + [f"{u} {v}" for u, v in g.edge_list()]
    return "\n".join(lines) + "\n"


def write_edge_list(path, g: Graph) -> None:
    Path(path).write_text(format_edge_list(g))


def read_edge_list(path) -> Graph:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines()]
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path}: empty edge-list file")
    lineno, head = lines[0]
    n = _parse_int(head, path, lineno)
    edges = set()
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'i j', got {ln!r}")
        u, v = (_parse_int(t, path, lineno) for t in parts)
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise DataError(f"{path}:{lineno}: invalid edge ({u}, {v}) for n={n}")
        edges.add((min(u, v), max(u, v)))
    return Graph(n, frozenset(edges))


def read_graph_dir(path) -> list[tuple[str, Graph]]:
    """Every ``*.txt`` edge-list file in a directory, sorted by file name."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file or directory: {path}")
    if path.is_file():
        return [(path.stem, read_edge_list(path))]
    return [(f.stem, read_edge_list(f)) for f in sorted(path.glob("*.txt"))]


def _parse_int(token: str, path, lineno: int) -> int:
    try:
        return int(token.strip())
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-integer token {token.strip()!r}") from None


# TU format ------------------------------------------------------------------

def _read_int_rows(path: Path, width: int) -> list[tuple[int, list[int]]]:
    if not path.exists():
        raise DataError(f"missing file {path}")
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {line!r}")
            rows.append((lineno, [_parse_int(p, path, lineno) for p in parts]))
    return rows


def load_tu_dataset(path, name: str) -> list[tuple[Graph, int]]:
    """Load a dataset in the TU benchmark layout from ``path/<name>_*.txt``.

    Edge pairs are 1-indexed global vertex ids; both orientations collapse into
    one undirected edge and self-loops are dropped (and counted in the log).
    """
    root = Path(path)
    prefix = root / name
    indicator = _read_int_rows(Path(f"{prefix}_graph_indicator.txt"), 1)
    labels = _read_int_rows(Path(f"{prefix}_graph_labels.txt"), 1)
    edges = _read_int_rows(Path(f"{prefix}_A.txt"), 2)

    graph_of = [row[0] for _, row in indicator]
    members: dict[int, list[int]] = defaultdict(list)
    for vid, gid in enumerate(graph_of, 1):
        members[gid].append(vid)
    n_graphs = len(labels)
    local: dict[int, int] = {}
    for gid, verts in members.items():
        if not 1 <= gid <= n_graphs:
            raise DataError(f"{prefix}_graph_indicator.txt: graph id {gid} has no label")
        for k, vid in enumerate(verts):
            local[vid] = k

    edge_sets: dict[int, set] = defaultdict(set)
    self_loops = 0
    a_file = f"{prefix}_A.txt"
    for lineno, (u, v) in edges:
        for w in (u, v):
            if not 1 <= w <= len(graph_of):
                raise DataError(f"{a_file}:{lineno}: vertex {w} not in graph indicator")
        gid = graph_of[u - 1]
        if graph_of[v - 1] != gid:
            raise DataError(f"{a_file}:{lineno}: edge ({u}, {v}) crosses graphs {gid} and {graph_of[v - 1]}")
        if u == v:
            self_loops += 1
            continue
        a, b = local[u], local[v]
        edge_sets[gid].add((min(a, b), max(a, b)))
    if self_loops:
        log.warning("%s: dropped %d self-loops", name, self_loops)

    out = []
    for gid in range(1, n_graphs + 1):
        n = len(members.get(gid, ()))
        if n == 0:
            raise DataError(f"{prefix}_graph_labels.txt: graph {gid} has no vertices")
        out.append((Graph(n, frozenset(edge_sets[gid])), labels[gid - 1][1][0]))
    return out


# splitting ------------------------------------------------------------------

@dataclass
class DatasetSplit:
    train: list[CanonicalGraph]
    valid: list[CanonicalGraph]
    test: list[CanonicalGraph]
    augmentation_factor: int = 0
    base_ids: dict = field(default_factory=dict)
    seed: int = 0
    ratios: tuple = (0.7, 0.15, 0.15)

    def manifest(self) -> dict:
        return {
            "format": "regae-split/1",
            "seed": self.seed,
            "ratios": list(self.ratios),
            "augmentation_factor": self.augmentation_factor,
            "copy_seeds": "SeedSequence([seed, base_id, copy])",
            **{k: list(v) for k, v in self.base_ids.items()},
        }


def split_counts(k: int, ratios) -> tuple[int, int, int]:
    train = math.floor(ratios[0] * k + 0.5)
    valid = math.floor(ratios[1] * k + 0.5)
    valid = min(valid, k - train)
    return train, valid, k - train - valid


def _copy_seed(seed: int, base_id: int, copy: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, base_id, copy])


def augment(graph: Graph, base_id: int, n_copies: int, seed: int) -> list[CanonicalGraph]:
    """The graph itself plus ``n_copies`` random relabelings, each canonically ordered."""
    out = [canonical_order(graph)]
    for k in range(1, n_copies + 1):
        out.append(canonical_order(permute_graph(graph, _copy_seed(seed, base_id, k))))
    return out


def _assemble(graphs, ids: dict, augmentation_factor: int, seed: int, ratios) -> DatasetSplit:
    subsets = {
        name: [cg for i in idx for cg in augment(graphs[i], i, augmentation_factor, seed)]
        for name, idx in ids.items()
    }
    return DatasetSplit(
        subsets["train"], subsets["valid"], subsets["test"],
        augmentation_factor=augmentation_factor, base_ids=ids, seed=seed, ratios=tuple(ratios),
    )


def split_dataset(graphs, ratios=(0.7, 0.15, 0.15), augmentation_factor: int = 0, seed: int = 0) -> DatasetSplit:
    """Shuffle base graphs, cut them 70/15/15, then augment each subset separately."""
    if not graphs:
        raise ValueError("cannot split an empty dataset")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    if augmentation_factor < 0:
        raise ValueError("augmentation factor must be non-negative")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(graphs)).tolist()
    n_train, n_valid, _ = split_counts(len(graphs), ratios)
    ids = {
        "train": perm[:n_train],
        "valid": perm[n_train:n_train + n_valid],
        "test": perm[n_train + n_valid:],
    }
    return _assemble(graphs, ids, augmentation_factor, seed, ratios)


def split_from_manifest(graphs, manifest: dict) -> DatasetSplit:
    ids = {k: [int(i) for i in manifest[k]] for k in ("train", "valid", "test")}
    return _assemble(graphs, ids, int(manifest["augmentation_factor"]), int(manifest["seed"]),
                     tuple(manifest["ratios"]))


def write_manifest(path, split: DatasetSplit) -> None:
    Path(path).write_text(json.dumps(split.manifest(), indent=1, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


def memorization_set() -> list[Graph]:
    """Triangle, 4-path, 4-vertex star, 2 x 2 grid and 5-cycle."""
    return [
        Graph(3, frozenset({(0, 1), (1, 2), (0, 2)})),
        Graph(4, frozenset({(0, 1), (1, 2), (2, 3)})),
        Graph(4, frozenset({(0, 1), (0, 2), (0, 3)})),
        grid_graph(2, 2),
        Graph(5, frozenset((i, (i + 1) % 5) for i in range(5))),
    ]
