"""Curriculum schedule, the epoch loop with early stopping, and evaluation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .cells import ModelParams
from .codec import decode, encode
from .config import RunConfig
from .datasets import DatasetSplit
from .graph import CanonicalGraph, extract_window_subgraph, num_blocks, to_patch_grid
from .losses import batch_loss
from .metrics import MetricsReport, prf, score_graph, summarize
from .optim import adam_step, clip_global_norm

log = logging.getLogger(__name__)


class NumericError(RuntimeError):
    """Raised when a batch produces a non-finite loss."""


@dataclass(frozen=True)
class CurriculumState:
    fraction: float = 0.25
    threshold: float = 0.8
    step: float = 0.25
    min_size: int = 2

    def window_size(self, n: int) -> int:
        return min(n, max(self.min_size, math.ceil(self.fraction * n)))


def curriculum_tick(state: CurriculumState, train_f1: float) -> CurriculumState:
    if train_f1 >= state.threshold and state.fraction < 1:
        return replace(state, fraction=min(1.0, state.fraction + state.step))
    return state


def draw_windows(graphs, state: CurriculumState, rng: np.random.Generator) -> list[CanonicalGraph]:
    out = []
    for g in graphs:
        size = state.window_size(g.n)
        start = int(rng.integers(0, g.n - size + 1))
        out.append(g if size == g.n else extract_window_subgraph(g, start, size))
    return out


def teacher_forced_f1(outputs, grids, threshold: float = 0.5) -> float:
    """Size-weighted F1 of thresholded B logits against the targets (decoder coordinates)."""
    cut = np.log(threshold / (1 - threshold))
    scores = np.zeros(len(grids))
    for out in outputs:
        for row, (k, t) in enumerate(zip(out.indices, out.targets)):
            tp = fp = fn = 0
            for s, (b, v) in enumerate(zip(t.b, t.b_valid)):
                inside = v & (t.c[s] == 1)
                pred = out.B[s].data[row] >= cut
                truth = b == 1
                tp += int(np.sum(pred & truth & inside))
                fp += int(np.sum(pred & ~truth & inside))
                fn += int(np.sum(~pred & truth & inside))
            scores[k] = prf(tp, fp, fn)[2]
    n = np.array([g.n for g in grids], dtype=np.float64)
    return float(np.sum(scores * n) / n.sum())


def snapshot(params: ModelParams) -> dict:
    return {p.name: (p.data.copy(), p.m.copy(), p.v.copy(), p.step) for p in params.parameters()}


def restore(params: ModelParams, snap: dict) -> None:
    for p in params.parameters():
        data, m, v, step = snap[p.name]
        p.data, p.m, p.v, p.step = data.copy(), m.copy(), v.copy(), step


def resolve_max_blocks(config: RunConfig, graphs) -> int:
    if config.max_blocks:
        return config.max_blocks
    largest = max((num_blocks(g.n, config.l) for g in graphs), default=1)
    return 2 * largest


def full_loss(graphs, params: ModelParams, config: RunConfig) -> float:
    """Teacher-forced loss over full graphs, no sampling noise."""
    grids = [to_patch_grid(g, config.l) for g in graphs]
    with ad.no_grad():
        return float(batch_loss(grids, params, config.loss_weights(), vae_sample=False).data)


def train(split: DatasetSplit, config: RunConfig, on_epoch=None, run_id: str = "run"):
    """Train from scratch; returns ``(params, history)`` with the best-validation weights.

    Early stopping only counts epochs once the curriculum has reached full
    graphs. ``on_epoch`` receives each history record as it is produced.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    params = ModelParams(config.cell_config(), seed=int(seeds[0].generate_state(1)[0]))
    rng = np.random.default_rng(seeds[1])
    # VAE noise has its own stream so data order does not depend on the mode
    noise_rng = np.random.default_rng(seeds[2])
    weights = config.loss_weights()
    state = CurriculumState(config.curriculum_start, config.curriculum_threshold,
                            config.curriculum_step, config.curriculum_min_size)
    train_graphs = list(split.train)
    valid_graphs = list(split.valid) or train_graphs
    if not train_graphs:
        raise ValueError("training split is empty")
    history = []
    best, best_snap, wait = math.inf, None, 0
    plist = params.parameters()

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_graphs))
        windows = draw_windows([train_graphs[k] for k in order], state, rng)
        losses, f1s, sizes = [], [], []
        grad_norm = 0.0
        for start in range(0, len(windows), config.batch):
            chunk = windows[start:start + config.batch]
            grids = [to_patch_grid(g, config.l) for g in chunk]
            outputs = []
            loss = batch_loss(grids, params, weights, rng=noise_rng, outputs=outputs)
            value = float(loss.data)
            if not math.isfinite(value):
                ids = [int(k) for k in order[start:start + config.batch]]
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch of training graphs {ids}")
            ad.backward(loss)
            grad_norm = clip_global_norm(plist, config.grad_clip)
            adam_step(plist, config.lr)
            losses.append(value)
            f1s.append(teacher_forced_f1(outputs, grids, config.threshold))
            sizes.append(sum(g.n for g in grids))
        train_loss = float(np.mean(losses))
        train_f1 = float(np.average(f1s, weights=sizes))
        valid_loss = full_loss(valid_graphs, params, config)
        fraction = state.fraction
        if not math.isfinite(valid_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")

        improved = False
        if fraction >= 1.0:
            if valid_loss < best:
                best, best_snap, wait, improved = valid_loss, snapshot(params), 0, True
            else:
                wait += 1
        record = {
            "run_id": run_id, "seed": config.seed, "epoch": epoch,
            "train_loss": train_loss, "valid_loss": valid_loss, "train_f1": train_f1,
            "fraction": fraction, "grad_norm": grad_norm, "improved": improved,
        }
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        log.info("epoch %d loss %.5f valid %.5f f1 %.3f frac %.2f", epoch, train_loss, valid_loss, train_f1, fraction)

        state = curriculum_tick(state, train_f1)
        if fraction >= 1.0 and wait > config.patience:
            break
        if config.stop_loss and fraction >= 1.0 and valid_loss < config.stop_loss:
            break
    if best_snap is not None:
        restore(params, best_snap)
    return params, history


def evaluate(graphs, params: ModelParams | None, l: int | None = None, max_blocks: int = 64,
             stop_rule: str = "target_consistent", threshold: float = 0.5, threads: int = 1,
             predict=None) -> MetricsReport:
    """Encode and free-run decode every graph; size-weighted F1 with zero padding on size mismatch.

    ``predict`` replaces the model: it maps a graph to a predicted adjacency
    matrix (or ``(A_hat, truncated)``), which is scored the same way.
    """
    if predict is None and params is None:
        raise ValueError("evaluate needs params or a predict function")
    if predict is None:
        l = params.config.l if l is None else l

    def one(g):
        if predict is not None:
            out = predict(g)
            A_hat, truncated = out if isinstance(out, tuple) else (out, False)
            return score_graph(g.adjacency(), np.asarray(A_hat), truncated)
        grid = to_patch_grid(g, l)
        with ad.no_grad():
            x = encode(grid, params).root.data
            res = decode(x, params, l, max_blocks, stop_rule, threshold)
        return score_graph(g.adjacency(), res.A_hat, res.truncated)

    graphs = list(graphs)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            scores = list(pool.map(one, graphs))
    else:
        scores = [one(g) for g in graphs]
    return summarize(scores)
