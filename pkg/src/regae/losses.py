"""Training targets and the class-balanced reconstruction loss."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .cells import ModelParams, variational_head
from .codec import antidiagonal_indices, decode_teacher_forced, encode
from .graph import PatchGrid


@dataclass(frozen=True)
class LossWeights:
    rpb: float = 0.5
    mask_weight: float = 0.5
    emb_norm_weight: float = 0.2
    size_exponent: float = 1.0
    kl_weight: float = 0.01
    emb_norm_scope: str = "root"

    def __post_init__(self):
        if not 0 < self.rpb < 1:
            raise ValueError(f"rpb must lie in (0, 1), got {self.rpb}")
        for name in ("mask_weight", "emb_norm_weight", "size_exponent", "kl_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.emb_norm_scope not in ("root", "diagonal"):
            raise ValueError(f"emb_norm_scope must be 'root' or 'diagonal', got {self.emb_norm_scope!r}")


@dataclass
class Targets:
    """Per-antidiagonal targets for one graph in decoder coordinates.

    ``b_valid`` marks entries with ``i + j <= n - 1`` (the rest is outside the
    graph and never supervised for B); ``c`` is ``1{i + j <= n - 2}`` and covers
    every produced entry.
    """

    n: int
    n_blocks: int
    b: list
    b_valid: list
    c: list

    @property
    def num_c(self) -> int:
        return int(np.sum([c.size for c in self.c]))


def make_targets(grid: PatchGrid) -> Targets:
    n, N, l = grid.n, grid.n_blocks, grid.l
    A = grid.adjacency()
    bs, valid, cs = [], [], []
    for s in range(N):
        i, j = antidiagonal_indices(s, l)
        inside = i + j <= n - 2
        b = np.zeros(i.shape, dtype=np.int8)
        rows, cols = n - 1 - i[inside], j[inside]
        b[inside] = A[rows, cols]
        bs.append(b)
        valid.append(i + j <= n - 1)
        cs.append(inside.astype(np.int8))
    return Targets(n, N, bs, valid, cs)


def _class_weights(t: Targets, w: LossWeights):
    """Constant multipliers turning summed per-entry BCE into the per-graph loss."""
    n1 = sum(int(np.sum((b == 1) & v)) for b, v in zip(t.b, t.b_valid))
    n0 = sum(int(np.sum((b == 0) & v)) for b, v in zip(t.b, t.b_valid))
    wb = []
    for b, v in zip(t.b, t.b_valid):
        arr = np.zeros(b.shape)
        if n1:
            arr[(b == 1) & v] = w.rpb / n1
        if n0:
            arr[(b == 0) & v] = (1 - w.rpb) / n0
        wb.append(arr)
    wc = w.mask_weight / t.num_c
    return wb, wc


def graph_weight(n_blocks: int, w: LossWeights) -> float:
    return float(n_blocks) ** w.size_exponent


@dataclass
class GroupOutput:
    """Forward results for a group of graphs sharing a block count."""

    indices: list
    targets: list
    B: list
    C: list
    root: ad.Tensor
    diagonal: ad.Tensor
    kl: ad.Tensor | None


def forward_group(grids, params: ModelParams, rng=None, vae_sample: bool = True) -> GroupOutput:
    trace = encode(list(grids), params)
    root = trace.root
    kl = None
    decoder_input = root
    if params.f_rho is not None:
        if vae_sample:
            if rng is None:
                raise ValueError("VAE sampling needs an rng")
            decoder_input, kl = variational_head(params, root, rng)
        else:
            _, kl = variational_head(params, root, np.random.default_rng(0))
    Bs, Cs, _ = decode_teacher_forced(decoder_input, params, trace.n_blocks)
    return GroupOutput([], [make_targets(g) for g in grids], Bs, Cs, root, trace.layers[0], kl)


def group_loss(out: GroupOutput, weights: LossWeights, graph_scale) -> ad.Tensor:
    """Sum over the group of ``graph_scale[g] * loss_g``."""
    graph_scale = np.asarray(graph_scale, dtype=np.float64)
    G = len(out.targets)
    per = [_class_weights(t, weights) for t in out.targets]
    dtype = out.root.data.dtype
    total = None
    for s in range(len(out.B)):
        tb = np.stack([t.b[s] for t in out.targets])
        tc = np.stack([t.c[s] for t in out.targets])
        wb = np.stack([p[0][s] for p in per]) * graph_scale[:, None, None]
        wc = np.array([p[1] for p in per])[:, None, None] * graph_scale[:, None, None]
        wc = np.broadcast_to(wc, tc.shape)
        term = ad.add(ad.sum(ad.mul(ad.bce_with_logits(out.B[s], tb), wb.astype(dtype))),
                      ad.sum(ad.mul(ad.bce_with_logits(out.C[s], tc), wc.astype(dtype))))
        total = term if total is None else ad.add(total, term)
    if weights.emb_norm_weight:
        if weights.emb_norm_scope == "root":
            sq = ad.sum(ad.square(out.root), axis=-1)
        else:
            N = out.diagonal.shape[-2]
            sq = ad.scale(ad.sum(ad.sum(ad.square(out.diagonal), axis=-1), axis=-1), 1.0 / N)
        scale = (weights.emb_norm_weight * graph_scale).astype(dtype)
        total = ad.add(total, ad.sum(ad.mul(sq, scale.reshape(G))))
    if out.kl is not None and weights.kl_weight:
        scale = (weights.kl_weight * graph_scale).astype(dtype)
        total = ad.add(total, ad.sum(ad.mul(out.kl, scale.reshape(G))))
    return total


def group_by_blocks(grids) -> dict:
    groups = defaultdict(list)
    for k, g in enumerate(grids):
        groups[g.n_blocks].append(k)
    return dict(sorted(groups.items()))


def batch_loss(grids, params: ModelParams, weights: LossWeights, rng=None,
               vae_sample: bool = True, outputs: list | None = None) -> ad.Tensor:
    """Mean of per-graph losses weighted by ``n_blocks ** size_exponent``.

    Decoding is teacher-forced to each target's block count. Graphs are grouped
    by block count and every group is processed as one batch; groups are
    reduced in increasing block-count order. Forward outputs are appended to
    ``outputs`` when given.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("empty batch")
    gw = np.array([graph_weight(g.n_blocks, weights) for g in grids])
    gw = gw / gw.sum()
    total = None
    for _, idx in group_by_blocks(grids).items():
        out = forward_group([grids[k] for k in idx], params, rng, vae_sample)
        out.indices = idx
        if outputs is not None:
            outputs.append(out)
        term = group_loss(out, weights, gw[idx])
        total = term if total is None else ad.add(total, term)
    return total


def reconstruction_loss(B_logits, C_logits, target: PatchGrid, root_embedding, weights: LossWeights) -> ad.Tensor:
    """Loss of one graph from per-antidiagonal logits shaped ``(s + 1, l*l)``."""
    t = make_targets(target)
    if len(B_logits) != t.n_blocks or len(C_logits) != t.n_blocks:
        raise ValueError(f"decoded {len(B_logits)} antidiagonals, target needs {t.n_blocks}")
    for s, (b, c) in enumerate(zip(B_logits, C_logits)):
        if ad.as_tensor(b).shape != t.b[s].shape or ad.as_tensor(c).shape != t.c[s].shape:
            raise ValueError(f"antidiagonal {s}: logits shape does not match the target region")

    def lift(x):
        x = ad.as_tensor(x)
        return ad.reshape(x, (1,) + x.shape)

    root = lift(root_embedding)
    out = GroupOutput([0], [t], [lift(b) for b in B_logits], [lift(c) for c in C_logits],
                      root, ad.reshape(root, (1, 1) + root.shape[1:]), None)
    return group_loss(out, weights, [1.0])
