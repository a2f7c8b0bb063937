"""Recursive encoding of patch grids and decoding of embeddings back to graphs.

Encoder layers are indexed by the block offset ``d = I - J``: layer ``d`` holds
``x[J + d, J]`` for ``J = 1 .. N - d`` and is computed in one batched cell call
from layer ``d - 1``. Decoder antidiagonal ``s`` holds ``y[S, T]`` with
``S + T = s``, stored at position ``T``.

B and C logits live in "decoder coordinates": global entry ``(i, j)`` with
``i = S*l + a`` and ``j = T*l + b`` for entry ``(a, b)`` of block ``(S, T)``.
``B[i, j]`` estimates ``A[n-1-i, j]`` (0-based).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .cells import (ModelParams, border_cell_left, border_cell_right, decoder_cell,
                    encoder_cell)
from .graph import PatchGrid

STOP_RULES = ("target_consistent", "verbatim")


@dataclass
class EncodeTrace:
    layers: list
    n_blocks: int
    cell_invocations: int

    @property
    def root(self) -> Tensor:
        """Embedding of the whole graph; shape ``(G, m)`` for batched input."""
        return self.layers[-1][..., 0, :]

    @property
    def x(self) -> dict:
        """``{(I, J): embedding}`` for the first graph in the batch (1-based blocks)."""
        out = {}
        for d, layer in enumerate(self.layers):
            data = layer.data.reshape((-1,) + layer.shape[-2:])[0]
            for k in range(layer.shape[-2]):
                out[(k + 1 + d, k + 1)] = data[k]
        return out


@dataclass
class DecodeResult:
    A_hat: np.ndarray
    n_hat: int
    n_blocks: int
    B_logits: np.ndarray
    C_logits: np.ndarray
    truncated: bool = False
    cell_invocations: int = 0
    border_invocations: int = 0
    stop_means: list = field(default_factory=list)


def _as_grids(grids):
    if isinstance(grids, PatchGrid):
        return [grids], False
    grids = list(grids)
    if not grids:
        raise ValueError("no grids to encode")
    return grids, True


def encode(grids, params: ModelParams) -> EncodeTrace:
    """Run the encoder recursion on one grid or a list of grids of equal block count."""
    grids, batched = _as_grids(grids)
    N, l = grids[0].n_blocks, grids[0].l
    if any(g.n_blocks != N or g.l != l for g in grids):
        raise ValueError("batched grids must share n_blocks and l")
    if l != params.config.l:
        raise ValueError(f"grid patch side {l} != model patch side {params.config.l}")
    dtype = ad.default_dtype()

    def patches(d):
        stacked = np.stack([g.layer(d) for g in grids]).astype(dtype)
        return stacked if batched else stacked[0]

    layers = [encoder_cell(params, None, None, patches(0))]
    invocations = N
    for d in range(1, N):
        prev = layers[-1]
        x0 = prev[..., :-1, :]
        x1 = prev[..., 1:, :]
        layers.append(encoder_cell(params, x0, x1, patches(d)))
        invocations += N - d
    return EncodeTrace(layers, N, invocations)


def encode_blockwise(grid: PatchGrid, params: ModelParams, rng=None, log=None) -> dict:
    """Reference encoder evaluating one block at a time.

    With ``rng`` the blocks inside each layer are visited in random order.
    ``log`` (a list) receives ``("read"|"write", (I, J))`` events.
    """
    N = grid.n_blocks
    x: dict = {}
    dtype = ad.default_dtype()
    for d in range(N):
        cols = list(range(1, N - d + 1))
        if rng is not None:
            rng.shuffle(cols)
        for J in cols:
            I = J + d
            a = grid.block(I, J).reshape(-1).astype(dtype)
            if d == 0:
                x0 = x1 = None
            else:
                for key in ((I - 1, J), (I, J + 1)):
                    if log is not None:
                        log.append(("read", key))
                    if key not in x:
                        raise RuntimeError(f"x{key} read before it was written")
                x0, x1 = x[(I - 1, J)], x[(I, J + 1)]
            x[(I, J)] = encoder_cell(params, x0, x1, a)
            if log is not None:
                log.append(("write", (I, J)))
    return x


def _next_antidiagonal(params: ModelParams, Y: Tensor, left: Tensor, right: Tensor) -> Tensor:
    h = params.config.half
    s = Y.shape[-2] - 1
    top = border_cell_left(params, Y[..., s:s + 1, :h])
    side = border_cell_right(params, Y[..., 0:1, h:])
    new_left = ad.concat([left, top], axis=-2)
    new_right = ad.concat([side, right], axis=-2)
    return ad.concat([new_left, new_right], axis=-1)


def decode_teacher_forced(x: Tensor, params: ModelParams, n_blocks: int):
    """Decode exactly ``n_blocks`` antidiagonals.

    ``x`` has shape ``(..., m)``. Returns lists of B and C logit tensors, entry
    ``s`` shaped ``(..., s + 1, l*l)``, plus the decoder cell count per graph.
    """
    x = ad.as_tensor(x)
    Y = ad.reshape(x, x.shape[:-1] + (1, x.shape[-1]))
    Bs, Cs = [], []
    count = 0
    for s in range(n_blocks):
        left, right, b, c = decoder_cell(params, Y)
        count += s + 1
        Bs.append(b)
        Cs.append(c)
        if s + 1 < n_blocks:
            Y = _next_antidiagonal(params, Y, left, right)
    return Bs, Cs, count


@functools.lru_cache(maxsize=None)
def antidiagonal_indices(s: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Global decoder coordinates ``(i, j)`` of antidiagonal ``s``, shape ``(s+1, l*l)``."""
    T = np.arange(s + 1)[:, None]
    S = s - T
    a, b = np.divmod(np.arange(l * l), l)
    i = S * l + a[None, :]
    j = T * l + b[None, :]
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def _scatter(values_per_diag, l: int, n_blocks: int) -> np.ndarray:
    size = n_blocks * l
    out = np.full((size, size), np.nan, dtype=np.float64)
    for s, vals in enumerate(values_per_diag[:n_blocks]):
        i, j = antidiagonal_indices(s, l)
        out[i, j] = vals
    return out


def infer_exact_size(C_logits, n_blocks: int, l: int) -> int:
    """Pick the vertex count whose size-indicator pattern best matches ``C``.

    ``C_logits`` is a dense decoder-coordinate matrix (NaN where not produced)
    or a list of per-antidiagonal arrays. Candidates are
    ``(n_blocks-1)*l + 1 .. n_blocks*l``; ties go to the smaller count.
    """
    if not isinstance(C_logits, np.ndarray):
        C_logits = _scatter([np.asarray(c) for c in C_logits], l, n_blocks)
    produced = ~np.isnan(C_logits)
    i, j = np.nonzero(produced)
    predicted = C_logits[i, j] >= 0
    best_n, best_score = None, -1
    for n in range((n_blocks - 1) * l + 1, n_blocks * l + 1):
        score = int(np.count_nonzero(predicted == (i + j <= n - 2)))
        if score > best_score:
            best_n, best_score = n, score
    return best_n


def remap_B_to_A(B_logits, n_hat: int, threshold: float = 0.5) -> np.ndarray:
    """Threshold decoder-coordinate logits and reindex them into an adjacency matrix.

    ``B_logits`` may be a dense matrix (NaN = missing) or a dict ``{(i, j): logit}``.
    """
    if n_hat < 1:
        raise ValueError(f"n_hat must be positive, got {n_hat}")
    cut = np.log(threshold / (1 - threshold))
    A = np.zeros((n_hat, n_hat), dtype=np.int8)
    for i in range(n_hat - 1):
        for j in range(n_hat - 1 - i):
            if isinstance(B_logits, dict):
                if (i, j) not in B_logits:
                    raise KeyError(f"B entry ({i}, {j}) missing")
                v = B_logits[(i, j)]
            else:
                if i >= B_logits.shape[0] or j >= B_logits.shape[1] or np.isnan(B_logits[i, j]):
                    raise KeyError(f"B entry ({i}, {j}) missing")
                v = B_logits[i, j]
            if v >= cut:
                A[n_hat - 1 - i, j] = 1
    return A + A.T


def decode(x, params: ModelParams, l: int | None = None, max_blocks: int = 64,
           stop_rule: str = "target_consistent", threshold: float = 0.5) -> DecodeResult:
    """Free-running decode of a single embedding with size inference.

    After antidiagonal ``s`` is produced, decoding stops when the mean of
    sigmoid(C) over it falls below 0.5; the block count is then ``s + 1``
    (``s + 2`` under the ``verbatim`` rule, which decodes one more
    antidiagonal). Hitting ``max_blocks`` sets ``truncated``.
    """
    if stop_rule not in STOP_RULES:
        raise ValueError(f"unknown stop rule {stop_rule!r}")
    l = params.config.l if l is None else l
    if l != params.config.l:
        raise ValueError(f"patch side {l} != model patch side {params.config.l}")
    if max_blocks < 1:
        raise ValueError("max_blocks must be positive")
    extra = 1 if stop_rule == "verbatim" else 0
    with ad.no_grad():
        x = ad.as_tensor(np.asarray(ad.as_tensor(x).data, dtype=ad.default_dtype()))
        if x.shape != (params.config.m,):
            raise ad.ShapeError("decode", x.shape, (params.config.m,))
        Y = ad.reshape(x, (1, x.shape[0]))
        Bs, Cs, means = [], [], []
        cells = borders = 0
        n_blocks, truncated = None, False
        s = 0
        while True:
            left, right, b, c = decoder_cell(params, Y)
            cells += s + 1
            Bs.append(b.data)
            Cs.append(c.data)
            if n_blocks is not None and s + 1 >= n_blocks:
                break
            if n_blocks is None:
                mean = float(np.mean(ad._sigmoid(c.data.astype(np.float64))))
                means.append(mean)
                if mean < 0.5:
                    n_blocks = s + 1 + extra
                    if n_blocks > max_blocks:
                        n_blocks, truncated = max_blocks, True
                    if s + 1 >= n_blocks:
                        break
                elif s + 1 >= max_blocks:
                    n_blocks, truncated = max_blocks, True
                    break
            Y = _next_antidiagonal(params, Y, left, right)
            borders += 2
            s += 1
    B = _scatter(Bs, l, n_blocks)
    C = _scatter(Cs, l, n_blocks)
    n_hat = infer_exact_size(C, n_blocks, l)
    A_hat = remap_B_to_A(B, n_hat, threshold)
    return DecodeResult(A_hat, n_hat, n_blocks, B, C, truncated, cells, borders, means)
