"""Adam and global-norm gradient clipping for :class:`~regae.autodiff.Parameter`."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .autodiff import Parameter


def global_grad_norm(params: Iterable[Parameter]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            g = p.grad.astype(np.float64)
            total += float(np.sum(g * g))
    return math.sqrt(total)


def clip_global_norm(params, max_norm: float) -> float:
    """Rescale all gradients jointly so their global L2 norm is at most ``max_norm``.

    Returns the norm measured before clipping.
    """
    params = list(params)
    norm = global_grad_norm(params)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * factor).astype(p.data.dtype)
    return norm


def adam_step(params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    b1, b2 = betas
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.step += 1
        p.m = b1 * p.m + (1 - b1) * g
        p.v = b2 * p.v + (1 - b2) * g * g
        m_hat = p.m / (1 - b1 ** p.step)
        v_hat = p.v / (1 - b2 ** p.step)
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.data.dtype)
        p.m = p.m.astype(p.data.dtype)
        p.v = p.v.astype(p.data.dtype)
        p.grad = None


def zero_grad(params) -> None:
    for p in params:
        p.grad = None
