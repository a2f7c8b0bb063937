"""Gated encoder/decoder cells and the feedforward networks behind them.

All cells act on the last axis and accept any number of leading batch axes,
so one call can process a whole layer of the recursion at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor


@dataclass(frozen=True)
class CellConfig:
    m: int
    l: int
    encoder_hidden: tuple = (64,)
    decoder_hidden: tuple = (64,)
    vae: bool = False
    # initial bias of the log-std head; see variational_head
    vae_init_log_std: float = -8.0

    def __post_init__(self):
        if self.m <= 0 or self.m % 2:
            raise ValueError(f"embedding size m must be even and positive, got {self.m}")
        if self.l < 1:
            raise ValueError(f"patch side l must be positive, got {self.l}")
        object.__setattr__(self, "encoder_hidden", tuple(int(w) for w in self.encoder_hidden))
        object.__setattr__(self, "decoder_hidden", tuple(int(w) for w in self.decoder_hidden))
        for w in self.encoder_hidden + self.decoder_hidden:
            if w <= 0:
                raise ValueError(f"hidden widths must be positive, got {w}")

    @property
    def half(self) -> int:
        return self.m // 2

    @property
    def patch(self) -> int:
        return self.l * self.l

    @property
    def border_hidden(self) -> tuple:
        return tuple(max(1, -(-w // 2)) for w in self.decoder_hidden)


class MLP:
    """ELU hidden layers followed by a linear output layer."""

    def __init__(self, name: str, sizes, rng: np.random.Generator):
        self.name = name
        self.layers = []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = Parameter(rng.uniform(-bound, bound, size=(fan_in, fan_out)), f"{name}.{k}.weight")
            b = Parameter(np.zeros(fan_out), f"{name}.{k}.bias")
            self.layers.append((w, b))

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for k, (w, b) in enumerate(self.layers):
            x = ad.add(ad.matmul(x, w), b)
            if k < last:
                x = ad.elu(x)
        return x

    def parameters(self) -> list[Parameter]:
        return [p for wb in self.layers for p in wb]


class ModelParams:
    """All trainable weights: f_e, f_d, f_d1, f_d2 and, in VAE mode, f_rho."""

    def __init__(self, config: CellConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        m, h, p = config.m, config.half, config.patch
        self.f_e = MLP("f_e", (2 * m + p, *config.encoder_hidden, 3 * m), rng)
        self.f_d = MLP("f_d", (m, *config.decoder_hidden, 4 * h + 2 * p), rng)
        self.f_d1 = MLP("f_d1", (h, *config.border_hidden, 2 * h), rng)
        self.f_d2 = MLP("f_d2", (h, *config.border_hidden, 2 * h), rng)
        self.f_rho = None
        if config.vae:
            self.f_rho = MLP("f_rho", (m, m, m), rng)
            self.f_rho.layers[-1][1].data[:] = config.vae_init_log_std

    def networks(self) -> list[MLP]:
        nets = [self.f_e, self.f_d, self.f_d1, self.f_d2]
        return nets + ([self.f_rho] if self.f_rho is not None else [])

    def parameters(self) -> list[Parameter]:
        return [p for net in self.networks() for p in net.parameters()]

    def named_parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def _check_last(name: str, t: Tensor, size: int):
    if t.shape[-1] != size:
        raise ad.ShapeError(name, t.shape, (size,))


def _gate(keep: Tensor, logits: Tensor, candidate: Tensor) -> Tensor:
    """keep * s + psi(candidate) * (1 - s) with s = sigmoid(logits)."""
    s = ad.sigmoid(logits)
    cand = ad.elu(candidate)
    return ad.add(cand, ad.mul(ad.sub(keep, cand), s))


def encoder_cell(params: ModelParams, x0, x1, a) -> Tensor:
    """Merge two sub-embeddings and a flattened patch into one embedding.

    ``None`` stands for the null embedding (zeros).
    """
    cfg = params.config
    a = ad.as_tensor(a)
    _check_last("encoder_cell", a, cfg.patch)
    lead = a.shape[:-1]
    zeros = np.zeros(lead + (cfg.m,), dtype=a.data.dtype)
    x0 = ad.as_tensor(zeros if x0 is None else x0)
    x1 = ad.as_tensor(zeros if x1 is None else x1)
    _check_last("encoder_cell", x0, cfg.m)
    _check_last("encoder_cell", x1, cfg.m)
    z0, z1, xh = ad.split(params.f_e(ad.concat([x0, x1, a])), [cfg.m] * 3)
    mixed = ad.add(x1, ad.mul(ad.sub(x0, x1), ad.sigmoid(z0)))
    return _gate(mixed, z1, xh)


def decoder_cell(params: ModelParams, y):
    """Split an embedding into two half-embeddings plus B and C patch logits."""
    cfg = params.config
    y = ad.as_tensor(y)
    _check_last("decoder_cell", y, cfg.m)
    h, p = cfg.half, cfg.patch
    z1, z2, y1h, y2h, b, c = ad.split(params.f_d(y), [h, h, h, h, p, p])
    y1, y2 = ad.split(y, [h, h])
    return _gate(y1, z1, y1h), _gate(y2, z2, y2h), b, c


def _border(net: MLP, name: str, half: int, y) -> Tensor:
    y = ad.as_tensor(y)
    _check_last(name, y, half)
    z, yh = ad.split(net(y), [half, half])
    return _gate(y, z, yh)


def border_cell_left(params: ModelParams, y_prime) -> Tensor:
    return _border(params.f_d1, "border_cell_left", params.config.half, y_prime)


def border_cell_right(params: ModelParams, y_dprime) -> Tensor:
    return _border(params.f_d2, "border_cell_right", params.config.half, y_dprime)


def variational_head(params: ModelParams, x, rng: np.random.Generator):
    """Sample ``x + xi * exp(rho)`` and the KL divergence to N(0, I).

    ``rho = f_rho(x)`` holds log standard deviations. The KL is summed over the
    last axis, one value per embedding.
    """
    if params.f_rho is None:
        raise ValueError("variational head requested but the model was built without vae")
    x = ad.as_tensor(x)
    rho = params.f_rho(x)
    xi = rng.standard_normal(x.shape).astype(x.data.dtype)
    sample = ad.add(x, ad.mul(xi, ad.exp(rho)))
    terms = ad.sub(ad.add(ad.exp(ad.scale(rho, 2.0)), ad.square(x)), ad.add(ad.scale(rho, 2.0), 1.0))
    kl = ad.scale(ad.sum(terms, axis=-1), 0.5)
    return sample, kl
