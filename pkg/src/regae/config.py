"""Run configuration: validated dataclass, TOML files and shipped presets."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .cells import CellConfig
from .codec import STOP_RULES
from .losses import LossWeights


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str = "desk-memorize"
    data_dir: str = "data"
    m: int = 32
    l: int = 1
    encoder_hidden: list = field(default_factory=lambda: [64])
    decoder_hidden: list = field(default_factory=lambda: [64])
    lr: float = 3e-4
    batch: int = 32
    grad_clip: float = 1.0
    rpb: float = 0.5
    mask_weight: float = 0.5
    emb_norm_weight: float = 0.2
    emb_norm_scope: str = "root"
    size_exponent: float = 1.0
    vae: bool = False
    kl_weight: float = 0.01
    vae_init_log_std: float = -8.0
    patience: int = 20
    max_epochs: int = 1000
    stop_loss: float = 0.0
    seed: int = 0
    split_ratios: list = field(default_factory=lambda: [0.7, 0.15, 0.15])
    augmentation: int = 0
    curriculum_start: float = 0.25
    curriculum_threshold: float = 0.8
    curriculum_step: float = 0.25
    curriculum_min_size: int = 2
    max_blocks: int = 0
    stop_rule: str = "target_consistent"
    threshold: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self):
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")

        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            expected = f.type
            if expected == "int":
                need(isinstance(value, int) and not isinstance(value, bool), f.name, "expected an integer")
            elif expected == "float":
                if isinstance(value, int) and not isinstance(value, bool):
                    value = float(value)
                    setattr(self, f.name, value)
                need(isinstance(value, float) and math.isfinite(value), f.name, "expected a finite number")
            elif expected == "bool":
                need(isinstance(value, bool), f.name, "expected true/false")
            elif expected == "str":
                need(isinstance(value, str), f.name, "expected a string")
            elif expected == "list":
                need(isinstance(value, (list, tuple)), f.name, "expected a list")
                setattr(self, f.name, list(value))
        need(self.m > 0 and self.m % 2 == 0, "m", "must be even and positive")
        need(self.l >= 1, "l", "must be positive")
        for key in ("encoder_hidden", "decoder_hidden"):
            vals = getattr(self, key)
            need(vals and all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in vals),
                 key, "must be a non-empty list of positive integers")
        need(self.lr > 0, "lr", "must be positive")
        need(self.batch >= 1, "batch", "must be positive")
        need(self.grad_clip > 0, "grad_clip", "must be positive")
        need(0 < self.rpb < 1, "rpb", "must lie in (0, 1)")
        for key in ("mask_weight", "emb_norm_weight", "size_exponent", "kl_weight", "stop_loss"):
            need(getattr(self, key) >= 0, key, "must be non-negative")
        need(self.emb_norm_scope in ("root", "diagonal"), "emb_norm_scope", "must be 'root' or 'diagonal'")
        need(self.patience >= 0, "patience", "must be non-negative")
        need(self.max_epochs >= 1, "max_epochs", "must be positive")
        need(len(self.split_ratios) == 3 and all(isinstance(r, (int, float)) and r >= 0 for r in self.split_ratios)
             and abs(sum(self.split_ratios) - 1) < 1e-9, "split_ratios", "must be three non-negative numbers summing to 1")
        self.split_ratios = [float(r) for r in self.split_ratios]
        need(self.augmentation >= 0, "augmentation", "must be non-negative")
        need(0 < self.curriculum_start <= 1, "curriculum_start", "must lie in (0, 1]")
        need(0 <= self.curriculum_threshold <= 1, "curriculum_threshold", "must lie in [0, 1]")
        need(self.curriculum_step > 0, "curriculum_step", "must be positive")
        need(self.curriculum_min_size >= 1, "curriculum_min_size", "must be positive")
        need(self.max_blocks >= 0, "max_blocks", "must be non-negative (0 = automatic)")
        need(self.stop_rule in STOP_RULES, "stop_rule", f"must be one of {STOP_RULES}")
        need(0 < self.threshold < 1, "threshold", "must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return RunConfig.from_dict({**self.to_dict(), **changes})

    def cell_config(self) -> CellConfig:
        return CellConfig(self.m, self.l, tuple(self.encoder_hidden), tuple(self.decoder_hidden),
                          self.vae, self.vae_init_log_std)

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.rpb, self.mask_weight, self.emb_norm_weight, self.size_exponent,
                           self.kl_weight, self.emb_norm_scope)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to TOML")


def dumps_toml(d: dict) -> str:
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in d.items())


def save_config(path, config: RunConfig) -> None:
    Path(path).write_text(dumps_toml(config.to_dict()))


def load_config(path) -> RunConfig:
    """Read a TOML config; a ``preset`` key pulls defaults from a shipped preset."""
    try:
        d = tomllib.loads(Path(path).read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    preset = d.pop("preset", None)
    if preset is not None:
        return get_preset(preset).replace(**d)
    return RunConfig.from_dict(d)


def parse_override(text: str) -> dict:
    """``key=value`` with the value parsed as a TOML literal (bare words become strings)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return {key.strip(): value}


# Table values per dataset: emb, encoder, decoder, patch, lr, clip, rpb, batch, augmentation
_TABLE = {
    "grid-medium": (200, [2048], [2048], 4, 0.0003, 1.0, 0.3, 32, 99),
    "imdb-binary": (160, [1024, 768], [2048], 4, 0.0005, 1.0, 0.5, 64, 9),
    "imdb-multi": (104, [1024], [2048], 8, 0.0005, 1.0, 0.5, 64, 9),
    "collab": (604, [2048, 1536], [4096], 16, 0.0003, 0.5, 0.3, 32, 9),
    "reddit-binary": (1720, [4096], [6144], 64, 0.0003, 1.0, 0.03, 32, 0),
    "reddit-multi-5k": (2036, [4096], [6144], 64, 0.0003, 0.5, 0.03, 32, 0),
    "reddit-multi-12k": (1564, [4096], [6144], 64, 0.0003, 0.5, 0.03, 32, 0),
}

TU_NAMES = {
    "imdb-binary": "IMDB-BINARY",
    "imdb-multi": "IMDB-MULTI",
    "collab": "COLLAB",
    "reddit-binary": "REDDIT-BINARY",
    "reddit-multi-5k": "REDDIT-MULTI-5K",
    "reddit-multi-12k": "REDDIT-MULTI-12K",
}


def _table_preset(name: str) -> RunConfig:
    m, enc, dec, l, lr, clip, rpb, batch, aug = _TABLE[name]
    return RunConfig(dataset=name, m=m, l=l, encoder_hidden=enc, decoder_hidden=dec, lr=lr,
                     grad_clip=clip, rpb=rpb, batch=batch, augmentation=aug, patience=20,
                     max_epochs=10000, mask_weight=0.5, emb_norm_weight=0.2)


PRESET_NAMES = tuple(_TABLE) + ("desk", "desk-grid")


def get_preset(name: str) -> RunConfig:
    if name in _TABLE:
        return _table_preset(name)
    if name == "desk":
        # small memorization model used by the test-suite
        return RunConfig(dataset="desk-memorize", m=32, l=1, encoder_hidden=[64], decoder_hidden=[64],
                         lr=3e-4, rpb=0.5, batch=1, curriculum_start=1.0, patience=2000,
                         max_epochs=2000, stop_loss=0.0)
    if name == "desk-grid":
        return RunConfig(dataset="grid-small", m=64, l=2, encoder_hidden=[256], decoder_hidden=[256],
                         lr=1e-3, rpb=0.5, batch=8, augmentation=20, patience=20, max_epochs=300)
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
