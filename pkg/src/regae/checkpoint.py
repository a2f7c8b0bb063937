"""Binary checkpoints and embedding files.

Checkpoint layout (all integers little-endian)::

    b"REGAECKP"  u32 version  u32 header_len  header (UTF-8 JSON, sorted keys)
    payload: for every parameter in header order, data | adam m | adam v as <f4

The header records the config snapshot, free-form metadata and, per
parameter, its name, shape and Adam step. Encoding is canonical, so
load followed by save reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .cells import ModelParams
from .config import RunConfig

MAGIC = b"REGAECKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps_checkpoint(params: ModelParams, config: RunConfig, meta: dict | None = None) -> bytes:
    entries, chunks = [], []
    for p in params.parameters():
        entries.append({"name": p.name, "shape": list(p.shape), "step": int(p.step)})
        for arr in (p.data, p.m, p.v):
            chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    header = {"config": config.to_dict(), "meta": meta or {}, "params": entries}
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<II", VERSION, len(raw)) + raw + b"".join(chunks)


def save_checkpoint(path, params: ModelParams, config: RunConfig, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_checkpoint(params, config, meta))


def loads_checkpoint(blob: bytes):
    """Returns ``(params, config, meta)``."""
    if blob[:8] != MAGIC:
        raise CheckpointError("not a regae checkpoint")
    version, hlen = struct.unpack_from("<II", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    header = json.loads(blob[16:16 + hlen])
    config = RunConfig.from_dict(header["config"])
    params = ModelParams(config.cell_config(), seed=0)
    named = params.named_parameters()
    offset = 16 + hlen
    if [e["name"] for e in header["params"]] != list(named):
        raise CheckpointError("checkpoint parameters do not match the configured model")
    for entry in header["params"]:
        p = named[entry["name"]]
        shape = tuple(entry["shape"])
        if shape != p.shape:
            raise CheckpointError(f"{p.name}: shape {shape} != model shape {p.shape}")
        size = int(np.prod(shape)) * 4
        arrays = []
        for _ in range(3):
            if offset + size > len(blob):
                raise CheckpointError("truncated checkpoint payload")
            arrays.append(np.frombuffer(blob, dtype="<f4", count=size // 4, offset=offset)
                          .reshape(shape).astype(np.float32))
            offset += size
        p.data, p.m, p.v = arrays
        p.step = int(entry["step"])
    if offset != len(blob):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return params, config, header["meta"]


def load_checkpoint(path):
    return loads_checkpoint(Path(path).read_bytes())


def write_embedding(path, x) -> None:
    x = np.asarray(x, dtype="<f4").reshape(-1)
    Path(path).write_bytes(struct.pack("<I", x.size) + x.tobytes())


def read_embedding(path, m: int | None = None) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise CheckpointError(f"{path}: embedding file too short")
    (size,) = struct.unpack_from("<I", blob)
    if len(blob) != 4 + 4 * size:
        raise CheckpointError(f"{path}: header says {size} values, file holds {(len(blob) - 4) / 4:g}")
    if m is not None and size != m:
        raise CheckpointError(f"{path}: embedding length {size} != model dimension {m}")
    return np.frombuffer(blob, dtype="<f4", offset=4).astype(np.float32)
