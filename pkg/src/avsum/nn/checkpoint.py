"""Single-file weight checkpoints.

Layout (little-endian)::

    b"AVCK"  u32 version=1  u32 header_len  header (UTF-8 JSON)  payload

The header carries ``meta`` (architecture, architecture hash, seed, epoch,
...) and a ``tensors`` table of ``{name, shape, dtype, offset, nbytes}``
into the payload, where each tensor is stored as raw row-major floats.
Nothing time-dependent is written, so identical weights give identical
files.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from avsum.errors import BadMagicError, FormatError, TruncatedPayloadError

MAGIC = b"AVCK"
VERSION = 1
_HEAD = struct.Struct("<4sII")
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8"}


def arch_hash(arch: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(arch, sort_keys=True).encode()).hexdigest()[:16]


def save_checkpoint(path: str | os.PathLike, state: dict[str, torch.Tensor], meta: dict[str, Any]) -> None:
    table, chunks, offset = [], [], 0
    for name in sorted(state):
        t = state[name].detach().cpu().contiguous()
        dtype = _DTYPES.get(t.dtype)
        if dtype is None:
            raise FormatError(f"unsupported tensor dtype {t.dtype} for {name}")
        raw = t.numpy().astype(dtype, copy=False).tobytes()
        table.append({"name": name, "shape": list(t.shape), "dtype": dtype, "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "tensors": table}, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, torch.Tensor], dict[str, Any]]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise TruncatedPayloadError(f"{path}: shorter than checkpoint header")
    magic, version, hlen = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    start = _HEAD.size + hlen
    header = json.loads(raw[_HEAD.size:start].decode("utf-8"))
    payload = raw[start:]
    state = {}
    for entry in header["tensors"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(payload):
            raise TruncatedPayloadError(f"{path}: tensor {entry['name']} runs past end of file")
        arr = np.frombuffer(payload[lo:hi], dtype=entry["dtype"]).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(arr.dtype.newbyteorder("=")).copy())
    return state, header["meta"]


def file_digest(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
