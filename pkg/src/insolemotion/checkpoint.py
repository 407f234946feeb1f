"""Binary checkpoint format for named tensors plus JSON metadata.

Layout (little-endian)::

    b"S2M1"  u32 version  u32 meta_len  meta (UTF-8 JSON)
    u32 n_tensors
    n_tensors x [u16 name_len, name, u8 dtype, u8 ndim, ndim x u32 dims, u64 offset]
    payload: concatenated tensors (f4, f8 or i8), offsets relative to payload start

The metadata carries the model kind and config, skeleton, sensor layout,
run config, status and the SHA-256 of the payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .data.preprocess import StandardizationStats
from .data.types import Skeleton
from .errors import DataError

MAGIC = b"S2M1"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
DTYPE_CODES = {v: k for k, v in DTYPES.items()}
STATS_PREFIX = "stats."


def _dtype_code(arr: np.ndarray) -> int:
    if arr.dtype.kind == "f":
        return 1 if arr.dtype.itemsize == 8 else 0
    if arr.dtype.kind in "iu":
        return 2
    raise DataError(f"cannot store tensors of dtype {arr.dtype}")


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> str:
    """Write tensors (float64 kept, other floats as float32, ints as int64); returns the payload hash."""
    names = sorted(tensors)
    blobs, table = [], []
    offset = 0
    for name in names:
        arr = np.asarray(tensors[name])
        code = _dtype_code(arr)
        data = np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes()
        table.append((name, code, arr.shape, offset))
        blobs.append(data)
        offset += len(data)
    payload = b"".join(blobs)
    digest = hashlib.sha256(payload).hexdigest()
    meta = dict(meta, payload_sha256=digest)
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    out = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes, struct.pack("<I", len(names))]
    for name, code, shape, off in table:
        nb = name.encode()
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<BB", code, len(shape)))
        out.append(struct.pack(f"<{len(shape)}I", *shape) + struct.pack("<Q", off))
    out.append(payload)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(out))
    tmp.replace(path)
    return digest


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:4] != MAGIC:
        raise DataError(f"{path} is not a checkpoint (bad magic)")
    try:
        version, meta_len = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        pos = 12
        meta = json.loads(raw[pos:pos + meta_len])
        pos += meta_len
        (n,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        table = []
        for _ in range(n):
            (nlen,) = struct.unpack_from("<H", raw, pos)
            pos += 2
            name = raw[pos:pos + nlen].decode()
            pos += nlen
            code, ndim = struct.unpack_from("<BB", raw, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}I", raw, pos)
            pos += 4 * ndim
            (off,) = struct.unpack_from("<Q", raw, pos)
            pos += 8
            table.append((name, code, shape, off))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint header in {path}: {exc}") from exc
    payload = raw[pos:]
    if hashlib.sha256(payload).hexdigest() != meta.get("payload_sha256"):
        raise DataError(f"checkpoint payload hash mismatch in {path}")
    tensors = {}
    for name, code, shape, off in table:
        dt = DTYPES[code]
        count = int(np.prod(shape)) if shape else 1
        end = off + count * dt.itemsize
        if end > len(payload):
            raise DataError(f"tensor {name} runs past the end of {path}")
        tensors[name] = np.frombuffer(payload[off:end], dtype=dt).reshape(shape).copy()
    return tensors, meta


def model_tensors(model, stats: StandardizationStats | None = None, with_optimizer: bool = True) -> dict:
    out = {}
    for name, p in model.named_parameters():
        out[f"param.{name}"] = p.data
        if with_optimizer:
            out[f"adam_m.{name}"] = p.adam_m
            out[f"adam_v.{name}"] = p.adam_v
    if stats is not None:
        for k, v in stats.arrays().items():
            out[STATS_PREFIX + k] = v
    return out


def restore_model(model, tensors: dict[str, np.ndarray], with_optimizer: bool = True) -> None:
    state = {k[len("param."):]: v for k, v in tensors.items() if k.startswith("param.")}
    model.load_state_dict(state, strict=True)
    if with_optimizer:
        for name, p in model.named_parameters():
            if f"adam_m.{name}" in tensors:
                p.adam_m[...] = tensors[f"adam_m.{name}"]
                p.adam_v[...] = tensors[f"adam_v.{name}"]


def stats_from_tensors(tensors: dict[str, np.ndarray]) -> StandardizationStats:
    arrays = {k[len(STATS_PREFIX):]: v.astype(np.float64) for k, v in tensors.items() if k.startswith(STATS_PREFIX)}
    if not arrays:
        raise DataError("checkpoint carries no standardization stats")
    return StandardizationStats.from_arrays(arrays)


def check_skeleton(meta: dict, skeleton: Skeleton, what: str = "data") -> None:
    """Refuse to combine a checkpoint with data or another checkpoint built on a different skeleton."""
    have = meta.get("skeleton_hash")
    if have != skeleton.content_hash():
        raise DataError(f"skeleton mismatch: checkpoint {have} vs {what} {skeleton.content_hash()}")
