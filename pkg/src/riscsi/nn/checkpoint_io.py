"""
``RCKP`` checkpoint files.

Layout (all integers little-endian)::

    b"RCKP"               magic
    u32 version           currently 1
    u32 n                 length of the descriptor
    n bytes               UTF-8 JSON NetworkSpec descriptor (layer list with sizes)
    u32 flags             reserved, 0 (no optimizer state)
    f32[...]              per layer in order: dense/conv W then b, batchnorm gamma then beta
    f32[...]              per batchnorm layer in order: running_mean then running_var

Array shapes follow from the descriptor: dense ``W`` is ``(in, out)``, conv
``W`` is ``(k, k, in, out)``.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .network import BUFFERS, TRAINABLE, Checkpoint, NetworkSpec

MAGIC = b"RCKP"
VERSION = 1
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    pass


def _shapes(spec: NetworkSpec, kind_table):
    for i, layer in enumerate(spec.layers):
        for name in kind_table.get(layer.kind, ()):
            if name == "W":
                shape = ((layer.in_size, layer.out_size) if layer.kind == "dense"
                         else (layer.kernel, layer.kernel, layer.in_size, layer.out_size))
            elif name == "b":
                shape = (layer.out_size,)
            else:
                shape = (layer.in_size,)
            yield i, name, shape


def to_bytes(ckpt: Checkpoint) -> bytes:
    desc = json.dumps(ckpt.spec.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(desc)))
    buf.write(desc)
    buf.write(struct.pack("<I", 0))
    for table in (TRAINABLE, BUFFERS):
        for i, name, shape in _shapes(ckpt.spec, table):
            arr = ckpt.params[i][name]
            if arr.shape != shape:
                raise FormatError(f"layer {i} {name}: shape {arr.shape} != {shape}")
            buf.write(np.ascontiguousarray(arr, dtype=_F32).tobytes())
    return buf.getvalue()


def from_bytes(data: bytes) -> Checkpoint:
    if data[:4] != MAGIC:
        raise FormatError("not an RCKP checkpoint (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported RCKP version {version}")
    off = 12
    spec = NetworkSpec.from_dict(json.loads(data[off:off + n].decode()))
    off += n
    (flags,) = struct.unpack_from("<I", data, off)
    off += 4
    if flags != 0:
        raise FormatError(f"unsupported RCKP flags {flags:#x}")
    params = [dict() for _ in spec.layers]
    for table in (TRAINABLE, BUFFERS):
        for i, name, shape in _shapes(spec, table):
            count = int(np.prod(shape))
            if off + 4 * count > len(data):
                raise FormatError("truncated RCKP file")
            params[i][name] = np.frombuffer(data, _F32, count, off).reshape(shape).astype(np.float32)
            off += 4 * count
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes in RCKP file")
    for i, layer in enumerate(spec.layers):
        if layer.kind == "batchnorm" and not np.all(params[i]["running_var"] > 0):
            raise FormatError(f"layer {i}: running variance must be > 0")
    return Checkpoint(spec, params)


def save_checkpoint(ckpt: Checkpoint, path) -> str:
    """Write ``ckpt`` and return the SHA-256 of the file contents."""
    data = to_bytes(ckpt)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return from_bytes(path.read_bytes())


def checkpoint_id(ckpt: Checkpoint) -> str:
    return hashlib.sha256(to_bytes(ckpt)).hexdigest()[:16]
