"""Flat binary parameter checkpoints.

Layout: magic bytes ``PCN1``, then one record per parameter:
uint32 name length, UTF-8 name, uint32 rank, uint64 extents,
raw little-endian float64 data in row-major order.  Round trips are
bit-exact.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor

MAGIC = b"PCN1"


class CheckpointError(ValueError):
    pass


def save_params(path, params: dict[str, Tensor]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, tensor in params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            # asarray keeps 0-d scalars 0-d (ascontiguousarray would not)
            arr = np.asarray(tensor.data, dtype="<f8", order="C")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_params(path) -> dict[str, Tensor]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a parameter checkpoint (bad magic)")
    params: dict[str, Tensor] = {}
    off = 4
    try:
        while off < len(blob):
            (nlen,) = struct.unpack_from("<I", blob, off)
            off += 4
            name = blob[off:off + nlen].decode("utf-8")
            off += nlen
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            shape = struct.unpack_from(f"<{rank}Q", blob, off)
            off += 8 * rank
            count = int(np.prod(shape)) if rank else 1
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
            off += 8 * count
            params[name] = Tensor(data.reshape(shape).copy(), requires_grad=True,
                                  name=name)
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint ({e})")
    if off != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after last record")
    return params
