"""Binary checkpoint format.

Layout (little-endian): magic ``ENFN``, u32 version, u32 array count, then per
array: u16 name length, name bytes (utf-8), u8 rank, rank x u32 dims, float32
data in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"ENFN"
VERSION = 1


def save_arrays(path, arrays):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_arrays(path):
    """Read a checkpoint back as float64 arrays, in file order."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ParseError(f"{path}: bad checkpoint magic")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(buf):
            raise ParseError(f"{path}: truncated checkpoint")
        vals = struct.unpack_from(fmt, buf, pos)
        pos += size
        return vals

    version, count = take("<II")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    out = {}
    for _ in range(count):
        (nlen,) = take("<H")
        name = buf[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = take("<B")
        dims = take(f"<{rank}I") if rank else ()
        n = int(np.prod(dims)) if rank else 1
        if pos + 4 * n > len(buf):
            raise ParseError(f"{path}: truncated data for {name}")
        arr = np.frombuffer(buf, dtype="<f4", count=n, offset=pos)
        out[name] = arr.reshape(dims).astype(np.float64)
        pos += 4 * n
    return out
