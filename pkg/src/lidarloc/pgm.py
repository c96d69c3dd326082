"""Binary PGM (P5) reading and writing, 8- and 16-bit."""

from __future__ import annotations

import numpy as np

from .errors import ParseError


def write_pgm(path, data, maxval, comment=None):
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    if not 0 < maxval < 65536:
        raise ValueError("maxval out of range")
    h, w = data.shape
    header = b"P5\n"
    if comment:
        for line in str(comment).splitlines():
            header += b"# " + line.encode("ascii") + b"\n"
    header += f"{w} {h}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data, dtype=dtype).tobytes())


def _tokens(buf):
    """Yield header tokens and comments; returns position after the maxval whitespace."""
    pos = 0
    tokens, comments = [], []
    while len(tokens) < 4:
        if pos >= len(buf):
            raise ParseError("truncated PGM header")
        c = buf[pos:pos + 1]
        if c == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise ParseError("unterminated comment in PGM header")
            comments.append(buf[pos + 1:end].decode("ascii").strip())
            pos = end + 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(buf[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, comments, pos + 1


def read_pgm(path):
    """Return ``(array, maxval, comments)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    tokens, comments, pos = _tokens(buf)
    if tokens[0] != b"P5":
        raise ParseError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ParseError("malformed PGM header") from None
    dtype = ">u2" if maxval > 255 else "u1"
    n = w * h * np.dtype(dtype).itemsize
    raster = buf[pos:pos + n]
    if len(raster) != n:
        raise ParseError(f"PGM raster truncated: {len(raster)} of {n} bytes")
    arr = np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.int64)
    return arr, maxval, comments


def save_depth_pgm(path, normalized_depth, pose=None):
    """16-bit depth: value = round(65535 * normalized depth), 0 = no return."""
    q = np.rint(np.clip(normalized_depth, 0.0, 1.0) * 65535).astype(np.int64)
    # keep tiny nonzero depths distinguishable from "no return"
    q[(q == 0) & (np.asarray(normalized_depth) > 0)] = 1
    write_pgm(path, q, 65535, None if pose is None else f"pose {pose.to_string()}")


def load_depth_pgm(path):
    arr, maxval, comments = read_pgm(path)
    return arr / float(maxval), comments


def save_intensity_pgm(path, intensity, pose=None):
    q = np.rint(np.clip(intensity, 0.0, 1.0) * 255).astype(np.int64)
    write_pgm(path, q, 255, None if pose is None else f"pose {pose.to_string()}")


def load_intensity_pgm(path):
    arr, maxval, comments = read_pgm(path)
    return arr / float(maxval), comments


def pose_from_comments(comments):
    from .se3 import Pose

    for c in comments:
        if c.startswith("pose "):
            return Pose.from_string(c[5:])
    return None
