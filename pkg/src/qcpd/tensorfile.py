"""Binary tensor files.

Layout, all little-endian::

    magic   4 bytes   b"QTNS"
    version u32       1
    ndim    u32
    dims    ndim x u32
    dtype   u32       0 = float64
    payload prod(dims) x float64, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["TensorFileError", "write_tensor", "read_tensor", "encode_tensor", "decode_tensor"]

MAGIC = b"QTNS"
VERSION = 1
DTYPE_F64 = 0


class TensorFileError(ValueError):
    """Malformed tensor file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def encode_tensor(t) -> bytes:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0 or min(t.shape) < 1:
        raise ValueError(f"cannot store a tensor of shape {t.shape}")
    header = MAGIC + struct.pack(f"<II{t.ndim}II", VERSION, t.ndim, *t.shape, DTYPE_F64)
    return header + np.ascontiguousarray(t, dtype="<f8").tobytes()


def _u32(buf: bytes, offset: int, what: str) -> int:
    if len(buf) < offset + 4:
        raise TensorFileError(f"truncated file: missing {what}", offset)
    return struct.unpack_from("<I", buf, offset)[0]


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 4:
        raise TensorFileError("truncated file: missing magic", 0)
    if buf[:4] != MAGIC:
        raise TensorFileError(f"bad magic {buf[:4]!r}", 0)
    version = _u32(buf, 4, "version")
    if version != VERSION:
        raise TensorFileError(f"unsupported version {version}", 4)
    ndim = _u32(buf, 8, "ndim")
    if ndim == 0:
        raise TensorFileError("ndim must be positive", 8)
    dims = [_u32(buf, 12 + 4 * i, f"dim {i}") for i in range(ndim)]
    for i, d in enumerate(dims):
        if d == 0:
            raise TensorFileError(f"dim {i} is zero", 12 + 4 * i)
    off = 12 + 4 * ndim
    dtype = _u32(buf, off, "dtype code")
    if dtype != DTYPE_F64:
        raise TensorFileError(f"unsupported dtype code {dtype}", off)
    off += 4
    need = 8 * int(np.prod(dims, dtype=np.int64))
    have = len(buf) - off
    if have < need:
        raise TensorFileError(f"truncated payload: expected {need} bytes, found {have}", off + have)
    if have > need:
        raise TensorFileError(f"{have - need} trailing bytes after payload", off + need)
    return np.frombuffer(buf, dtype="<f8", offset=off).astype(np.float64).reshape(dims)


def write_tensor(path, t) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
