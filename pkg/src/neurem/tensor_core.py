"""Dense tensor algebra and the DRMT on-disk tensor format.

Tensors are plain ``numpy.ndarray`` objects in C (row-major) order.  Mode
numbers are 1-based to match the usual Tucker notation.

Unfolding convention: element ``(i1, i2, i3)`` of a 3-way tensor lands in
row ``i_n`` of the mode-``n`` unfolding, and the column index enumerates the
two remaining indices with the lower-numbered mode varying fastest.  Under
this convention

    X_(1) = U1 G_(1) (U3 kron U2)^T
    X_(2) = U2 G_(2) (U3 kron U1)^T
    X_(3) = U3 G_(3) (U2 kron U1)^T

for ``X = G x1 U1 x2 U2 x3 U3``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "DimensionError",
    "DrmtError",
    "BadMagicError",
    "UnsupportedVersionError",
    "UnsupportedDtypeError",
    "TruncatedPayloadError",
    "unfold",
    "fold",
    "kron",
    "modal_product",
    "tucker_to_tensor",
    "svd_singular_values",
    "write_tensor",
    "read_tensor",
    "encode_tensor",
    "decode_tensor",
]


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent with the requested operation."""


class DrmtError(ValueError):
    """Base class for DRMT decoding failures."""


class BadMagicError(DrmtError):
    pass


class UnsupportedVersionError(DrmtError):
    pass


class UnsupportedDtypeError(DrmtError):
    pass


class TruncatedPayloadError(DrmtError):
    pass


def _check_mode(mode: int, ndim: int) -> int:
    if mode not in range(1, ndim + 1):
        raise DimensionError(f"mode must be in 1..{ndim}, got {mode}")
    return mode - 1


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of a 3-way tensor (see module docstring)."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise DimensionError(f"unfold expects a 3-way tensor, got ndim={t.ndim}")
    m = _check_mode(mode, 3)
    # Fortran-order flattening of the remaining axes makes the
    # lower-numbered remaining mode vary fastest.
    return np.moveaxis(t, m, 0).reshape(t.shape[m], -1, order="F")


def fold(m: np.ndarray, mode: int, dims) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionError(f"fold expects 3 target extents, got {dims}")
    ax = _check_mode(mode, 3)
    rest = tuple(d for i, d in enumerate(dims) if i != ax)
    if m.ndim != 2 or m.shape != (dims[ax], rest[0] * rest[1]):
        raise DimensionError(
            f"matrix of shape {m.shape} cannot fold to {dims} along mode {mode}"
        )
    t = m.reshape((dims[ax],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(t, 0, ax))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def modal_product(t: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` product ``t x_mode u`` for a tensor of any order."""
    t = np.asarray(t)
    u = np.asarray(u)
    ax = _check_mode(mode, t.ndim)
    if u.ndim != 2 or u.shape[1] != t.shape[ax]:
        raise DimensionError(
            f"matrix of shape {u.shape} incompatible with extent {t.shape[ax]} "
            f"along mode {mode}"
        )
    out = np.tensordot(u, t, axes=(1, ax))
    return np.ascontiguousarray(np.moveaxis(out, 0, ax))


def tucker_to_tensor(core: np.ndarray, factors) -> np.ndarray:
    """Full Tucker reconstruction ``core x1 U1 x2 U2 x3 U3``."""
    out = core
    for n, u in enumerate(factors, start=1):
        out = modal_product(out, u, n)
    return out


def svd_singular_values(m: np.ndarray) -> np.ndarray:
    """Singular values in descending order."""
    m = np.asarray(m)
    if m.ndim != 2:
        raise DimensionError("svd_singular_values expects a matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return np.linalg.svd(m, compute_uv=False)


# --- DRMT format ------------------------------------------------------------
#
#   magic   4 bytes  b"DRMT"
#   version u16 LE   1
#   dtype   u8       1 = float64, 2 = complex128 (interleaved re, im)
#   ndim    u8
#   dims    ndim x u64 LE
#   payload row-major, little-endian IEEE-754

MAGIC = b"DRMT"
VERSION = 1
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<c16")}
_CODES = {np.dtype("float64"): 1, np.dtype("complex128"): 2}


def encode_tensor(t: np.ndarray) -> bytes:
    t = np.asarray(t)
    if t.dtype not in _CODES:
        if np.iscomplexobj(t):
            t = t.astype(np.complex128)
        else:
            t = t.astype(np.float64)
    code = _CODES[t.dtype]
    if t.ndim > 255:
        raise DimensionError("too many dimensions for DRMT")
    if any(d < 1 for d in t.shape) or t.ndim == 0:
        raise DimensionError(f"DRMT tensors need extents >= 1, got {t.shape}")
    header = MAGIC + struct.pack("<HBB", VERSION, code, t.ndim)
    header += struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = np.ascontiguousarray(t, dtype=_DTYPES[code]).tobytes(order="C")
    return header + payload


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise TruncatedPayloadError("header shorter than 8 bytes")
    if buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}")
    version, code, ndim = struct.unpack_from("<HBB", buf, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported DRMT version {version}")
    if code not in _DTYPES:
        raise UnsupportedDtypeError(f"unsupported DRMT dtype code {code}")
    offset = 8 + 8 * ndim
    if len(buf) < offset:
        raise TruncatedPayloadError("truncated extents")
    dims = struct.unpack_from(f"<{ndim}Q", buf, 8)
    dtype = _DTYPES[code]
    nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if len(buf) - offset != nbytes:
        raise TruncatedPayloadError(
            f"expected {nbytes} payload bytes, found {len(buf) - offset}"
        )
    data = np.frombuffer(buf, dtype=dtype, offset=offset).reshape(dims)
    return data.astype(dtype.newbyteorder("="), copy=True)


def write_tensor(t: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_tensor(t))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
