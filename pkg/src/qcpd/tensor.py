"""Dense multilinear-algebra primitives.

Tensors are plain ``float64`` numpy arrays in C (row-major) order and a
factor set is a list of ``n_i x R`` matrices, one per mode. Unfoldings put
the selected mode along the rows and order the remaining modes so that the
lower-numbered ones vary fastest, which makes

    unfold(X, 1) == B @ khatri_rao(C, A).T

hold for a rank-R CP tensor with factors (A, B, C).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "as_tensor",
    "unfold",
    "fold",
    "khatri_rao",
    "gram",
    "mttkrp",
    "mttkrp_reference",
    "reconstruct",
    "rel_error",
    "check_factors",
]


def as_tensor(t) -> np.ndarray:
    """Return ``t`` as a float64 C-contiguous array with all extents >= 1."""
    arr = np.ascontiguousarray(t, dtype=np.float64)
    if arr.ndim == 0 or min(arr.shape) < 1:
        raise ValueError(f"tensor extents must all be >= 1, got shape {arr.shape}")
    return arr


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a {ndim}-way tensor")


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization of ``t``.

    Rows are indexed by ``mode``; columns run over the remaining modes with the
    lowest-numbered remaining mode varying fastest.
    """
    t = np.asarray(t, dtype=np.float64)
    _check_mode(t.ndim, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), mode)
    rest = int(np.prod(shape)) // shape[mode]
    if m.ndim != 2 or m.shape != (shape[mode], rest):
        raise ValueError(
            f"matrix of shape {m.shape} cannot be folded into {shape} at mode {mode}"
        )
    moved = (shape[mode],) + tuple(s for i, s in enumerate(shape) if i != mode)
    return np.ascontiguousarray(
        np.moveaxis(np.reshape(m, moved, order="F"), 0, mode)
    )


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; the row index of ``a`` varies slowest."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"khatri_rao needs equal column counts, got {a.shape} and {b.shape}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def gram(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.T @ a


def check_factors(factors: Sequence[np.ndarray], shape: Sequence[int] | None = None) -> int:
    """Validate a factor set and return its rank."""
    if len(factors) not in (2, 3):
        raise ValueError(f"expected 2 or 3 factors, got {len(factors)}")
    ranks = {np.shape(f)[1] if np.ndim(f) == 2 else -1 for f in factors}
    if len(ranks) != 1 or -1 in ranks:
        raise ValueError("all factors must be matrices with the same column count")
    if shape is not None:
        rows = tuple(np.shape(f)[0] for f in factors)
        if rows != tuple(shape):
            raise ValueError(f"factor row counts {rows} do not match tensor shape {tuple(shape)}")
    return ranks.pop()


def _complement_kr(factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    # higher-numbered factor first so the result lines up with unfold()
    others = [f for i, f in enumerate(factors) if i != mode][::-1]
    out = others[0]
    for f in others[1:]:
        out = khatri_rao(out, f)
    return out


def mttkrp(t, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product.

    Equal to ``unfold(t, mode) @ KR`` where ``KR`` is the Khatri-Rao product of
    every other factor taken from the highest mode down. Evaluated with a
    contraction that never forms the Khatri-Rao matrix.
    """
    t = np.asarray(t, dtype=np.float64)
    check_factors(factors, t.shape)
    _check_mode(t.ndim, mode)
    if t.ndim == 2:
        return t @ factors[1] if mode == 0 else t.T @ factors[0]
    a, b, c = factors
    if mode == 0:
        return np.einsum("ijk,jr,kr->ir", t, b, c, optimize=True)
    if mode == 1:
        return np.einsum("ijk,ir,kr->jr", t, a, c, optimize=True)
    return np.einsum("ijk,ir,jr->kr", t, a, b, optimize=True)


def mttkrp_reference(t, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """MTTKRP by explicit unfolding and Khatri-Rao product."""
    return unfold(t, mode) @ _complement_kr(factors, mode)


def reconstruct(factors: Sequence[np.ndarray], shape: Sequence[int] | None = None) -> np.ndarray:
    """Sum of the rank-one outer products of matching factor columns."""
    factors = [np.asarray(f, dtype=np.float64) for f in factors]
    check_factors(factors, shape)
    if len(factors) == 2:
        return factors[0] @ factors[1].T
    a, b, c = factors
    return np.einsum("ir,jr,kr->ijk", a, b, c, optimize=True)


def rel_error(t, approx) -> float:
    """Relative Frobenius error ``||t - approx|| / ||t||``."""
    t = np.asarray(t, dtype=np.float64)
    approx = np.asarray(approx, dtype=np.float64)
    if t.shape != approx.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {approx.shape}")
    ref = np.linalg.norm(t.ravel())
    if ref == 0:
        raise ValueError("reference tensor has zero norm")
    return float(np.linalg.norm((t - approx).ravel()) / ref)
