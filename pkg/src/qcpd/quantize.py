"""Uniform per-tensor quantization.

A grid with ``bits`` b, step ``scale`` and integer ``zero_point`` z holds the
values ``scale * (k - z)`` for integer codes ``k`` in
``[-2**(b-1), 2**(b-1) - 1]``. Rounding is half-to-even throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantGrid",
    "QuantScheme",
    "MSE_ALPHAS",
    "minmax_grid",
    "mse_grid",
    "make_grid",
    "quantize",
    "dequantize",
    "project",
]

# clipping ratios searched by mse_grid: 0.20, 0.21, ..., 1.00
MSE_ALPHAS = np.arange(20, 101) / 100.0

_METHODS = ("minmax", "mse")


@dataclass(frozen=True)
class QuantGrid:
    bits: int
    scale: float
    zero_point: int = 0
    symmetric: bool = True

    def __post_init__(self):
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in 2..8, got {self.bits}")
        if not self.scale > 0 or not np.isfinite(self.scale):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")
        if self.symmetric and self.zero_point != 0:
            raise ValueError("symmetric grids have zero_point 0")

    @property
    def qmin(self) -> int:
        return -(2 ** (self.bits - 1))

    @property
    def qmax(self) -> int:
        return 2 ** (self.bits - 1) - 1

    def nodes(self) -> np.ndarray:
        """All representable values, in code order."""
        codes = np.arange(self.qmin, self.qmax + 1)
        return self.scale * (codes - self.zero_point)


@dataclass(frozen=True)
class QuantScheme:
    """How a grid is fitted to data: ``method`` is ``"minmax"`` or ``"mse"``."""

    method: str = "mse"
    symmetric: bool = True

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown quantization method {self.method!r}")
        if self.method == "mse" and not self.symmetric:
            raise ValueError("the MSE range search is only defined for symmetric grids")


def _check_bits(bits: int) -> None:
    if not 2 <= bits <= 8:
        raise ValueError(f"bits must be in 2..8, got {bits}")


def minmax_grid(x, bits: int, symmetric: bool = True) -> QuantGrid:
    """Grid spanning the range of ``x``.

    Symmetric grids use ``scale = 2 max|x| / (2**b - 1)``; asymmetric ones use
    ``(max - min) / (2**b - 1)`` with the zero point chosen so that ``min(x)``
    lands on the lowest code. Degenerate inputs (all zeros when symmetric,
    constant when asymmetric) get ``scale = 1, z = 0``.
    """
    _check_bits(bits)
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot fit a grid to an empty tensor")
    lo, hi = float(x.min()), float(x.max())
    levels = 2**bits - 1
    if symmetric:
        amax = max(abs(lo), abs(hi))
        return QuantGrid(bits, 2.0 * amax / levels if amax > 0 else 1.0, 0, True)
    if hi == lo:
        return QuantGrid(bits, 1.0, 0, False)
    scale = (hi - lo) / levels
    zero_point = -(2 ** (bits - 1)) - int(np.rint(lo / scale))
    return QuantGrid(bits, scale, zero_point, False)


def _sq_errors(x: np.ndarray, scales: np.ndarray, bits: int) -> np.ndarray:
    qmin, qmax = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    codes = np.clip(np.rint(x[None, :] / scales[:, None]), qmin, qmax)
    return np.sum((x[None, :] - scales[:, None] * codes) ** 2, axis=1)


def mse_grid(x, bits: int) -> QuantGrid:
    """Symmetric grid whose clipping range minimizes the quantization MSE.

    The range ``q_max = alpha * max|x|`` is searched over ``MSE_ALPHAS``;
    ties go to the larger ``alpha``. Since ``alpha = 1`` is a candidate the
    result is never worse than the symmetric MinMax grid.
    """
    _check_bits(bits)
    x = np.asarray(x, dtype=np.float64).ravel()
    amax = float(np.max(np.abs(x))) if x.size else 0.0
    if amax == 0:
        raise ValueError("cannot fit an MSE grid to an all-zero tensor")
    scales = 2.0 * (MSE_ALPHAS * amax) / (2**bits - 1)
    if x.size * scales.size <= 1 << 21:
        errs = _sq_errors(x, scales, bits)
    else:
        errs = np.array([_sq_errors(x, scales[i : i + 1], bits)[0] for i in range(scales.size)])
    best = errs.size - 1 - int(np.argmin(errs[::-1]))
    return QuantGrid(bits, float(scales[best]), 0, True)


def make_grid(x, bits: int, scheme: QuantScheme) -> QuantGrid:
    if scheme.method == "mse":
        return mse_grid(x, bits)
    return minmax_grid(x, bits, scheme.symmetric)


def quantize(x, grid: QuantGrid) -> np.ndarray:
    """Integer codes ``clip(round(x / scale) + z)``."""
    x = np.asarray(x, dtype=np.float64)
    codes = np.rint(x / grid.scale) + grid.zero_point
    return np.clip(codes, grid.qmin, grid.qmax).astype(np.int64)


def dequantize(codes, grid: QuantGrid) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.size and (codes.min() < grid.qmin or codes.max() > grid.qmax):
        raise ValueError(f"codes outside the {grid.bits}-bit range [{grid.qmin}, {grid.qmax}]")
    return grid.scale * (codes.astype(np.float64) - grid.zero_point)


def project(x, bits: int, scheme: QuantScheme) -> tuple[np.ndarray, QuantGrid]:
    """Fit a grid to ``x`` and round every entry to its nearest node.

    An all-zero input maps to exact zeros on a unit grid.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        grid = QuantGrid(bits, 1.0, 0, scheme.symmetric)
        return np.zeros_like(x), grid
    grid = make_grid(x, bits, scheme)
    return dequantize(quantize(x, grid), grid), grid
