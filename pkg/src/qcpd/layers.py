"""Convolution and linear layer plumbing for CP-compressed weights.

A ``T x S x D x D`` kernel is flattened to ``T x S x D^2`` and decomposed as
``(K^t, K^s, Kbar^dd)``. The factorized layer is a pointwise convolution
``S -> R``, a depthwise ``D x D`` convolution over the R channels and a
pointwise convolution ``R -> T``. Only stride 1 with "same" zero padding and
odd kernel sizes are handled.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "ConvLayerSpec",
    "LinearLayerSpec",
    "FactorizedConvWeights",
    "BopReport",
    "reshape_kernel",
    "reshape_back",
    "select_rank",
    "rank_for_shape",
    "factorized_weights",
    "reconstruct_kernel",
    "direct_conv",
    "factorized_forward",
    "bop_count",
]


@dataclass(frozen=True)
class ConvLayerSpec:
    out_channels: int
    in_channels: int
    kernel_size: int
    height: int
    width: int

    def __post_init__(self):
        dims = (self.out_channels, self.in_channels, self.kernel_size, self.height, self.width)
        if min(dims) < 1:
            raise ValueError(f"layer dimensions must be >= 1, got {dims}")
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {self.kernel_size}")

    @property
    def params(self) -> int:
        return self.out_channels * self.in_channels * self.kernel_size**2


@dataclass(frozen=True)
class LinearLayerSpec:
    out_features: int
    in_features: int

    def __post_init__(self):
        if min(self.out_features, self.in_features) < 1:
            raise ValueError("layer dimensions must be >= 1")

    @property
    def params(self) -> int:
        return self.out_features * self.in_features


@dataclass
class FactorizedConvWeights:
    first: np.ndarray  # R x S
    mid: np.ndarray  # D x D x R
    last: np.ndarray  # T x R

    def __post_init__(self):
        r = self.first.shape[0]
        if self.mid.ndim != 3 or self.mid.shape[0] != self.mid.shape[1] or self.mid.shape[2] != r:
            raise ValueError(f"mid must be D x D x {r}, got {self.mid.shape}")
        if self.last.ndim != 2 or self.last.shape[1] != r:
            raise ValueError(f"last must be T x {r}, got {self.last.shape}")

    @property
    def rank(self) -> int:
        return self.first.shape[0]


@dataclass(frozen=True)
class BopReport:
    macs: int
    b_w: int
    b_a: int
    bops: int
    params_before: int
    params_after: int


def reshape_kernel(k4) -> np.ndarray:
    """Flatten the spatial dims: ``out[t, s, j*D + i] = k4[t, s, j, i]``."""
    k4 = np.asarray(k4, dtype=np.float64)
    if k4.ndim != 4 or k4.shape[2] != k4.shape[3]:
        raise ValueError(f"expected a T x S x D x D kernel, got shape {k4.shape}")
    t, s, d, _ = k4.shape
    return k4.reshape(t, s, d * d)


def reshape_back(k3) -> np.ndarray:
    k3 = np.asarray(k3, dtype=np.float64)
    d = int(round(np.sqrt(k3.shape[2])))
    if k3.ndim != 3 or d * d != k3.shape[2]:
        raise ValueError(f"last mode of {k3.shape} is not a square spatial size")
    return k3.reshape(k3.shape[0], k3.shape[1], d, d)


def select_rank(dims: Sequence[int], rate: float) -> int:
    """Rank giving roughly a ``rate``-fold parameter reduction.

    ``dims`` is ``(n, m)`` for a linear layer or ``(T, S, D)`` for a
    convolution; a ``D = 1`` convolution counts as linear. The rank is
    ``floor(N / (n + m) / rate)`` or ``floor(N / (T + S + D^2) / rate)``
    (N the original parameter count), never below 1.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) == 3 and dims[2] == 1:
        dims = dims[:2]
    if len(dims) == 2:
        return rank_for_shape(dims, rate)
    if len(dims) == 3:
        t, s, d = dims
        return rank_for_shape((t, s, d * d), rate)
    raise ValueError(f"dims must be (n, m) or (T, S, D), got {dims}")


def rank_for_shape(shape: Sequence[int], rate: float) -> int:
    """``floor(prod(shape) / sum(shape) / rate)``, clamped to at least 1."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    shape = [int(n) for n in shape]
    if not shape or min(shape) < 1:
        raise ValueError(f"invalid shape {shape}")
    rank = int(Fraction(int(np.prod(shape)), sum(shape)) / Fraction(rate))
    return max(rank, 1)


def factorized_weights(factors) -> FactorizedConvWeights:
    """Arrange CP factors ``(K^t, K^s, Kbar^dd)`` of a flattened kernel as layers.

    Two factors ``(K^t, K^s)`` (a 1x1 kernel) give a 1 x 1 x R all-ones mid stage.
    """
    if len(factors) == 2:
        kt, ks = factors
        mid = np.ones((1, 1, kt.shape[1]))
    else:
        kt, ks, kdd = factors
        d = int(round(np.sqrt(kdd.shape[0])))
        if d * d != kdd.shape[0]:
            raise ValueError(f"spatial factor has {kdd.shape[0]} rows, not a square")
        mid = np.asarray(kdd, dtype=np.float64).reshape(d, d, kdd.shape[1])
    return FactorizedConvWeights(
        first=np.ascontiguousarray(np.asarray(ks, dtype=np.float64).T),
        mid=mid,
        last=np.asarray(kt, dtype=np.float64),
    )


def reconstruct_kernel(w: FactorizedConvWeights) -> np.ndarray:
    """The ``T x S x D x D`` kernel the factorized layer computes."""
    return np.einsum("tr,rs,jir->tsji", w.last, w.first, w.mid, optimize=True)


def _same_conv_windows(x: np.ndarray, d: int):
    # yields (j, i, shifted view) so that sum_ji k[j, i] * view == same-padded correlation
    pad = d // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h, w = x.shape[1:]
    for j in range(d):
        for i in range(d):
            yield j, i, xp[:, j : j + h, i : i + w]


def direct_conv(k4, x) -> np.ndarray:
    """Stride-1, same-padded cross-correlation of ``x`` (S x H x W) with ``k4``."""
    k4 = np.asarray(k4, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if k4.ndim != 4 or x.ndim != 3 or k4.shape[1] != x.shape[0] or k4.shape[2] != k4.shape[3]:
        raise ValueError(f"kernel {k4.shape} does not fit input {x.shape}")
    d = k4.shape[2]
    if d % 2 == 0:
        raise ValueError("only odd kernel sizes are supported")
    y = np.zeros((k4.shape[0],) + x.shape[1:])
    for j, i, view in _same_conv_windows(x, d):
        y += np.einsum("ts,shw->thw", k4[:, :, j, i], view)
    return y


def factorized_forward(w: FactorizedConvWeights, x) -> np.ndarray:
    """Pointwise, depthwise, pointwise evaluation of the factorized layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != w.first.shape[1]:
        raise ValueError(f"input {x.shape} does not match {w.first.shape[1]} input channels")
    d = w.mid.shape[0]
    if d % 2 == 0:
        raise ValueError("only odd kernel sizes are supported")
    z1 = np.einsum("rs,shw->rhw", w.first, x)
    z2 = np.zeros_like(z1)
    for j, i, view in _same_conv_windows(z1, d):
        z2 += w.mid[j, i, :, None, None] * view
    return np.einsum("tr,rhw->thw", w.last, z2)


def bop_count(
    layer: ConvLayerSpec | LinearLayerSpec,
    b_w: int,
    b_a: int,
    factorized: bool = False,
    rank: int | None = None,
) -> BopReport:
    """MACs, bit operations and parameter counts for one layer.

    Convolutions count ``T*S*D^2*H*W`` MACs unfactorized and
    ``(R*S + R*D^2 + T*R)*H*W`` factorized; 1x1 convolutions and linear layers
    factorize into two stages, ``R*(S + T)`` per position. BOPs are
    ``MACs * b_w * b_a``.
    """
    for b in (b_w, b_a):
        if not 2 <= b <= 32:
            raise ValueError(f"bit-widths must be in 2..32, got {b}")
    if factorized and (rank is None or rank < 1):
        raise ValueError("a factorized layer needs a rank >= 1")

    if isinstance(layer, ConvLayerSpec):
        t, s, d = layer.out_channels, layer.in_channels, layer.kernel_size
        positions = layer.height * layer.width
    else:
        t, s, d = layer.out_features, layer.in_features, 1
        positions = 1
    before = t * s * d * d
    if not factorized:
        after = before
    elif d == 1:
        after = rank * (s + t)
    else:
        after = rank * (s + d * d + t)
    macs = after * positions
    return BopReport(
        macs=macs, b_w=b_w, b_a=b_a, bops=macs * b_w * b_a, params_before=before, params_after=after
    )
