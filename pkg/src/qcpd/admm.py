"""Quantization-constrained matrix and CP factorization by AO-ADMM.

Each factor update solves

    min_B  1/2 ||X_(n) - Btilde^T KR^T||^2 + I_Q(B)   s.t.  B = Btilde^T

with a few ADMM iterations: a Cholesky solve for the auxiliary ``Btilde``, a
projection of ``Btilde^T - U`` onto a quantization grid fitted to that
matrix, and a scaled dual update. The outer loop alternates over the factors
and keeps the iterate with the smallest quantized reconstruction error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from .quantize import QuantGrid, QuantScheme, project, quantize
from .tensor import check_factors, gram, khatri_rao, mttkrp, reconstruct, unfold

__all__ = [
    "AdmmConfig",
    "FactorUpdate",
    "QuantizedFactorSet",
    "admm_factor_update",
    "quantized_matrix_factorization",
    "quantized_cpd",
    "e_quant",
]

log = logging.getLogger(__name__)

# fallback penalty when the Gram trace vanishes (all-zero fixed factors)
RHO_FLOOR = 1e-3
# e_quant changes below this are rounding noise, never an improvement
NOISE_FLOOR = 1e-14


@dataclass(frozen=True)
class AdmmConfig:
    bits: int = 8
    scheme: QuantScheme = field(default_factory=QuantScheme)
    eps: float = 1e-3
    inner_max: int = 20
    outer_max: int = 200
    patience: int = 3
    min_improve: float = 1e-5

    def __post_init__(self):
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits must be in 2..8, got {self.bits}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.inner_max < 1 or self.outer_max < 1 or self.patience < 1:
            raise ValueError("inner_max, outer_max and patience must be >= 1")
        if self.min_improve < 0:
            raise ValueError("min_improve must be nonnegative")


class FactorUpdate(NamedTuple):
    factor: np.ndarray
    dual: np.ndarray
    r: float
    s: float
    grid: QuantGrid
    rho: float
    iterations: int
    aux: np.ndarray


@dataclass
class QuantizedFactorSet:
    """On-grid factors with their grids and integer codes.

    ``trace`` holds one ``(sweep, e_quant, rel_error)`` row per outer sweep,
    where ``rel_error`` is the relative error of the real-valued auxiliary
    factors of that sweep.
    """

    factors: list[np.ndarray]
    grids: list[QuantGrid]
    codes: list[np.ndarray]
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    e_quant: float = float("nan")
    rel_error: float = float("nan")
    best_sweep: int = 0
    converged: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def sweeps(self) -> int:
        return len(self.trace)


def admm_factor_update(
    B,
    U,
    K,
    G,
    rank: int,
    cfg: AdmmConfig,
    monitor: Callable[[dict], None] | None = None,
) -> FactorUpdate:
    """Run the inner ADMM loop for one factor.

    Parameters
    ----------
    B : ndarray
        Current on-grid factor, ``n x R``.
    U : ndarray
        Scaled dual variable, same shape as ``B``.
    K : ndarray
        MTTKRP of the target with the fixed factors, ``n x R``.
    G : ndarray
        Hadamard product of the fixed factors' Gram matrices, ``R x R``.
    rank : int
        R; sets the penalty ``rho = trace(G) / R``.
    cfg : AdmmConfig
    monitor : callable, optional
        Called after every iteration with a dict of the iteration's arrays
        (``K``, ``lhs``, ``rhs``, ``B_tilde``, ``B``, ``B_prev``, ``U``,
        ``U_prev``) and the residuals ``r``, ``s``.

    Returns
    -------
    FactorUpdate
        The projected factor (exactly on ``grid``), the dual, the last
        residuals, the penalty, the number of iterations run and the last
        auxiliary solution ``Btilde^T``.

    Raises
    ------
    FloatingPointError
        If the iterates overflow. Symmetric MinMax grids stretch the most
        negative entry on every projection, which the dual can amplify.
    """
    B = np.array(B, dtype=np.float64)
    U = np.array(U, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if G.shape != (rank, rank) or K.shape != B.shape or U.shape != B.shape:
        raise ValueError(
            f"inconsistent shapes: B {B.shape}, U {U.shape}, K {K.shape}, G {G.shape}, rank {rank}"
        )

    tr = float(np.trace(G))
    rho = tr / rank if tr > 1e-12 else RHO_FLOOR
    lhs = G + rho * np.eye(rank)
    try:
        chol = scipy.linalg.cho_factor(lhs, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - lhs is SPD for rho > 0
        raise RuntimeError("Cholesky factorization of G + rho*I failed") from exc

    grid = None
    Bt = B.T
    r = s = np.inf
    it = 0
    while it < cfg.inner_max:
        it += 1
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = (K + rho * (B + U)).T
        if not np.isfinite(rhs).all():
            raise FloatingPointError("ADMM iterates overflowed")
        Bt = scipy.linalg.cho_solve(chol, rhs)
        B_prev, U_prev = B, U
        B, grid = project(Bt.T - U, cfg.bits, cfg.scheme)
        U = U + (B - Bt.T)
        bn = float(np.sum(B * B))
        un = float(np.sum(U * U))
        r = float(np.sum((B - Bt.T) ** 2)) / (bn if bn > 0 else 1.0)
        s = float(np.sum((B - B_prev) ** 2)) / (un if un > 0 else 1.0)
        if monitor is not None:
            monitor(
                dict(K=K, lhs=lhs, rhs=rhs, B_tilde=Bt, B=B, B_prev=B_prev, U=U, U_prev=U_prev, r=r, s=s)
            )
        if r < cfg.eps and s < cfg.eps:
            break
    return FactorUpdate(B, U, r, s, grid, rho, it, Bt.T.copy())


def e_quant(t, factors) -> float:
    """Relative error of the reconstruction from (quantized) factors.

    Measured on the mode-1 unfolding; for matrices ``||X - A B^T|| / ||X||``.
    """
    if isinstance(factors, QuantizedFactorSet):
        factors = factors.factors
    t = np.asarray(t, dtype=np.float64)
    check_factors(factors, t.shape)
    x2 = unfold(t, 1)
    others = [f for i, f in enumerate(factors) if i != 1][::-1]
    kr = others[0]
    for f in others[1:]:
        kr = khatri_rao(kr, f)
    ref = np.linalg.norm(x2)
    if ref == 0:
        raise ValueError("reference tensor has zero norm")
    return float(np.linalg.norm(x2 - factors[1] @ kr.T) / ref)


def _hadamard_gram(grams, skip):
    out = None
    for i, g in enumerate(grams):
        if i == skip:
            continue
        out = g.copy() if out is None else out * g
    return out


def _solve(t, init, cfg: AdmmConfig, order, monitor=None) -> QuantizedFactorSet:
    rank = check_factors(init, t.shape)
    if np.linalg.norm(t.ravel()) == 0:
        raise ValueError("cannot factorize an all-zero tensor")
    notes = []
    if rank > max(t.shape):
        notes.append(f"rank {rank} exceeds every dimension of shape {t.shape} (overcomplete)")
        log.warning(notes[-1])

    factors = [np.array(f, dtype=np.float64) for f in init]
    duals = [np.zeros_like(f) for f in factors]
    grids: list[QuantGrid | None] = [None] * len(factors)
    aux = [f.copy() for f in factors]
    tnorm = float(np.linalg.norm(t.ravel()))

    best = None
    trace = []
    stall = 0
    converged = False
    diverged = 0
    for sweep in range(1, cfg.outer_max + 1):
        for n in order:
            grams = [gram(f) for f in factors]
            G = _hadamard_gram(grams, n)
            K = mttkrp(t, factors, n)
            try:
                upd = admm_factor_update(
                    factors[n],
                    duals[n],
                    K,
                    G,
                    rank,
                    cfg,
                    monitor=None if monitor is None else (lambda info, n=n: monitor(n, info)),
                )
            except FloatingPointError:
                if best is None:
                    raise
                diverged = sweep
                break
            factors[n], duals[n], grids[n], aux[n] = upd.factor, upd.dual, upd.grid, upd.aux
        if diverged:
            notes.append(f"iterates overflowed in sweep {diverged}; returning the best earlier iterate")
            log.warning(notes[-1])
            break

        eq = e_quant(t, factors)
        trace.append((sweep, eq, _rel_err(t, aux, tnorm)))
        if best is None or best[0] - eq > max(cfg.min_improve * best[0], NOISE_FLOOR):
            stall = 0
        else:
            stall += 1
        if best is None or eq < best[0]:
            best = (eq, sweep, [f.copy() for f in factors], list(grids), trace[-1][2])
        if stall >= cfg.patience:
            converged = True
            break

    eq, sweep, fs, gs, rel = best
    codes = [quantize(f, g) for f, g in zip(fs, gs)]
    return QuantizedFactorSet(
        factors=fs,
        grids=gs,
        codes=codes,
        trace=trace,
        e_quant=eq,
        rel_error=rel,
        best_sweep=sweep,
        converged=converged,
        notes=notes,
    )


def _rel_err(t, factors, tnorm):
    return float(np.linalg.norm((t - reconstruct(factors)).ravel()) / tnorm)


def quantized_matrix_factorization(X, rank: int, cfg: AdmmConfig, init, monitor=None) -> QuantizedFactorSet:
    """Factor ``X ~ A @ B.T`` with both factors on quantization grids.

    Sweeps update ``B`` (``G = A^T A``, ``K = X^T A``) and then ``A``
    (``G = B^T B``, ``K = X B``), each with :func:`admm_factor_update`. The loop
    stops once ``e_quant`` has failed to improve by a relative ``min_improve``
    for ``patience`` consecutive sweeps, or after ``outer_max`` sweeps, and the
    best sweep is returned.

    ``monitor``, if given, is called as ``monitor(mode, info)`` on every inner
    iteration.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={X.ndim}")
    if len(init) != 2 or check_factors(init, X.shape) != rank:
        raise ValueError("init must hold two factors of rank `rank` matching X")
    return _solve(X, init, cfg, order=(1, 0), monitor=monitor)


def quantized_cpd(t, rank: int, cfg: AdmmConfig, init, monitor=None) -> QuantizedFactorSet:
    """Rank-``rank`` CP decomposition of a 3-way tensor with on-grid factors.

    Duals start at zero and persist across sweeps. Each sweep updates A, B
    and C in turn with ``G`` the Hadamard product of the other two Gram
    matrices and ``K`` the matching MTTKRP. Stopping and the best-iterate
    return follow :func:`quantized_matrix_factorization`.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got ndim={t.ndim}")
    if len(init) != 3 or check_factors(init, t.shape) != rank:
        raise ValueError("init must hold three factors of rank `rank` matching the tensor")
    return _solve(t, init, cfg, order=(0, 1, 2), monitor=monitor)
