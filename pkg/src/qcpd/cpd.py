"""Unconstrained CP-ALS and the initializations handed to the quantized solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor import mttkrp, reconstruct

__all__ = ["AlsConfig", "random_factors", "cp_als", "balance_factors", "init_for_admm"]

INIT_MODES = ("random", "als_balanced")


@dataclass(frozen=True)
class AlsConfig:
    rank: int
    max_iters: int = 10
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


def _check_tensor(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim not in (2, 3):
        raise ValueError(f"only 2- and 3-way tensors are supported, got ndim={t.ndim}")
    return t


def random_factors(shape, rank: int, seed: int, norm: float = 1.0) -> list[np.ndarray]:
    """Standard-normal factors scaled by ``(norm / rank) ** (1 / ndim)``.

    Drawn in mode order from ``np.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    scale = (norm / rank) ** (1.0 / len(shape))
    return [scale * rng.standard_normal((n, rank)) for n in shape]


def _rel_err(t, factors, tnorm):
    if tnorm == 0:
        return 0.0
    return float(np.linalg.norm((t - reconstruct(factors)).ravel()) / tnorm)


def cp_als(t, cfg: AlsConfig, return_errors: bool = False):
    """Rank-``cfg.rank`` CP decomposition by alternating least squares.

    Each sweep solves the exact least-squares problem for every factor in mode
    order, ``F_n = MTTKRP_n @ inv(V_n)`` where ``V_n`` is the Hadamard product
    of the other factors' Gram matrices plus a ``1e-12 * trace`` ridge.

    Parameters
    ----------
    t : ndarray
        2- or 3-way tensor.
    cfg : AlsConfig
        Rank, sweep budget, stopping tolerance on the relative-error decrease
        and seed for the random starting point.
    return_errors : bool
        Also return the relative error after every sweep, starting with the
        error of the random initialization.

    Returns
    -------
    factors : list of ndarray
    errors : list of float, only if ``return_errors``
    """
    t = _check_tensor(t)
    tnorm = float(np.linalg.norm(t.ravel()))
    factors = random_factors(t.shape, cfg.rank, cfg.seed, tnorm)
    errors = [_rel_err(t, factors, tnorm)]
    if tnorm == 0:
        factors = [np.zeros_like(f) for f in factors]
        errors = [0.0]
        return (factors, errors) if return_errors else factors

    grams = [f.T @ f for f in factors]
    for _ in range(cfg.max_iters):
        for n in range(t.ndim):
            v = np.ones((cfg.rank, cfg.rank))
            for i, g in enumerate(grams):
                if i != n:
                    v *= g
            v[np.diag_indices_from(v)] += 1e-12 * np.trace(v)
            k = mttkrp(t, factors, n)
            factors[n] = scipy.linalg.solve(v, k.T, assume_a="pos").T
            grams[n] = factors[n].T @ factors[n]
        errors.append(_rel_err(t, factors, tnorm))
        if errors[-2] - errors[-1] < cfg.tol:
            break
    return (factors, errors) if return_errors else factors


def balance_factors(factors) -> list[np.ndarray]:
    """Equalize the norms of matching columns across factors.

    Column ``r`` of every factor is rescaled to the geometric mean of the
    original column norms, which leaves each rank-one term unchanged. Columns
    with a zero norm in any factor are left alone.
    """
    factors = [np.array(f, dtype=np.float64) for f in factors]
    norms = np.stack([np.linalg.norm(f, axis=0) for f in factors])
    ok = np.all(norms > 0, axis=0)
    target = np.ones(norms.shape[1])
    target[ok] = np.exp(np.mean(np.log(norms[:, ok]), axis=0))
    for f, nrm in zip(factors, norms):
        f[:, ok] *= target[ok] / nrm[ok]
    return factors


def init_for_admm(t, cfg: AlsConfig, mode: str = "als_balanced") -> list[np.ndarray]:
    """Starting factors for the quantized solver.

    ``"random"`` returns the seeded normal draw used to start ALS.
    ``"als_balanced"`` runs ``cfg.max_iters`` ALS sweeps from that draw and
    balances the column norms; with zero sweeps it returns the raw draw.
    """
    t = _check_tensor(t)
    if mode not in INIT_MODES:
        raise ValueError(f"unknown init mode {mode!r}, expected one of {INIT_MODES}")
    if mode == "random" or cfg.max_iters == 0:
        tnorm = float(np.linalg.norm(t.ravel()))
        return random_factors(t.shape, cfg.rank, cfg.seed, tnorm)
    return balance_factors(cp_als(t, cfg))
