"""Synthetic fixtures and end-to-end experiment runners.

Everything here is deterministic given its seed; the only nondeterministic
field in any report is ``wall_time``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib.resources import files

import numpy as np

from .admm import AdmmConfig, QuantizedFactorSet, e_quant, quantized_cpd, quantized_matrix_factorization
from .cpd import AlsConfig, cp_als, init_for_admm
from .layers import (
    ConvLayerSpec,
    LinearLayerSpec,
    bop_count,
    direct_conv,
    factorized_forward,
    factorized_weights,
    reshape_kernel,
    select_rank,
)
from .quantize import QuantGrid, project
from .tensor import reconstruct

__all__ = [
    "SyntheticTensor",
    "on_grid_factors",
    "synthetic_tensor",
    "successive_quantization",
    "run_quantized",
    "qfactorize_report",
    "compare_report",
    "compress_conv",
    "STANDARD_SEEDS",
    "load_schema",
]

# seeds used for the benchmark comparisons
STANDARD_SEEDS = tuple(range(20))


@dataclass
class SyntheticTensor:
    tensor: np.ndarray
    factors: list[np.ndarray]
    grids: list[QuantGrid] | None
    floor: float  # e_quant of the generating factors


def on_grid_factors(shape, rank: int, bits: int, rng: np.random.Generator):
    """Random factors whose codes span the full ``bits`` range.

    The step is ``2**-(bits-1)`` so values lie in ``[-1, 1)``, and every
    factor contains both end codes. Such a factor is reproduced exactly by an
    asymmetric MinMax grid fitted to it (the fitted zero point is 0).
    """
    qmin, qmax = -(2 ** (bits - 1)), 2 ** (bits - 1) - 1
    if min(n * rank for n in shape) < 2:
        raise ValueError("each factor needs at least two entries to hold both end codes")
    grid = QuantGrid(bits, 2.0 ** -(bits - 1), 0, True)
    factors = []
    for n in shape:
        codes = rng.integers(qmin, qmax + 1, size=n * rank)
        pos = rng.choice(n * rank, size=2, replace=False)
        codes[pos] = (qmin, qmax)
        factors.append(grid.scale * codes.reshape(n, rank).astype(np.float64))
    return factors, [grid] * len(shape)


def synthetic_tensor(shape, rank: int, noise: float = 0.0, bits: int | None = None, seed: int = 0) -> SyntheticTensor:
    """Low-rank tensor plus Gaussian noise of relative norm ``noise``.

    With ``bits`` the generating factors are on a grid (see
    :func:`on_grid_factors`); otherwise they are standard normal.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) not in (2, 3) or min(shape) < 1:
        raise ValueError(f"shape must be 2- or 3-way with positive extents, got {shape}")
    if rank < 1 or noise < 0:
        raise ValueError("rank must be >= 1 and noise >= 0")
    rng = np.random.default_rng(seed)
    if bits is None:
        factors = [rng.standard_normal((n, rank)) for n in shape]
        grids = None
    else:
        factors, grids = on_grid_factors(shape, rank, bits, rng)
    clean = reconstruct(factors)
    t = clean
    if noise > 0:
        eps = rng.standard_normal(shape)
        t = clean + noise * np.linalg.norm(clean) / np.linalg.norm(eps) * eps
    floor = e_quant(t, factors) if np.any(t) else 0.0
    return SyntheticTensor(t, factors, grids, floor)


def successive_quantization(t, als_cfg: AlsConfig, cfg: AdmmConfig):
    """CP-ALS followed by a one-shot projection of every factor.

    Returns the projected factors and their ``e_quant``.
    """
    factors = cp_als(t, als_cfg)
    projected = [project(f, cfg.bits, cfg.scheme)[0] for f in factors]
    return projected, e_quant(t, projected)


def run_quantized(t, rank: int, cfg: AdmmConfig, als_cfg: AlsConfig, init: str) -> QuantizedFactorSet:
    """Initialize and run the quantized factorization matching ``t.ndim``."""
    t = np.asarray(t, dtype=np.float64)
    start = init_for_admm(t, als_cfg, init)
    if t.ndim == 2:
        return quantized_matrix_factorization(t, rank, cfg, start)
    if t.ndim == 3:
        return quantized_cpd(t, rank, cfg, start)
    raise ValueError(f"only 2- and 3-way tensors are supported, got ndim={t.ndim}")


def _layer_from_shape(shape, hw):
    if hw is None:
        return None
    if len(shape) == 2:
        return LinearLayerSpec(shape[0], shape[1]) if hw == (1, 1) else ConvLayerSpec(shape[0], shape[1], 1, *hw)
    d = int(round(np.sqrt(shape[2])))
    if d * d != shape[2]:
        raise ValueError(f"last mode {shape[2]} is not a flattened square kernel")
    return ConvLayerSpec(shape[0], shape[1], d, *hw)


def qfactorize_report(
    t,
    rank: int,
    cfg: AdmmConfig,
    als_cfg: AlsConfig,
    init: str,
    hw: tuple[int, int] | None = None,
    act_bits: int = 8,
) -> tuple[dict, QuantizedFactorSet]:
    """Run a quantized factorization and summarize it as a JSON-ready dict."""
    t = np.asarray(t, dtype=np.float64)
    t0 = time.perf_counter()
    q = run_quantized(t, rank, cfg, als_cfg, init)
    wall = time.perf_counter() - t0
    params_before = int(np.prod(t.shape))
    report = {
        "shape": list(t.shape),
        "rank": rank,
        "bits": cfg.bits,
        "scheme": cfg.scheme.method,
        "symmetric": cfg.scheme.symmetric,
        "init": init,
        "seed": als_cfg.seed,
        "e_quant": q.e_quant,
        "rel_error": q.rel_error,
        "params_before": params_before,
        "params_after": int(rank * sum(t.shape)),
        "sweeps": q.sweeps,
        "best_sweep": q.best_sweep,
        "converged": q.converged,
        "grids": [
            {"scale": g.scale, "zero_point": g.zero_point, "symmetric": g.symmetric} for g in q.grids
        ],
        "notes": list(q.notes),
        "wall_time": wall,
    }
    layer = _layer_from_shape(t.shape, hw)
    if layer is not None:
        bop = bop_count(layer, cfg.bits, act_bits, factorized=True, rank=rank)
        report["bops"] = bop.bops
        report["macs"] = bop.macs
    return report, q


def compare_report(t, rank: int, cfg: AdmmConfig, als_cfg: AlsConfig) -> dict:
    """Successive factor-then-quantize against the joint method with both inits.

    Labels: ``successive`` (CP-ALS then one-shot projection), ``admm_random``
    and ``admm_als_balanced``. ``winners`` names the lower ``e_quant`` of each
    pair; ties go to the joint method.
    """
    t = np.asarray(t, dtype=np.float64)
    t0 = time.perf_counter()
    _, succ = successive_quantization(t, als_cfg, cfg)
    rnd = run_quantized(t, rank, cfg, als_cfg, "random")
    bal = run_quantized(t, rank, cfg, als_cfg, "als_balanced")
    results = {"successive": succ, "admm_random": rnd.e_quant, "admm_als_balanced": bal.e_quant}

    def winner(a, b):
        return a if results[a] <= results[b] else b

    return {
        "shape": list(t.shape),
        "rank": rank,
        "bits": cfg.bits,
        "scheme": cfg.scheme.method,
        "symmetric": cfg.scheme.symmetric,
        "seed": als_cfg.seed,
        "als_iters": als_cfg.max_iters,
        "e_quant": results,
        "sweeps": {"admm_random": rnd.sweeps, "admm_als_balanced": bal.sweeps},
        "winners": {
            "admm_als_balanced_vs_successive": winner("admm_als_balanced", "successive"),
            "admm_random_vs_successive": winner("admm_random", "successive"),
            "admm_als_balanced_vs_admm_random": winner("admm_als_balanced", "admm_random"),
        },
        "wall_time": time.perf_counter() - t0,
    }


def compress_conv(
    k4,
    cfg: AdmmConfig,
    als_cfg: AlsConfig,
    init: str = "als_balanced",
    rate: float | None = None,
    rank: int | None = None,
    hw: tuple[int, int] = (8, 8),
    act_bits: int = 8,
    probe_seed: int = 0,
):
    """Compress a ``T x S x D x D`` kernel into three quantized layers.

    Exactly one of ``rate`` and ``rank`` must be given. A 1x1 kernel goes
    through the matrix path. Returns ``(report, weights, qfs)``.
    """
    k4 = np.asarray(k4, dtype=np.float64)
    if k4.ndim != 4 or k4.shape[2] != k4.shape[3]:
        raise ValueError(f"expected a T x S x D x D kernel, got shape {k4.shape}")
    T, S, D, _ = k4.shape
    if D % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {D}")
    if (rate is None) == (rank is None):
        raise ValueError("give exactly one of rate and rank")
    if rank is None:
        rank = select_rank((T, S, D), rate)

    t0 = time.perf_counter()
    target = k4[:, :, 0, 0] if D == 1 else reshape_kernel(k4)
    q = run_quantized(target, rank, cfg, als_cfg, init)
    weights = factorized_weights(q.factors)
    wall = time.perf_counter() - t0

    probe = np.random.default_rng(probe_seed).standard_normal((S, *hw))
    ref = direct_conv(k4, probe)
    dev = float(np.linalg.norm(factorized_forward(weights, probe) - ref) / np.linalg.norm(ref))

    layer = ConvLayerSpec(T, S, D, *hw)
    orig = bop_count(layer, 32, 32)
    comp = bop_count(layer, cfg.bits, act_bits, factorized=True, rank=rank)
    report = {
        "kernel_shape": [T, S, D, D],
        "rank": rank,
        "rate": rate,
        "path": "matrix" if D == 1 else "cp3",
        "bits": cfg.bits,
        "act_bits": act_bits,
        "scheme": cfg.scheme.method,
        "init": init,
        "seed": als_cfg.seed,
        "e_quant": q.e_quant,
        "sweeps": q.sweeps,
        "probe_hw": list(hw),
        "probe_deviation": dev,
        "original": {"macs": orig.macs, "bops": orig.bops, "params": orig.params_before, "b_w": 32, "b_a": 32},
        "compressed": {
            "macs": comp.macs,
            "bops": comp.bops,
            "params": comp.params_after,
            "b_w": comp.b_w,
            "b_a": comp.b_a,
        },
        "wall_time": wall,
    }
    return report, weights, q


def load_schema(name: str) -> dict:
    """JSON schema for a report: ``"qfactorize"``, ``"compare"`` or ``"compress_conv"``."""
    return json.loads(files("qcpd").joinpath("schemas", f"{name}.schema.json").read_text())
