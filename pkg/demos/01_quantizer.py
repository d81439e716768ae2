"""
Per-tensor uniform quantization
===============================

Fit a grid to some data, round to it, and compare the MinMax and MSE range
choices.
"""

import numpy as np

from qcpd import QuantScheme, dequantize, minmax_grid, mse_grid, project, quantize

# a 2-bit symmetric grid spanning [-1, 1] has step 2/3 and codes -2..1
x = np.array([-1.0, -0.4, 0.3, 1.0])
g = minmax_grid(x, 2, symmetric=True)
print("scale", g.scale, "codes", quantize(x, g), "values", dequantize(quantize(x, g), g))

# 1.0 / (2/3) = 1.5 rounds (half to even) to 2, which is clipped to the top code 1

# heavy tails: MinMax wastes levels on the extremes, the MSE search clips them
rng = np.random.default_rng(0)
w = rng.standard_t(3, 10_000)
for bits in (2, 4, 8):
    gm, gs = mse_grid(w, bits), minmax_grid(w, bits)
    err = lambda grid: np.mean((w - dequantize(quantize(w, grid), grid)) ** 2)
    print(f"b={bits}: MinMax MSE {err(gs):.3e}  MSE-search MSE {err(gm):.3e}  (clip at {gm.qmax * gm.scale:.2f}"
          f" of max {np.abs(w).max():.2f})")

# project() does fit + round in one call and hands back the grid
y, grid = project(w[:5], 4, QuantScheme("minmax", symmetric=False))
print(w[:5].round(3), "->", y.round(3), grid)
