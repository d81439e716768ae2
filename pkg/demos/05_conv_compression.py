"""
Compressing a convolution kernel
================================

Turn a 3x3 convolution into pointwise, depthwise and pointwise layers with
4-bit weights, and count what it costs.
"""

import numpy as np

from qcpd import AdmmConfig, AlsConfig, QuantScheme
from qcpd.bench import compress_conv
from qcpd.layers import ConvLayerSpec, bop_count, direct_conv, factorized_forward, select_rank

# a kernel that is close to low rank, as trained kernels often are
rng = np.random.default_rng(0)
T, S, D, R_true = 32, 16, 3, 6
k4 = np.einsum("tr,sr,jr,ir->tsji", *(rng.standard_normal((n, R_true)) for n in (T, S, D, D)))
k4 += 0.05 * np.linalg.norm(k4) / np.sqrt(k4.size) * rng.standard_normal(k4.shape)

rank = select_rank((T, S, D), rate=4)
print("rank for a 4x parameter reduction:", rank)

report, weights, q = compress_conv(
    k4, AdmmConfig(bits=4, scheme=QuantScheme("mse")), AlsConfig(rank=rank), rate=4, hw=(16, 16)
)
print("first", weights.first.shape, "mid", weights.mid.shape, "last", weights.last.shape)
print(f"e_quant {report['e_quant']:.4f}, output deviation on a random input {report['probe_deviation']:.4f}")
print("original  :", report["original"])
print("compressed:", report["compressed"])

# the three-stage layer computes exactly the convolution with the rebuilt kernel
x = rng.standard_normal((S, 16, 16))
y3 = factorized_forward(weights, x)
k_hat = np.einsum("tr,rs,jir->tsji", weights.last, weights.first, weights.mid)
print("three-stage vs direct:", np.abs(y3 - direct_conv(k_hat, x)).max())

# bit operations for a common layer size
rep = bop_count(ConvLayerSpec(64, 64, 3, 56, 56), b_w=4, b_a=8)
print(f"64->64 3x3 at 56x56, w4a8: {rep.macs:,} MACs, {rep.bops:,} BOPs")
