"""
Random versus ALS initialization
================================

The ADMM solver is local, so where it starts matters. Compare a scaled random
start with balanced ALS factors on a few seeds.
"""

from qcpd import AdmmConfig, AlsConfig, QuantScheme
from qcpd.bench import run_quantized, successive_quantization, synthetic_tensor

cfg = AdmmConfig(bits=4, scheme=QuantScheme("mse"))
print("seed  successive  admm(random)  admm(als)")
for s in range(4):
    t = synthetic_tensor((64, 64, 9), 16, noise=0.01, seed=1000 + s).tensor
    als = AlsConfig(rank=16, seed=s)
    _, succ = successive_quantization(t, als, cfg)
    rnd = run_quantized(t, 16, cfg, als, "random")
    bal = run_quantized(t, 16, cfg, als, "als_balanced")
    print(f"{s:4d}  {succ:10.4f}  {rnd.e_quant:12.4f}  {bal.e_quant:9.4f}")

# the last run's trace shows how quickly it settles
for sweep, eq, _ in bal.trace:
    print(f"sweep {sweep}: e_quant {eq:.5f}")
