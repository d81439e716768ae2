"""Quantization-aware CP and matrix factorization with ADMM."""

from .admm import (
    AdmmConfig,
    QuantizedFactorSet,
    admm_factor_update,
    e_quant,
    quantized_cpd,
    quantized_matrix_factorization,
)
from .cpd import AlsConfig, balance_factors, cp_als, init_for_admm
from .layers import (
    BopReport,
    ConvLayerSpec,
    FactorizedConvWeights,
    LinearLayerSpec,
    bop_count,
    direct_conv,
    factorized_forward,
    factorized_weights,
    reshape_back,
    reshape_kernel,
    select_rank,
)
from .quantize import QuantGrid, QuantScheme, dequantize, minmax_grid, mse_grid, project, quantize
from .tensor import fold, gram, khatri_rao, mttkrp, reconstruct, rel_error, unfold
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"
