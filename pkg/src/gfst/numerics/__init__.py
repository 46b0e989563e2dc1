from .functional import (
    ComplexTensor,
    avgpool_padded,
    complex_einsum,
    complex_mul_kernel,
    conv1d,
    dft,
    elu,
    gelu,
    idft,
    irfft_modes,
    leaky_relu,
    linear,
    softmax,
)
from .tensor import (
    BackwardError,
    ConfigError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    einsum,
    gather_time,
    matmul,
    no_grad,
    stack,
    take,
    where,
)

__all__ = [
    "BackwardError", "ComplexTensor", "ConfigError", "DimensionError", "Tensor", "as_tensor",
    "avgpool_padded", "complex_einsum", "complex_mul_kernel", "concat", "conv1d", "dft", "einsum",
    "elu", "gather_time", "gelu", "idft", "irfft_modes", "leaky_relu", "linear", "matmul",
    "no_grad", "softmax", "stack", "take", "where",
]
