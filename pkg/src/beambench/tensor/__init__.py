from .engine import (
    Tensor,
    add,
    backward,
    concat,
    embedding_lookup,
    gather_rows,
    layer_norm,
    log,
    matmul,
    mul,
    no_grad,
    relu,
    reshape,
    select,
    softmax,
    sub,
    tensor_mean,
    tensor_sum,
    transpose,
)
from .attention import scaled_dot_product_attention
from .conv import adaptive_avg_pool2d, conv2d, maxpool2d
from .optim import Adam, adam_step

__all__ = [
    "Tensor",
    "add",
    "sub",
    "mul",
    "matmul",
    "relu",
    "log",
    "tensor_sum",
    "tensor_mean",
    "reshape",
    "transpose",
    "select",
    "concat",
    "softmax",
    "layer_norm",
    "embedding_lookup",
    "gather_rows",
    "backward",
    "no_grad",
    "conv2d",
    "maxpool2d",
    "adaptive_avg_pool2d",
    "scaled_dot_product_attention",
    "Adam",
    "adam_step",
]
