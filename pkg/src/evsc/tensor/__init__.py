"""Minimal float64 tensor engine: reverse-mode autodiff, params, optimizers."""
from .core import (
    ShapeError,
    Tensor,
    add,
    apply_core_op,
    as_tensor,
    backward,
    concat,
    cross_entropy,
    embedding,
    layer_norm,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_axis,
    softmax,
    stack,
    sub,
    sum_,
    take_rows,
    tanh,
    transpose,
)
from .gradcheck import finite_diff_check, finite_diff_check_params
from .optim import AdamState, adam_step, sgd_step
from .params import ParamStore

__all__ = [
    "AdamState", "ParamStore", "ShapeError", "Tensor", "adam_step", "add", "apply_core_op",
    "as_tensor", "backward", "concat", "cross_entropy", "embedding", "finite_diff_check",
    "finite_diff_check_params",
    "layer_norm", "matmul", "mean", "mul", "relu", "reshape", "sgd_step", "sigmoid",
    "slice_axis", "softmax", "stack", "sub", "sum_", "take_rows", "tanh", "transpose",
]
