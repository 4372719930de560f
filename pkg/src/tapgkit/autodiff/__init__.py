"""Reverse-mode autodiff: tensors, layers, optimizers, checkpoints."""

from tapgkit.autodiff.tensor import (
    Tape,
    Tensor,
    all_finite,
    add,
    clip,
    concat,
    constant,
    conv1d,
    conv2d,
    conv3d,
    default_dtype,
    exp,
    gather_rows,
    get_default_dtype,
    l2_norm,
    linear,
    log,
    matmul,
    mean,
    mean_pool,
    mul,
    neg,
    parameter,
    relu,
    reshape,
    scale,
    set_default_dtype,
    sigmoid,
    softmax,
    sqrt,
    stack,
    sub,
    sum_,
    transpose,
)
from tapgkit.autodiff.layers import (
    MLP,
    Conv1d,
    Conv2d,
    Conv3d,
    Linear,
    Module,
    SelfAttentionEncoder,
    glorot_uniform,
)
from tapgkit.autodiff.optim import Adam
from tapgkit.autodiff.checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Adam", "Conv1d", "Conv2d", "Conv3d", "Linear", "MLP", "Module",
    "SelfAttentionEncoder", "Tape", "Tensor", "add", "all_finite", "clip",
    "concat", "constant", "conv1d", "conv2d", "conv3d", "default_dtype",
    "exp", "gather_rows", "get_default_dtype", "glorot_uniform", "l2_norm",
    "linear", "load_checkpoint", "log", "matmul", "mean", "mean_pool", "mul",
    "neg", "parameter", "relu", "reshape", "save_checkpoint", "scale",
    "set_default_dtype", "sigmoid", "softmax", "sqrt", "stack", "sub",
    "sum_", "transpose",
]
