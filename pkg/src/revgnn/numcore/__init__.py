"""Numerical substrate: autodiff tensors, sparse adjacency, Adam, grad checks."""
from .autodiff import (
    Tensor,
    add,
    add_bias,
    as_tensor,
    backward,
    clip,
    concat,
    div,
    elementwise_mul,
    exp,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    outer_linear,
    prelu,
    relu,
    reshape,
    rowsum,
    sigmoid,
    spmm,
    sub,
    take_along_rows,
    take_rows,
    transpose,
    weighted_sum,
)
from .autodiff import sum as tsum
from .gradcheck import grad_check
from .optim import AdamState, adam_step
from .sparse import SparseAdjacency, normalize_adjacency

__all__ = [
    "AdamState", "SparseAdjacency", "Tensor", "adam_step", "add", "add_bias", "as_tensor",
    "backward", "clip", "concat", "div", "elementwise_mul", "exp", "grad_check", "log",
    "matmul", "mean", "mul", "no_grad", "normalize_adjacency", "outer_linear", "prelu",
    "relu", "reshape", "rowsum", "sigmoid", "spmm", "sub", "take_along_rows", "take_rows",
    "transpose", "tsum", "weighted_sum",
]
