"""Minimal reverse-mode autodiff over float64 numpy arrays."""

from . import ops
from .check import grad_check, numeric_grad
from .ops import (concat, dropout, exp, getitem, layer_norm, log, matmul, normalize, relu,
                  reshape, selu, sigmoid, silu, softmax, softmax_rows, softplus, sqrt, stack,
                  straight_through, take, transpose)
from .store import ParamStore, StoreFormatError, init_uniform, load_params, save_params
from .tensor import Tape, Tensor, as_tensor

__all__ = [
    "Tensor", "Tape", "as_tensor", "ops", "grad_check", "numeric_grad",
    "ParamStore", "StoreFormatError", "init_uniform", "save_params", "load_params",
    "concat", "dropout", "exp", "getitem", "layer_norm", "log", "matmul", "normalize",
    "relu", "reshape", "selu", "sigmoid", "silu", "softmax", "softmax_rows", "softplus",
    "sqrt", "stack", "straight_through", "take", "transpose",
]
