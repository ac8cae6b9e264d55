from . import functional, kernels
from .core import Module, Param, uniform_fan_in
from .layers import Conv1dSame, Conv2d, Linear, ReLU, Sequential, Tanh
from .optim import AdamW

__all__ = [
    "functional",
    "kernels",
    "Module",
    "Param",
    "uniform_fan_in",
    "Conv1dSame",
    "Conv2d",
    "Linear",
    "ReLU",
    "Sequential",
    "Tanh",
    "AdamW",
]
