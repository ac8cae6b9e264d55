"""Minimal module/parameter machinery for the hand-rolled layers.

Parameters are float64 arrays with a matching grad buffer. Modules collect
parameters recursively through attribute order, which is deterministic, so
checkpoint tensor names and init draws are stable across runs.
"""

import numpy as np


class Param:
    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


class Module:
    """Base class; subclasses assign Param / Module attributes in __init__."""

    def named_params(self, prefix=""):
        for name, attr in vars(self).items():
            full = f"{prefix}{name}" if not prefix else f"{prefix}.{name}"
            if isinstance(attr, Param):
                yield full, attr
            elif isinstance(attr, Module):
                yield from attr.named_params(full)
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield from item.named_params(f"{full}.{i}")
                    elif isinstance(item, Param):
                        yield f"{full}.{i}", item

    def param_dict(self):
        return dict(self.named_params())

    def zero_grad(self):
        for _, p in self.named_params():
            p.grad[...] = 0.0

    def num_params(self):
        return sum(p.value.size for _, p in self.named_params())


def uniform_fan_in(rng, shape, fan_in):
    """Uniform init scaled by 1/sqrt(fan_in); weights and biases alike."""
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape)
