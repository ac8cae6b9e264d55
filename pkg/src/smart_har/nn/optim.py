"""AdamW with decoupled weight decay, operating on named Param dicts."""

import numpy as np


class AdamW:
    def __init__(self, params, lr=0.001, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.value
            p.value -= self.lr * update

    def zero_grad(self):
        for p in self.params.values():
            p.grad[...] = 0.0

    def state_tensors(self):
        """Moment buffers plus step counter, keyed for checkpointing."""
        out = {}
        for k in self.params:
            out[f"adam.m.{k}"] = self.m[k]
            out[f"adam.v.{k}"] = self.v[k]
        out["adam.t"] = np.array([float(self.t)])
        return out

    def load_state_tensors(self, tensors):
        for k in self.params:
            self.m[k][...] = tensors[f"adam.m.{k}"]
            self.v[k][...] = tensors[f"adam.v.{k}"]
        self.t = int(round(float(tensors["adam.t"][0])))
