"""Numerically careful activations and losses with hand-derived gradients.

Everything stays in float64. Losses return (value, grad_wrt_logits) pairs so
callers do not recompute intermediates during the backward pass.
"""

import numpy as np


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    """log(1 + exp(z)) without overflow for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def log_softmax(logits, axis=-1):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(logits, axis=-1):
    return np.exp(log_softmax(logits, axis=axis))


def cross_entropy(logits, labels):
    """Mean CE over a batch of integer labels.

    logits: (B, C) float64, labels: (B,) int. Returns (loss, dlogits) where
    dlogits already carries the 1/B batch averaging.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    b = logits.shape[0]
    logp = log_softmax(logits, axis=1)
    loss = -np.mean(logp[np.arange(b), labels])
    dlogits = np.exp(logp)
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return loss, dlogits


def binary_cross_entropy_with_logit(z, targets):
    """Mean BCE on raw logits: softplus(z) - y*z, stable for any z.

    z and targets broadcast together; the mean runs over every element.
    Returns (loss, dz) with dz = (sigmoid(z) - y) / n.
    """
    z = np.asarray(z, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    z, targets = np.broadcast_arrays(z, targets)
    n = z.size
    loss = np.sum(softplus(z) - targets * z) / n
    dz = (sigmoid(z) - targets) / n
    return loss, dz


def relu(x):
    return np.maximum(x, 0.0)


def drelu(dout, x):
    return dout * (x > 0.0)


def tanh(x):
    return np.tanh(x)


def dtanh(dout, out):
    return dout * (1.0 - out * out)
