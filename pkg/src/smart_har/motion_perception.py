"""Skeleton feature extraction and the skeleton-only baseline.

The encoder consumes normalized keypoints: each frame becomes a vector of
pose coordinates centered on the frame's keypoint centroid plus a velocity
channel of raw frame differences, so pose shape and motion speed are both
visible while the clip's arbitrary placement in the frame is not. A shared
per-frame linear map feeds two same-length temporal convolutions; mean
pooling over time and a final linear map produce Z_K. Replacements can be
registered under a name and selected via the skeleton_encoder config key;
anything mapping a (B, T, N, 2) batch to (B, d_K) with the Module interface
qualifies.
"""

import numpy as np

from .errors import ConfigError, NumericError
from .nn import Conv1dSame, Linear, Module
from .nn import functional as F


class SkeletonEncoder(Module):
    def __init__(self, rng, n_keypoints=17, d_hidden=64, d_out=128, kernel=5):
        self.n_in = 2 * n_keypoints
        self.frame = Linear(rng, 2 * self.n_in, d_hidden)
        self.conv1 = Conv1dSame(rng, d_hidden, d_hidden, kernel)
        self.conv2 = Conv1dSame(rng, d_hidden, d_hidden, kernel)
        self.head = Linear(rng, d_hidden, d_out)
        self.d_out = d_out

    @staticmethod
    def frame_features(skeleton):
        """(B, T, N, 2) -> (B, T, 4N): [centroid-centered coords | frame diffs]."""
        b, T = skeleton.shape[0], skeleton.shape[1]
        cent = skeleton - skeleton.mean(axis=2, keepdims=True)
        flat = skeleton.reshape(b, T, -1)
        vel = np.zeros_like(flat)
        vel[:, 1:] = flat[:, 1:] - flat[:, :-1]
        return np.concatenate([cent.reshape(b, T, -1), vel], axis=2)

    def forward(self, skeleton):
        if not np.all(np.isfinite(skeleton)):
            raise NumericError("skeleton contains non-finite values")
        feats = self.frame_features(skeleton)
        h, frame_cache = self.frame.forward(feats)
        h = h.transpose(0, 2, 1)
        a1, c1 = self.conv1.forward(h)
        r1 = F.relu(a1)
        a2, c2 = self.conv2.forward(r1)
        r2 = F.relu(a2)
        pooled = r2.mean(axis=2)
        z, head_cache = self.head.forward(pooled)
        return z, (frame_cache, c1, a1, c2, a2, r2.shape, head_cache)

    def backward(self, dz, cache):
        frame_cache, c1, a1, c2, a2, r2_shape, head_cache = cache
        dpooled = self.head.backward(dz, head_cache)
        T = r2_shape[2]
        dr2 = np.repeat(dpooled[:, :, None], T, axis=2) / T
        da2 = F.drelu(dr2, a2)
        dr1 = self.conv2.backward(da2, c2)
        da1 = F.drelu(dr1, a1)
        dh = self.conv1.backward(da1, c1)
        dfeats = self.frame.backward(dh.transpose(0, 2, 1), frame_cache)
        b, T = dfeats.shape[0], dfeats.shape[1]
        dcent = dfeats[:, :, :self.n_in].reshape(b, T, -1, 2)
        dvel = dfeats[:, :, self.n_in:]
        dsk = dcent - dcent.mean(axis=2, keepdims=True)
        dflat = dsk.reshape(b, T, -1).copy()
        dflat[:, 1:] += dvel[:, 1:]
        dflat[:, :-1] -= dvel[:, 1:]
        return dflat.reshape(b, T, -1, 2)


ENCODERS = {"standin": SkeletonEncoder}


def make_skeleton_encoder(name, rng, **kwargs):
    if name not in ENCODERS:
        raise ConfigError(
            f"unknown skeleton_encoder {name!r}; registered: {sorted(ENCODERS)}")
    return ENCODERS[name](rng, **kwargs)


class BaselineClassifier(Module):
    """Linear classifier over Z_K with the plain cross-entropy objective."""

    def __init__(self, rng, d_in=128, n_classes=10):
        self.fc = Linear(rng, d_in, n_classes)
        self.n_classes = n_classes

    def forward(self, z_k):
        return self.fc.forward(z_k)

    def backward(self, dlogits, cache):
        return self.fc.backward(dlogits, cache)


def baseline_loss(logits, labels):
    labels = np.asarray(labels)
    n_classes = logits.shape[-1]
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    return F.cross_entropy(logits, labels)


class BaselineModel(Module):
    """Skeleton-only pipeline: encoder then classifier."""

    def __init__(self, rng, n_keypoints=17, d_k=128, n_classes=10):
        self.encoder = SkeletonEncoder(rng, n_keypoints=n_keypoints, d_out=d_k)
        self.classifier = BaselineClassifier(rng, d_in=d_k, n_classes=n_classes)

    def forward(self, skeleton):
        z_k, enc_cache = self.encoder.forward(skeleton)
        logits, cls_cache = self.classifier.forward(z_k)
        return logits, (enc_cache, cls_cache)

    def backward(self, dlogits, cache):
        enc_cache, cls_cache = cache
        dz = self.classifier.backward(dlogits, cls_cache)
        return self.encoder.backward(dz, enc_cache)
