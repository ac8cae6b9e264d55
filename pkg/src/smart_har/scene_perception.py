"""Scene feature extraction.

Depth streams are split per mask class into semantic depth, the human
region's per-frame statistical center forms a T×3 trajectory, a
relative-position self-attention encoder turns the trajectory into Z_J, and
a pair of shared-weight map encoders turns human-versus-element differences
in depth and mask occupancy into Z_S. Trajectory inputs to the encoder are
normalized (u/W, v/H, d/d_max with d_max the clip's deepest surface); map
inputs are temporally mean-pooled before encoding, so the siamese path sees
one H×W image per channel.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, NumericError, VocabularyError
from .nn import Linear, Module, Param, uniform_fan_in
from .nn import functional as F
from .nn.layers import Conv2d
from .synthgen.actions import MASK_HUMAN, MASK_VOCABULARY, SCENE_ELEMENTS


@dataclass
class SemanticDepth:
    """Per-class masked depth: human plus each scene element."""

    human: np.ndarray
    elements: dict


def decouple(depth, mask):
    depth = np.asarray(depth)
    mask = np.asarray(mask)
    if depth.shape != mask.shape:
        raise VocabularyError(
            f"depth shape {depth.shape} does not match mask shape {mask.shape}")
    present = np.unique(mask)
    unknown = [int(v) for v in present if int(v) not in MASK_VOCABULARY]
    if unknown:
        raise VocabularyError(f"mask contains unknown class ids {unknown}")
    human = depth * (mask == MASK_HUMAN)
    elements = {name: depth * (mask == class_id) for name, class_id in SCENE_ELEMENTS}
    return SemanticDepth(human=human, elements=elements)


def statistical_center(depth_frame, mask_frame):
    """(u_c, v_c, d_c) of the human region in one frame."""
    rows, cols = np.nonzero(mask_frame == MASK_HUMAN)
    if rows.size == 0:
        raise EmptyRegionError("frame has no human pixels")
    d = np.asarray(depth_frame, dtype=np.float64)[rows, cols]
    return float(cols.mean()), float(rows.mean()), float(d.mean())


def extract_trajectory(sample):
    out = np.empty((sample.T, 3), dtype=np.float64)
    for t in range(sample.T):
        try:
            out[t] = statistical_center(sample.depth[t], sample.mask[t])
        except EmptyRegionError as exc:
            raise EmptyRegionError(
                f"sequence {sample.sequence_id} frame {t}: {exc}") from exc
    return out


def normalize_trajectory(traj, W, H, d_max):
    out = np.array(traj, dtype=np.float64)
    out[:, 0] /= W
    out[:, 1] /= H
    out[:, 2] /= d_max
    return out


class TrajectoryEncoder(Module):
    """Self-attention over trajectory steps with relative position scores.

    Q, K, V are linear maps of the 3-dim trajectory rows; the score between
    steps i and j adds q_i . r_(j-i) with the offset clipped to +-clip_k.
    Attention outputs are mean-pooled over time and projected to d_J.
    """

    def __init__(self, rng, d_hidden=32, d_out=64, clip_k=8):
        self.wq = Param(uniform_fan_in(rng, (3, d_hidden), 3))
        self.wk = Param(uniform_fan_in(rng, (3, d_hidden), 3))
        self.wv = Param(uniform_fan_in(rng, (3, d_hidden), 3))
        self.rel = Param(uniform_fan_in(rng, (2 * clip_k + 1, d_hidden), d_hidden))
        self.out = Linear(rng, d_hidden, d_out)
        self.clip_k = clip_k
        self.d_hidden = d_hidden

    def _offsets(self, T):
        j = np.arange(T)
        return np.clip(j[None, :] - j[:, None], -self.clip_k, self.clip_k) + self.clip_k

    def attention(self, traj):
        """Attention matrix and pre-pool outputs for a batch (B, T, 3)."""
        if not np.all(np.isfinite(traj)):
            raise NumericError("trajectory contains non-finite values")
        q = traj @ self.wq.value
        k = traj @ self.wk.value
        v = traj @ self.wv.value
        idx = self._offsets(traj.shape[1])
        rel = self.rel.value[idx]
        scores = np.einsum("bid,ijd->bij", q, rel)
        logits = (q @ k.transpose(0, 2, 1) + scores) / np.sqrt(self.d_hidden)
        attn = F.softmax(logits, axis=2)
        return attn, attn @ v

    def forward(self, traj):
        if not np.all(np.isfinite(traj)):
            raise NumericError("trajectory contains non-finite values")
        q = traj @ self.wq.value
        k = traj @ self.wk.value
        v = traj @ self.wv.value
        idx = self._offsets(traj.shape[1])
        rel = self.rel.value[idx]
        scores = np.einsum("bid,ijd->bij", q, rel)
        logits = (q @ k.transpose(0, 2, 1) + scores) / np.sqrt(self.d_hidden)
        attn = F.softmax(logits, axis=2)
        pre = attn @ v
        pooled = pre.mean(axis=1)
        z, out_cache = self.out.forward(pooled)
        return z, (traj, q, k, v, idx, rel, attn, out_cache)

    def backward(self, dz, cache):
        traj, q, k, v, idx, rel, attn, out_cache = cache
        T = traj.shape[1]
        dpooled = self.out.backward(dz, out_cache)
        dpre = np.repeat(dpooled[:, None, :], T, axis=1) / T
        dattn = dpre @ v.transpose(0, 2, 1)
        dv = attn.transpose(0, 2, 1) @ dpre
        dlogits = attn * (dattn - np.sum(dattn * attn, axis=2, keepdims=True))
        dlogits /= np.sqrt(self.d_hidden)
        dq = dlogits @ k + np.einsum("bij,ijd->bid", dlogits, rel)
        dk = dlogits.transpose(0, 2, 1) @ q
        drel = np.einsum("bij,bid->ijd", dlogits, q)
        np.add.at(self.rel.grad, idx, drel)
        self.wq.grad += np.einsum("bti,btd->id", traj, dq)
        self.wk.grad += np.einsum("bti,btd->id", traj, dk)
        self.wv.grad += np.einsum("bti,btd->id", traj, dv)
        return (dq @ self.wq.value.T + dk @ self.wk.value.T
                + dv @ self.wv.value.T)


class MapEncoder(Module):
    """Three strided conv layers then a linear head, for one-channel maps."""

    def __init__(self, rng, H, W, d_emb=32):
        self.conv1 = Conv2d(rng, 1, 8, 3, stride=2)
        self.conv2 = Conv2d(rng, 8, 16, 3, stride=2)
        self.conv3 = Conv2d(rng, 16, 16, 3, stride=2)
        sizes = [H, W]
        for _ in range(3):
            sizes = [(s - 3) // 2 + 1 for s in sizes]
        if min(sizes) < 1:
            raise ValueError(f"map {H}x{W} too small for the encoder stack")
        self.flat_dim = 16 * sizes[0] * sizes[1]
        self.head = Linear(rng, self.flat_dim, d_emb)

    def forward(self, x):
        a1, c1 = self.conv1.forward(x)
        r1 = F.relu(a1)
        a2, c2 = self.conv2.forward(r1)
        r2 = F.relu(a2)
        a3, c3 = self.conv3.forward(r2)
        r3 = F.relu(a3)
        flat = r3.reshape(x.shape[0], self.flat_dim)
        z, ch = self.head.forward(flat)
        return z, (c1, a1, c2, a2, c3, a3, r3.shape, ch)

    def backward(self, dz, cache):
        c1, a1, c2, a2, c3, a3, r3_shape, ch = cache
        dflat = self.head.backward(dz, ch)
        dr3 = dflat.reshape(r3_shape)
        da3 = F.drelu(dr3, a3)
        dr2 = self.conv3.backward(da3, c3)
        da2 = F.drelu(dr2, a2)
        dr1 = self.conv2.backward(da2, c2)
        da1 = F.drelu(dr1, a1)
        return self.conv1.backward(da1, c1)


class InteractionEncoder(Module):
    """Dual siamese branches over semantic depth and mask occupancy.

    Inputs are (B, 5, H, W) stacks: channel 0 the human, channels 1..4 the
    scene elements in vocabulary order. Each modality runs one shared
    encoder over all five channels; per element the absolute embedding
    difference against the human channel passes a bias-free projection and
    a tanh, so blocks stay in (-1, 1) and identical inputs map to exactly
    zero. Z_S concatenates [depth block, mask block] per element.
    """

    def __init__(self, rng, H, W, d_emb=32, d_e=16):
        self.enc_depth = MapEncoder(rng, H, W, d_emb)
        self.enc_mask = MapEncoder(rng, H, W, d_emb)
        self.proj_depth = Linear(rng, d_emb, d_e, bias=False)
        self.proj_mask = Linear(rng, d_emb, d_e, bias=False)
        self.d_e = d_e
        self.d_emb = d_emb
        self.n_elements = len(SCENE_ELEMENTS)
        self.d_out = 2 * d_e * self.n_elements

    def _branch(self, maps, enc, proj):
        b = maps.shape[0]
        stacked = maps.reshape(b * 5, 1, *maps.shape[2:])
        emb, enc_cache = enc.forward(stacked)
        emb = emb.reshape(b, 5, self.d_emb)
        diff = emb[:, 1:, :] - emb[:, :1, :]
        absdiff = np.abs(diff)
        pre, proj_cache = proj.forward(absdiff)
        blocks = np.tanh(pre)
        return blocks, (enc_cache, diff, proj_cache, blocks, b)

    def _branch_backward(self, dblocks, cache, enc, proj):
        enc_cache, diff, proj_cache, blocks, b = cache
        dabs = proj.backward(dblocks * (1.0 - blocks * blocks), proj_cache)
        ddiff = dabs * np.sign(diff)
        demb = np.zeros((b, 5, self.d_emb))
        demb[:, 1:, :] = ddiff
        demb[:, 0, :] = -ddiff.sum(axis=1)
        enc.backward(demb.reshape(b * 5, self.d_emb), enc_cache)

    def forward(self, depth_maps, mask_maps, use_depth=True, use_mask=True):
        b = depth_maps.shape[0]
        zero = np.zeros((b, self.n_elements, self.d_e))
        dcache = mcache = None
        dblocks, mblocks = zero, zero
        if use_depth:
            dblocks, dcache = self._branch(depth_maps, self.enc_depth, self.proj_depth)
        if use_mask:
            mblocks, mcache = self._branch(mask_maps, self.enc_mask, self.proj_mask)
        z_s = np.concatenate([dblocks, mblocks], axis=2).reshape(b, self.d_out)
        return z_s, (dcache, mcache, b)

    def backward(self, dz, cache):
        dcache, mcache, b = cache
        dpairs = dz.reshape(b, self.n_elements, 2 * self.d_e)
        if dcache is not None:
            self._branch_backward(dpairs[:, :, :self.d_e], dcache,
                                  self.enc_depth, self.proj_depth)
        if mcache is not None:
            self._branch_backward(dpairs[:, :, self.d_e:], mcache,
                                  self.enc_mask, self.proj_mask)
        return None
