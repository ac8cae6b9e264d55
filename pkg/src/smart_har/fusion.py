"""Feature fusion and the full model.

Stage I fuses skeleton and trajectory features through a channel gate into
Z_M. A small scene-weight network reads Z_M and emits A in (0,1), trained
against the binary scene-association label; A scales the interaction
feature before stage II fuses it with Z_M into Z_F for the linear
classifier. The combined objective is cross entropy plus the scene-weight
binary cross entropy. Ablation variants replace the fusion (plain concat,
token self-attention, per-dimension channel attention) or drop the scene
path; dropping it is implemented as a stage-II gate override that passes
only Z_M, so the reduced model shares the full model's graph.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .motion_perception import make_skeleton_encoder
from .nn import Linear, Module
from .nn import functional as F
from .scene_perception import (InteractionEncoder, TrajectoryEncoder,
                               decouple, extract_trajectory,
                               normalize_trajectory)
from .synthgen.actions import MASK_HUMAN, NUM_CLASSES, SCENE_ELEMENTS

FUSION_VARIANTS = ("concat", "self_attention", "channel_attention", "smart")
SCENE_INFO_VALUES = ("none", "depth", "mask", "both")


@dataclass
class ModelConfig:
    d: int = 128
    d_k: int = 128
    d_j: int = 64
    attn_hidden: int = 32
    clip_k: int = 8
    d_emb: int = 32
    d_e: int = 16
    n_classes: int = NUM_CLASSES
    n_keypoints: int = 17
    H: int = 64
    W: int = 64
    scene_info: str = "both"
    fusion: str = "smart"
    use_scene_module: bool = True
    skeleton_encoder: str = "standin"

    def validate(self):
        if self.fusion not in FUSION_VARIANTS:
            raise ConfigError(f"unknown fusion variant {self.fusion!r}")
        if self.scene_info not in SCENE_INFO_VALUES:
            raise ConfigError(f"unknown scene_info {self.scene_info!r}")

    def normalized(self):
        """scene_info=none and use_scene_module=false mean the same thing."""
        self.validate()
        cfg = ModelConfig(**vars(self))
        if cfg.scene_info == "none":
            cfg.use_scene_module = False
        if not cfg.use_scene_module:
            cfg.scene_info = "none"
        return cfg


class ChannelFuse(Module):
    """Project two features to a common width and mix them with a gate.

    The gate maps each channel's mean descriptor through one shared two-layer
    map to a sigmoid weight. force_gate substitutes fixed weights, bypassing
    the gate entirely; with (1, 0) the second input may be omitted and the
    output is exactly the projected first input.
    """

    def __init__(self, rng, d_x, d_y, d):
        self.proj_x = Linear(rng, d_x, d)
        self.proj_y = Linear(rng, d_y, d)
        self.gate1 = Linear(rng, 1, 4)
        self.gate2 = Linear(rng, 4, 1)
        self.d = d

    def _gate(self, m):
        h, c1 = self.gate1.forward(m)
        t = np.tanh(h)
        z, c2 = self.gate2.forward(t)
        w = F.sigmoid(z)
        return w, (c1, t, c2, w)

    def _gate_backward(self, dw, cache):
        c1, t, c2, w = cache
        dz = dw * w * (1.0 - w)
        dt = self.gate2.backward(dz, c2)
        dh = dt * (1.0 - t * t)
        return self.gate1.backward(dh, c1)

    def forward(self, x, y, force_gate=None):
        xp, cx = self.proj_x.forward(x)
        if force_gate is not None:
            fx, fy = force_gate
            if y is None:
                return fx * xp, ("forced", cx, None, fx, fy, xp, None)
            yp, cy = self.proj_y.forward(y)
            return fx * xp + fy * yp, ("forced", cx, cy, fx, fy, xp, yp)
        yp, cy = self.proj_y.forward(y)
        wx, gcx = self._gate(xp.mean(axis=1, keepdims=True))
        wy, gcy = self._gate(yp.mean(axis=1, keepdims=True))
        out = wx * xp + wy * yp
        return out, ("gated", cx, cy, xp, yp, wx, wy, gcx, gcy)

    def backward(self, dout, cache):
        if cache[0] == "forced":
            _, cx, cy, fx, fy, xp, yp = cache
            dx = self.proj_x.backward(dout * fx, cx)
            dy = None
            if cy is not None and fy != 0.0:
                dy = self.proj_y.backward(dout * fy, cy)
            elif cy is not None:
                dy = self.proj_y.backward(np.zeros_like(dout), cy)
            return dx, dy
        _, cx, cy, xp, yp, wx, wy, gcx, gcy = cache
        dxp = dout * wx
        dyp = dout * wy
        dwx = np.sum(dout * xp, axis=1, keepdims=True)
        dwy = np.sum(dout * yp, axis=1, keepdims=True)
        dmx = self._gate_backward(dwx, gcx)
        dmy = self._gate_backward(dwy, gcy)
        dxp = dxp + dmx / self.d
        dyp = dyp + dmy / self.d
        return self.proj_x.backward(dxp, cx), self.proj_y.backward(dyp, cy)


class SceneWeightNet(Module):
    """Two-layer map from Z_M to the scene-weight logit."""

    def __init__(self, rng, d, hidden=16):
        self.fc1 = Linear(rng, d, hidden)
        self.fc2 = Linear(rng, hidden, 1)

    def forward(self, z_m):
        h, c1 = self.fc1.forward(z_m)
        r = F.relu(h)
        z, c2 = self.fc2.forward(r)
        return z, (c1, h, c2)

    def backward(self, dz, cache):
        c1, h, c2 = cache
        dr = self.fc2.backward(dz, c2)
        dh = F.drelu(dr, h)
        return self.fc1.backward(dh, c1)


def scene_weight(z):
    """Gate logit to weight: A = sigmoid(z), always inside (0,1)."""
    return F.sigmoid(z)


def weight_interaction(a, z_s):
    return a * z_s


def binary_cross_entropy(a, y):
    """Mean BCE on probabilities; a must lie strictly inside (0,1)."""
    a = np.asarray(a, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(a) + (1.0 - y) * np.log1p(-a))))


def smart_loss(logits, labels, a, scene_labels):
    """Combined objective: CE over classes plus BCE on the scene weight."""
    labels = np.asarray(labels)
    scene_labels = np.asarray(scene_labels)
    if scene_labels.min() < 0 or scene_labels.max() > 1:
        raise ValueError("scene labels must be 0 or 1")
    ce, _ = F.cross_entropy(logits, labels)
    return float(ce) + binary_cross_entropy(a, scene_labels)


class SelfAttentionFuse(Module):
    """One attention pass over the three feature tokens, then mean pooling."""

    def __init__(self, rng, dims, d, attn_hidden=32):
        self.projs = [Linear(rng, di, d) for di in dims]
        self.wq = Linear(rng, d, attn_hidden)
        self.wk = Linear(rng, d, attn_hidden)
        self.wv = Linear(rng, d, d)
        self.d = d
        self.attn_hidden = attn_hidden

    def forward(self, feats):
        toks, pcaches = [], []
        for proj, f in zip(self.projs, feats):
            t, c = proj.forward(f)
            toks.append(t)
            pcaches.append(c)
        tok = np.stack(toks, axis=1)
        q, cq = self.wq.forward(tok)
        k, ck = self.wk.forward(tok)
        v, cv = self.wv.forward(tok)
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(self.attn_hidden)
        attn = F.softmax(logits, axis=2)
        o = attn @ v
        out = o.mean(axis=1)
        return out, (pcaches, cq, ck, cv, q, k, v, attn)

    def backward(self, dout, cache):
        pcaches, cq, ck, cv, q, k, v, attn = cache
        n = attn.shape[1]
        do = np.repeat(dout[:, None, :], n, axis=1) / n
        dattn = do @ v.transpose(0, 2, 1)
        dv = attn.transpose(0, 2, 1) @ do
        dlogits = attn * (dattn - np.sum(dattn * attn, axis=2, keepdims=True))
        dlogits /= np.sqrt(self.attn_hidden)
        dq = dlogits @ k
        dk = dlogits.transpose(0, 2, 1) @ q
        dtok = (self.wq.backward(dq, cq) + self.wk.backward(dk, ck)
                + self.wv.backward(dv, cv))
        return [proj.backward(dtok[:, i, :], c)
                for i, (proj, c) in enumerate(zip(self.projs, pcaches))]

    def attention_rows(self, feats):
        toks = [proj.forward(f)[0] for proj, f in zip(self.projs, feats)]
        tok = np.stack(toks, axis=1)
        q = self.wq.forward(tok)[0]
        k = self.wk.forward(tok)[0]
        logits = q @ k.transpose(0, 2, 1) / np.sqrt(self.attn_hidden)
        return F.softmax(logits, axis=2)


class ChannelAttentionFuse(Module):
    """Per-dimension sigmoid gate over the concatenated feature."""

    def __init__(self, rng, d_in):
        self.fc = Linear(rng, d_in, d_in)

    def forward(self, feats):
        c = np.concatenate(feats, axis=1)
        z, fc_cache = self.fc.forward(c)
        g = F.sigmoid(z)
        dims = [f.shape[1] for f in feats]
        return c * g, (c, g, fc_cache, dims)

    def backward(self, dout, cache):
        c, g, fc_cache, dims = cache
        dz = dout * c * g * (1.0 - g)
        dc = dout * g + self.fc.backward(dz, fc_cache)
        return np.split(dc, np.cumsum(dims)[:-1], axis=1)


class SmartModel(Module):
    """End-to-end model; the fusion head follows the configured variant.

    Submodules are always constructed in the same order so parameter names
    and init draws depend only on the config dimensions, and the scene path
    can be switched off per forward call without rebuilding.
    """

    def __init__(self, rng, config: ModelConfig):
        config = config.normalized()
        self.skeleton_enc = make_skeleton_encoder(
            config.skeleton_encoder, rng, n_keypoints=config.n_keypoints,
            d_out=config.d_k)
        self.traj_enc = TrajectoryEncoder(rng, d_hidden=config.attn_hidden,
                                          d_out=config.d_j, clip_k=config.clip_k)
        self.inter_enc = InteractionEncoder(rng, config.H, config.W,
                                            d_emb=config.d_emb, d_e=config.d_e)
        d_s = self.inter_enc.d_out
        self.d_s = d_s
        fusion = config.fusion
        if fusion == "smart":
            self.stage1 = ChannelFuse(rng, config.d_k, config.d_j, config.d)
            self.gate = SceneWeightNet(rng, config.d)
            self.stage2 = ChannelFuse(rng, config.d, d_s, config.d)
            self.classifier = Linear(rng, config.d, config.n_classes)
        elif fusion == "concat":
            d_in = config.d_k + config.d_j + (d_s if config.use_scene_module else 0)
            self.classifier = Linear(rng, d_in, config.n_classes)
        elif fusion == "self_attention":
            dims = [config.d_k, config.d_j] + ([d_s] if config.use_scene_module else [])
            self.fuse = SelfAttentionFuse(rng, dims, config.d, config.attn_hidden)
            self.classifier = Linear(rng, config.d, config.n_classes)
        else:
            d_in = config.d_k + config.d_j + (d_s if config.use_scene_module else 0)
            self.fuse = ChannelAttentionFuse(rng, d_in)
            self.classifier = Linear(rng, d_in, config.n_classes)
        self.config = config

    def _scene_flags(self, force_no_scene):
        cfg = self.config
        active = cfg.use_scene_module and not force_no_scene
        return (active,
                active and cfg.scene_info in ("both", "depth"),
                active and cfg.scene_info in ("both", "mask"))

    def forward(self, batch, force_no_scene=False):
        """Returns (logits, gate_logit or None, cache)."""
        cfg = self.config
        scene_on, use_depth, use_mask = self._scene_flags(force_no_scene)
        z_k, kc = self.skeleton_enc.forward(batch["skeleton"])
        z_j, jc = self.traj_enc.forward(batch["traj"])
        z_s = sc = None
        if scene_on:
            z_s, sc = self.inter_enc.forward(batch["depth_maps"],
                                             batch["mask_maps"],
                                             use_depth, use_mask)
        if cfg.fusion == "smart":
            z_m, c1 = self.stage1.forward(z_k, z_j)
            if scene_on:
                gz, gc = self.gate.forward(z_m)
                a = scene_weight(gz)
                z_sw = weight_interaction(a, z_s)
                z_f, c2 = self.stage2.forward(z_m, z_sw)
                logits, cc = self.classifier.forward(z_f)
                return logits, gz, ("smart", kc, jc, sc, c1, gc, a, z_s, c2, cc)
            z_f, c2 = self.stage2.forward(z_m, None, force_gate=(1.0, 0.0))
            logits, cc = self.classifier.forward(z_f)
            return logits, None, ("smart_ns", kc, jc, c1, c2, cc)
        feats = [z_k, z_j] + ([z_s] if scene_on else [])
        if cfg.fusion == "concat":
            z_f = np.concatenate(feats, axis=1)
            logits, cc = self.classifier.forward(z_f)
            return logits, None, ("concat", kc, jc, sc, [f.shape[1] for f in feats], cc)
        z_f, fc = self.fuse.forward(feats)
        logits, cc = self.classifier.forward(z_f)
        return logits, None, (cfg.fusion, kc, jc, sc, fc, cc)

    def backward(self, dlogits, dgate, cache):
        kind = cache[0]
        if kind == "smart":
            _, kc, jc, sc, c1, gc, a, z_s, c2, cc = cache
            dz_f = self.classifier.backward(dlogits, cc)
            dz_m, dz_sw = self.stage2.backward(dz_f, c2)
            da = np.sum(dz_sw * z_s, axis=1, keepdims=True)
            dz_s = dz_sw * a
            dgz = da * a * (1.0 - a)
            if dgate is not None:
                dgz = dgz + dgate
            dz_m = dz_m + self.gate.backward(dgz, gc)
            dz_k, dz_j = self.stage1.backward(dz_m, c1)
            self.inter_enc.backward(dz_s, sc)
        elif kind == "smart_ns":
            _, kc, jc, c1, c2, cc = cache
            dz_f = self.classifier.backward(dlogits, cc)
            dz_m, _ = self.stage2.backward(dz_f, c2)
            dz_k, dz_j = self.stage1.backward(dz_m, c1)
        elif kind == "concat":
            _, kc, jc, sc, dims, cc = cache
            dz_f = self.classifier.backward(dlogits, cc)
            parts = np.split(dz_f, np.cumsum(dims)[:-1], axis=1)
            dz_k, dz_j = parts[0], parts[1]
            if sc is not None:
                self.inter_enc.backward(parts[2], sc)
        else:
            _, kc, jc, sc, fc, cc = cache
            dz_f = self.classifier.backward(dlogits, cc)
            parts = self.fuse.backward(dz_f, fc)
            dz_k, dz_j = parts[0], parts[1]
            if sc is not None:
                self.inter_enc.backward(parts[2], sc)
        self.skeleton_enc.backward(dz_k, kc)
        self.traj_enc.backward(dz_j, jc)

    def uses_gate_loss(self, force_no_scene=False):
        scene_on, _, _ = self._scene_flags(force_no_scene)
        return self.config.fusion == "smart" and scene_on

    def loss_and_grads(self, batch, force_no_scene=False):
        """Forward + backward for one batch; grads accumulate in place.

        Returns (total loss, logits).
        """
        logits, gz, cache = self.forward(batch, force_no_scene)
        ce, dlogits = F.cross_entropy(logits, batch["labels"])
        loss = float(ce)
        dgate = None
        if gz is not None:
            bce, dgz = F.binary_cross_entropy_with_logit(
                gz[:, 0], batch["scene_labels"].astype(np.float64))
            loss += float(bce)
            dgate = dgz[:, None]
        self.backward(dlogits, dgate, cache)
        return loss, logits

    def predict(self, batch, force_no_scene=False):
        logits, _, _ = self.forward(batch, force_no_scene)
        if not np.isfinite(logits).all():
            raise NumericError("non-finite logits during prediction")
        return np.argmax(logits, axis=1)

    def feature_bundle(self, batch, force_no_scene=False):
        """Z_K, Z_J, Z_S, Z_M, Z_F for inspection and embedding export."""
        cfg = self.config
        scene_on, use_depth, use_mask = self._scene_flags(force_no_scene)
        z_k, _ = self.skeleton_enc.forward(batch["skeleton"])
        z_j, _ = self.traj_enc.forward(batch["traj"])
        z_s = None
        if scene_on:
            z_s, _ = self.inter_enc.forward(batch["depth_maps"],
                                            batch["mask_maps"],
                                            use_depth, use_mask)
        out = {"Z_K": z_k, "Z_J": z_j, "Z_S": z_s, "Z_M": None, "Z_F": None,
               "A": None}
        if cfg.fusion == "smart":
            z_m, _ = self.stage1.forward(z_k, z_j)
            out["Z_M"] = z_m
            if scene_on:
                gz, _ = self.gate.forward(z_m)
                a = scene_weight(gz)
                out["A"] = a
                z_f, _ = self.stage2.forward(z_m, weight_interaction(a, z_s))
            else:
                z_f, _ = self.stage2.forward(z_m, None, force_gate=(1.0, 0.0))
            out["Z_F"] = z_f
            return out
        feats = [z_k, z_j] + ([z_s] if scene_on else [])
        if cfg.fusion == "concat":
            out["Z_F"] = np.concatenate(feats, axis=1)
        else:
            out["Z_F"], _ = self.fuse.forward(feats)
        return out


def prepare_inputs(dataset, config: ModelConfig):
    """Precompute model inputs for a list of sequence samples.

    Returns a dict keyed by sequence id holding normalized skeletons,
    trajectories, temporally pooled semantic-depth and mask-occupancy
    stacks (human first, then elements in vocabulary order), labels, and
    scene labels. Depth is scaled per clip by its own maximum (the deepest
    visible surface), so depth features are relative to the scene extent
    rather than to any absolute range.
    """
    out = {}
    for sample in dataset:
        T, H, W = sample.depth.shape
        sem = decouple(sample.depth.astype(np.float64), sample.mask)
        d_ref = max(float(sample.depth.max()), 1e-6)
        depth_maps = np.empty((5, H, W))
        mask_maps = np.empty((5, H, W))
        depth_maps[0] = sem.human.mean(axis=0) / d_ref
        mask_maps[0] = (sample.mask == MASK_HUMAN).mean(axis=0)
        for i, (name, class_id) in enumerate(SCENE_ELEMENTS, start=1):
            depth_maps[i] = sem.elements[name].mean(axis=0) / d_ref
            mask_maps[i] = (sample.mask == class_id).mean(axis=0)
        skeleton = sample.skeleton.astype(np.float64).copy()
        skeleton[:, :, 0] /= W
        skeleton[:, :, 1] /= H
        traj = normalize_trajectory(extract_trajectory(sample), W, H, d_ref)
        out[sample.sequence_id] = {
            "skeleton": skeleton,
            "traj": traj,
            "depth_maps": depth_maps,
            "mask_maps": mask_maps,
            "label": sample.action,
            "scene_label": sample.scene_label,
        }
    return out


def collate(features, ids):
    """Stack per-sequence features into one batch dict."""
    missing = [i for i in ids if i not in features]
    if missing:
        raise KeyError(f"sequence ids missing from features: {missing}")
    rows = [features[i] for i in ids]
    return {
        "skeleton": np.stack([r["skeleton"] for r in rows]),
        "traj": np.stack([r["traj"] for r in rows]),
        "depth_maps": np.stack([r["depth_maps"] for r in rows]),
        "mask_maps": np.stack([r["mask_maps"] for r in rows]),
        "labels": np.array([r["label"] for r in rows]),
        "scene_labels": np.array([r["scene_label"] for r in rows]),
    }
