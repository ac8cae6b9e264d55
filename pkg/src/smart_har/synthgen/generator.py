"""Clip generation: motion placement into scenes and stream rendering.

Randomness is split into two streams per clip. The motion stream is keyed by
(pair, motion family, clip), so classes sharing a family draw identical pose
and jitter sequences; the placement stream is keyed by (pair, class, clip)
and controls where the body, the furniture, and the window land. Sequence
ids enumerate pairs × classes × clips in a fixed order, which makes
regeneration byte-identical for a given config.

Abnormal clips sample the furniture freely (pushed clear of the window);
normal clips in a scene with habit slots place it in the class's habitual
configuration instead, the scene-bound context that does not carry over to
the held-out scenes.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .actions import (CLASSES, FAMILY_IDS, PROTOCOL_PAIRS, SCENE_BY_ID,
                      SUBJECT_BY_ID, SceneLayout, SubjectProfile)
from .motion import N_KEYPOINTS, generate_motion
from .render import composite_frames, scene_background


@dataclass
class GeneratorConfig:
    seed: int = 7
    subjects: tuple = ("A", "B", "C", "D", "E")
    scenes: tuple = ("I", "II", "III")
    clips_per_class: int = 6
    T: int = 48
    H: int = 64
    W: int = 64
    fps: float = 16.0

    def validate(self):
        if not self.subjects or not self.scenes:
            raise ConfigError("subjects and scenes must be non-empty")
        for s in self.subjects:
            if s not in SUBJECT_BY_ID:
                raise ConfigError(f"unknown subject id {s!r}")
        for s in self.scenes:
            if s not in SCENE_BY_ID:
                raise ConfigError(f"unknown scene id {s!r}")
        if self.clips_per_class < 1:
            raise ConfigError("clips_per_class must be >= 1")
        if self.H < 32 or self.W < 32:
            raise ConfigError("H and W must be >= 32")
        if self.T < 8:
            raise ConfigError("T must be >= 8")

    def pairs(self):
        """Subject-scene recording pairs covered by this config."""
        pairs = [(s, sc) for s, sc in PROTOCOL_PAIRS
                 if s in self.subjects and sc in self.scenes]
        if not pairs:
            pairs = [(s, sc) for s in self.subjects for sc in self.scenes]
        return pairs

    def echo(self):
        return {
            "seed": str(self.seed),
            "subjects": ",".join(self.subjects),
            "scenes": ",".join(self.scenes),
            "clips_per_class": str(self.clips_per_class),
            "T": str(self.T),
            "H": str(self.H),
            "W": str(self.W),
            "fps": repr(self.fps),
        }


@dataclass
class SequenceSample:
    sequence_id: int
    subject: str
    scene: str
    T: int
    skeleton: np.ndarray
    depth: np.ndarray
    mask: np.ndarray
    action: int
    scene_label: int
    extra: dict = field(default_factory=dict)


def _sample_furniture(rng, layout: SceneLayout, W, H):
    center = rng.uniform(*layout.furn_u_range)
    depth = rng.uniform(*layout.furn_depth_range)
    return center, depth


HABIT_COLUMNS = (0.14, 0.50, 0.86)


def _habit_furniture(rng, layout: SceneLayout, slot):
    """Furniture configuration habitually paired with a normal class.

    Slots combine one of three columns with the near or far half of the
    scene's furniture depth band. The slot assignment lives in the scene
    layout; scenes without habit slots sample furniture uniformly, so the
    configuration is a crisp class cue inside a habit scene and carries
    nothing elsewhere.
    """
    column, far = divmod(slot, 2)
    center = HABIT_COLUMNS[column] + rng.uniform(-0.03, 0.03)
    lo, hi = layout.furn_depth_range
    band = 0.35 * (hi - lo)
    if far:
        return center, rng.uniform(hi - band, hi)
    return center, rng.uniform(lo, lo + band)


def _repel(center, away_from, margin, lo, hi):
    """Push `center` at least `margin` from `away_from`, clamped to [lo, hi].

    Prefers the side with more room; if neither side can honor the margin
    the farther range edge is returned (best effort).
    """
    if abs(center - away_from) >= margin:
        return center
    room_lo = away_from - lo
    room_hi = hi - away_from
    if room_lo >= room_hi:
        return max(lo, away_from - margin)
    return min(hi, away_from + margin)


def _furn_rect_px(layout, center, W, H):
    hw = layout.furn_half_width
    u0 = int(round(max(0.0, center - hw) * W))
    u1 = int(round(min(1.0, center + hw) * W))
    v0 = int(round(layout.furn_v[0] * H))
    v1 = int(round(layout.furn_v[1] * H))
    return (u0, v0, max(u1, u0 + 2), max(v1, v0 + 2))


def _place_clip(place_rng, cls, layout: SceneLayout, subject: SubjectProfile,
                W, H, walking_right):
    """Draw window shift, furniture placement, anchor, and human depth.

    Returns (anchor_u px, feet_v px, d0, furn_center frac, furn_depth,
    window_u frac pair). Draw order is fixed per class so streams stay
    reproducible.
    """
    window_shift = place_rng.uniform(-layout.window_jitter, layout.window_jitter)
    window_u = (layout.window_u[0] + window_shift,
                layout.window_u[1] + window_shift)
    window_center = 0.5 * (window_u[0] + window_u[1])
    furn_center, furn_depth = _sample_furniture(place_rng, layout, W, H)
    if cls.scene_association:
        # keep the furniture column clear of the window column so element
        # coincidence is unambiguous for the strike and climb variants
        furn_center = _repel(furn_center, window_center,
                             layout.furn_half_width + 0.10, *layout.furn_u_range)
    elif layout.habit_slots:
        furn_center, furn_depth = _habit_furniture(
            place_rng, layout, layout.habit_slots[cls.id])
    name = cls.name
    if name in ("hit", "climb"):
        anchor = furn_center + place_rng.uniform(-0.05, 0.05)
        d0 = furn_depth + place_rng.uniform(0.10, 0.35)
    elif name == "hit_window":
        anchor = window_center + place_rng.uniform(-0.05, 0.05)
        d0 = layout.wall_depth - place_rng.uniform(0.10, 0.35)
    elif name == "climb_wall":
        anchor = place_rng.uniform(*layout.bare_u_range)
        d0 = layout.wall_depth - place_rng.uniform(0.10, 0.35)
        # also keep the furniture clear of the climbing spot so the
        # bare-wall climb never coincides with furniture in the image plane
        furn_center = _repel(furn_center, anchor,
                             layout.furn_half_width + 0.12,
                             *layout.furn_u_range)
    elif name in ("walk", "run"):
        if walking_right:
            anchor = place_rng.uniform(0.10, 0.35)
        else:
            anchor = place_rng.uniform(0.65, 0.90)
        d0 = layout.wall_depth * place_rng.uniform(0.45, 0.85)
    else:
        anchor = place_rng.uniform(0.10, 0.90)
        d0 = layout.wall_depth * place_rng.uniform(0.45, 0.85)
    feet_v = layout.floor_frac * H + place_rng.uniform(0.0, 2.0)
    return anchor * W, feet_v, d0, furn_center, furn_depth, window_u


def _assemble_skeleton(pose, du, dv, jitter, anchor_u, feet_v, h_px, W, H):
    """Scale to pixels, translate to the anchor, and keep inside bounds."""
    T = pose.shape[0]
    u = pose[:, :, 0] * h_px + du[:, None] * h_px
    v = pose[:, :, 1] * h_px + dv[:, None] * h_px
    # shrink the travel (walk/run) or the rise (climb) if it would leave frame
    span_u = u.max() - u.min()
    avail_u = W - 6.0
    if span_u > avail_u and np.ptp(du) > 0:
        keep = max(0.0, avail_u - (span_u - np.ptp(du) * h_px))
        u = pose[:, :, 0] * h_px + du[:, None] * h_px * (keep / (np.ptp(du) * h_px))
    anchor_v = feet_v - 0.5 * h_px
    top = anchor_v + v.min()
    if top < 2.0 and np.ptp(dv) > 0:
        over = 2.0 - top
        scale = max(0.0, 1.0 - over / (np.ptp(dv) * h_px))
        v = pose[:, :, 1] * h_px + dv[:, None] * h_px * scale
    sk = np.empty((T, pose.shape[1], 2))
    sk[:, :, 0] = anchor_u + u
    sk[:, :, 1] = anchor_v + v
    # center the whole stream back into frame if the anchor was near an edge
    du_fix = 0.0
    if sk[:, :, 0].min() < 2.0:
        du_fix = 2.0 - sk[:, :, 0].min()
    elif sk[:, :, 0].max() > W - 3.0:
        du_fix = (W - 3.0) - sk[:, :, 0].max()
    sk[:, :, 0] += du_fix
    dv_fix = 0.0
    if sk[:, :, 1].min() < 2.0:
        dv_fix = 2.0 - sk[:, :, 1].min()
    elif sk[:, :, 1].max() > H - 3.0:
        dv_fix = (H - 3.0) - sk[:, :, 1].max()
    sk[:, :, 1] += dv_fix
    sk += jitter
    sk[:, :, 0] = np.clip(sk[:, :, 0], 1.0, W - 2.0)
    sk[:, :, 1] = np.clip(sk[:, :, 1], 1.0, H - 2.0)
    return sk


def generate_sequence(cfg: GeneratorConfig, pair_idx, subject_id, scene_id,
                      cls, clip_idx, sequence_id):
    subject = SUBJECT_BY_ID[subject_id]
    layout = SCENE_BY_ID[scene_id]
    motion_rng = np.random.default_rng(np.random.SeedSequence(
        cfg.seed, spawn_key=(1, pair_idx, FAMILY_IDS[cls.family], clip_idx)))
    place_rng = np.random.default_rng(np.random.SeedSequence(
        cfg.seed, spawn_key=(2, pair_idx, cls.id, clip_idx)))
    pose, du, dv = generate_motion(cls.family, motion_rng, subject.tempo,
                                   cfg.T, cfg.fps)
    jitter = motion_rng.normal(0.0, subject.jitter_std, size=(cfg.T, N_KEYPOINTS, 2))
    walking_right = bool(du[-1] >= du[0])
    anchor_u, feet_v, d0, furn_center, furn_depth, window_u = _place_clip(
        place_rng, cls, layout, subject, cfg.W, cfg.H, walking_right)
    h_px = 0.34 * cfg.H * subject.limb_scale
    skeleton = _assemble_skeleton(pose, du, dv, jitter, anchor_u, feet_v,
                                  h_px, cfg.W, cfg.H)
    furn_rect = _furn_rect_px(layout, furn_center, cfg.W, cfg.H)
    bg_mask, bg_depth = scene_background(layout, cfg.H, cfg.W, furn_rect,
                                         furn_depth, window_u)
    mask, depth = composite_frames(skeleton, bg_mask, bg_depth, d0)
    return SequenceSample(
        sequence_id=sequence_id,
        subject=subject_id,
        scene=scene_id,
        T=cfg.T,
        skeleton=skeleton.astype(np.float32),
        depth=depth.astype(np.float32),
        mask=mask,
        action=cls.id,
        scene_label=cls.scene_association,
    )


def generate_dataset(cfg: GeneratorConfig):
    cfg.validate()
    dataset = []
    sequence_id = 0
    for pair_idx, (subject_id, scene_id) in enumerate(cfg.pairs()):
        for cls in CLASSES:
            for clip_idx in range(cfg.clips_per_class):
                dataset.append(generate_sequence(
                    cfg, pair_idx, subject_id, scene_id, cls, clip_idx,
                    sequence_id))
                sequence_id += 1
    return dataset
