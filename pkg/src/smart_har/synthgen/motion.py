"""Parametric keypoint motion families.

Each family returns a pose stream in body units (hip-center origin, y down,
ankle at +0.5, head near -0.45) plus anchor offsets du/dv, also in body
units, for families that translate (walk, run) or rise (climb). Subject
tempo scales every frequency; limb_scale is applied later as the pixel
height. Per-family random draws (phase, frequency jitter, facing) come from
the caller's rng so paired classes sharing a family and rng produce
identical streams.
"""

import numpy as np

NOSE, L_EYE, R_EYE, L_EAR, R_EAR = 0, 1, 2, 3, 4
L_SHOULDER, R_SHOULDER, L_ELBOW, R_ELBOW, L_WRIST, R_WRIST = 5, 6, 7, 8, 9, 10
L_HIP, R_HIP, L_KNEE, R_KNEE, L_ANKLE, R_ANKLE = 11, 12, 13, 14, 15, 16

N_KEYPOINTS = 17

BASE_POSE = np.array([
    (0.00, -0.45),
    (-0.03, -0.48), (0.03, -0.48),
    (-0.06, -0.46), (0.06, -0.46),
    (-0.13, -0.30), (0.13, -0.30),
    (-0.17, -0.12), (0.17, -0.12),
    (-0.19, 0.05), (0.19, 0.05),
    (-0.08, 0.00), (0.08, 0.00),
    (-0.09, 0.25), (0.09, 0.25),
    (-0.10, 0.50), (0.10, 0.50),
])

UPPER_BODY = list(range(13))


def _times(T, fps):
    return np.arange(T) / fps


def _sway(pose, t, freq, phase, amp=0.012):
    pose[:, :, 0] += amp * np.sin(2 * np.pi * freq * t + phase)[:, None]


def _stand(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = 0.35 * tempo * rng.uniform(0.9, 1.1)
    pose = np.tile(BASE_POSE, (T, 1, 1))
    _sway(pose, t, f, phase)
    return pose, np.zeros(T), np.zeros(T)


def _crouch(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = 0.40 * tempo * rng.uniform(0.9, 1.1)
    c = 0.5 + 0.5 * np.sin(2 * np.pi * f * t + phase)
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, UPPER_BODY, 1] += 0.20 * c[:, None]
    pose[:, L_KNEE, 1] += 0.08 * c
    pose[:, R_KNEE, 1] += 0.08 * c
    pose[:, L_KNEE, 0] -= 0.05 * c
    pose[:, R_KNEE, 0] += 0.05 * c
    return pose, np.zeros(T), np.zeros(T)


def _sit(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    rate = 0.6 * tempo * rng.uniform(0.9, 1.1)
    s = np.clip(rate * t, 0.0, 1.0)
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, UPPER_BODY, 1] += 0.16 * s[:, None]
    for j in (L_KNEE, R_KNEE):
        pose[:, j, 0] += 0.12 * s
        pose[:, j, 1] += 0.02 * s
    for j in (L_ANKLE, R_ANKLE):
        pose[:, j, 0] += 0.14 * s
    _sway(pose, t, 0.3 * tempo, phase, amp=0.006)
    return pose, np.zeros(T), np.zeros(T)


def _wave(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = 1.4 * tempo * rng.uniform(0.9, 1.1)
    r = np.clip(3.0 * tempo * t, 0.0, 1.0)
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, L_ELBOW, 1] -= 0.22 * r
    pose[:, L_WRIST, 1] -= 0.45 * r
    pose[:, L_WRIST, 0] += (0.10 + 0.09 * np.sin(2 * np.pi * f * t + phase)) * r
    _sway(pose, t, 0.3 * tempo, phase, amp=0.008)
    return pose, np.zeros(T), np.zeros(T)


def _gait(rng, tempo, T, fps, freq_scale, stride, lift, arm, bob, speed, lean=0.0):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = freq_scale * tempo * rng.uniform(0.9, 1.1)
    direction = int(rng.integers(0, 2)) * 2 - 1
    swing = np.sin(2 * np.pi * f * t + phase)
    anti = np.sin(2 * np.pi * f * t + phase + np.pi)
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, L_ANKLE, 0] += stride * swing
    pose[:, R_ANKLE, 0] += stride * anti
    pose[:, L_KNEE, 0] += 0.5 * stride * swing
    pose[:, R_KNEE, 0] += 0.5 * stride * anti
    pose[:, L_ANKLE, 1] -= lift * np.maximum(0.0, swing)
    pose[:, R_ANKLE, 1] -= lift * np.maximum(0.0, anti)
    pose[:, L_KNEE, 1] -= 0.6 * lift * np.maximum(0.0, swing)
    pose[:, R_KNEE, 1] -= 0.6 * lift * np.maximum(0.0, anti)
    pose[:, L_WRIST, 0] += arm * anti
    pose[:, R_WRIST, 0] += arm * swing
    pose[:, L_ELBOW, 0] += 0.5 * arm * anti
    pose[:, R_ELBOW, 0] += 0.5 * arm * swing
    pose[:, :, 1] += bob * np.sin(2 * (2 * np.pi * f * t + phase))[:, None]
    if lean:
        pose[:, UPPER_BODY, 0] += lean * direction
    du = direction * speed * tempo * t
    return pose, du, np.zeros(T)


def _walk(rng, tempo, T, fps):
    return _gait(rng, tempo, T, fps, freq_scale=1.0, stride=0.14, lift=0.05,
                 arm=0.08, bob=0.015, speed=0.45)


def _run(rng, tempo, T, fps):
    pose, du, dv = _gait(rng, tempo, T, fps, freq_scale=1.7, stride=0.20,
                         lift=0.10, arm=0.12, bob=0.035, speed=1.9, lean=0.03)
    pose[:, L_ELBOW, 1] -= 0.10
    pose[:, R_ELBOW, 1] -= 0.10
    return pose, du, dv


def _strike(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = 1.1 * tempo * rng.uniform(0.9, 1.1)
    facing = int(rng.integers(0, 2)) * 2 - 1
    p = np.maximum(0.0, np.sin(2 * np.pi * f * t + phase)) ** 2
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, R_WRIST, 0] += 0.24 * p * facing
    pose[:, R_WRIST, 1] -= 0.28 * p
    pose[:, R_ELBOW, 0] += 0.12 * p * facing
    pose[:, R_ELBOW, 1] -= 0.14 * p
    pose[:, UPPER_BODY, 0] += (0.03 * p * facing)[:, None]
    return pose, np.zeros(T), np.zeros(T)


def _climb(rng, tempo, T, fps):
    t = _times(T, fps)
    phase = rng.uniform(0, 2 * np.pi)
    f = 0.7 * tempo * rng.uniform(0.9, 1.1)
    a = 0.5 + 0.5 * np.sin(2 * np.pi * f * t + phase)
    b = 1.0 - a
    pose = np.tile(BASE_POSE, (T, 1, 1))
    pose[:, L_WRIST, 1] -= 0.55 * a
    pose[:, R_WRIST, 1] -= 0.55 * b
    pose[:, L_ELBOW, 1] -= 0.28 * a
    pose[:, R_ELBOW, 1] -= 0.28 * b
    pose[:, L_KNEE, 1] -= 0.15 * b
    pose[:, R_KNEE, 1] -= 0.15 * a
    pose[:, L_ANKLE, 1] -= 0.15 * b
    pose[:, R_ANKLE, 1] -= 0.15 * a
    elev = 0.9 * np.clip(0.35 * tempo * t, 0.0, 1.0)
    return pose, np.zeros(T), -elev


FAMILIES = {
    "stand": _stand,
    "crouch": _crouch,
    "sit": _sit,
    "wave": _wave,
    "walk": _walk,
    "run": _run,
    "strike": _strike,
    "climb": _climb,
}


def generate_motion(family, rng, tempo, T, fps=16.0):
    """Pose stream + anchor offsets for one clip, all in body units."""
    pose, du, dv = FAMILIES[family](rng, tempo, T, fps)
    return pose, du, dv
