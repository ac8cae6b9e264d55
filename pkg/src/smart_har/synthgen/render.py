"""Rasterization of scene backgrounds and human silhouettes.

Scenes are painted back to front: wall band, window, floor, furniture. The
floor depth ramps from the wall distance down to 30% of it at the image
bottom. The human silhouette is the filled convex hull of the keypoints,
dilated by a 2 px disk, stamped over the background at the clip's constant
human depth.
"""

import numpy as np
from scipy.ndimage import binary_dilation

from .actions import (MASK_FLOOR, MASK_FURNITURE, MASK_HUMAN, MASK_WALL,
                      MASK_WINDOW)

_DISK2 = np.array([[(dy * dy + dx * dx) <= 4 for dx in range(-2, 3)]
                   for dy in range(-2, 3)])


def scene_background(layout, H, W, furn_rect, furn_depth, window_u=None):
    """Static mask/depth for one clip; furn_rect is (u0, v0, u1, v1) px.

    window_u optionally overrides the layout's window extent (fractions),
    carrying the per-clip window shift.
    """
    if window_u is None:
        window_u = layout.window_u
    ceil_row = int(round(layout.ceil_frac * H))
    floor_row = int(round(layout.floor_frac * H))
    mask = np.zeros((H, W), dtype=np.uint8)
    depth = np.zeros((H, W), dtype=np.float64)
    mask[ceil_row:floor_row, :] = MASK_WALL
    depth[ceil_row:floor_row, :] = layout.wall_depth
    wu0 = int(round(window_u[0] * W))
    wu1 = int(round(window_u[1] * W))
    wv0 = int(round(layout.window_v[0] * H))
    wv1 = int(round(layout.window_v[1] * H))
    wu0 = max(0, min(W - 1, wu0))
    wu1 = max(wu0 + 1, min(W, wu1))
    mask[wv0:wv1, wu0:wu1] = MASK_WINDOW
    depth[wv0:wv1, wu0:wu1] = layout.wall_depth
    rows = np.arange(floor_row, H)
    ramp = layout.wall_depth * (1.0 - 0.7 * (rows - floor_row) / max(1, H - 1 - floor_row))
    mask[floor_row:, :] = MASK_FLOOR
    depth[floor_row:, :] = ramp[:, None]
    u0, v0, u1, v1 = furn_rect
    mask[v0:v1, u0:u1] = MASK_FURNITURE
    depth[v0:v1, u0:u1] = furn_depth
    return mask, depth


def _convex_hull(points):
    """Monotone-chain hull; returns vertices counterclockwise."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _fill_polygon(verts, H, W):
    """Scanline fill over pixel centers (col, row) = (u, v)."""
    fill = np.zeros((H, W), dtype=bool)
    if len(verts) < 3:
        return fill
    ys = [v[1] for v in verts]
    r0 = max(0, int(np.ceil(min(ys))))
    r1 = min(H - 1, int(np.floor(max(ys))))
    n = len(verts)
    for r in range(r0, r1 + 1):
        xs = []
        for i in range(n):
            (x1, y1), (x2, y2) = verts[i], verts[(i + 1) % n]
            if y1 == y2:
                if y1 == r:
                    xs.extend((x1, x2))
                continue
            lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
            if lo <= r <= hi:
                xs.append(x1 + (r - y1) * (x2 - x1) / (y2 - y1))
        if not xs:
            continue
        xs.sort()
        c0 = max(0, int(np.ceil(min(xs))))
        c1 = min(W - 1, int(np.floor(max(xs))))
        if c1 >= c0:
            fill[r, c0:c1 + 1] = True
    return fill


def human_silhouette(keypoints, H, W):
    """Boolean H×W silhouette for one frame of keypoints (u, v)."""
    fill = _fill_polygon(_convex_hull(keypoints.tolist()), H, W)
    cols = np.clip(np.round(keypoints[:, 0]).astype(int), 0, W - 1)
    rows = np.clip(np.round(keypoints[:, 1]).astype(int), 0, H - 1)
    fill[rows, cols] = True
    return binary_dilation(fill, structure=_DISK2)


def composite_frames(skeleton, bg_mask, bg_depth, human_depth):
    """Stamp the human into the background for every frame.

    skeleton: T×N×2 pixel coords. Returns (mask T×H×W uint8,
    depth T×H×W float64).
    """
    T = skeleton.shape[0]
    H, W = bg_mask.shape
    mask = np.empty((T, H, W), dtype=np.uint8)
    depth = np.empty((T, H, W), dtype=np.float64)
    for t in range(T):
        sil = human_silhouette(skeleton[t], H, W)
        m = bg_mask.copy()
        d = bg_depth.copy()
        m[sil] = MASK_HUMAN
        d[sil] = human_depth
        mask[t] = m
        depth[t] = d
    return mask, depth
