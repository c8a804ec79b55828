"""Range-image depth-ground segmentation.

Per column, the inclination angle between vertically consecutive returns is
computed bottom-up, smoothed with a Savitzky-Golay least-squares filter, and
ground labels are grown by breadth-first search from low-angle seeds on the
lowest returns. Everything is a pure function of its inputs, so slices can
run on concurrent workers untouched.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import DepthConfig
from .range_image import RangeImage


@dataclass(frozen=True)
class AngleImage:
    """Per-pixel absolute inclination in radians; defined only where valid."""

    angle: np.ndarray  # (rows, cols) float64 in [0, pi/2]
    valid: np.ndarray  # (rows, cols) bool

    def __post_init__(self):
        self.angle.setflags(write=False)
        self.valid.setflags(write=False)

    @property
    def shape(self):
        return self.angle.shape


def compute_angle_image(image: RangeImage, sensor_height: float = 1.73) -> AngleImage:
    """Inclination between each return and the nearest valid return below it.

    Walking each column from the bottom row upward, consecutive valid pixels
    A (lower) and B (upper) produce angle = atan2(|z_B - z_A|, |d_B - d_A|)
    with d the planar distance hypot(x, y), stored at B's row. The lowest
    valid pixel of a column is paired with a virtual ground point at d = 0,
    z = -sensor_height. Empty pixels are skipped, pairing nearest valid ones.
    """
    if image.rows < 2:
        raise ValueError("angle image needs at least 2 rows")
    valid = image.point_index != -1
    d = np.hypot(image.xyz[:, :, 0], image.xyz[:, :, 1])
    z = image.xyz[:, :, 2]

    # flip so the bottom row is index 0, then "previous valid below" becomes
    # a running maximum of seen row indices
    vf = valid[::-1]
    df = d[::-1]
    zf = z[::-1]
    rows, cols = vf.shape
    row_idx = np.where(vf, np.arange(rows)[:, None], -1)
    last_below = np.maximum.accumulate(row_idx, axis=0)
    prev = np.full((rows, cols), -1, dtype=np.int64)
    prev[1:] = last_below[:-1]

    col_idx = np.broadcast_to(np.arange(cols), (rows, cols))
    safe_prev = np.maximum(prev, 0)
    prev_d = np.where(prev >= 0, df[safe_prev, col_idx], 0.0)
    prev_z = np.where(prev >= 0, zf[safe_prev, col_idx], -sensor_height)

    angle_f = np.zeros((rows, cols), dtype=np.float64)
    np.arctan2(np.abs(zf - prev_z), np.abs(df - prev_d), out=angle_f, where=vf)
    angle_f[~vf] = 0.0
    return AngleImage(angle=angle_f[::-1].copy(), valid=valid.copy())


def savitzky_golay_smooth(angles: AngleImage, window: int, order: int) -> AngleImage:
    """Least-squares polynomial smoothing along each column.

    Each valid angle is replaced by the center value of the degree-`order`
    polynomial fit over the valid samples inside its centered window. Windows
    truncated at column ends or punctured by invalid pixels fall back to
    fitting whatever valid samples remain (the fit degree drops to
    n_samples - 1 when fewer than order + 1 are available); a pixel with no
    valid neighbor passes through unchanged. Validity flags are untouched.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 3, got {window}")
    if order < 1 or order >= window:
        raise ValueError(f"order must satisfy 1 <= order < window, got {order}")

    a = angles.angle
    v = angles.valid
    rows, cols = a.shape
    half = window // 2
    offsets = np.arange(-half, half + 1)

    # stacks of the window contents for every pixel: shifted copies with
    # out-of-bounds rows marked invalid
    vals = np.zeros((window, rows, cols), dtype=np.float64)
    ok = np.zeros((window, rows, cols), dtype=bool)
    for i, off in enumerate(offsets):
        if off < 0:
            vals[i, -off:, :] = a[:off, :]
            ok[i, -off:, :] = v[:off, :]
        elif off > 0:
            vals[i, :-off, :] = a[off:, :]
            ok[i, :-off, :] = v[off:, :]
        else:
            vals[i] = a
            ok[i] = v

    pattern = np.zeros((rows, cols), dtype=np.int64)
    for i in range(window):
        pattern |= ok[i].astype(np.int64) << i

    out = a.copy()
    r_all, c_all = np.nonzero(v)
    pat = pattern[r_all, c_all]
    for p in np.unique(pat):
        members = np.nonzero(pat == p)[0]
        rs, cs = r_all[members], c_all[members]
        pos = [i for i in range(window) if (p >> i) & 1]
        n = len(pos)
        if n < 2:
            continue  # lone sample: pass through
        x = offsets[pos].astype(np.float64)
        deg = min(order, n - 1)
        vander = np.vander(x, deg + 1, increasing=True)
        # value of the LSQ fit at the window center = first row of pinv
        coeff = np.linalg.pinv(vander)[0]
        acc = np.zeros(members.size, dtype=np.float64)
        for c_k, i in zip(coeff, pos):
            acc += c_k * vals[i, rs, cs]
        out[rs, cs] = acc

    return AngleImage(angle=out, valid=v.copy())


def bfs_ground_label(angles: AngleImage, seed_threshold: float,
                     propagation_threshold: float) -> np.ndarray:
    """Grow ground labels from low-angle seeds on each column's lowest return.

    Seeds are the bottom-most valid pixels with angle below seed_threshold.
    The search expands across 4-connected valid pixels whenever the angle
    step is below propagation_threshold and the neighbor's angle stays under
    seed_threshold + propagation_threshold. Returns the visited-pixel mask.
    """
    if seed_threshold <= 0 or propagation_threshold <= 0:
        raise ValueError("thresholds must be positive")
    rows, cols = angles.shape
    cap = seed_threshold + propagation_threshold
    # plain lists: BFS is pointwise and list indexing beats ndarray scalars
    ang = angles.angle.tolist()
    val = angles.valid.tolist()
    visited = [[False] * cols for _ in range(rows)]

    queue = deque()
    for c in range(cols):
        for r in range(rows - 1, -1, -1):
            if val[r][c]:
                if ang[r][c] < seed_threshold:
                    visited[r][c] = True
                    queue.append((r, c))
                break

    while queue:
        r, c = queue.popleft()
        a0 = ang[r][c]
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= rr < rows and 0 <= cc < cols and val[rr][cc] and not visited[rr][cc]:
                a1 = ang[rr][cc]
                if abs(a1 - a0) < propagation_threshold and a1 < cap:
                    visited[rr][cc] = True
                    queue.append((rr, cc))

    return np.array(visited, dtype=bool)


def depth_segment_image(image: RangeImage, cfg: DepthConfig) -> np.ndarray:
    """Full depth-ground pipeline on one range image (or slice view)."""
    angles = compute_angle_image(image, sensor_height=cfg.sensor_height)
    smoothed = savitzky_golay_smooth(angles, cfg.smoothing_window, cfg.smoothing_order)
    return bfs_ground_label(smoothed, cfg.seed_threshold, cfg.propagation_threshold)
