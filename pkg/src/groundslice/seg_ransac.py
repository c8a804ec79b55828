"""Point-based ground segmentation by plane consensus.

Seeded, counter-based sampling keeps runs reproducible: the same cloud,
parameters and seed always produce the same mask, which the parallel
executor relies on when it derives per-slice seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RansacConfig
from .kitti_io import PointCloud

_DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class PlaneModel:
    """Plane {p : normal . p + d = 0} with unit normal and normal.z >= 0."""

    normal: np.ndarray  # (3,) float64, unit length
    d: float

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        return np.abs(xyz @ self.normal + self.d)

    def tilt(self) -> float:
        """Angle between the normal and the +z axis, radians."""
        return math.acos(min(1.0, max(-1.0, float(self.normal[2]))))


def fit_plane_3pts(p1, p2, p3) -> PlaneModel:
    """Plane through three points, canonically oriented.

    Raises on collinear or coincident triples (cross-product norm below
    1e-12).
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    p3 = np.asarray(p3, dtype=np.float64)
    normal = np.cross(p2 - p1, p3 - p1)
    norm = np.linalg.norm(normal)
    if norm <= _DEGENERATE_EPS:
        raise ValueError("degenerate triple: points are collinear or coincident")
    normal = normal / norm
    if normal[2] < 0:
        normal = -normal
    return PlaneModel(normal=normal, d=float(-normal @ p1))


def count_inliers(cloud: PointCloud, plane: PlaneModel,
                  dist_threshold: float) -> tuple[int, np.ndarray]:
    """Points within dist_threshold of the plane (closed inequality)."""
    if dist_threshold <= 0:
        raise ValueError("dist_threshold must be positive")
    mask = plane.distances(cloud.xyz) <= dist_threshold
    return int(mask.sum()), mask


def ransac_ground(cloud: PointCloud, iterations: int, dist_threshold: float,
                  max_normal_tilt: float, rng_seed: int) -> np.ndarray:
    """Consensus ground mask from seeded three-point plane sampling.

    Each round samples 3 distinct points, fits a plane, rejects it when the
    normal tilts more than max_normal_tilt from vertical, and otherwise
    counts inliers. The most-supported model wins (ties keep the earlier
    one); with no accepted model the mask is all false.
    """
    n = len(cloud)
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=rng_seed))
    xyz = cloud.xyz
    cos_limit = math.cos(max_normal_tilt)

    best_count = 0
    best_mask = np.zeros(n, dtype=bool)
    for _ in range(iterations):
        i, j, k = rng.choice(n, size=3, replace=False)
        try:
            plane = fit_plane_3pts(xyz[i], xyz[j], xyz[k])
        except ValueError:
            continue
        if plane.normal[2] < cos_limit:
            continue
        count, mask = count_inliers(cloud, plane, dist_threshold)
        if count > best_count:
            best_count = count
            best_mask = mask
    return best_mask


def ransac_segment(cloud: PointCloud, cfg: RansacConfig, rng_seed: int = 0) -> np.ndarray:
    return ransac_ground(cloud, cfg.iterations, cfg.dist_threshold,
                         cfg.max_normal_tilt, rng_seed)
