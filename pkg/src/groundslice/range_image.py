"""Range images: spherical projection, column slicing, mask merging.

The range image is the bridge between point clouds and image-space
segmentation. Slicing cuts it into K near-equal column bands whose views
share the parent's point-index map, so per-slice pixel masks merge back into
per-point masks without bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kitti_io import PointCloud
from .ssl_frame import SslFrame, ssl_to_point_cloud

EMPTY = -1  # point_index sentinel for pixels holding no return


@dataclass(frozen=True)
class RangeImage:
    rows: int
    cols: int
    range_m: np.ndarray  # (rows, cols) float64, 0 = empty pixel
    xyz: np.ndarray  # (rows, cols, 3) float64
    point_index: np.ndarray  # (rows, cols) int64, EMPTY where no return
    azimuth_span: tuple[float, float]  # radians, [start, end)
    vertical_span: tuple[float, float]  # radians, (top, bottom)
    n_points: int  # size of the source cloud the indices refer to
    n_out_of_span: int = 0  # points excluded for falling outside vertical_span

    def __post_init__(self):
        for name in ("range_m", "xyz", "point_index"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class SliceSpec:
    """K contiguous column intervals [start, end) partitioning [0, cols)."""

    slice_count: int
    intervals: tuple[tuple[int, int], ...]


def project_spherical(cloud: PointCloud, rows: int, cols: int,
                      vertical_span: tuple[float, float]) -> RangeImage:
    """Spherically project a cloud onto a rows x cols range image.

    Azimuth atan2(y, x) maps linearly onto columns over the full circle;
    elevation atan2(z, hypot(x, y)) maps onto rows with the top row at the
    span's upper angle. When two points fall into one bin the nearer wins
    (ties: lower original index). Points outside the vertical span are
    excluded and counted.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"degenerate image size {rows}x{cols}")
    v_top, v_bottom = vertical_span
    if not v_top > v_bottom:
        raise ValueError(f"degenerate vertical span {vertical_span}")

    xyz = cloud.xyz
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    rng = np.sqrt(x * x + y * y + z * z)
    azimuth = np.arctan2(y, x)
    elevation = np.arctan2(z, np.hypot(x, y))

    az_start = -math.pi
    col = np.floor((azimuth - az_start) / (2.0 * math.pi) * cols).astype(np.int64)
    col %= cols  # azimuth == +pi wraps into the -pi bin

    in_span = (elevation <= v_top) & (elevation >= v_bottom)
    row_f = (v_top - elevation) / (v_top - v_bottom) * rows
    row = np.minimum(np.floor(row_f).astype(np.int64), rows - 1)

    keep = in_span & (rng > 0)
    idx = np.nonzero(keep)[0]
    # nearest-wins with lowest-index tiebreak: stable sort by range, first
    # occurrence per bin sticks
    order = np.argsort(rng[idx], kind="stable")
    idx = idx[order]
    bins = row[idx] * cols + col[idx]
    first = np.unique(bins, return_index=True)[1]
    winners = idx[first]
    win_bins = bins[first]

    range_m = np.zeros((rows, cols), dtype=np.float64)
    out_xyz = np.zeros((rows, cols, 3), dtype=np.float64)
    point_index = np.full((rows, cols), EMPTY, dtype=np.int64)
    r_i, c_i = np.divmod(win_bins, cols)
    range_m[r_i, c_i] = rng[winners]
    out_xyz[r_i, c_i] = xyz[winners]
    point_index[r_i, c_i] = winners

    return RangeImage(
        rows=rows,
        cols=cols,
        range_m=range_m,
        xyz=out_xyz,
        point_index=point_index,
        azimuth_span=(az_start, math.pi),
        vertical_span=(v_top, v_bottom),
        n_points=len(cloud),
        n_out_of_span=int(len(cloud) - keep.sum()),
    )


def from_ssl_frame(frame: SslFrame) -> tuple[RangeImage, PointCloud]:
    """Use a decoded solid-state frame directly as a range image.

    The organized grid bypasses spherical projection: range is the norm of
    each valid cell and the point indices address the valid-cell cloud that
    is returned alongside.
    """
    cloud, pixel_to_point = ssl_to_point_cloud(frame)
    rng = np.where(frame.valid, np.linalg.norm(frame.xyz, axis=2), 0.0)
    image = RangeImage(
        rows=frame.rows,
        cols=frame.cols,
        range_m=rng,
        xyz=frame.xyz.copy(),
        point_index=pixel_to_point,
        azimuth_span=(0.0, 2.0 * math.pi),
        vertical_span=(math.pi / 2, -math.pi / 2),
        n_points=len(cloud),
    )
    return image, cloud


def slice_intervals(cols: int, k: int) -> tuple[tuple[int, int], ...]:
    """Near-equal column partition; the first cols % k slices are one wider."""
    base, rem = divmod(cols, k)
    intervals = []
    start = 0
    for i in range(k):
        width = base + (1 if i < rem else 0)
        intervals.append((start, start + width))
        start += width
    return tuple(intervals)


def slice_columns(image: RangeImage, k: int) -> tuple[SliceSpec, list[RangeImage]]:
    """Cut a range image into K contiguous column-band views.

    Views share the parent's arrays (read-only), so their point_index values
    still address the original cloud.
    """
    if not 1 <= k <= image.cols:
        raise ValueError(f"slice count {k} out of range 1..{image.cols}")
    intervals = slice_intervals(image.cols, k)
    az_start, az_end = image.azimuth_span
    az_width = (az_end - az_start) / image.cols
    views = []
    for lo, hi in intervals:
        views.append(
            RangeImage(
                rows=image.rows,
                cols=hi - lo,
                range_m=image.range_m[:, lo:hi],
                xyz=image.xyz[:, lo:hi],
                point_index=image.point_index[:, lo:hi],
                azimuth_span=(az_start + lo * az_width, az_start + hi * az_width),
                vertical_span=image.vertical_span,
                n_points=image.n_points,
            )
        )
    return SliceSpec(slice_count=k, intervals=intervals), views


def merge_masks(slice_masks: list[np.ndarray], image: RangeImage,
                spec: SliceSpec) -> np.ndarray:
    """Merge per-slice pixel masks into one per-point ground mask.

    A point is ground iff its pixel is marked in its owning slice. Points
    that never made it into the image (bin-collision losers, out-of-span)
    stay non-ground.
    """
    if len(slice_masks) != spec.slice_count:
        raise ValueError("mask count does not match slice count")
    out = np.zeros(image.n_points, dtype=bool)
    for mask, (lo, hi) in zip(slice_masks, spec.intervals):
        if mask.shape != (image.rows, hi - lo):
            raise ValueError(
                f"slice mask shape {mask.shape} does not match view {(image.rows, hi - lo)}"
            )
        pidx = image.point_index[:, lo:hi]
        hit = mask & (pidx != EMPTY)
        out[pidx[hit]] = True
    return out


def partition_azimuth(cloud: PointCloud, k: int) -> list[np.ndarray]:
    """Split a cloud into K equal azimuth sectors of its occupied span.

    Used for point-domain methods; full-circle mechanical scans come out as
    fixed angular sectors, narrow-FoV solid-state clouds as their natural
    bands. Returns per-slice index arrays in ascending original order.
    """
    if k < 1:
        raise ValueError(f"slice count {k} must be >= 1")
    n = len(cloud)
    if n == 0:
        return [np.empty(0, dtype=np.int64) for _ in range(k)]
    azimuth = np.arctan2(cloud.xyz[:, 1], cloud.xyz[:, 0])
    lo, hi = float(azimuth.min()), float(azimuth.max())
    if hi <= lo:
        hi = lo + 1e-9
    assignment = np.floor((azimuth - lo) / (hi - lo) * k).astype(np.int64)
    np.clip(assignment, 0, k - 1, out=assignment)
    return [np.nonzero(assignment == s)[0] for s in range(k)]
