"""Grid-based ground segmentation with a progressive morphological filter.

The cloud is rasterized into a minimum-elevation grid, openings with a
linearly growing disk window peel off protrusions whose height exceeds a
slope-scaled threshold, and points are classified against the resulting
bare-earth surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.spatial import cKDTree

from .config import SmrfConfig
from .kitti_io import PointCloud


@dataclass(frozen=True)
class SmrfGrid:
    """Minimum-elevation raster over the cloud's xy bounding box.

    elevation holds the per-cell minimum z with empty cells filled from their
    nearest occupied neighbor; inpainted marks those filled cells so
    diagnostics can exclude them.
    """

    cell_size: float
    origin: tuple[float, float]  # (min_x, min_y)
    elevation: np.ndarray  # (ny, nx) float64
    occupied: np.ndarray  # (ny, nx) bool
    inpainted: np.ndarray  # (ny, nx) bool

    @property
    def shape(self):
        return self.elevation.shape


def _cell_indices(grid: SmrfGrid, xy: np.ndarray):
    """Cell index per point plus an in-bounds mask (right edges inclusive)."""
    ny, nx = grid.shape
    fx = (xy[:, 0] - grid.origin[0]) / grid.cell_size
    fy = (xy[:, 1] - grid.origin[1]) / grid.cell_size
    inside = (fx >= 0) & (fy >= 0) & (fx <= nx) & (fy <= ny)
    ix = np.minimum(np.floor(fx).astype(np.int64), nx - 1)
    iy = np.minimum(np.floor(fy).astype(np.int64), ny - 1)
    return ix, iy, inside


def rasterize_min_surface(cloud: PointCloud, cell_size: float) -> SmrfGrid:
    """Bucket points into cells keeping the minimum z, then inpaint gaps.

    Empty cells take the elevation of the nearest occupied cell by Euclidean
    cell-center distance; exact ties resolve to the smaller elevation.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    if len(cloud) == 0:
        raise ValueError("cannot rasterize an empty cloud")
    xyz = cloud.xyz
    min_x, min_y = xyz[:, 0].min(), xyz[:, 1].min()
    max_x, max_y = xyz[:, 0].max(), xyz[:, 1].max()
    nx = max(1, int(np.ceil((max_x - min_x) / cell_size)))
    ny = max(1, int(np.ceil((max_y - min_y) / cell_size)))

    grid = SmrfGrid(
        cell_size=cell_size,
        origin=(float(min_x), float(min_y)),
        elevation=np.full((ny, nx), np.inf),
        occupied=np.zeros((ny, nx), dtype=bool),
        inpainted=np.zeros((ny, nx), dtype=bool),
    )
    ix, iy, _ = _cell_indices(grid, xyz[:, :2])
    np.minimum.at(grid.elevation, (iy, ix), xyz[:, 2])
    grid.occupied[iy, ix] = True
    grid.inpainted[:] = ~grid.occupied
    _inpaint_nearest(grid.elevation, grid.occupied)
    return grid


def _inpaint_nearest(elevation: np.ndarray, occupied: np.ndarray) -> None:
    """Fill unoccupied cells from the nearest occupied one, ties to lower z."""
    if occupied.all():
        return
    occ_coords = np.argwhere(occupied)
    empty_coords = np.argwhere(~occupied)
    occ_elev = elevation[occ_coords[:, 0], occ_coords[:, 1]]
    tree = cKDTree(occ_coords)
    k = min(len(occ_coords), 9)
    dist, idx = tree.query(empty_coords, k=k)
    dist = np.atleast_2d(dist.reshape(len(empty_coords), -1))
    idx = np.atleast_2d(idx.reshape(len(empty_coords), -1))
    # lattice offsets make squared distances integers, so ties are exact
    d2 = np.rint(dist * dist).astype(np.int64)
    best = d2[:, :1]
    cand = np.where(d2 == best, occ_elev[idx], np.inf)
    fill = cand.min(axis=1)

    # if every returned neighbor ties, closer-tied cells may exist beyond k
    unresolved = (d2 == best).all(axis=1) & (k < len(occ_coords))
    for row in np.nonzero(unresolved)[0]:
        cell = empty_coords[row]
        delta = occ_coords - cell
        all_d2 = (delta * delta).sum(axis=1)
        m = all_d2.min()
        fill[row] = occ_elev[all_d2 == m].min()

    elevation[empty_coords[:, 0], empty_coords[:, 1]] = fill


def _disk_heights(radius: int) -> np.ndarray:
    """Half-height of each column strip of the radius-`radius` disk."""
    dx = np.arange(-radius, radius + 1)
    return np.floor(np.sqrt(radius * radius - dx * dx)).astype(np.int64)


def _shift_cols(arr: np.ndarray, dx: int, fill: float) -> np.ndarray:
    """out[:, c] = arr[:, c + dx], out-of-range columns set to fill."""
    out = np.full_like(arr, fill)
    if dx == 0:
        out[:] = arr
    elif dx > 0:
        out[:, :-dx] = arr[:, dx:]
    else:
        out[:, -dx:] = arr[:, :dx]
    return out


def _erode(surface: np.ndarray, radius: int) -> np.ndarray:
    """Grayscale erosion by a disk, neighborhoods clipped at the borders.

    The disk is decomposed into column strips: a 1D running minimum per
    strip height, then a minimum across shifted strips. Exactly equivalent
    to the direct neighborhood minimum, but linear instead of quadratic in
    the radius.
    """
    heights = _disk_heights(radius)
    out = np.full_like(surface, np.inf)
    cache: dict[int, np.ndarray] = {}
    for dx, h in zip(range(-radius, radius + 1), heights):
        if h not in cache:
            cache[h] = minimum_filter1d(surface, size=2 * int(h) + 1, axis=0,
                                        mode="nearest")
        np.minimum(out, _shift_cols(cache[h], dx, np.inf), out=out)
    return out


def _dilate(surface: np.ndarray, radius: int) -> np.ndarray:
    heights = _disk_heights(radius)
    out = np.full_like(surface, -np.inf)
    cache: dict[int, np.ndarray] = {}
    for dx, h in zip(range(-radius, radius + 1), heights):
        if h not in cache:
            cache[h] = maximum_filter1d(surface, size=2 * int(h) + 1, axis=0,
                                        mode="nearest")
        np.maximum(out, _shift_cols(cache[h], dx, -np.inf), out=out)
    return out


def morphological_open(surface: np.ndarray, radius: int) -> np.ndarray:
    """Opening (erosion then dilation) with a disk of the given cell radius."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    return _dilate(_erode(surface, radius), radius)


def progressive_open(grid: SmrfGrid, max_window_radius: int,
                     slope: float) -> tuple[np.ndarray, np.ndarray]:
    """Flag non-ground cells with openings of linearly growing radius.

    At each radius w the surface is opened; cells whose elevation dropped by
    more than slope * w * cell_size are flagged non-ground and keep the
    opened elevation. Returns (non-ground cell mask, bare-earth surface).
    """
    if max_window_radius < 1:
        raise ValueError("max_window_radius must be >= 1")
    if slope < 0:
        raise ValueError("slope must be non-negative")
    surface = grid.elevation.copy()
    nonground = np.zeros(grid.shape, dtype=bool)
    for w in range(1, max_window_radius + 1):
        opened = morphological_open(surface, w)
        flag = (surface - opened) > slope * w * grid.cell_size
        nonground |= flag
        surface[flag] = opened[flag]
    return nonground, surface


def local_slope(surface: np.ndarray, cell_size: float) -> np.ndarray:
    """Max forward-difference gradient magnitude per cell, edges clamped to 0."""
    sx = np.zeros_like(surface)
    sy = np.zeros_like(surface)
    sx[:, :-1] = np.abs(surface[:, 1:] - surface[:, :-1]) / cell_size
    sy[:-1, :] = np.abs(surface[1:, :] - surface[:-1, :]) / cell_size
    return np.maximum(sx, sy)


def classify_points(cloud: PointCloud, grid: SmrfGrid, bare_earth: np.ndarray,
                    elevation_threshold: float, elevation_scale: float) -> np.ndarray:
    """Ground mask: residual against bare earth within a slope-scaled budget.

    A point is ground iff |z - surface(cell)| stays within
    elevation_threshold + elevation_scale * local_slope(cell) * cell_size.
    Points outside the grid bounds are non-ground.
    """
    if elevation_threshold < 0 or elevation_scale < 0:
        raise ValueError("thresholds must be non-negative")
    slope = local_slope(bare_earth, grid.cell_size)
    ix, iy, inside = _cell_indices(grid, cloud.xyz[:, :2])
    ix = np.clip(ix, 0, grid.shape[1] - 1)
    iy = np.clip(iy, 0, grid.shape[0] - 1)
    budget = elevation_threshold + elevation_scale * slope[iy, ix] * grid.cell_size
    residual = np.abs(cloud.xyz[:, 2] - bare_earth[iy, ix])
    return inside & (residual <= budget)


def smrf_segment(cloud: PointCloud, cfg: SmrfConfig) -> np.ndarray:
    """Full pipeline: rasterize, progressive opening, classify."""
    if len(cloud) == 0:
        return np.zeros(0, dtype=bool)
    grid = rasterize_min_surface(cloud, cfg.cell_size)
    _, bare_earth = progressive_open(grid, cfg.max_window_radius, cfg.slope)
    return classify_points(cloud, grid, bare_earth,
                           cfg.elevation_threshold, cfg.elevation_scale)
