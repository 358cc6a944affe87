"""Ground-truth depth grids and face masks.

Living samples get a normalized depth map in [0, 1] built from a facial
vertex cloud (nearest point 1, farthest point 0, background 0); spoof samples
get the all-zero map. A parametric dome surface stands in for a real face
reconstruction so the whole path stays deterministic and mesh free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

GRID_SIZE = 32

LIVING = "living"
SPOOF = "spoof"


@dataclass(frozen=True)
class VertexSet:
    """Facial vertex cloud, one (x, y, z) row per vertex, z toward the camera."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be an (n, 3) array, got shape {v.shape}")
        if v.shape[0] < 3:
            raise ValueError(f"need at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite coordinates")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class DepthMap:
    """Square depth grid with values in [0, 1]; spoof maps are identically 0."""

    values: np.ndarray
    label_kind: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"depth map must be a square grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("depth map contains non-finite values")
        if v.min() < 0 or v.max() > 1:
            raise ValueError(f"depth values must lie in [0, 1], got "
                             f"[{v.min()}, {v.max()}]")
        if self.label_kind not in (LIVING, SPOOF):
            raise ValueError(f"unknown label kind {self.label_kind!r}")
        if self.label_kind == SPOOF and v.any():
            raise ValueError("spoof depth maps must be identically zero")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class FaceMask:
    """Binary face-region grid."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"mask must be a square grid, got shape {v.shape}")
        if not np.isin(v, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        object.__setattr__(self, "values", v.astype(np.int64))


def spoof_depth(grid: int = GRID_SIZE) -> DepthMap:
    """All-zero depth label for any spoof sample."""
    return DepthMap(np.zeros((grid, grid)), SPOOF)


def synthesize_face_surface(amplitude: float = 8.0,
                            center: tuple[float, float] = (16.0, 16.0),
                            radius: float = 12.0,
                            grid_size: int = 32,
                            jitter: float = 0.0,
                            seed: int = 0) -> VertexSet:
    """Deterministic dome-shaped vertex cloud usable as a living face proxy.

    Samples a grid_size x grid_size lattice over the square circumscribing the
    dome; z follows a hemisphere profile (amplitude at the apex, 0 outside the
    radius). Optional jitter perturbs x/y reproducibly from the seed.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    cx, cy = center
    xs = np.linspace(cx - radius, cx + radius, grid_size)
    ys = np.linspace(cy - radius, cy + radius, grid_size)
    gx, gy = np.meshgrid(xs, ys)
    x = gx.ravel()
    y = gy.ravel()
    if jitter:
        rng = np.random.default_rng(seed)
        x = x + rng.uniform(-jitter, jitter, x.shape)
        y = y + rng.uniform(-jitter, jitter, y.shape)
    r2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius ** 2
    z = amplitude * np.sqrt(np.clip(1.0 - r2, 0.0, None))
    return VertexSet(np.column_stack([x, y, z]))


def _cell_indices(coords, low, high, grid):
    span = high - low
    if span <= 0:
        raise ValueError(f"bounds span must be positive, got [{low}, {high}]")
    idx = np.floor((coords - low) / span * grid).astype(int)
    return np.clip(idx, 0, grid - 1)


def _hull_mask(occupied: np.ndarray) -> np.ndarray:
    """Cells whose centers lie inside the convex hull of the occupied cells."""
    pts = np.argwhere(occupied).astype(float)
    try:
        tri = Delaunay(pts)
    except QhullError:
        return occupied.copy()
    grid = occupied.shape[0]
    centers = np.argwhere(np.ones_like(occupied)).astype(float)
    inside = tri.find_simplex(centers) >= 0
    return inside.reshape(grid, grid)


def _fill_holes(values: np.ndarray, filled: np.ndarray, hull: np.ndarray) -> np.ndarray:
    """Average unfilled in-hull cells from their filled 8-neighbors, repeatedly.

    Each pass fills every hole that touches a filled cell, so the unfilled
    count strictly decreases until none remain. If a pass stalls (possible
    only when the rasterized hull is disconnected), the leftovers get the mean
    of all filled cells so the loop always terminates.
    """
    values = values.copy()
    filled = filled.copy()
    grid = values.shape[0]
    offsets = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)
               if (di, dj) != (0, 0)]
    while True:
        holes = hull & ~filled
        if not holes.any():
            return values
        acc = np.zeros_like(values)
        cnt = np.zeros((grid, grid))
        for di, dj in offsets:
            shifted_vals = np.zeros_like(values)
            shifted_fill = np.zeros((grid, grid), dtype=bool)
            src = (slice(max(0, -di), grid - max(0, di)),
                   slice(max(0, -dj), grid - max(0, dj)))
            dst = (slice(max(0, di), grid - max(0, -di)),
                   slice(max(0, dj), grid - max(0, -dj)))
            shifted_vals[dst] = values[src]
            shifted_fill[dst] = filled[src]
            acc += np.where(shifted_fill, shifted_vals, 0.0)
            cnt += shifted_fill
        ready = holes & (cnt > 0)
        if not ready.any():
            values[holes] = values[filled].mean()
            return values
        values[ready] = acc[ready] / cnt[ready]
        filled |= ready


def generate_living_depth(vertex_set: VertexSet,
                          bounds: tuple[float, float, float, float] | None = None,
                          grid: int = GRID_SIZE) -> DepthMap:
    """Splat a vertex cloud onto the grid and normalize it into a living label.

    Each vertex lands in its nearest cell; a cell keeps the z closest to the
    camera. Holes inside the face hull are filled by iterative neighbor
    averaging, then values are min-max normalized so the nearest point reads 1
    and the farthest 0. Cells outside the hull stay 0.

    bounds is (x_min, x_max, y_min, y_max); by default the vertex extent.
    """
    v = vertex_set.vertices
    z = v[:, 2]
    if z.max() - z.min() == 0:
        raise ValueError("vertex depth extent is zero; the surface is a plane")
    if bounds is None:
        bounds = (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())
    x_min, x_max, y_min, y_max = bounds
    if (v[:, 0] < x_min).any() or (v[:, 0] > x_max).any() \
            or (v[:, 1] < y_min).any() or (v[:, 1] > y_max).any():
        raise ValueError("vertices fall outside the declared image bounds")

    cols = _cell_indices(v[:, 0], x_min, x_max, grid)
    rows = _cell_indices(v[:, 1], y_min, y_max, grid)

    splat = np.full((grid, grid), -np.inf)
    np.maximum.at(splat, (rows, cols), z)
    occupied = splat > -np.inf

    z_low = splat[occupied].min()
    z_high = splat[occupied].max()
    if z_high - z_low == 0:
        raise ValueError("splatted depth extent is zero; the surface is a plane")

    hull = _hull_mask(occupied)
    values = np.where(occupied, splat, 0.0)
    values = _fill_holes(values, occupied, hull)

    normalized = np.zeros((grid, grid))
    normalized[hull] = (values[hull] - z_low) / (z_high - z_low)
    normalized = np.clip(normalized, 0.0, 1.0)
    return DepthMap(normalized, LIVING)


def mask_from_depth(depth: DepthMap, threshold: float = 0.0) -> FaceMask:
    """Face mask of cells strictly above the threshold."""
    return FaceMask((depth.values > threshold).astype(np.int64))


# Serialization. Values are written with repr so every float round-trips
# bit for bit through both the CSV and the JSON form.

def depth_to_csv(depth: DepthMap, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in depth.values:
            writer.writerow([repr(float(v)) for v in row])


def depth_from_csv(path, label_kind: str = LIVING) -> DepthMap:
    with open(path, newline="") as fh:
        rows = [[float(cell) for cell in row] for row in csv.reader(fh) if row]
    return DepthMap(np.array(rows), label_kind)


def depth_to_json(depth: DepthMap, path) -> None:
    with open(path, "w") as fh:
        json.dump({"label_kind": depth.label_kind,
                   "values": depth.values.tolist()}, fh)


def depth_from_json(path) -> DepthMap:
    with open(path) as fh:
        data = json.load(fh)
    return DepthMap(np.array(data["values"], dtype=float), data["label_kind"])


def mask_to_csv(mask: FaceMask, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mask.values:
            writer.writerow([int(v) for v in row])


def mask_from_csv(path) -> FaceMask:
    with open(path, newline="") as fh:
        rows = [[int(cell) for cell in row] for row in csv.reader(fh) if row]
    return FaceMask(np.array(rows))


def mask_to_json(mask: FaceMask, path) -> None:
    with open(path, "w") as fh:
        json.dump({"values": mask.values.tolist()}, fh)


def mask_from_json(path) -> FaceMask:
    with open(path) as fh:
        data = json.load(fh)
    return FaceMask(np.array(data["values"]))
