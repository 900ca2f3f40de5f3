"""Voxelized base solids, posterior-weighted blending, and OBJ export.

The four base shapes live in the normalized cube [-1, 1]^3 as analytic
membership predicates; a blend occupies every cell whose weighted membership
sum reaches the threshold tau, so one-hot weights reproduce the base shapes
exactly and balanced weights give in-between hybrids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import InvalidArgument

DEFAULT_GRID_N = 24
DEFAULT_TAU = 0.5
SHAPE_NAMES = ("cube", "pyramid", "torus", "union")


@dataclass
class VoxelGrid:
    """n^3 boolean occupancy; flat index order is x-major, then y, then z."""

    n: int
    occupancy: np.ndarray  # bool, shape (n, n, n), axes (x, y, z)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgument("grid resolution must be at least 2")
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        if self.occupancy.shape != (self.n, self.n, self.n):
            raise InvalidArgument("occupancy must be n x n x n")

    @classmethod
    def empty(cls, n: int) -> "VoxelGrid":
        return cls(n=n, occupancy=np.zeros((n, n, n), dtype=bool))

    def flat_indices(self) -> np.ndarray:
        """Occupied cells as flat indices i*n^2 + j*n + k."""
        return np.flatnonzero(self.occupancy.reshape(-1))

    def occupied_fraction(self) -> float:
        return float(self.occupancy.mean())

    def __eq__(self, other) -> bool:
        return isinstance(other, VoxelGrid) and self.n == other.n and np.array_equal(
            self.occupancy, other.occupancy
        )


def cell_centers(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Meshgrid of voxel centers: axis i center = -1 + (2i+1)/n."""
    c = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    return np.meshgrid(c, c, c, indexing="ij")


def _inside_cube(x, y, z):
    return np.maximum(np.abs(x), np.maximum(np.abs(y), np.abs(z))) <= 0.8


def _inside_pyramid(x, y, z):
    # square base at z = -0.8, apex at (0, 0, 0.8)
    within_z = (z >= -0.8) & (z <= 0.8)
    halfwidth = 0.8 * (0.8 - z) / 1.6
    return within_z & (np.maximum(np.abs(x), np.abs(y)) <= halfwidth)


def _inside_torus(x, y, z):
    ring = np.maximum(np.abs(x), np.abs(y))
    return (ring >= 0.4) & (ring <= 0.8) & (np.abs(z) <= 0.2)


def _inside_union(x, y, z):
    a = np.maximum(np.abs(x + 0.3), np.maximum(np.abs(y + 0.3), np.abs(z + 0.3))) <= 0.5
    b = np.maximum(np.abs(x - 0.3), np.maximum(np.abs(y - 0.3), np.abs(z - 0.3))) <= 0.5
    return a | b


@dataclass(frozen=True)
class BaseShape:
    shape_id: int
    name: str
    inside: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


BASE_SHAPES = (
    BaseShape(0, "cube", _inside_cube),
    BaseShape(1, "pyramid", _inside_pyramid),
    BaseShape(2, "torus", _inside_torus),
    BaseShape(3, "union", _inside_union),
)


def rasterize(shape: BaseShape, n: int = DEFAULT_GRID_N) -> VoxelGrid:
    """Occupy every cell whose center lies inside the shape."""
    x, y, z = cell_centers(n)
    return VoxelGrid(n=n, occupancy=shape.inside(x, y, z))


@lru_cache(maxsize=32)
def _rasterize_cached(shape_id: int, n: int) -> np.ndarray:
    return rasterize(BASE_SHAPES[shape_id], n).occupancy


def blend(weights: np.ndarray, n: int = DEFAULT_GRID_N, tau: float = DEFAULT_TAU) -> VoxelGrid:
    """Threshold the weighted sum of base-shape memberships at tau."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(BASE_SHAPES),):
        raise InvalidArgument(f"need {len(BASE_SHAPES)} weights")
    if np.any(weights < -1e-9):
        raise InvalidArgument("blend weights must be non-negative")
    if abs(weights.sum() - 1.0) > 1e-6:
        raise InvalidArgument("blend weights must sum to 1")
    score = np.zeros((n, n, n))
    for shape in BASE_SHAPES:
        w = weights[shape.shape_id]
        if w > 0:
            score += w * _rasterize_cached(shape.shape_id, n)
    return VoxelGrid(n=n, occupancy=score >= tau)


# cube corner offsets in cell units, and the two triangles of each face
_CORNERS = np.array(
    [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0), (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
)
# face -> (neighbor offset, corner indices as two CCW-from-outside triangles)
_FACES = (
    ((-1, 0, 0), ((0, 4, 7), (0, 7, 3))),
    ((1, 0, 0), ((1, 2, 6), (1, 6, 5))),
    ((0, -1, 0), ((0, 1, 5), (0, 5, 4))),
    ((0, 1, 0), ((3, 7, 6), (3, 6, 2))),
    ((0, 0, -1), ((0, 3, 2), (0, 2, 1))),
    ((0, 0, 1), ((4, 5, 6), (4, 6, 7))),
)


def export_mesh(grid: VoxelGrid, path) -> None:
    """Write the grid as a deterministic OBJ: one cube per occupied cell.

    Every occupied cell contributes its 8 vertices; faces shared between two
    occupied cells are culled. Ordering follows flat cell index order, so
    equal grids produce byte-identical files.
    """
    n = grid.n
    occ = grid.occupancy
    size = 2.0 / n
    lines = ["# neurovoxel voxel mesh", f"# grid_n {n}"]
    face_lines = []
    vertex_base = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if not occ[i, j, k]:
                    continue
                origin = np.array([-1.0 + i * size, -1.0 + j * size, -1.0 + k * size])
                for corner in _CORNERS:
                    v = origin + corner * size
                    lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
                for (di, dj, dk), tris in _FACES:
                    ni, nj, nk = i + di, j + dj, k + dk
                    if 0 <= ni < n and 0 <= nj < n and 0 <= nk < n and occ[ni, nj, nk]:
                        continue
                    for a, b, c in tris:
                        face_lines.append(
                            f"f {vertex_base + a + 1} {vertex_base + b + 1} {vertex_base + c + 1}"
                        )
                vertex_base += 8
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines + face_lines) + "\n")
    except OSError as e:
        raise IOError(f"cannot write mesh to {path}: {e}") from e


def parse_obj(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back vertices and triangle indices from an exported OBJ."""
    vertices, faces = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p) - 1 for p in parts[1:4]])
    return (
        np.asarray(vertices, dtype=np.float64).reshape(-1, 3),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )
