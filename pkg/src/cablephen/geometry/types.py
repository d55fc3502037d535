"""Value types for the geometric kernel.

All arrays are float64 in meters unless stated otherwise. Types validate on
construction and are treated as immutable afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERATE_AREA = 1e-12


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Rigid transform mapping body (camera) coordinates to world coordinates."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose has non-finite entries")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points) -> np.ndarray:
        """Map body-frame points (..., 3) to world frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def apply_inverse(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.translation) @ self.rotation

    def inverse(self) -> Pose:
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def __matmul__(self, other: Pose) -> Pose:
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    @property
    def axis(self) -> np.ndarray:
        """Optical axis (body +z) in world coordinates."""
        return self.rotation[:, 2].copy()

    def as_row(self) -> list[float]:
        """Row-major rotation followed by translation (12 numbers)."""
        return [float(v) for v in self.rotation.ravel()] + [float(v) for v in self.translation]

    @classmethod
    def from_row(cls, row) -> Pose:
        row = np.asarray(row, dtype=float)
        return cls(row[:9].reshape(3, 3), row[9:12])


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(d))):
            raise ValueError("ray has non-finite entries")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(p)):
            raise ValueError("point cloud has non-finite points")
        object.__setattr__(self, "points", p)
        if self.normals is not None:
            n = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if len(n) != len(p):
                raise ValueError("need exactly one normal per point")
            if len(n) and np.abs(np.linalg.norm(n, axis=1) - 1.0).max() > 1e-6:
                raise ValueError("normals must be unit length")
            object.__setattr__(self, "normals", n)

    def __len__(self) -> int:
        return len(self.points)

    def select(self, mask_or_index) -> PointCloud:
        normals = None if self.normals is None else self.normals[mask_or_index]
        return PointCloud(self.points[mask_or_index], normals)

    def transformed(self, pose: Pose) -> PointCloud:
        normals = None if self.normals is None else self.normals @ pose.rotation.T
        return PointCloud(pose.apply(self.points), normals)


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh. Degenerate triangles are dropped on construction."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh has non-finite vertices")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("triangle index out of range")
        if len(f):
            f = f[triangle_areas(v, f) >= DEGENERATE_AREA]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)

    @classmethod
    def empty(cls) -> TriangleMesh:
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.triangles)

    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        f = self.triangles
        return self.vertices[f[:, 0]], self.vertices[f[:, 1]], self.vertices[f[:, 2]]

    def face_normals(self) -> np.ndarray:
        a, b, c = self.corners()
        n = np.cross(b - a, c - a)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def transformed(self, pose: Pose) -> TriangleMesh:
        return TriangleMesh(pose.apply(self.vertices), self.triangles)

    def merged(self, other: TriangleMesh) -> TriangleMesh:
        return TriangleMesh(np.vstack([self.vertices, other.vertices]),
                            np.vstack([self.triangles, other.triangles + len(self.vertices)]))


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def unique_rows(cells: np.ndarray) -> np.ndarray:
    """Lexicographically sorted unique rows of an integer (n, 3) array."""
    lo = cells.min(axis=0)
    dims = cells.max(axis=0) - lo + 1
    keys = np.unique(np.ravel_multi_index((cells - lo).T, dims))
    return np.stack(np.unravel_index(keys, dims), axis=1).astype(np.int64) + lo


@dataclass(frozen=True)
class VoxelGrid:
    """Sparse voxel occupancy.

    ``occupied`` holds unique integer cell indices relative to ``origin``;
    cell (i, j, k) spans ``origin + voxel_size * [i, i+1) x [j, j+1) x [k, k+1)``.
    """

    origin: np.ndarray
    voxel_size: float
    occupied: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        o = np.asarray(self.origin, dtype=float).reshape(3)
        cells = np.asarray(self.occupied, dtype=np.int64).reshape(-1, 3)
        if len(cells):
            cells = unique_rows(cells)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "occupied", cells)

    def __len__(self) -> int:
        return len(self.occupied)

    def global_cells(self) -> np.ndarray:
        """Cell indices on the lattice anchored at the world origin."""
        offset = np.round(self.origin / self.voxel_size).astype(np.int64)
        return self.occupied + offset


def occupied_count(grid: VoxelGrid) -> int:
    return len(grid.occupied)
