"""Conservative surface voxelization on a world-anchored lattice."""
from __future__ import annotations

import numba
import numpy as np

from .types import TriangleMesh, VoxelGrid, unique_rows


def voxelize_surface(mesh: TriangleMesh, voxel_size: float = 0.003) -> VoxelGrid:
    """Mark every lattice cell that a triangle touches or crosses.

    Cells are closed boxes, so a triangle lying exactly on a lattice plane
    occupies the cells on both sides of it.
    """
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    if len(mesh.triangles) == 0:
        return VoxelGrid(np.zeros(3), voxel_size)
    # work in lattice units so cell faces sit on exact integers
    a, b, c = (np.ascontiguousarray(x / voxel_size) for x in mesh.corners())
    cells = _voxelize(a, b, c)
    cells = unique_rows(cells)
    offset = cells.min(axis=0)
    return VoxelGrid(offset * voxel_size, voxel_size, cells - offset)


@numba.njit(cache=True)
def _tri_box_overlap(v0, v1, v2, cx, cy, cz):
    """SAT test of a triangle against the closed unit cell centred at (cx, cy, cz)."""
    h = 0.5
    ax, ay, az = v0[0] - cx, v0[1] - cy, v0[2] - cz
    bx, by, bz = v1[0] - cx, v1[1] - cy, v1[2] - cz
    qx, qy, qz = v2[0] - cx, v2[1] - cy, v2[2] - cz

    if min(ax, bx, qx) > h or max(ax, bx, qx) < -h:
        return False
    if min(ay, by, qy) > h or max(ay, by, qy) < -h:
        return False
    if min(az, bz, qz) > h or max(az, bz, qz) < -h:
        return False

    e = np.empty((3, 3))
    e[0, 0], e[0, 1], e[0, 2] = bx - ax, by - ay, bz - az
    e[1, 0], e[1, 1], e[1, 2] = qx - bx, qy - by, qz - bz
    e[2, 0], e[2, 1], e[2, 2] = ax - qx, ay - qy, az - qz

    nx = e[0, 1] * e[1, 2] - e[0, 2] * e[1, 1]
    ny = e[0, 2] * e[1, 0] - e[0, 0] * e[1, 2]
    nz = e[0, 0] * e[1, 1] - e[0, 1] * e[1, 0]
    d = nx * ax + ny * ay + nz * az
    if abs(d) > h * (abs(nx) + abs(ny) + abs(nz)):
        return False

    for k in range(3):
        ex, ey, ez = e[k, 0], e[k, 1], e[k, 2]
        for axis in range(3):
            # axis = unit_axis x edge
            if axis == 0:
                px, py, pz = 0.0, -ez, ey
            elif axis == 1:
                px, py, pz = ez, 0.0, -ex
            else:
                px, py, pz = -ey, ex, 0.0
            p0 = px * ax + py * ay + pz * az
            p1 = px * bx + py * by + pz * bz
            p2 = px * qx + py * qy + pz * qz
            r = h * (abs(px) + abs(py) + abs(pz))
            if min(p0, p1, p2) > r or max(p0, p1, p2) < -r:
                return False
    return True


@numba.njit(cache=True)
def _voxelize(a, b, c):
    m = a.shape[0]
    lo = np.empty((m, 3), dtype=np.int64)
    hi = np.empty((m, 3), dtype=np.int64)
    total = 0
    for t in range(m):
        n = 1
        for k in range(3):
            mn = min(a[t, k], b[t, k], c[t, k])
            mx = max(a[t, k], b[t, k], c[t, k])
            lo[t, k] = np.int64(np.ceil(mn)) - 1
            hi[t, k] = np.int64(np.floor(mx))
            n *= hi[t, k] - lo[t, k] + 1
        total += n
    out = np.empty((total, 3), dtype=np.int64)
    w = 0
    for t in range(m):
        for i in range(lo[t, 0], hi[t, 0] + 1):
            for j in range(lo[t, 1], hi[t, 1] + 1):
                for k in range(lo[t, 2], hi[t, 2] + 1):
                    if _tri_box_overlap(a[t], b[t], c[t], i + 0.5, j + 0.5, k + 0.5):
                        out[w, 0] = i
                        out[w, 1] = j
                        out[w, 2] = k
                        w += 1
    return out[:w]
