"""Ray casting against triangle meshes through a bounding-volume hierarchy.

The hierarchy is built in numpy (median split on the widest centroid axis)
and traversed by numba kernels. Ray/triangle tests use the watertight
algorithm of Woop, Benthin and Wald, so rays through shared edges never slip
between neighbouring triangles.
"""
from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

from .types import Ray, TriangleMesh

LEAF_SIZE = 4


class Hit(NamedTuple):
    t: float
    triangle: int


class BVH:
    """Flattened BVH over the triangles of one mesh."""

    def __init__(self, mesh: TriangleMesh, leaf_size: int = LEAF_SIZE):
        a, b, c = mesh.corners()
        m = len(mesh.triangles)
        tri_min = np.minimum(np.minimum(a, b), c)
        tri_max = np.maximum(np.maximum(a, b), c)
        cent = (tri_min + tri_max) * 0.5

        cap = max(1, 2 * m)
        node_min = np.zeros((cap, 3))
        node_max = np.zeros((cap, 3))
        left = np.full(cap, -1, dtype=np.int64)
        right = np.full(cap, -1, dtype=np.int64)
        start = np.zeros(cap, dtype=np.int64)
        count = np.zeros(cap, dtype=np.int64)
        order = np.arange(m, dtype=np.int64)

        n_nodes = 1
        stack = [(0, 0, m)]
        while stack:
            node, lo, hi = stack.pop()
            idx = order[lo:hi]
            if hi > lo:
                node_min[node] = tri_min[idx].min(axis=0)
                node_max[node] = tri_max[idx].max(axis=0)
            else:
                node_min[node] = np.inf
                node_max[node] = -np.inf
            start[node], count[node] = lo, hi - lo
            if hi - lo <= leaf_size:
                continue
            cc = cent[idx]
            extent = cc.max(axis=0) - cc.min(axis=0)
            axis = int(np.argmax(extent))
            if extent[axis] <= 0.0:
                continue
            mid = (hi - lo) // 2
            part = np.argpartition(cc[:, axis], mid)
            order[lo:hi] = idx[part]
            l, r = n_nodes, n_nodes + 1
            n_nodes += 2
            left[node], right[node] = l, r
            count[node] = 0
            stack.append((r, lo + mid, hi))
            stack.append((l, lo, lo + mid))

        self.n_triangles = m
        self.node_min = node_min[:n_nodes].copy()
        self.node_max = node_max[:n_nodes].copy()
        self.left = left[:n_nodes].copy()
        self.right = right[:n_nodes].copy()
        self.start = start[:n_nodes].copy()
        self.count = count[:n_nodes].copy()
        self.tri_id = order
        self.v0 = np.ascontiguousarray(a[order])
        self.v1 = np.ascontiguousarray(b[order])
        self.v2 = np.ascontiguousarray(c[order])

    def _arrays(self):
        return (self.node_min, self.node_max, self.left, self.right, self.start,
                self.count, self.v0, self.v1, self.v2, self.tri_id)

    def intersect_many(self, origins, directions, tmin=1e-12, tmax=np.inf):
        """Nearest hits for a batch of rays; misses have t = inf, triangle = -1."""
        o, d, lo, hi = _batch(origins, directions, tmin, tmax)
        out_t = np.full(len(o), np.inf)
        out_i = np.full(len(o), -1, dtype=np.int64)
        if self.n_triangles and len(o):
            _trace(o, d, lo, hi, False, *self._arrays(), out_t, out_i)
        return out_t, out_i

    def occluded(self, origins, directions, tmin=1e-12, tmax=np.inf) -> np.ndarray:
        """True where any triangle is hit with tmin < t < tmax."""
        o, d, lo, hi = _batch(origins, directions, tmin, tmax)
        out_t = np.full(len(o), np.inf)
        out_i = np.full(len(o), -1, dtype=np.int64)
        if self.n_triangles and len(o):
            _trace(o, d, lo, np.nextafter(hi, -np.inf), True, *self._arrays(), out_t, out_i)
        return out_i >= 0


def _batch(origins, directions, tmin, tmax):
    o = np.ascontiguousarray(np.asarray(origins, dtype=float).reshape(-1, 3))
    d = np.ascontiguousarray(np.asarray(directions, dtype=float).reshape(-1, 3))
    lo = np.broadcast_to(np.asarray(tmin, dtype=float), (len(o),)).copy()
    hi = np.broadcast_to(np.asarray(tmax, dtype=float), (len(o),)).copy()
    return o, d, lo, hi


def get_bvh(mesh: TriangleMesh) -> BVH:
    """BVH for ``mesh``, built on first use and cached on the instance."""
    bvh = mesh.__dict__.get("_bvh")
    if bvh is None:
        bvh = BVH(mesh)
        object.__setattr__(mesh, "_bvh", bvh)
    return bvh


def ray_mesh_intersect(ray: Ray, mesh: TriangleMesh) -> Hit | None:
    t, i = get_bvh(mesh).intersect_many(ray.origin[None], ray.direction[None])
    if i[0] < 0:
        return None
    return Hit(float(t[0]), int(i[0]))


@numba.njit(cache=True, error_model="numpy")
def _trace(orig, dirs, tmin, tmax, any_hit, node_min, node_max, left, right, start,
           count, v0, v1, v2, tri_id, out_t, out_i):
    stack = np.empty(128, dtype=np.int64)
    for r in range(orig.shape[0]):
        ox, oy, oz = orig[r, 0], orig[r, 1], orig[r, 2]
        d = dirs[r]
        inv0, inv1, inv2 = 1.0 / d[0], 1.0 / d[1], 1.0 / d[2]

        # watertight setup: permute so that kz is the dominant axis
        kz = 0
        if abs(d[1]) > abs(d[kz]):
            kz = 1
        if abs(d[2]) > abs(d[kz]):
            kz = 2
        kx = (kz + 1) % 3
        ky = (kx + 1) % 3
        if d[kz] < 0.0:
            kx, ky = ky, kx
        sx = d[kx] / d[kz]
        sy = d[ky] / d[kz]
        sz = 1.0 / d[kz]
        o = orig[r]

        t_lo = tmin[r]
        best_t = tmax[r]
        best_i = -1
        done = False
        sp = 1
        stack[0] = 0
        while sp > 0 and not done:
            sp -= 1
            node = stack[sp]
            t0 = t_lo
            t1 = best_t
            ta = (node_min[node, 0] - ox) * inv0
            tb = (node_max[node, 0] - ox) * inv0
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            ta = (node_min[node, 1] - oy) * inv1
            tb = (node_max[node, 1] - oy) * inv1
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            ta = (node_min[node, 2] - oz) * inv2
            tb = (node_max[node, 2] - oz) * inv2
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            # small relative slack keeps grazing boxes from being culled by rounding
            if t0 > t1 * (1.0 + 1e-12) + 1e-15:
                continue
            if left[node] >= 0:
                stack[sp] = right[node]
                stack[sp + 1] = left[node]
                sp += 2
                continue
            for j in range(start[node], start[node] + count[node]):
                ax = v0[j, kx] - o[kx]
                ay = v0[j, ky] - o[ky]
                az = v0[j, kz] - o[kz]
                bx = v1[j, kx] - o[kx]
                by = v1[j, ky] - o[ky]
                bz = v1[j, kz] - o[kz]
                cx = v2[j, kx] - o[kx]
                cy = v2[j, ky] - o[ky]
                cz = v2[j, kz] - o[kz]
                ax -= sx * az
                ay -= sy * az
                bx -= sx * bz
                by -= sy * bz
                cx -= sx * cz
                cy -= sy * cz
                u = cx * by - cy * bx
                v = ax * cy - ay * cx
                w = bx * ay - by * ax
                if (u < 0.0 or v < 0.0 or w < 0.0) and (u > 0.0 or v > 0.0 or w > 0.0):
                    continue
                det = u + v + w
                if det == 0.0:
                    continue
                tt = u * (sz * az) + v * (sz * bz) + w * (sz * cz)
                if det < 0.0:
                    tt = -tt
                    det = -det
                if tt <= t_lo * det:
                    continue
                t = tt / det
                if t > best_t:
                    continue
                tid = tri_id[j]
                if t < best_t or best_i < 0 or tid < best_i:
                    best_t = t
                    best_i = tid
                    if any_hit:
                        done = True
                        break
        if best_i >= 0:
            out_t[r] = best_t
            out_i[r] = best_i
