"""ASCII PLY point clouds and OBJ meshes (v/f records only)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .types import PointCloud, TriangleMesh


def write_ply(path, cloud: PointCloud) -> None:
    has_n = cloud.normals is not None
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
              "property float32 x", "property float32 y", "property float32 z"]
    if has_n:
        header += ["property float32 nx", "property float32 ny", "property float32 nz"]
    header.append("end_header")
    data = cloud.points if not has_n else np.hstack([cloud.points, cloud.normals])
    data = data.astype(np.float32)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        for row in data:
            fh.write(" ".join(f"{v:.9g}" for v in row) + "\n")


def read_ply(path) -> PointCloud:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError(f"{path}: not a PLY file")
    n_vertex = None
    props: list[str] = []
    in_vertex = False
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format" and tok[1] != "ascii":
            raise ValueError(f"{path}: only ASCII PLY is supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertex = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            body_start = i + 1
            break
    if n_vertex is None or body_start is None:
        raise ValueError(f"{path}: malformed PLY header")
    rows = lines[body_start:body_start + n_vertex]
    data = np.array([[float(v) for v in r.split()] for r in rows], dtype=float).reshape(n_vertex, len(props))
    # values are declared float32: snap the decimal text back to that precision
    data = data.astype(np.float32).astype(float)
    col = {name: j for j, name in enumerate(props)}
    pts = data[:, [col["x"], col["y"], col["z"]]]
    normals = None
    if all(k in col for k in ("nx", "ny", "nz")):
        normals = data[:, [col["nx"], col["ny"], col["nz"]]]
        norm = np.linalg.norm(normals, axis=1, keepdims=True)
        # leave already-unit normals untouched so write/read round-trips exactly
        normals = np.where(np.abs(norm - 1.0) > 1e-6, normals / norm, normals)
    return PointCloud(pts, normals)


def write_obj(path, mesh: TriangleMesh) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.triangles + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def read_obj(path) -> TriangleMesh:
    verts, faces = [], []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "v":
            verts.append([float(x) for x in tok[1:4]])
        elif tok[0] == "f":
            idx = [int(x.split("/")[0]) for x in tok[1:]]
            # fan-triangulate polygons
            for j in range(1, len(idx) - 1):
                faces.append([idx[0] - 1, idx[j] - 1, idx[j + 1] - 1])
    return TriangleMesh(np.array(verts, dtype=float).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))
