"""Photograph capture and multi-view reconstruction, simulated geometrically.

Instead of rendering images and running structure-from-motion, the plant
surface is densely sampled and a sample is kept when enough cameras see it:
it must project inside the image, face the camera, and have a clear line of
sight. This keeps the occlusion structure that distinguishes view schedules
while staying cheap and deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, Pose, TriangleMesh, get_bvh, mesh_surface_area, sample_surface
from .plants import PlantTruth, stable_seed
from .views import CameraView, ViewPlan

_ORIGIN_OFFSET = 1e-6


@dataclass(frozen=True)
class CameraModel:
    width: int = 160
    height: int = 120
    fx: float = 80.0
    fy: float = 80.0
    cx: float = 80.0
    cy: float = 60.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")

    def scaled(self, factor: int) -> CameraModel:
        """Same field of view at ``factor`` times the resolution."""
        return CameraModel(self.width * factor, self.height * factor, self.fx * factor,
                           self.fy * factor, self.cx * factor, self.cy * factor)

    def project(self, points_cam: np.ndarray):
        """Pixel coordinates and an in-image mask for camera-frame points."""
        z = points_cam[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * points_cam[:, 0] / z + self.cx
            v = self.fy * points_cam[:, 1] / z + self.cy
        inside = (z > 0) & (u >= 0) & (u < self.width) & (v >= 0) & (v < self.height)
        return u, v, inside

    def pixel_rays(self) -> np.ndarray:
        """Unit camera-frame directions through every pixel centre (row-major)."""
        u, v = np.meshgrid(np.arange(self.width) + 0.5, np.arange(self.height) + 0.5)
        d = np.stack([(u.ravel() - self.cx) / self.fx, (v.ravel() - self.cy) / self.fy,
                      np.ones(u.size)], axis=1)
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass(frozen=True)
class CaptureParams:
    samples_per_m2: float = 1e5
    min_views_visible: int = 2
    noise_sigma: float = 5e-4
    seed: int = 0

    def __post_init__(self):
        if self.min_views_visible < 1:
            raise ValueError("min_views_visible must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.samples_per_m2 <= 0:
            raise ValueError("samples_per_m2 must be positive")


@dataclass(frozen=True)
class SurfaceSamples:
    """Candidate surface points shared by every view set of one plant."""
    points: np.ndarray
    normals: np.ndarray
    noise: np.ndarray


def draw_samples(mesh: TriangleMesh, params: CaptureParams, key: str) -> SurfaceSamples:
    """Area-weighted samples plus their pre-drawn noise, seeded by ``key``."""
    rng = np.random.default_rng(stable_seed(params.seed, "capture/" + key))
    n = int(round(mesh_surface_area(mesh) * params.samples_per_m2))
    pts, normals, _ = sample_surface(mesh, n, rng)
    noise = rng.normal(0.0, 1.0, size=pts.shape) * params.noise_sigma
    return SurfaceSamples(pts, normals, noise)


def visibility_matrix(points: np.ndarray, normals: np.ndarray, poses: list[Pose],
                      cam: CameraModel, occluder: TriangleMesh) -> np.ndarray:
    """Boolean (n_points, n_views): in image, front-facing and unoccluded."""
    n = len(points)
    vis = np.zeros((n, len(poses)), dtype=bool)
    if n == 0 or not poses:
        return vis
    cand_idx, cand_view = [], []
    for j, pose in enumerate(poses):
        rel = points - pose.translation
        _, _, inside = cam.project(rel @ pose.rotation)
        facing = np.einsum("ij,ij->i", normals, -rel) > 0
        idx = np.flatnonzero(inside & facing)
        cand_idx.append(idx)
        cand_view.append(np.full(len(idx), j))
    idx = np.concatenate(cand_idx)
    view = np.concatenate(cand_view)
    if len(idx) == 0:
        return vis
    centers = np.stack([p.translation for p in poses])
    origin = points[idx] + _ORIGIN_OFFSET * normals[idx]
    seg = centers[view] - origin
    dist = np.linalg.norm(seg, axis=1)
    blocked = get_bvh(occluder).occluded(origin, seg / dist[:, None], tmax=dist)
    vis[idx[~blocked], view[~blocked]] = True
    return vis


def plant_frame_poses(plan: ViewPlan) -> list[Pose]:
    return [v.pose_in_plant_frame() for v in plan.views]


def reconstruct_from_visibility(samples: SurfaceSamples, vis: np.ndarray, min_views: int,
                                registration: Pose | None = None) -> PointCloud:
    """Cloud of samples seen by at least ``min_views`` views, with noise added.

    ``registration`` maps the true plant frame to the frame in which the
    cameras believe they are (used for misplaced robot bases).
    """
    keep = np.flatnonzero(vis.sum(axis=1) >= min_views)
    pts = samples.points[keep]
    normals = samples.normals[keep]
    if registration is not None:
        pts = registration.apply(pts)
        normals = normals @ registration.rotation.T
    return PointCloud(pts + samples.noise[keep], normals)


def simulate_reconstruction(plant: PlantTruth, plan: ViewPlan, cam: CameraModel | None = None,
                            params: CaptureParams | None = None,
                            occluders: TriangleMesh | None = None,
                            registration: Pose | None = None) -> PointCloud:
    """Reconstructed plant-frame point cloud for one view plan."""
    if len(plan) == 0:
        raise ValueError("view plan is empty")
    cam = cam or CameraModel()
    params = params or CaptureParams()
    samples = draw_samples(plant.mesh, params, plant.plant_id)
    scene = plant.mesh if occluders is None else plant.mesh.merged(occluders)
    vis = visibility_matrix(samples.points, samples.normals, plant_frame_poses(plan), cam, scene)
    return reconstruct_from_visibility(samples, vis, params.min_views_visible, registration)


def topdown_pixel_count(plant: PlantTruth | TriangleMesh, view: CameraView,
                        cam: CameraModel | None = None,
                        occluders: TriangleMesh | None = None) -> int:
    """Pixels whose centre ray first hits the plant (ground-truth segmentation)."""
    cam = cam or CameraModel()
    mesh = plant.mesh if isinstance(plant, PlantTruth) else plant
    if len(mesh.triangles) == 0:
        return 0
    scene = mesh if occluders is None else mesh.merged(occluders)
    pose = view.pose_in_plant_frame()
    dirs = cam.pixel_rays() @ pose.rotation.T
    origins = np.broadcast_to(pose.translation, dirs.shape)
    _, tri = get_bvh(scene).intersect_many(origins, dirs)
    return int(np.count_nonzero((tri >= 0) & (tri < len(mesh.triangles))))


def neighbor_occluders(meshes: list[TriangleMesh], spacing: float) -> TriangleMesh:
    """Place neighbour plants on a square lattice around the origin.

    ``spacing`` is the centre distance, e.g. sqrt(350 cm^2) for the grow
    tower's planting density; up to eight neighbours are used.
    """
    offsets = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
    out = TriangleMesh.empty()
    for mesh, (i, j) in zip(meshes, offsets):
        out = out.merged(mesh.transformed(Pose(np.eye(3), [i * spacing, j * spacing, 0.0])))
    return out
