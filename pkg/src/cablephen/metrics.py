"""Plant traits from a reconstructed cloud or a top-down segmentation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientPointsError
from .geometry import (PointCloud, crop_to_region, mesh_surface_area, occupied_count,
                       poisson_disk_sample, reconstruct_surface, remove_outliers,
                       voxelize_surface)

VOXEL_SIZE = 0.003


@dataclass(frozen=True)
class MetricConfig:
    outlier_neighbors: int = 8
    outlier_std_ratio: float = 2.0
    crop_lower: tuple[float, float, float] = (-0.17, -0.17, 0.002)
    crop_upper: tuple[float, float, float] = (0.17, 0.17, 0.40)
    cell_size: float = 0.002
    normal_support: float | None = 1.0  # cells across the surface; None = round kernel
    resample_radius: float = 0.0015
    voxel_size: float = VOXEL_SIZE
    iso_level: float | None = None  # None adapts to each cloud's median density
    seed: int = 0


@dataclass(frozen=True)
class MetricEstimate:
    surface_area_m2: float
    voxel_count: int
    n_points: int
    n_resampled: int = field(default=0)


@dataclass(frozen=True)
class MetricRow:
    plant_id: str
    experiment: int
    age_days: float
    gt_fresh_g: float
    gt_dry_g: float
    method_tag: str
    surface_area_m2: float | None = None
    voxel_count: int | None = None
    projected_area_m2: float | None = None
    n_views: int = 0
    n_points: int = 0

    def __post_init__(self):
        for name in ("surface_area_m2", "voxel_count", "projected_area_m2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def voxel_volume_m3(self) -> float | None:
        return None if self.voxel_count is None else self.voxel_count * VOXEL_SIZE ** 3


CSV_FIELDS = ("plant_id", "experiment", "age_days", "gt_fresh_g", "gt_dry_g", "method_tag",
              "surface_area_m2", "voxel_count", "voxel_volume_m3", "projected_area_m2",
              "n_views", "n_points")


def row_to_record(row: MetricRow) -> list[str]:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(float(v))
        return str(v)
    return [fmt(getattr(row, f)) for f in CSV_FIELDS]


def record_to_row(rec: dict) -> MetricRow:
    def opt(v, cast):
        return None if v in ("", None) else cast(v)
    return MetricRow(
        plant_id=rec["plant_id"], experiment=int(rec["experiment"]),
        age_days=float(rec["age_days"]), gt_fresh_g=float(rec["gt_fresh_g"]),
        gt_dry_g=float(rec["gt_dry_g"]), method_tag=rec["method_tag"],
        surface_area_m2=opt(rec.get("surface_area_m2"), float),
        voxel_count=opt(rec.get("voxel_count"), int),
        projected_area_m2=opt(rec.get("projected_area_m2"), float),
        n_views=int(rec.get("n_views") or 0), n_points=int(rec.get("n_points") or 0))


def clean_cloud(cloud: PointCloud, cfg: MetricConfig | None = None) -> PointCloud:
    cfg = cfg or MetricConfig()
    cloud = remove_outliers(cloud, cfg.outlier_neighbors, cfg.outlier_std_ratio)
    return crop_to_region(cloud, cfg.crop_lower, cfg.crop_upper)


def estimate_metrics(cloud: PointCloud, cfg: MetricConfig | None = None) -> MetricEstimate:
    """Clean, crop, mesh and measure a plant-frame cloud.

    The mesh vertices are thinned by Poisson-disk sampling as a density check
    (reported as ``n_resampled``); the voxel count comes from voxelizing the
    mesh itself, which is the unbiased limit of a dense resample.
    """
    cfg = cfg or MetricConfig()
    if len(cloud) == 0:
        raise InsufficientPointsError("insufficient points: empty cloud")
    cleaned = clean_cloud(cloud, cfg)
    if len(cleaned) == 0:
        raise InsufficientPointsError("insufficient points: nothing left after cropping")
    mesh = reconstruct_surface(cleaned, cfg.cell_size, cfg.iso_level, cfg.normal_support)
    resampled = poisson_disk_sample(PointCloud(mesh.vertices), cfg.resample_radius, cfg.seed)
    area = mesh_surface_area(mesh)
    count = occupied_count(voxelize_surface(mesh, cfg.voxel_size))
    return MetricEstimate(float(area), int(count), len(cleaned), len(resampled))


def projected_area(pixel_count: int, cam, base_depth_z: float) -> float:
    """Area on the plane at depth ``base_depth_z`` covered by ``pixel_count`` pixels."""
    if not base_depth_z > 0:
        raise ValueError("depth must be positive")
    if pixel_count < 0:
        raise ValueError("pixel count must be non-negative")
    return float(pixel_count) * base_depth_z ** 2 / (cam.fx * cam.fy)


def metric_value(row: MetricRow, metric: str) -> float | None:
    if metric == "voxel_volume_m3":
        return row.voxel_volume_m3
    return getattr(row, metric)


def collect(rows, method_tag: str, metric: str, mass: str = "gt_fresh_g"):
    """(x, y) arrays for one method/metric pair, skipping missing values."""
    xs, ys = [], []
    for r in rows:
        if r.method_tag != method_tag:
            continue
        v = metric_value(r, metric)
        if v is None:
            continue
        xs.append(v)
        ys.append(getattr(r, mass))
    return np.asarray(xs, float), np.asarray(ys, float)
