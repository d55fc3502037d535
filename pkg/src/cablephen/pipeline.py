"""The study end to end, one plant at a time.

Every function here is pure given its inputs; the command-line stages in
:mod:`cablephen.cli` only add file hand-off around them. Per-plant work is
seeded from (master seed, plant id), so results do not depend on the order
or the process in which plants are handled.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .capture import (CameraModel, CaptureParams, draw_samples, neighbor_occluders,
                      plant_frame_poses, reconstruct_from_visibility, topdown_pixel_count,
                      visibility_matrix)
from .errors import ConfigError, InsufficientPointsError
from .geometry import PointCloud, Pose, TriangleMesh, rot_z, sheet_level
from .metrics import MetricConfig, MetricRow, estimate_metrics, projected_area
from .plants import CohortConfig, GrowthParams, PlantSpec, PlantTruth, build_cohort, generate_plant
from .robot import RobotConfig
from .views import (METHODS, PlanParams, ViewPlan, base_jitter, camera_height, filter_baseline1,
                    filter_baseline2, jitter_baseline3, plan_views)

NEIGHBOR_SPACING = float(np.sqrt(350e-4))  # 350 cm^2 per plant


def _from_dict(cls, d: dict, what: str):
    d = dict(d or {})
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def _load_ref(value, base_dir: Path, what: str) -> dict:
    """A sub-config given inline (dict) or as a path to a JSON file."""
    if value is None:
        return {}
    if isinstance(value, dict):
        return value
    path = Path(value)
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ConfigError(f"{what} config {str(path)!r} does not exist")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} config {str(path)!r} is not valid JSON: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    cohort: CohortConfig = field(default_factory=CohortConfig)
    robot: RobotConfig = field(default_factory=RobotConfig)
    plan: PlanParams = field(default_factory=PlanParams)
    camera: CameraModel = field(default_factory=CameraModel)
    capture: CaptureParams = field(default_factory=CaptureParams)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    methods: tuple[str, ...] = METHODS
    baseline2_threshold: float = 0.17
    baseline3_sigma_xy: float = 0.01
    baseline3_sigma_yaw_deg: float = 3.0
    neighbor_occlusion: bool = False
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
        # one seed drives cohort and capture
        object.__setattr__(self, "cohort", replace(self.cohort, master_seed=self.master_seed))
        object.__setattr__(self, "capture", replace(self.capture, seed=self.master_seed))
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in self.methods))

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> ExperimentConfig:
        base = Path(base_dir)
        d = dict(d or {})
        known = {"master_seed", "cohort", "robot", "plan", "camera", "capture", "metrics",
                 "methods", "baseline2_threshold", "baseline3", "neighbor_occlusion", "output_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "master_seed" in d:
            kw["master_seed"] = int(d["master_seed"])
        kw["cohort"] = CohortConfig.from_dict(_load_ref(d.get("cohort"), base, "cohort"))
        kw["robot"] = RobotConfig.from_dict(_load_ref(d.get("robot"), base, "robot"))
        plan = dict(d.get("plan") or {})
        if "elevations_deg" in plan:
            plan["elevations_deg"] = tuple(plan["elevations_deg"])
        if "growth" in plan:
            plan["growth"] = _from_dict(GrowthParams, plan["growth"], "plan growth")
        kw["plan"] = _from_dict(PlanParams, plan, "plan")
        kw["camera"] = _from_dict(CameraModel, d.get("camera"), "camera")
        kw["capture"] = _from_dict(CaptureParams, d.get("capture"), "capture")
        met = dict(d.get("metrics") or {})
        for k in ("crop_lower", "crop_upper"):
            if k in met:
                met[k] = tuple(met[k])
        kw["metrics"] = _from_dict(MetricConfig, met, "metrics")
        if "methods" in d:
            kw["methods"] = tuple(d["methods"])
        if "baseline2_threshold" in d:
            kw["baseline2_threshold"] = float(d["baseline2_threshold"])
        b3 = dict(d.get("baseline3") or {})
        unknown = set(b3) - {"sigma_xy", "sigma_yaw_deg"}
        if unknown:
            raise ConfigError(f"unknown baseline3 keys: {sorted(unknown)}")
        if "sigma_xy" in b3:
            kw["baseline3_sigma_xy"] = float(b3["sigma_xy"])
        if "sigma_yaw_deg" in b3:
            kw["baseline3_sigma_yaw_deg"] = float(b3["sigma_yaw_deg"])
        if "neighbor_occlusion" in d:
            kw["neighbor_occlusion"] = bool(d["neighbor_occlusion"])
        out = d.get("output_dir", "out")
        kw["output_dir"] = str(out if Path(out).is_absolute() else base / out)
        try:
            return cls(raw=d, **kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} does not exist")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {str(path)!r} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, path.parent)

    def metric_config(self) -> MetricConfig:
        """Metric settings with the iso-level tied to the capture sampling density."""
        if self.metrics.iso_level is not None:
            return self.metrics
        level = sheet_level(self.capture.samples_per_m2, self.metrics.cell_size)
        return replace(self.metrics, iso_level=level)

    def fingerprint(self) -> str:
        """Stable hash of every setting that affects results (not output_dir)."""
        d = asdict(self)
        d.pop("raw")
        d.pop("output_dir")
        text = json.dumps(d, sort_keys=True, default=lambda o: np.asarray(o).tolist())
        return hashlib.sha256(text.encode()).hexdigest()


# ---- per-plant stages ---------------------------------------------------------------

@dataclass(frozen=True)
class MethodCapture:
    plant_id: str
    method_tag: str
    n_views: int
    cloud: PointCloud | None = None      # point-cloud methods
    pixel_count: int | None = None       # top-down segmentation
    base_depth: float | None = None

    @property
    def n_points(self) -> int:
        return 0 if self.cloud is None else len(self.cloud)


def plant_plan(spec: PlantSpec, index: int, cfg: ExperimentConfig) -> ViewPlan:
    """Full view schedule at the plant's station, checked against the robot."""
    x, y = cfg.robot.station(spec.plant_id, index)
    return plan_views(spec.plant_id, (x, y, 0.0), spec.age_days, cfg.plan, cfg.robot)


def stored_cloud(cloud: PointCloud) -> PointCloud:
    """The cloud as it reads back from a PLY file (single-precision values)."""
    pts = cloud.points.astype(np.float32).astype(float)
    if cloud.normals is None:
        return PointCloud(pts)
    return PointCloud(pts, cloud.normals.astype(np.float32).astype(float))


def _neighbors(truth: PlantTruth) -> TriangleMesh:
    # neighbours are turned copies of the plant itself: same size class, no extra synthesis
    golden = np.radians(137.507764)
    copies = [truth.mesh.transformed(Pose(rot_z((i + 1) * golden), np.zeros(3))) for i in range(8)]
    return neighbor_occluders(copies, NEIGHBOR_SPACING)


def capture_plant(truth: PlantTruth, plan: ViewPlan, cfg: ExperimentConfig) -> list[MethodCapture]:
    """Simulated capture of one plant under every configured method."""
    occ = _neighbors(truth) if cfg.neighbor_occlusion else None
    scene = truth.mesh if occ is None else truth.mesh.merged(occ)
    samples = draw_samples(truth.mesh, cfg.capture, truth.plant_id)
    need = set(cfg.methods)
    out = []
    vis = None
    if need & {"full", "baseline2"}:
        vis = visibility_matrix(samples.points, samples.normals, plant_frame_poses(plan),
                                cfg.camera, scene)
    min_views = cfg.capture.min_views_visible
    if "full" in need:
        out.append(MethodCapture(truth.plant_id, "full", len(plan),
                                 stored_cloud(reconstruct_from_visibility(samples, vis, min_views))))
    if "baseline1" in need:
        view = filter_baseline1(plan).views[0]
        px = topdown_pixel_count(truth.mesh, view, cfg.camera, occ)
        out.append(MethodCapture(truth.plant_id, "baseline1", 1, pixel_count=px,
                                 base_depth=camera_height(view)))
    if "baseline2" in need:
        keep_keys = set(filter_baseline2(plan, cfg.baseline2_threshold).keys())
        mask = np.array([k in keep_keys for k in plan.keys()])
        cloud = reconstruct_from_visibility(samples, vis[:, mask], min_views)
        out.append(MethodCapture(truth.plant_id, "baseline2", int(mask.sum()), stored_cloud(cloud)))
    if "baseline3" in need:
        sigma_yaw = np.radians(cfg.baseline3_sigma_yaw_deg)
        jittered = jitter_baseline3(plan, cfg.baseline3_sigma_xy, sigma_yaw, cfg.master_seed)
        j = base_jitter(plan.plant_id, cfg.baseline3_sigma_xy, sigma_yaw, cfg.master_seed)
        # the cameras really stand at the jittered poses but are registered
        # as if the base had been placed exactly: points move by the inverse error
        error = Pose(rot_z(j.yaw), [j.dx, j.dy, 0.0])
        vis3 = visibility_matrix(samples.points, samples.normals, plant_frame_poses(jittered),
                                 cfg.camera, scene)
        cloud = reconstruct_from_visibility(samples, vis3, min_views, error.inverse())
        out.append(MethodCapture(truth.plant_id, "baseline3", len(jittered), stored_cloud(cloud)))
    return out


def analyze_capture(spec: PlantSpec, truth_fresh: float, truth_dry: float, cap: MethodCapture,
                    cfg: ExperimentConfig) -> MetricRow:
    base = dict(plant_id=spec.plant_id, experiment=spec.experiment_id, age_days=spec.age_days,
                gt_fresh_g=truth_fresh, gt_dry_g=truth_dry, method_tag=cap.method_tag,
                n_views=cap.n_views, n_points=cap.n_points)
    if cap.method_tag == "baseline1":
        return MetricRow(**base, projected_area_m2=projected_area(cap.pixel_count, cfg.camera,
                                                                  cap.base_depth))
    try:
        est = estimate_metrics(cap.cloud, cfg.metric_config())
    except InsufficientPointsError:
        return MetricRow(**base)
    return MetricRow(**base, surface_area_m2=est.surface_area_m2, voxel_count=est.voxel_count)


def run_plant(args) -> tuple[PlantTruth, ViewPlan, list[MethodCapture], list[MetricRow]]:
    spec, index, cfg = args
    truth = generate_plant(spec)
    plan = plant_plan(spec, index, cfg)
    caps = capture_plant(truth, plan, cfg)
    rows = [analyze_capture(spec, truth.fresh_mass, truth.dry_mass, c, cfg) for c in caps]
    return truth, plan, caps, rows


def parallel_map(fn, items, jobs: int = 1):
    """Ordered map, optionally across worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _rows_only(args):
    return run_plant(args)[3]


def run_study(cfg: ExperimentConfig, jobs: int = 1) -> list[MetricRow]:
    """All metric rows for the cohort, sorted by (plant_id, method_tag)."""
    specs = build_cohort(cfg.cohort)
    nested = parallel_map(_rows_only, [(s, i, cfg) for i, s in enumerate(specs)], jobs)
    rows = [r for rs in nested for r in rs]
    return sorted(rows, key=lambda r: (r.plant_id, r.method_tag))
