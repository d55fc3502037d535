"""The per-plant 64-view schedule and its baseline subsets.

Views are described in the plant frame (base at the origin, +z along the plant
axis towards the robot) and stored as world-frame poses. Ring views sit at a
fixed elevation above the look-at point; the standoff grows with the cube
root of the nominal plant mass so the plant keeps a similar size in frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import KinematicsError
from .geometry import Pose, rot_z
from .plants import GrowthParams, logistic_mass, stable_seed
from .robot import RobotConfig, camera_rotation, system_ik

METHODS = ("full", "baseline1", "baseline2", "baseline3")


@dataclass(frozen=True)
class PlanParams:
    elevations_deg: tuple[float, ...] = (20.0, 45.0, 70.0)
    views_per_ring: int = 21
    azimuth_arc_deg: float = 360.0
    look_at_height: float = 0.058
    standoff_base: float = 0.113
    standoff_gain: float = 0.006  # m per g^(1/3)
    growth: GrowthParams = field(default_factory=GrowthParams)

    def standoff(self, age_days: float) -> float:
        return self.standoff_base + self.standoff_gain * logistic_mass(age_days, self.growth) ** (1 / 3)


@dataclass(frozen=True)
class CameraView:
    pose: Pose            # camera -> world
    ring_id: int          # 0 = top-down, 1..3 rings
    index_in_ring: int
    standoff: float
    plant_position: np.ndarray

    def pose_in_plant_frame(self) -> Pose:
        return Pose(self.pose.rotation, self.pose.translation - self.plant_position)


@dataclass(frozen=True)
class ViewPlan:
    plant_id: str
    views: tuple[CameraView, ...]
    method_tag: str = "full"
    plant_position: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __len__(self) -> int:
        return len(self.views)

    def keys(self) -> list[tuple[int, int]]:
        return [(v.ring_id, v.index_in_ring) for v in self.views]


def _look_at_pose(position, look_at, yaw_hint: float) -> Pose:
    """Pose with the arm's roll convention: optical axis at cumulative pitch
    ``atan2(-dz, d_radial)`` in the vertical plane at azimuth ``yaw_hint``."""
    d = np.asarray(look_at, float) - np.asarray(position, float)
    d /= np.linalg.norm(d)
    radial = np.array([np.cos(yaw_hint), np.sin(yaw_hint), 0.0])
    pitch = np.arctan2(-d[2], d @ radial)
    return Pose(camera_rotation(yaw_hint, pitch), position)


def _ring_views(standoff, params: PlanParams, plant_position):
    c = np.array([0.0, 0.0, params.look_at_height])
    views = [CameraView(_look_at_pose(c + [0.0, 0.0, standoff], c, 0.0), 0, 0, standoff,
                        plant_position)]
    n = params.views_per_ring
    arc = np.radians(params.azimuth_arc_deg)
    full_circle = np.isclose(params.azimuth_arc_deg, 360.0)
    step = arc / n if full_circle else arc / max(n - 1, 1)
    start = 0.0 if full_circle else -arc / 2
    for ring, elev in enumerate(params.elevations_deg, start=1):
        phi = np.radians(elev)
        # stagger the rings by a third of the azimuth step
        offset = (ring - 1) * step / 3 if full_circle else 0.0
        for i in range(n):
            psi = start + offset + i * step
            pos = c + standoff * np.array([np.cos(phi) * np.cos(psi), np.cos(phi) * np.sin(psi), np.sin(phi)])
            yaw = float(np.arctan2(pos[1], pos[0]))
            views.append(CameraView(_look_at_pose(pos, c, yaw), ring, i, standoff, plant_position))
    return views


def plan_views(plant_id: str, plant_position, age_days: float, params: PlanParams | None = None,
               robot: RobotConfig | None = None) -> ViewPlan:
    """Full 64-view plan; every view is checked with system IK when a robot is given.

    An infeasible schedule is retried once with a 10% longer standoff.
    """
    if age_days < 0:
        raise ValueError("age must be >= 0")
    params = params or PlanParams()
    pp = np.asarray(plant_position, dtype=float)
    base = params.standoff(age_days)
    last_error = None
    for standoff in (base, 1.1 * base):
        local = _ring_views(standoff, params, pp)
        views = tuple(replace(v, pose=Pose(v.pose.rotation, v.pose.translation + pp)) for v in local)
        if robot is None:
            return ViewPlan(plant_id, views, "full", pp)
        try:
            for v in views:
                system_ik(v.pose, pp, robot)
        except KinematicsError as exc:
            last_error = exc
            continue
        return ViewPlan(plant_id, views, "full", pp)
    raise last_error


def filter_baseline1(plan: ViewPlan) -> ViewPlan:
    """Only the top-down view."""
    return replace(plan, views=tuple(v for v in plan.views if v.ring_id == 0), method_tag="baseline1")


def camera_height(view: CameraView) -> float:
    """Camera coordinate along the plant axis (towards the robot)."""
    return float(view.pose.translation[2] - view.plant_position[2])


def filter_baseline2(plan: ViewPlan, x_threshold: float = 0.17) -> ViewPlan:
    """Drop the views that reach around the plant."""
    return replace(plan, views=tuple(v for v in plan.views if camera_height(v) >= x_threshold),
                   method_tag="baseline2")


@dataclass(frozen=True)
class Jitter:
    dx: float
    dy: float
    yaw: float


def base_jitter(plant_id: str, sigma_xy: float, sigma_yaw: float, seed: int) -> Jitter:
    rng = np.random.default_rng(stable_seed(seed, "jitter/" + plant_id))
    dx, dy = rng.normal(0.0, 1.0, size=2) * sigma_xy
    return Jitter(float(dx), float(dy), float(rng.normal(0.0, 1.0) * sigma_yaw))


def jitter_baseline3(plan: ViewPlan, sigma_xy: float = 0.01, sigma_yaw: float = np.radians(3.0),
                     seed: int = 0) -> ViewPlan:
    """Apply one shared rigid placement error (yaw about the plant axis plus an
    in-plane shift) to every view of the plan."""
    j = base_jitter(plan.plant_id, sigma_xy, sigma_yaw, seed)
    R = rot_z(j.yaw)
    shift = np.array([j.dx, j.dy, 0.0])
    views = []
    for v in plan.views:
        local = v.pose.translation - v.plant_position
        pose = Pose(R @ v.pose.rotation, R @ local + shift + v.plant_position)
        views.append(replace(v, pose=pose))
    return replace(plan, views=tuple(views), method_tag="baseline3")


def plan_for_method(plan: ViewPlan, method: str, *, x_threshold=0.17, sigma_xy=0.01,
                    sigma_yaw=np.radians(3.0), seed=0) -> ViewPlan:
    if method == "full":
        return plan
    if method == "baseline1":
        return filter_baseline1(plan)
    if method == "baseline2":
        return filter_baseline2(plan, x_threshold)
    if method == "baseline3":
        return jitter_baseline3(plan, sigma_xy, sigma_yaw, seed)
    raise ValueError(f"unknown method {method!r}")


PLAN_CSV_HEADER = (["plant_id", "ring", "index"] + [f"r{i}{j}" for i in range(3) for j in range(3)]
                   + ["tx", "ty", "tz", "standoff", "method_tag"])


def plan_rows(plan: ViewPlan) -> list[list]:
    return [[plan.plant_id, v.ring_id, v.index_in_ring, *v.pose.as_row(), v.standoff, plan.method_tag]
            for v in plan.views]
