"""Kinematics of the planar 4-cable CDPR and the 4-DoF camera arm.

World frame: the grow-tower face is the z = 0 plane, x runs along the tower,
y is vertical (gravity along -y) and +z points from the tower towards the
robot. The CDPR platform moves in the plane z = ``mount_height``. The arm
base sits on the platform with its yaw axis along world z, so for a plant
whose station coincides with the platform position the arm axis is the plant
axis.

Arm-base frame: yaw joint about +z; the three pitch joints rotate about the
yawed y axis, positive pitch tilting the links towards -z (towards the
plant). With all joints at zero the arm is stretched along +x.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, JointLimitError, UnreachableError, WorkspaceError
from .geometry import Pose, rot_y, rot_z

GRAVITY = 9.81
# link frame -> camera frame: optical axis (camera z) along the link x axis
_LINK_TO_CAMERA = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class CdprConfig:
    anchors: np.ndarray = field(default_factory=lambda: np.array(
        [[-0.1, -0.1], [3.0, -0.1], [3.0, 2.4], [-0.1, 2.4]]))
    attachments: np.ndarray = field(default_factory=lambda: np.array(
        [[-0.1, -0.1], [0.1, -0.1], [0.1, 0.1], [-0.1, 0.1]]))
    workspace_min: tuple[float, float] = (0.0, 0.0)
    workspace_max: tuple[float, float] = (2.9, 2.3)
    min_tension: float = 5.0
    max_tension: float = 500.0
    platform_mass: float = 3.0

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=float).reshape(4, 2)
        b = np.asarray(self.attachments, dtype=float).reshape(4, 2)
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "attachments", b)
        if not self.min_tension > 0 or self.max_tension <= self.min_tension:
            raise ConfigError("need 0 < min_tension < max_tension")
        # non-collinear: some triple of anchors spans a non-zero area
        d = a[1:] - a[0]
        if np.linalg.matrix_rank(d, tol=1e-9) < 2:
            raise ConfigError("CDPR anchors are collinear")

    def in_workspace(self, xy) -> bool:
        x, y = xy
        return (self.workspace_min[0] <= x <= self.workspace_max[0]
                and self.workspace_min[1] <= y <= self.workspace_max[1])


@dataclass(frozen=True)
class ArmConfig:
    link_lengths: tuple[float, float, float] = (0.107, 0.194, 0.032)
    # (min, max) for base yaw, shoulder, elbow, wrist
    joint_limits: tuple[tuple[float, float], ...] = (
        (-np.pi, np.pi), (-2.618, 2.618), (-2.618, 2.618), (-2.618, 2.618))
    mount_height: float = 0.368  # arm base above the tower face (m)

    def __post_init__(self):
        if any(l <= 0 for l in self.link_lengths):
            raise ConfigError("link lengths must be positive")
        if len(self.joint_limits) != 4 or any(lo >= hi for lo, hi in self.joint_limits):
            raise ConfigError("need four (min, max) joint limits with min < max")

    @property
    def reach(self) -> float:
        return float(sum(self.link_lengths))


@dataclass(frozen=True)
class RobotConfig:
    cdpr: CdprConfig = field(default_factory=CdprConfig)
    arm: ArmConfig = field(default_factory=ArmConfig)
    stations: dict = field(default_factory=dict)  # plant_id -> (x, y) world

    @classmethod
    def from_dict(cls, d: dict | None) -> RobotConfig:
        d = dict(d or {})
        cd = dict(d.get("cdpr", {}))
        for k in ("anchors", "attachments"):
            if k in cd:
                cd[k] = np.asarray(cd[k], dtype=float)
        for k in ("workspace_min", "workspace_max"):
            if k in cd:
                cd[k] = tuple(cd[k])
        arm = dict(d.get("arm", {}))
        if "link_lengths" in arm:
            arm["link_lengths"] = tuple(arm["link_lengths"])
        if "joint_limits" in arm:
            arm["joint_limits"] = tuple(tuple(l) for l in arm["joint_limits"])
        stations = {k: tuple(v) for k, v in d.get("stations", {}).items()}
        try:
            return cls(CdprConfig(**cd), ArmConfig(**arm), stations)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def station(self, plant_id: str, index: int | None = None):
        if plant_id in self.stations:
            return tuple(self.stations[plant_id])
        if index is None:
            raise ConfigError(f"no station for plant {plant_id!r}")
        return default_station(index)


@dataclass(frozen=True)
class JointState:
    base: float
    shoulder: float
    elbow: float
    wrist: float

    def as_array(self) -> np.ndarray:
        return np.array([self.base, self.shoulder, self.elbow, self.wrist])


def default_station(index: int, columns: int = 12, pitch=(0.2, 0.3), start=(0.35, 0.4)):
    """Row-major plant layout on the tower face."""
    row, col = divmod(index, columns)
    return (start[0] + col * pitch[0], start[1] + row * pitch[1])


# ---- CDPR ----------------------------------------------------------------------

def cdpr_ik(platform_xy, cfg: CdprConfig) -> np.ndarray:
    """Cable lengths from each anchor to its platform attachment point."""
    p = np.asarray(platform_xy, dtype=float)
    if not cfg.in_workspace(p):
        raise WorkspaceError(f"platform {tuple(p)} outside the CDPR workspace")
    return np.linalg.norm(cfg.anchors - (p + cfg.attachments), axis=1)


def structure_matrix(platform_xy, cfg: CdprConfig) -> np.ndarray:
    """3x4 map from cable tensions to the planar wrench (fx, fy, mz) on the platform."""
    p = np.asarray(platform_xy, dtype=float)
    vec = cfg.anchors - (p + cfg.attachments)
    u = vec / np.linalg.norm(vec, axis=1, keepdims=True)
    moment = cfg.attachments[:, 0] * u[:, 1] - cfg.attachments[:, 1] * u[:, 0]
    return np.vstack([u[:, 0], u[:, 1], moment])


@dataclass(frozen=True)
class TensionSolution:
    feasible: bool
    tensions: np.ndarray | None
    residual: float


def cable_tensions(platform_xy, cfg: CdprConfig) -> TensionSolution:
    """Minimum-norm tensions within bounds that hold the platform against gravity.

    The balance A t = w has a one-dimensional null space, so the bounded
    minimum-norm problem reduces to clipping a scalar along that direction.
    Singular poses (rank-deficient A, zero-length cables) are infeasible.
    """
    p = np.asarray(platform_xy, dtype=float)
    if np.linalg.norm(cfg.anchors - (p + cfg.attachments), axis=1).min() < 1e-9:
        return TensionSolution(False, None, 0.0)  # a cable of zero length has no direction
    A = structure_matrix(p, cfg)
    if np.linalg.matrix_rank(A, tol=1e-9) < 3:
        return TensionSolution(False, None, 0.0)  # singular pose: wrench not controllable
    w = np.array([0.0, cfg.platform_mass * GRAVITY, 0.0])
    t_p = np.linalg.lstsq(A, w, rcond=None)[0]
    if np.linalg.norm(A @ t_p - w) > 1e-9:
        return TensionSolution(False, None, float(np.linalg.norm(A @ t_p - w)))
    n = null_direction(A)
    lo, hi = -np.inf, np.inf
    for ti, ni in zip(t_p, n):
        if abs(ni) < 1e-15:
            if not cfg.min_tension <= ti <= cfg.max_tension:
                return TensionSolution(False, None, 0.0)
            continue
        a = (cfg.min_tension - ti) / ni
        b = (cfg.max_tension - ti) / ni
        lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
    if lo > hi:
        return TensionSolution(False, None, 0.0)
    # t_p is the unconstrained minimum-norm point (orthogonal to n)
    lam = float(np.clip(0.0, lo, hi))
    t = t_p + lam * n
    return TensionSolution(True, t, float(np.linalg.norm(A @ t - w)))


def null_direction(A: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(A)
    n = vt[-1]
    return n if n[np.argmax(np.abs(n))] > 0 else -n


# ---- arm -----------------------------------------------------------------------

def camera_rotation(yaw: float, pitch: float) -> np.ndarray:
    """Camera-to-arm-base rotation for a final link at cumulative ``pitch``."""
    return rot_z(yaw) @ rot_y(pitch) @ _LINK_TO_CAMERA


def check_limits(q, cfg: ArmConfig, tol: float = 0.0) -> bool:
    return all(lo - tol <= v <= hi + tol for v, (lo, hi) in zip(q, cfg.joint_limits))


def arm_fk(joints: JointState, cfg: ArmConfig) -> Pose:
    q = joints.as_array()
    if not check_limits(q, cfg):
        raise JointLimitError(f"joint state {q} violates limits")
    L1, L2, L3 = cfg.link_lengths
    a1 = q[1]
    a2 = a1 + q[2]
    a3 = a2 + q[3]
    rho = L1 * np.cos(a1) + L2 * np.cos(a2) + L3 * np.cos(a3)
    h = -(L1 * np.sin(a1) + L2 * np.sin(a2) + L3 * np.sin(a3))
    pos = np.array([rho * np.cos(q[0]), rho * np.sin(q[0]), h])
    return Pose(camera_rotation(q[0], a3), pos)


def _wrap(a: float) -> float:
    return float((a + np.pi) % (2 * np.pi) - np.pi)


def arm_ik(position, direction, cfg: ArmConfig) -> JointState:
    """Joint angles placing the camera at ``position`` looking along ``direction``.

    The arm is 4-DoF, so the view direction must lie in the vertical plane
    through the yaw axis and the camera; roll follows from the mechanism.
    Elbow-up (positive elbow angle) is tried first; the back-reaching
    configuration (yaw turned by pi) only when neither elbow branch fits.
    """
    p = np.asarray(position, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if np.linalg.norm(p) > sum(cfg.link_lengths) + 1e-12:
        raise UnreachableError("target beyond full arm reach")

    rho = float(np.hypot(p[0], p[1]))
    if rho > 1e-12:
        yaw = float(np.arctan2(p[1], p[0]))
    elif np.hypot(d[0], d[1]) > 1e-12:
        yaw = float(np.arctan2(d[1], d[0]))
    else:
        yaw = 0.0
    radial = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    lateral = np.array([-np.sin(yaw), np.cos(yaw), 0.0])
    if abs(d @ lateral) > 1e-9:
        raise UnreachableError("view direction leaves the arm's plane of motion")
    for flip in (False, True):  # facing the target, then reaching back over the base
        sgn = -1.0 if flip else 1.0
        q = _planar_ik(_wrap(yaw + np.pi) if flip else yaw, sgn * rho, sgn * float(d @ radial),
                       p[2], d[2], cfg)
        if q is not None:
            return JointState(*q)
    raise JointLimitError("every elbow branch violates joint limits")


def _planar_ik(yaw, r, d_r, z, d_z, cfg: ArmConfig):
    """Joint angles for a target in the arm's vertical plane at ``yaw``, or
    None when no elbow branch is within the joint limits."""
    L1, L2, L3 = cfg.link_lengths
    pitch = float(np.arctan2(-d_z, d_r))
    wx = r - L3 * d_r
    wy = -(z - L3 * d_z)  # planar coordinate with positive = towards -z
    c2 = (wx * wx + wy * wy - L1 * L1 - L2 * L2) / (2 * L1 * L2)
    if c2 > 1.0 + 1e-12 or c2 < -1.0 - 1e-12:
        raise UnreachableError("wrist outside the reach annulus")
    c2 = min(1.0, max(-1.0, c2))
    s2 = np.sqrt(1.0 - c2 * c2)
    for sign in (1.0, -1.0):
        q2 = float(np.arctan2(sign * s2, c2))
        q1 = _wrap(float(np.arctan2(wy, wx) - np.arctan2(L2 * np.sin(q2), L1 + L2 * np.cos(q2))))
        q = (yaw, q1, q2, _wrap(pitch - q1 - q2))
        if check_limits(q, cfg):
            return q
        if s2 == 0.0:
            break
    return None

def arm_base_pose(platform_xy, cfg: ArmConfig) -> Pose:
    return Pose(np.eye(3), [platform_xy[0], platform_xy[1], cfg.mount_height])


def system_ik(camera_pose_world: Pose, plant_position, cfg: RobotConfig,
              tol: float = 1e-9) -> tuple[np.ndarray, JointState]:
    """Platform station and arm joints realizing a world camera pose."""
    station = np.asarray(plant_position, dtype=float)[:2]
    if not cfg.cdpr.in_workspace(station):
        raise WorkspaceError(f"plant station {tuple(station)} outside the CDPR workspace")
    base = arm_base_pose(station, cfg.arm)
    local = base.inverse() @ camera_pose_world
    joints = arm_ik(local.translation, local.axis, cfg.arm)
    check = base @ arm_fk(joints, cfg.arm)
    err_p = np.linalg.norm(check.translation - camera_pose_world.translation)
    err_r = np.abs(check.rotation - camera_pose_world.rotation).max()
    if err_p > tol or err_r > 1e-6:
        raise UnreachableError(
            f"composite FK misses the requested pose (position {err_p:.2e} m, rotation {err_r:.2e})")
    return station, joints
