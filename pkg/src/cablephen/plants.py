"""Procedural lettuce-like plants with known fresh and dry mass.

A plant is a rosette of curved leaf blades around the +z axis. Each blade is
a ruled surface swept along a cubic-curved midrib with an elliptic cross
profile, tessellated to triangles and given two faces (top and bottom) a
fraction of a millimetre apart. The whole rosette is scaled so that its
one-sided leaf area times ``leaf_area_density`` equals the sampled fresh mass.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .geometry import TriangleMesh, mesh_surface_area

# harvest ages -> number of plants, per experiment
HARVEST_SCHEDULE = {
    1: {8: 6, 15: 11, 21: 11, 28: 3},
    2: {21: 3, 22: 3, 23: 2, 24: 3, 25: 3, 26: 3, 27: 3, 28: 3},
}
NUTRIENT_MULTIPLIER = {1: 1.0, 2: 1.15}
MAX_CANOPY_RADIUS = 0.17 / 2

LEAF_THICKNESS = 5e-4
MATURE_AGE = 28.0
_BASE_HEIGHT = 0.006  # lowest leaves clear the growing medium
_NU, _NV = 10, 6


@dataclass(frozen=True)
class GrowthParams:
    K: float = 180.0
    r: float = 0.25
    t0: float = 20.0
    nutrient_multiplier: float = 1.0

    def __post_init__(self):
        if not (self.K > 0 and self.r > 0 and self.nutrient_multiplier > 0):
            raise ConfigError("growth parameters K, r and nutrient_multiplier must be positive")


@dataclass(frozen=True)
class PlantSpec:
    plant_id: str
    experiment_id: int
    age_days: float
    seed: int
    growth: GrowthParams = field(default_factory=GrowthParams)
    leaf_area_density: float = 5000.0
    dry_fraction: float = 0.05
    mass_variation: float = 0.10

    def __post_init__(self):
        if self.age_days < 0:
            raise ConfigError("age_days must be >= 0")
        if not 0 < self.dry_fraction < 1:
            raise ConfigError("dry_fraction must lie in (0, 1)")
        if not self.leaf_area_density > 0:
            raise ConfigError("leaf_area_density must be positive")


@dataclass(frozen=True)
class PlantTruth:
    spec: PlantSpec
    mesh: TriangleMesh
    fresh_mass: float
    dry_mass: float
    canopy_radius: float
    leaf_area: float  # one-sided, m^2

    @property
    def plant_id(self) -> str:
        return self.spec.plant_id


def logistic_mass(age: float, g: GrowthParams) -> float:
    """Fresh mass (g) on the logistic growth curve."""
    if age < 0:
        raise ValueError("age must be >= 0")
    return g.K / (1.0 + np.exp(-g.r * g.nutrient_multiplier * (age - g.t0)))


def stable_seed(master_seed: int, key: str) -> int:
    """64-bit seed derived from (master_seed, key), stable across runs and platforms."""
    h = hashlib.blake2b(f"{int(master_seed)}/{key}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def leaf_count(age: float) -> int:
    return int(np.clip(round(2 + 0.6 * age), 3, 30))


def _leaf_grid(rng, frac, habit, maturity):
    """Unit-scale midsurface grid of one blade plus its per-u sheet normal.

    ``frac`` runs from 0 (oldest, outermost leaf) to 1 (youngest, innermost).
    Older leaves are longer and flatter; younger ones shorter and more upright,
    increasingly so as the plant matures and starts to form a head.
    """
    length = (1.0 - habit["taper"] * frac) * rng.uniform(0.9, 1.1)
    half_width = habit["width"] * length * rng.uniform(0.9, 1.1)
    base_r = 0.03 * (1.0 - frac)
    tilt = np.radians(3.0 + (5.0 + 65.0 * maturity ** 2) * frac + habit["open"] + rng.normal(0.0, 3.0))
    curl = np.radians(habit["curl"]) * rng.uniform(0.8, 1.2)
    cup = habit["cup"] * (0.2 + maturity) * rng.uniform(0.8, 1.2)

    u = np.linspace(0.0, 1.0, _NU + 1)
    beta = tilt - curl * u ** 2  # tips droop by ``curl``
    du = 1.0 / _NU
    # midpoint-rule sweep of the midrib direction
    b_mid = tilt - curl * (u[:-1] + 0.5 * du) ** 2
    rad = base_r + length * np.concatenate([[0.0], np.cumsum(np.cos(b_mid) * du)])
    up = length * np.concatenate([[0.0], np.cumsum(np.sin(b_mid) * du)])
    width = half_width * np.sin(np.pi * np.clip(u, 0, 1) ** 0.8) ** 0.7
    width[0] = 0.08 * half_width  # petiole keeps the base non-degenerate

    v = np.linspace(-1.0, 1.0, _NV + 1)
    # elliptic cross profile: lift grows towards the blade margins
    lift = 1.0 - np.sqrt(1.0 - (0.9 * v) ** 2)
    nr, nz = -np.sin(beta), np.cos(beta)  # in-plane normal of the midrib
    R = rad[:, None] + cup * width[:, None] * lift[None, :] * nr[:, None]
    Z = up[:, None] + cup * width[:, None] * lift[None, :] * nz[:, None]
    L = width[:, None] * v[None, :]
    return R, Z, L, nr, nz


def _rosette(rng, n_leaves, maturity, extra_tilt=0.0):
    """Blades (unit-scale midsurface, normals, absolute height offset).

    Leaves grow in layers a fixed physical distance apart, so the canopy
    keeps open gaps between tiers at every plant size.
    """
    habit = {
        "open": rng.uniform(0.0, 8.0) + extra_tilt,
        "curl": rng.uniform(0.0, 12.0),
        "cup": rng.uniform(0.1, 0.3),
        "width": rng.uniform(0.38, 0.46),
        "taper": rng.uniform(0.4, 0.8),
        "per_layer": int(rng.integers(2, 5)),
        "gap": rng.uniform(0.005, 0.008),
    }
    golden = np.radians(137.507764)
    sheets = []
    for i in range(n_leaves):
        frac = i / max(n_leaves - 1, 1)
        R, Z, L, nr, nz = _leaf_grid(rng, frac, habit, maturity)
        psi = i * golden + rng.normal(0.0, np.radians(8.0))
        c, s = np.cos(psi), np.sin(psi)
        mid = np.stack([R * c - L * s, R * s + L * c, Z], axis=-1)
        normal = np.stack([nr * c, nr * s, nz], axis=-1)  # (NU+1, 3)
        sheets.append((mid, normal, _BASE_HEIGHT + habit["gap"] * (i // habit["per_layer"])))
    return sheets


def _grid_triangles(nu, nv, offset, flip):
    idx = np.arange((nu + 1) * (nv + 1)).reshape(nu + 1, nv + 1) + offset
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    if flip:
        return np.concatenate([np.stack([a, c, b], 1), np.stack([a, d, c], 1)])
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])


def _assemble(sheets, scale, thickness):
    """Return (two-sided mesh, one-sided midsurface mesh)."""
    verts, tris, mid_verts, mid_tris = [], [], [], []
    n = 0
    m = 0
    for mid, normal, z_offset in sheets:
        p = mid.reshape(-1, 3) * scale + [0.0, 0.0, z_offset]
        off = np.repeat(normal, _NV + 1, axis=0) * (0.5 * thickness)
        mid_verts.append(p)
        mid_tris.append(_grid_triangles(_NU, _NV, m, False))
        m += len(p)
        verts += [p + off, p - off]
        # winding chosen so face normals point away from the blade on each side
        top = _grid_triangles(_NU, _NV, n, False)
        bottom = _grid_triangles(_NU, _NV, n + len(p), True)
        tris += [top, bottom]
        n += 2 * len(p)
    return (TriangleMesh(np.vstack(verts), np.vstack(tris)),
            TriangleMesh(np.vstack(mid_verts), np.vstack(mid_tris)))


def generate_plant(spec: PlantSpec) -> PlantTruth:
    rng = np.random.default_rng(spec.seed)
    var = spec.mass_variation
    target_fresh = logistic_mass(spec.age_days, spec.growth) * (1.0 + rng.uniform(-var, var))
    n_leaves = leaf_count(spec.age_days) + int(rng.integers(-1, 2))
    maturity = float(np.clip(spec.age_days / MATURE_AGE, 0.0, 1.0))

    # A rosette wider than the growing slot raises its leaves (same area,
    # smaller footprint) in 5 degree steps; the random stream is replayed so
    # every attempt draws the same habit and leaves.
    state = rng.bit_generator.state
    for extra_tilt in np.arange(0.0, 61.0, 5.0):
        rng.bit_generator.state = state
        sheets = _rosette(rng, n_leaves, maturity, extra_tilt)
        _, unit_mid = _assemble(sheets, 1.0, 0.0)
        unit_area = mesh_surface_area(unit_mid)
        scale = np.sqrt(target_fresh / spec.leaf_area_density / unit_area)
        mesh, mid = _assemble(sheets, scale, LEAF_THICKNESS)
        if _canopy_radius(mesh) <= MAX_CANOPY_RADIUS:
            break

    leaf_area = mesh_surface_area(mid)
    fresh = spec.leaf_area_density * leaf_area
    dry = spec.dry_fraction * fresh * (1.0 + rng.uniform(-var, var))
    return PlantTruth(spec, mesh, float(fresh), float(dry), _canopy_radius(mesh), float(leaf_area))


def _canopy_radius(mesh: TriangleMesh) -> float:
    return float(np.sqrt((mesh.vertices[:, :2] ** 2).sum(axis=1)).max())


@dataclass(frozen=True)
class CohortConfig:
    master_seed: int = 0
    experiments: tuple[int, ...] = (1, 2)
    growth: GrowthParams = field(default_factory=GrowthParams)
    nutrient_multiplier: dict = field(default_factory=lambda: dict(NUTRIENT_MULTIPLIER))
    leaf_area_density: float = 5000.0
    dry_fraction: float = 0.05
    mass_variation: float = 0.10
    attrition: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> CohortConfig:
        d = dict(d or {})
        known = {"master_seed", "experiments", "growth", "nutrient_multiplier",
                 "leaf_area_density", "dry_fraction", "mass_variation", "attrition"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown cohort keys: {sorted(unknown)}")
        if "growth" in d:
            d["growth"] = replace(GrowthParams(), **d["growth"])
        if "experiments" in d:
            d["experiments"] = tuple(int(e) for e in d["experiments"])
        if "nutrient_multiplier" in d:
            nm = dict(NUTRIENT_MULTIPLIER)
            nm.update({int(k): float(v) for k, v in d["nutrient_multiplier"].items()})
            d["nutrient_multiplier"] = nm
        return cls(**d)


def build_cohort(config: CohortConfig | dict | None = None) -> list[PlantSpec]:
    """Plant specs matching the harvest schedule, sorted by plant_id."""
    if not isinstance(config, CohortConfig):
        config = CohortConfig.from_dict(config or {})
    if not config.experiments:
        raise ConfigError("cohort needs at least one experiment")
    specs = []
    for exp in config.experiments:
        if exp not in HARVEST_SCHEDULE:
            raise ConfigError(f"unknown experiment id {exp!r}")
        growth = replace(config.growth, nutrient_multiplier=config.nutrient_multiplier[exp])
        for age, count in HARVEST_SCHEDULE[exp].items():
            for k in range(count):
                pid = f"E{exp}-D{age:02d}-{k + 1:02d}"
                specs.append(PlantSpec(
                    plant_id=pid, experiment_id=exp, age_days=float(age),
                    seed=stable_seed(config.master_seed, pid), growth=growth,
                    leaf_area_density=config.leaf_area_density,
                    dry_fraction=config.dry_fraction, mass_variation=config.mass_variation,
                ))
    specs.sort(key=lambda s: s.plant_id)
    if config.attrition:
        rng = np.random.default_rng(stable_seed(config.master_seed, "attrition"))
        drop = set(rng.choice(len(specs), size=min(config.attrition, len(specs) - 1), replace=False))
        specs = [s for i, s in enumerate(specs) if i not in drop]
    return specs
