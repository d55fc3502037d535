import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cablephen.errors import InsufficientPointsError
from cablephen.geometry import (
    PointCloud, Pose, Ray, TriangleMesh, VoxelGrid, crop_to_region, get_bvh, grid_patch,
    icosphere, mesh_surface_area, occupied_count, poisson_disk_sample, ray_mesh_intersect,
    read_obj, read_ply, reconstruct_surface, remove_outliers, rot_x, rot_z, unit_cube,
    voxelize_surface, write_obj, write_ply,
)

from oracles import brute_force_hits, exhaustive_voxels


def random_pose(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    R = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
    return Pose(R, rng.normal(size=3))


def random_soup(rng, n, scale=0.02):
    centers = rng.uniform(-0.01, 0.01, size=(n, 1, 3))
    v = (centers + rng.normal(scale=scale / 3, size=(n, 3, 3))).reshape(-1, 3)
    return TriangleMesh(v, np.arange(3 * n).reshape(n, 3))


# ---- types -----------------------------------------------------------------

def test_pose_rejects_non_rotation():
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_ray_requires_unit_direction():
    with pytest.raises(ValueError):
        Ray([0, 0, 0], [0, 0, 2])


def test_mesh_rejects_bad_index_and_drops_degenerate():
    with pytest.raises(ValueError):
        TriangleMesh(np.zeros((3, 3)), [[0, 1, 3]])
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], [[0, 1, 2], [0, 1, 3]])
    assert len(m) == 1


def test_cloud_normals_must_be_unit():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 3)), np.ones((2, 3)))


# ---- surface area ------------------------------------------------------------

def test_area_single_triangle():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert mesh_surface_area(m) == pytest.approx(0.5)


def test_area_unit_cube():
    assert len(unit_cube()) == 12
    assert mesh_surface_area(unit_cube()) == pytest.approx(6.0)


def test_area_icosphere_close_to_sphere():
    assert mesh_surface_area(icosphere(1.0, 4)) == pytest.approx(4 * np.pi, rel=0.01)


def test_area_empty_mesh():
    assert mesh_surface_area(TriangleMesh.empty()) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_area_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    m = icosphere(0.3, 2)
    a0 = mesh_surface_area(m)
    a1 = mesh_surface_area(m.transformed(random_pose(rng)))
    assert a1 == pytest.approx(a0, rel=1e-9)


# ---- voxelization ------------------------------------------------------------

def test_voxelize_rejects_nonpositive_size():
    with pytest.raises(ValueError):
        voxelize_surface(unit_cube(), 0.0)
    with pytest.raises(ValueError):
        VoxelGrid(np.zeros(3), -1.0)


def test_voxelize_tiny_triangle_single_cell():
    s = 0.003
    m = TriangleMesh(np.array([[0.2, 0.2, 0.5], [0.7, 0.3, 0.5], [0.4, 0.8, 0.6]]) * s + 10 * s,
                     [[0, 1, 2]])
    g = voxelize_surface(m, s)
    assert occupied_count(g) == 1
    assert tuple(g.global_cells()[0]) == (10, 10, 10)


def test_occupied_count_empty():
    assert occupied_count(VoxelGrid(np.zeros(3), 0.003)) == 0
    assert occupied_count(voxelize_surface(TriangleMesh.empty(), 0.003)) == 0


def _as_set(grid):
    return {tuple(c) for c in grid.global_cells()}


def test_voxelize_lattice_square_matches_exhaustive():
    s = 0.003
    m = grid_patch(2 * s, 2 * s)
    expected = exhaustive_voxels(m, s)
    assert _as_set(voxelize_surface(m, s)) == expected
    # closed cells: the z=0 plane touches both k=-1 and k=0 layers
    assert len(expected) == 32


def test_voxelize_cube_matches_exhaustive():
    m = unit_cube()
    assert _as_set(voxelize_surface(m, 0.25)) == exhaustive_voxels(m, 0.25)


@pytest.mark.parametrize("seed", range(6))
def test_voxelize_random_meshes_match_exhaustive(seed):
    rng = np.random.default_rng(seed)
    m = random_soup(rng, int(rng.integers(5, 100)))
    assert _as_set(voxelize_surface(m, 0.004)) == exhaustive_voxels(m, 0.004)


def test_voxelize_icosphere_matches_exhaustive():
    m = icosphere(0.01, 1, center=(0.0011, -0.0023, 0.0007))
    assert len(m) <= 100
    assert _as_set(voxelize_surface(m, 0.003)) == exhaustive_voxels(m, 0.003)


def test_voxel_count_monotone_over_nested_sizes():
    m = icosphere(0.05, 3)
    counts = [occupied_count(voxelize_surface(m, 0.0025 * 2 ** i)) for i in range(5)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))


# ---- ray casting ---------------------------------------------------------------

def test_ray_hits_unit_sphere_at_one():
    hit = ray_mesh_intersect(Ray([0, 0, -2], [0, 0, 1]), icosphere(1.0, 4))
    assert hit is not None
    assert hit.t == pytest.approx(1.0, abs=1e-6)


def test_ray_parallel_offset_misses():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert ray_mesh_intersect(Ray([0.1, 0.1, 0.5], [1, 0, 0]), m) is None


def test_ray_through_shared_edge_does_not_leak():
    m = grid_patch(1.0, 1.0, 4, 4)
    hit = ray_mesh_intersect(Ray([0.5, 0.5, 1.0], [0, 0, -1]), m)
    assert hit is not None and hit.t == pytest.approx(1.0)


def test_ray_tie_break_lowest_index():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
    m = TriangleMesh(np.vstack([v, v]), [[3, 4, 5], [0, 1, 2]])
    hit = ray_mesh_intersect(Ray([0.2, 0.2, 1.0], [0, 0, -1]), m)
    assert hit.triangle == 0


def test_bvh_built_once_per_mesh():
    m = icosphere(1.0, 2)
    assert get_bvh(m) is get_bvh(m)


def _mesh_suite():
    rng = np.random.default_rng(11)
    return [
        icosphere(1.0, 3),
        unit_cube(),
        grid_patch(1.0, 1.0, 7, 5),
        random_soup(rng, 300, scale=0.5),
        icosphere(0.5, 2, center=(0.3, 0.0, 0.0)).merged(icosphere(0.4, 2, center=(-0.3, 0.1, 0.0))),
    ]


@pytest.mark.parametrize("k", range(5))
def test_bvh_matches_brute_force(k):
    mesh = _mesh_suite()[k]
    rng = np.random.default_rng(100 + k)
    center = mesh.vertices.mean(axis=0)
    o = center + rng.normal(scale=2.0, size=(1000, 3))
    target = center + rng.normal(scale=0.4, size=(1000, 3))
    d = target - o
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    t, i = get_bvh(mesh).intersect_many(o, d)
    bt, bi = brute_force_hits(o, d, mesh)
    assert np.array_equal(i, bi)
    hit = bi >= 0
    assert np.allclose(t[hit], bt[hit], rtol=1e-9, atol=1e-12)


def test_occluded_respects_segment_bounds():
    m = grid_patch(1.0, 1.0, origin=(-0.5, -0.5, 0.0))
    o = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, -1.0]])
    d = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    occ = get_bvh(m).occluded(o, d, tmax=np.array([0.5, 2.0]))
    assert occ.tolist() == [False, True]


# ---- cleaning and resampling ------------------------------------------------

def test_outliers_far_point_removed():
    g = np.stack(np.meshgrid(*[np.arange(10.0)] * 3, indexing="ij"), -1).reshape(-1, 3)
    far = np.array([[1000.0, 1000.0, 1000.0]])
    out = remove_outliers(PointCloud(np.vstack([g, far])), k_neighbors=8, std_ratio=2.0)
    assert len(out) == len(g)
    assert np.array_equal(out.points, g)


def test_outliers_empty_and_degenerate():
    assert len(remove_outliers(PointCloud(np.zeros((0, 3))), 8, 2.0)) == 0
    c = PointCloud(np.ones((3, 3)))
    assert remove_outliers(c, 8, 2.0) is c
    with pytest.raises(ValueError):
        remove_outliers(c, 0, 2.0)


def test_crop_strict_box():
    c = PointCloud([[0.5, 0.5, 0.5], [1.0, 0.5, 0.5]])
    out = crop_to_region(c, [0, 0, 0], [1, 1, 1])
    assert out.points.tolist() == [[0.5, 0.5, 0.5]]
    with pytest.raises(ValueError):
        crop_to_region(c, [1, 0, 0], [0, 1, 1])


def test_crop_matches_predicate_scan():
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, size=(500, 3))
    lo, hi = np.array([-0.3, -0.5, 0.0]), np.array([0.6, 0.2, 0.9])
    out = crop_to_region(PointCloud(p), lo, hi)
    expected = [q for q in p if all(lo[a] < q[a] < hi[a] for a in range(3))]
    assert np.array_equal(out.points, np.array(expected))


def test_pds_two_close_points():
    out = poisson_disk_sample(PointCloud([[0, 0, 0], [0.5, 0, 0]]), 1.0)
    assert len(out) == 1


def test_pds_lattice_at_twice_radius_all_survive():
    g = np.stack(np.meshgrid(*[np.arange(5.0) * 2.0] * 3, indexing="ij"), -1).reshape(-1, 3)
    assert len(poisson_disk_sample(PointCloud(g), 1.0)) == len(g)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.3))
def test_pds_min_distance_and_maximality(seed, radius):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0, 1, size=(300, 3))
    out = poisson_disk_sample(PointCloud(p), radius, seed=seed).points
    d_out = np.linalg.norm(out[:, None] - out[None], axis=-1)
    np.fill_diagonal(d_out, np.inf)
    assert d_out.min() >= radius
    d_in = np.linalg.norm(p[:, None] - out[None], axis=-1)
    assert np.all(d_in.min(axis=1) < radius)
    # subset of the input
    assert all(any(np.array_equal(q, r) for r in p) for q in out)


def test_pds_deterministic_per_seed():
    p = np.random.default_rng(0).uniform(size=(200, 3))
    a = poisson_disk_sample(PointCloud(p), 0.1, seed=4).points
    b = poisson_disk_sample(PointCloud(p), 0.1, seed=4).points
    assert np.array_equal(a, b)


# ---- reconstruction -----------------------------------------------------------

def sphere_cloud(n, r, seed=0, center=(0.0, 0.0, 0.0)):
    p = np.random.default_rng(seed).normal(size=(n, 3))
    return PointCloud(r * p / np.linalg.norm(p, axis=1, keepdims=True) + center)


def test_reconstruct_sphere_area():
    mesh = reconstruct_surface(sphere_cloud(30000, 0.05), 0.003)
    assert mesh_surface_area(mesh) == pytest.approx(4 * np.pi * 0.05 ** 2, rel=0.15)


def test_reconstruct_plane_is_two_sided():
    rng = np.random.default_rng(1)
    p = np.c_[rng.uniform(0, 0.08, size=(20000, 2)), np.full(20000, 0.01)]
    mesh = reconstruct_surface(PointCloud(p), 0.003)
    assert mesh_surface_area(mesh) == pytest.approx(2 * 0.08 ** 2, rel=0.15)


def test_reconstruct_requires_four_points():
    with pytest.raises(InsufficientPointsError, match="insufficient points"):
        reconstruct_surface(PointCloud(np.eye(3)), 0.003)


# ---- file formats -------------------------------------------------------------

def test_ply_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n = rng.normal(size=(10, 3))
    c = PointCloud(rng.normal(size=(10, 3)), n / np.linalg.norm(n, axis=1, keepdims=True))
    write_ply(tmp_path / "c.ply", c)
    back = read_ply(tmp_path / "c.ply")
    assert np.allclose(back.points, c.points, atol=1e-6)
    assert np.allclose(back.normals, c.normals, atol=1e-6)
    assert (tmp_path / "c.ply").read_text().startswith("ply\nformat ascii 1.0\n")


def test_obj_round_trip(tmp_path):
    m = icosphere(0.2, 1).transformed(Pose(rot_x(0.3) @ rot_z(1.0), [1, 2, 3]))
    write_obj(tmp_path / "m.obj", m)
    back = read_obj(tmp_path / "m.obj")
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
