from .cloud import crop_to_region, poisson_disk_sample, remove_outliers
from .io import read_obj, read_ply, write_obj, write_ply
from .mesh import grid_patch, icosphere, mesh_surface_area, sample_surface, unit_cube
from .raycast import BVH, Hit, get_bvh, ray_mesh_intersect
from .reconstruct import reconstruct_surface, sheet_level
from .types import (Pose, PointCloud, Ray, TriangleMesh, VoxelGrid, occupied_count,
                    rot_x, rot_y, rot_z)
from .voxel import voxelize_surface

__all__ = [
    "BVH", "Hit", "Pose", "PointCloud", "Ray", "TriangleMesh", "VoxelGrid",
    "crop_to_region", "get_bvh", "grid_patch", "icosphere", "mesh_surface_area",
    "occupied_count", "poisson_disk_sample", "ray_mesh_intersect", "read_obj",
    "read_ply", "reconstruct_surface", "sheet_level", "remove_outliers", "rot_x", "rot_y", "rot_z",
    "sample_surface", "unit_cube", "voxelize_surface", "write_obj", "write_ply",
]
