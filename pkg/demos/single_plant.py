"""Walk one synthetic plant through the pipeline.

Generates a 21-day plant, plans the 64-view schedule, captures it with the
full plan and both baseline view subsets, and prints the resulting traits
next to the ground truth.

    python demos/single_plant.py [age_days]
"""
import sys

from cablephen.pipeline import ExperimentConfig, analyze_capture, capture_plant, plant_plan
from cablephen.plants import PlantSpec, generate_plant, stable_seed


def main(age: float = 21.0) -> None:
    cfg = ExperimentConfig(methods=("full", "baseline1", "baseline2", "baseline3"))
    spec = PlantSpec("DEMO-01", 1, age, stable_seed(0, "DEMO-01"))
    truth = generate_plant(spec)
    print(f"plant {spec.plant_id}: age {age:g} d, fresh {truth.fresh_mass:.1f} g, "
          f"dry {truth.dry_mass:.2f} g, canopy radius {truth.canopy_radius * 100:.1f} cm, "
          f"{len(truth.mesh.triangles)} triangles")
    plan = plant_plan(spec, 0, cfg)
    print(f"view plan: {len(plan)} views, standoff {plan.views[0].standoff * 100:.1f} cm")
    for cap in capture_plant(truth, plan, cfg):
        row = analyze_capture(spec, truth.fresh_mass, truth.dry_mass, cap, cfg)
        if row.projected_area_m2 is not None:
            print(f"  {cap.method_tag:9s} {cap.n_views:2d} view   projected area "
                  f"{row.projected_area_m2 * 1e4:7.1f} cm^2")
        else:
            print(f"  {cap.method_tag:9s} {cap.n_views:2d} views  {row.n_points:6d} points  "
                  f"surface {row.surface_area_m2 * 1e4:7.1f} cm^2  "
                  f"voxel volume {row.voxel_volume_m3 * 1e6:6.1f} cm^3")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 21.0)
