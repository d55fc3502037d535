"""Command-line entry point: ``cablephen synth|capture|analyze|report``.

Each stage reads the previous stage's files from the output directory and
writes its own, so any stage can be rerun on its own. Exit codes: 0 ok,
1 missing stage inputs, 2 configuration error, 3 infeasible kinematics,
4 degenerate statistics.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numba
import numpy as np
import scipy
import skimage

from . import __version__, report, tables
from .errors import (ConfigError, DegenerateStatisticsError, KinematicsError, ModelDomainError)
from .geometry import read_obj, read_ply, write_obj, write_ply
from .metrics import CSV_FIELDS, record_to_row, row_to_record
from .pipeline import (ExperimentConfig, MethodCapture, analyze_capture, capture_plant,
                       parallel_map, plant_plan)
from .plants import PlantTruth, build_cohort, generate_plant
from .views import PLAN_CSV_HEADER, plan_for_method, plan_rows

log = logging.getLogger("cablephen")

EXIT_OK, EXIT_MISSING, EXIT_CONFIG, EXIT_KINEMATICS, EXIT_STATS = 0, 1, 2, 3, 4

PLANTS_HEADER = ["plant_id", "experiment", "age_days", "seed", "fresh_mass_g", "dry_mass_g",
                 "leaf_area_m2", "canopy_radius_m", "n_triangles", "mesh_file"]
PIXEL_HEADER = ["plant_id", "pixel_count", "base_depth_m", "n_views"]
CAPTURE_HEADER = ["plant_id", "method_tag", "n_views", "n_points", "artifact", "sha256"]


StageResult = tuple  # (exit code, input paths, output paths)


class MissingInputError(FileNotFoundError):
    pass


# ---- file helpers -----------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _write_csv(path: Path, header, rows) -> Path:
    return _write_text(path, tables.to_csv(header, rows))


def _read_csv(path: Path) -> list[dict]:
    if not path.is_file():
        raise MissingInputError(f"missing input {str(path)!r}; run the previous stage first")
    return tables.read_table(path.read_text(encoding="utf-8"))


def _update_manifest(cfg: ExperimentConfig, stage: str, inputs: list[Path],
                     outputs: list[Path], seconds: float) -> None:
    out = Path(cfg.output_dir)
    path = out / "manifest.json"
    manifest = json.loads(path.read_text()) if path.is_file() else {}
    if manifest.get("config_hash") != cfg.fingerprint():
        manifest = {}  # a different configuration: earlier stage records are stale
    manifest["config_hash"] = cfg.fingerprint()
    manifest["versions"] = {"cablephen": __version__, "python": platform.python_version(),
                            "numpy": np.__version__, "scipy": scipy.__version__,
                            "numba": numba.__version__, "scikit-image": skimage.__version__}
    rel = lambda p: p.relative_to(out).as_posix()  # noqa: E731
    manifest.setdefault("stages", {})[stage] = {
        "inputs": {rel(p): _sha256(p) for p in sorted(inputs)},
        "outputs": {rel(p): _sha256(p) for p in sorted(outputs)},
        "wall_clock_s": round(seconds, 3),
    }
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---- stages -------------------------------------------------------------------------

def _synth_one(spec):
    return generate_plant(spec)


def cmd_synth(cfg: ExperimentConfig, jobs: int = 1) -> StageResult:
    out = Path(cfg.output_dir)
    specs = build_cohort(cfg.cohort)
    truths = parallel_map(_synth_one, specs, jobs)
    outputs, rows = [], []
    for t in truths:
        mesh_file = Path("meshes") / f"{t.plant_id}.obj"
        (out / "meshes").mkdir(parents=True, exist_ok=True)
        write_obj(out / mesh_file, t.mesh)
        outputs.append(out / mesh_file)
        s = t.spec
        rows.append([s.plant_id, s.experiment_id, s.age_days, s.seed, t.fresh_mass, t.dry_mass,
                     t.leaf_area, t.canopy_radius, len(t.mesh.triangles), mesh_file.as_posix()])
    outputs.append(_write_csv(out / "plants.csv", PLANTS_HEADER, rows))
    log.info("synthesized %d plants into %s", len(rows), out)
    return EXIT_OK, [], outputs


def _load_plants(cfg: ExperimentConfig):
    """Cohort specs paired with their synthesized records (station index kept)."""
    out = Path(cfg.output_dir)
    records = {r["plant_id"]: r for r in _read_csv(out / "plants.csv")}
    specs = build_cohort(cfg.cohort)
    if set(records) != {s.plant_id for s in specs}:
        raise ConfigError("plants.csv does not match the configured cohort; rerun synth")
    return [(i, s, records[s.plant_id]) for i, s in enumerate(specs)]


def _capture_one(args):
    index, spec, rec, cfg = args
    out = Path(cfg.output_dir)
    mesh = read_obj(out / rec["mesh_file"])
    truth = PlantTruth(spec, mesh, float(rec["fresh_mass_g"]), float(rec["dry_mass_g"]),
                       float(rec["canopy_radius_m"]), float(rec["leaf_area_m2"]))
    try:
        plan = plant_plan(spec, index, cfg)
    except KinematicsError as exc:
        return spec.plant_id, None, None, f"{type(exc).__name__}: {exc}"
    return spec.plant_id, plan, capture_plant(truth, plan, cfg), None


def cmd_capture(cfg: ExperimentConfig, jobs: int = 1) -> StageResult:
    out = Path(cfg.output_dir)
    plants = _load_plants(cfg)
    inputs = [out / "plants.csv"] + [out / rec["mesh_file"] for _, _, rec in plants]
    results = parallel_map(_capture_one, [(i, s, r, cfg) for i, s, r in plants], jobs)

    outputs, manifest_rows, pixel_rows, plan_lines = [], [], [], []
    failed = []
    for pid, plan, caps, error in results:  # single collector, plant_id order
        if error is not None:
            log.error("plant %s skipped: %s", pid, error)
            failed.append(pid)
            continue
        for method in cfg.methods:
            sigma_yaw = np.radians(cfg.baseline3_sigma_yaw_deg)
            p = plan_for_method(plan, method, x_threshold=cfg.baseline2_threshold,
                                sigma_xy=cfg.baseline3_sigma_xy, sigma_yaw=sigma_yaw,
                                seed=cfg.master_seed)
            plan_lines += plan_rows(p)
        for cap in sorted(caps, key=lambda c: c.method_tag):
            if cap.cloud is None:
                pixel_rows.append([pid, cap.pixel_count, cap.base_depth, cap.n_views])
                manifest_rows.append([pid, cap.method_tag, cap.n_views, 0, "pixel_counts.csv", ""])
                continue
            rel = Path("clouds") / cap.method_tag / f"{pid}.ply"
            (out / rel).parent.mkdir(parents=True, exist_ok=True)
            write_ply(out / rel, cap.cloud)
            outputs.append(out / rel)
            manifest_rows.append([pid, cap.method_tag, cap.n_views, cap.n_points, rel.as_posix(),
                                  _sha256(out / rel)])
    manifest_rows.sort(key=lambda r: (r[0], r[1]))
    if "baseline1" in cfg.methods:
        outputs.append(_write_csv(out / "pixel_counts.csv", PIXEL_HEADER, pixel_rows))
    outputs.append(_write_csv(out / "plans.csv", PLAN_CSV_HEADER, plan_lines))
    outputs.append(_write_csv(out / "capture_manifest.csv", CAPTURE_HEADER, manifest_rows))
    log.info("captured %d plants, %d skipped", len(results) - len(failed), len(failed))
    return (EXIT_KINEMATICS if failed else EXIT_OK), inputs, outputs


def _analyze_one(args):
    spec, rec, entries, pixels, cfg = args
    out = Path(cfg.output_dir)
    rows = []
    for e in entries:
        if e["method_tag"] == "baseline1":
            px = pixels[spec.plant_id]
            cap = MethodCapture(spec.plant_id, "baseline1", int(e["n_views"]),
                                pixel_count=int(px["pixel_count"]),
                                base_depth=float(px["base_depth_m"]))
        else:
            cloud = read_ply(out / e["artifact"])
            cap = MethodCapture(spec.plant_id, e["method_tag"], int(e["n_views"]), cloud)
        rows.append(analyze_capture(spec, float(rec["fresh_mass_g"]), float(rec["dry_mass_g"]),
                                    cap, cfg))
    return rows


def cmd_analyze(cfg: ExperimentConfig, jobs: int = 1) -> StageResult:
    out = Path(cfg.output_dir)
    plants = _load_plants(cfg)
    entries = _read_csv(out / "capture_manifest.csv")
    inputs = [out / "plants.csv", out / "capture_manifest.csv"]
    pixels = {}
    if any(e["method_tag"] == "baseline1" for e in entries):
        pixels = {r["plant_id"]: r for r in _read_csv(out / "pixel_counts.csv")}
        inputs.append(out / "pixel_counts.csv")
    by_plant: dict[str, list] = {}
    for e in entries:
        if e["method_tag"] in cfg.methods:
            by_plant.setdefault(e["plant_id"], []).append(e)
            if e["method_tag"] != "baseline1":
                path = out / e["artifact"]
                if not path.is_file():
                    raise MissingInputError(f"missing cloud {str(path)!r}; rerun capture")
                inputs.append(path)
    jobs_in = [(s, rec, by_plant[s.plant_id], pixels, cfg) for _, s, rec in plants
               if s.plant_id in by_plant]
    rows = [r for rs in parallel_map(_analyze_one, jobs_in, jobs) for r in rs]
    rows.sort(key=lambda r: (r.plant_id, r.method_tag))
    outputs = [_write_csv(out / "metrics.csv", CSV_FIELDS, [row_to_record(r) for r in rows])]
    outputs += write_tables(out, rows, cfg.master_seed)
    log.info("analyzed %d metric rows", len(rows))
    return EXIT_OK, inputs, outputs


def write_tables(out: Path, rows, seed: int) -> list[Path]:
    paths = [
        _write_csv(out / "regression.csv", tables.REGRESSION_HEADER, tables.regression_rows(rows)),
        _write_csv(out / "anova.csv", tables.ANOVA_HEADER, tables.anova_rows(rows)),
        _write_csv(out / "occlusion.csv", tables.OCCLUSION_HEADER,
                   tables.occlusion_rows(rows, seed=seed)),
    ]
    robust = tables.robustness_rows(rows)
    if robust:
        paths.append(_write_csv(out / "robustness.csv", tables.ROBUSTNESS_HEADER, robust))
    return paths


def load_metrics(path: Path):
    return [record_to_row(r) for r in _read_csv(path)]


def cmd_report(cfg: ExperimentConfig, jobs: int = 1) -> StageResult:
    out = Path(cfg.output_dir)
    names = ["metrics.csv", "regression.csv", "anova.csv", "occlusion.csv"]
    inputs = [out / n for n in names]
    rows = load_metrics(out / "metrics.csv")
    reg = _read_csv(out / "regression.csv")
    anova = _read_csv(out / "anova.csv")
    occ = _read_csv(out / "occlusion.csv")
    outputs = report.write_report(out / "report", rows, reg, anova, occ)
    log.info("wrote %d report files", len(outputs))
    return EXIT_OK, inputs, outputs


STAGES = {"synth": cmd_synth, "capture": cmd_capture, "analyze": cmd_analyze,
          "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cablephen", description=__doc__.splitlines()[0])
    p.add_argument("stage", choices=list(STAGES))
    p.add_argument("--config", required=True, help="experiment configuration (JSON)")
    p.add_argument("--methods", help="comma-separated subset of full,baseline1,baseline2,baseline3")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.methods:
        cfg = replace(cfg, methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()))
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args)
        t0 = time.perf_counter()
        code, inputs, outputs = STAGES[args.stage](cfg, args.jobs)
        _update_manifest(cfg, args.stage, inputs, outputs, time.perf_counter() - t0)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except KinematicsError as exc:
        print(f"kinematics error: {exc}", file=sys.stderr)
        return EXIT_KINEMATICS
    except (DegenerateStatisticsError, ModelDomainError) as exc:
        print(f"statistics error: {exc}", file=sys.stderr)
        return EXIT_STATS


if __name__ == "__main__":
    sys.exit(main())
