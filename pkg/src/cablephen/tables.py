"""Results tables: regressions, age/nutrient ANOVAs and occlusion fits.

Each table carries the published values from the original lettuce study as
``ref_*`` columns so synthetic results can be read side by side with them.
Those numbers come from real plants and are not expected to be reproduced;
only their orderings and significance conclusions are.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStatisticsError
from .metrics import MetricRow, collect
from .plants import stable_seed
from .stats import anova_oneway, fit_occlusion_model, ols_fit

MASSES = ("gt_fresh_g", "gt_dry_g")


@dataclass(frozen=True)
class Series:
    """One estimated trait: which method produced it and which metric it is."""
    label: str
    method_tag: str
    metric: str


SERIES = (
    Series("surface_area", "full", "surface_area_m2"),
    Series("volume", "full", "voxel_volume_m3"),
    Series("baseline1_projected_area", "baseline1", "projected_area_m2"),
    Series("baseline2_surface_area", "baseline2", "surface_area_m2"),
    Series("baseline2_volume", "baseline2", "voxel_volume_m3"),
)
ROBUSTNESS_SERIES = (
    Series("baseline3_surface_area", "baseline3", "surface_area_m2"),
    Series("baseline3_volume", "baseline3", "voxel_volume_m3"),
)

# published (fresh r2, fresh LOOCV MAE g, dry r2, dry LOOCV MAE g)
REF_REGRESSION = {
    "surface_area": (0.845, 11.216, 0.846, 0.586),
    "volume": (0.833, 11.671, 0.832, 0.617),
    "baseline1_projected_area": (0.537, 19.976, 0.505, 1.084),
    "baseline2_surface_area": (0.292, 26.049, 0.285, 1.401),
    "baseline2_volume": (0.277, 26.439, 0.269, 1.422),
}
# published occlusion coefficients k (fresh, dry)
REF_OCCLUSION = {
    "surface_area": (0.236, 0.593),
    "volume": (0.261, 0.659),
    "baseline1_projected_area": (0.519, 0.883),
    "baseline2_surface_area": (0.333, 0.680),
    "baseline2_volume": (0.350, 0.743),
}
# published ANOVA p-values (experiment 1 age, experiment 2 age, nutrient)
ANOVA_TESTS = ("exp1_age", "exp2_age", "nutrient")
REF_ANOVA = {
    "gt_fresh_g": (0.00156, 0.00037, 0.00284),
    "gt_dry_g": (0.00137, 0.00263, 0.00288),
    "surface_area": (0.00219, 0.00352, 0.03134),
    "volume": (0.00204, 0.00338, 0.03766),
    "baseline1_projected_area": (0.00086, 0.02661, 0.32745),
    "baseline2_surface_area": (0.00287, 0.31166, 0.32066),
    "baseline2_volume": (0.00265, 0.26535, 0.28106),
}
EXP1_AGES = (15.0, 21.0)
NUTRIENT_AGE = 28.0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ---- regression -----------------------------------------------------------------

REGRESSION_HEADER = ["series", "method_tag", "metric", "n"] + [
    f"{mass}_{col}" for mass in ("fresh", "dry")
    for col in ("slope", "intercept", "r2", "loocv_mae_g")
] + ["ref_fresh_r2", "ref_fresh_loocv_mae_g", "ref_dry_r2", "ref_dry_loocv_mae_g"]


def regression_rows(rows: list[MetricRow], series=SERIES, with_refs: bool = True) -> list[list]:
    """One row per available series: linear fits against fresh and dry mass."""
    out = []
    for s in series:
        x, _ = collect(rows, s.method_tag, s.metric)
        if len(x) == 0:
            continue
        line = [s.label, s.method_tag, s.metric, len(x)]
        for mass in MASSES:
            x, y = collect(rows, s.method_tag, s.metric, mass)
            fit = ols_fit(x, y)
            line += [fit.slope, fit.intercept, fit.r2, fit.loocv_mae]
        line += list(REF_REGRESSION.get(s.label, (None,) * 4)) if with_refs else [None] * 4
        out.append(line)
    return out


# ---- ANOVA ----------------------------------------------------------------------

ANOVA_HEADER = ["series"] + [f"{t}_{c}" for t in ANOVA_TESTS
                             for c in ("f", "df_between", "df_within", "p", "ref_p")]


def _groups(pairs, key):
    """Values grouped by ``key`` (sorted group keys for a stable order)."""
    groups: dict = {}
    for k, v in pairs:
        groups.setdefault(key(k), []).append(v)
    return [groups[g] for g in sorted(groups)]


def anova_groupings(rows: list[MetricRow], series: Series | str) -> dict[str, list[list[float]]]:
    """Groups for the three tests: experiment 1 at ages 15 vs 21, experiment 2
    across all harvest ages, and experiment 1 vs 2 at 28 days."""
    pairs = []
    if isinstance(series, str):  # a ground-truth mass: one value per plant
        seen = set()
        for r in rows:
            if r.plant_id not in seen:
                seen.add(r.plant_id)
                pairs.append((r, getattr(r, series)))
    else:
        for r in rows:
            v = _value(r, series.metric) if r.method_tag == series.method_tag else None
            if v is not None:
                pairs.append((r, v))
    exp1 = [(r, v) for r, v in pairs if r.experiment == 1 and r.age_days in EXP1_AGES]
    exp2 = [(r, v) for r, v in pairs if r.experiment == 2]
    nut = [(r, v) for r, v in pairs if r.age_days == NUTRIENT_AGE]
    return {
        "exp1_age": _groups(exp1, lambda r: r.age_days),
        "exp2_age": _groups(exp2, lambda r: r.age_days),
        "nutrient": _groups(nut, lambda r: r.experiment),
    }


def anova_rows(rows: list[MetricRow], series=SERIES) -> list[list]:
    """Seven rows: both ground-truth masses, then every available series.

    A test whose groups are absent from the cohort (e.g. only one experiment
    simulated) is left blank; present but degenerate groups raise.
    """
    targets: list = list(MASSES) + [s for s in series
                                    if len(collect(rows, s.method_tag, s.metric)[0])]
    out = []
    for t in targets:
        label = t if isinstance(t, str) else t.label
        groupings = anova_groupings(rows, t)
        line = [label]
        for test, ref in zip(ANOVA_TESTS, REF_ANOVA.get(label, (None,) * 3)):
            if len(groupings[test]) < 2:  # the cohort lacks this comparison
                line += [None, None, None, None, ref]
                continue
            try:
                res = anova_oneway(groupings[test])
            except DegenerateStatisticsError as exc:
                raise DegenerateStatisticsError(f"{label} / {test}: {exc}") from exc
            line += [res.f_stat, res.df_between, res.df_within, res.p_value, ref]
        out.append(line)
    return out


# ---- occlusion model ------------------------------------------------------------

OCCLUSION_HEADER = ["series", "method_tag", "metric", "n"] + [
    f"{mass}_{col}" for mass in ("fresh", "dry")
    for col in ("rho", "k", "sse", "converged")
] + ["ref_fresh_k", "ref_dry_k"]


def occlusion_rows(rows: list[MetricRow], series=SERIES, seed: int = 0) -> list[list]:
    """Occlusion-compensated fits; k is reported in g^(-1/3)."""
    out = []
    for s in series:
        x, _ = collect(rows, s.method_tag, s.metric)
        if len(x) == 0:
            continue
        line = [s.label, s.method_tag, s.metric, len(x)]
        for mass in MASSES:
            x, y = collect(rows, s.method_tag, s.metric, mass)
            fit = fit_occlusion_model(x, y, seed=stable_seed(seed, f"occlusion/{s.label}/{mass}"))
            line += [fit.rho, fit.k, fit.sse, fit.converged]
        line += list(REF_OCCLUSION.get(s.label, (None, None)))
        out.append(line)
    return out


# ---- placement robustness -------------------------------------------------------

ROBUSTNESS_HEADER = REGRESSION_HEADER[:-4] + ["mean_rel_diff_vs_full", "max_rel_diff_vs_full"]


def robustness_rows(rows: list[MetricRow]) -> list[list]:
    """Misplaced-base captures compared with the nominal full capture."""
    out = []
    reg = {r[0]: r for r in regression_rows(rows, ROBUSTNESS_SERIES, with_refs=False)}
    for s in ROBUSTNESS_SERIES:
        if s.label not in reg:
            continue
        full = {r.plant_id: r for r in rows if r.method_tag == "full"}
        diffs = []
        for r in rows:
            if r.method_tag != s.method_tag or r.plant_id not in full:
                continue
            a = _value(r, s.metric)
            b = _value(full[r.plant_id], s.metric)
            if a is not None and b:
                diffs.append(abs(a - b) / b)
        md = float(np.mean(diffs)) if diffs else math.nan
        mx = float(np.max(diffs)) if diffs else math.nan
        out.append(reg[s.label][:-4] + [md, mx])
    return out


def _value(row: MetricRow, metric: str):
    return row.voxel_volume_m3 if metric == "voxel_volume_m3" else getattr(row, metric)


def read_table(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
