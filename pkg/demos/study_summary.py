"""Run the 54-plant study in memory for one seed and summarize it.

Prints the regression, ANOVA and occlusion tables that the ``analyze`` stage
would write, side by side with the reference values.

    python demos/study_summary.py [seed]
"""
import sys

from cablephen import tables
from cablephen.pipeline import ExperimentConfig, run_study


def show(title, header, rows, columns):
    print(f"\n{title}")
    idx = [header.index(c) for c in columns]
    print("  " + "  ".join(f"{c:>22s}" for c in columns))
    for r in rows:
        cells = []
        for i in idx:
            v = r[i]
            cells.append(f"{v:>22.4g}" if isinstance(v, float) else f"{str(v or ''):>22s}")
        print("  " + "  ".join(cells))


def main(seed: int = 0) -> None:
    cfg = ExperimentConfig(master_seed=seed, methods=("full", "baseline1", "baseline2"))
    rows = run_study(cfg)
    show("linear regression", tables.REGRESSION_HEADER, tables.regression_rows(rows),
         ["series", "fresh_r2", "ref_fresh_r2", "fresh_loocv_mae_g", "dry_r2", "ref_dry_r2"])
    show("one-way ANOVA p-values", tables.ANOVA_HEADER, tables.anova_rows(rows),
         ["series", "exp1_age_p", "exp1_age_ref_p", "exp2_age_p", "nutrient_p"])
    show("occlusion coefficient k (g^-1/3)", tables.OCCLUSION_HEADER,
         tables.occlusion_rows(rows, seed=seed), ["series", "fresh_k", "ref_fresh_k", "dry_k"])


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
