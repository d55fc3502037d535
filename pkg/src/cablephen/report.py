"""Static report bundle: scatter plots with fitted curves, plus tables.

Plots are hand-written SVG so the bundle is byte-stable across runs and
needs no plotting backend. Every fitted line carries its end points in data
units (``data-x1`` ... attributes) so it can be checked against the tables.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import collect
from .stats import predict_occ
from .tables import ANOVA_TESTS, MASSES, SERIES

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 64, 16, 40, 48
MASS_LABEL = {"gt_fresh_g": "fresh mass (g)", "gt_dry_g": "dry mass (g)"}
METRIC_LABEL = {"surface_area_m2": "surface area (m²)", "voxel_volume_m3": "voxel volume (m³)",
                "projected_area_m2": "projected area (m²)"}


def _num(v: float) -> str:
    return f"{v:.2f}"


def _nice_range(lo: float, hi: float):
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim

    def px(self, x):
        return LEFT + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)

    def py(self, y):
        return H - BOTTOM - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def scatter_svg(x, y, title: str, xlabel: str, ylabel: str, line=None, occlusion=None) -> str:
    """SVG scatter of (x, y) with an optional linear fit and occlusion curve.

    ``line`` is (slope, intercept, r2); ``occlusion`` is (rho, k).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    ax = _Axes(_nice_range(float(x.min()), float(x.max())),
               _nice_range(min(0.0, float(y.min())), float(y.max())))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>']
    # axes and ticks
    xb, yb = H - BOTTOM, LEFT
    out.append(f'<line x1="{LEFT}" y1="{xb}" x2="{W - RIGHT}" y2="{xb}" stroke="black"/>')
    out.append(f'<line x1="{yb}" y1="{TOP}" x2="{yb}" y2="{xb}" stroke="black"/>')
    for t in _ticks(ax.x0, ax.x1):
        p = float(ax.px(t))
        out.append(f'<line x1="{_num(p)}" y1="{xb}" x2="{_num(p)}" y2="{xb + 4}" stroke="black"/>')
        out.append(f'<text x="{_num(p)}" y="{xb + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(ax.y0, ax.y1):
        p = float(ax.py(t))
        out.append(f'<line x1="{yb - 4}" y1="{_num(p)}" x2="{yb}" y2="{_num(p)}" stroke="black"/>')
        out.append(f'<text x="{yb - 6}" y="{_num(p + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{(LEFT + W - RIGHT) / 2:.1f}" y="{H - 10}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{(TOP + xb) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(TOP + xb) / 2:.1f})">{escape(ylabel)}</text>')
    # points
    out.append('<g class="points" fill="#1f77b4" fill-opacity="0.7">')
    for px, py in zip(ax.px(x), ax.py(y)):
        out.append(f'<circle cx="{_num(px)}" cy="{_num(py)}" r="3"/>')
    out.append("</g>")
    legend = []
    if line is not None:
        slope, intercept, r2 = line
        xa, xz = ax.x0, ax.x1
        ya, yz = slope * xa + intercept, slope * xz + intercept
        out.append(f'<line class="linear-fit" x1="{_num(ax.px(xa))}" y1="{_num(ax.py(ya))}" '
                   f'x2="{_num(ax.px(xz))}" y2="{_num(ax.py(yz))}" stroke="#d62728" '
                   f'stroke-width="1.5" data-x1="{xa!r}" data-y1="{ya!r}" data-x2="{xz!r}" '
                   f'data-y2="{yz!r}" data-slope="{slope!r}" data-intercept="{intercept!r}"/>')
        legend.append(("#d62728", f"linear fit, R² = {r2:.3f}"))
    if occlusion is not None:
        rho, k = occlusion
        xs = np.linspace(max(ax.x0, 0.0), ax.x1, 60)[1:]
        try:
            ys = predict_occ((rho, k), xs)
        except ValueError:  # curve leaves the model domain inside the plot range
            ys = None
        if ys is not None:
            pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(ax.px(xs), ax.py(ys)))
            out.append(f'<polyline class="occlusion-fit" points="{pts}" fill="none" '
                       f'stroke="#2ca02c" stroke-width="1.5" stroke-dasharray="5,3" '
                       f'data-rho="{rho!r}" data-k="{k!r}"/>')
            legend.append(("#2ca02c", f"occlusion model, k = {k:.3f} g^-1/3"))
    for i, (color, text) in enumerate(legend):
        yy = TOP + 8 + 16 * i
        out.append(f'<line x1="{LEFT + 10}" y1="{yy}" x2="{LEFT + 30}" y2="{yy}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{LEFT + 36}" y="{yy + 4}">{escape(text)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _find(table, series):
    for r in table:
        if r["series"] == series:
            return r
    return None


def _md_table(header, rows) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(lines)


def _g(v: str, fmt: str = "{:.4g}") -> str:
    return "" if v in ("", None) else fmt.format(float(v))


def tables_markdown(regression, anova, occlusion) -> str:
    """Results next to the published lettuce-study values (``ref`` columns)."""
    parts = ["# Results", "",
             "Values from the synthetic cohort; `ref` columns are the published values "
             "measured on real lettuce, shown for orientation only.", "",
             "## Linear regression (R² and leave-one-out MAE)", ""]
    rows = []
    for r in regression:
        rows.append([r["series"], _g(r["fresh_r2"]), _g(r["ref_fresh_r2"]),
                     _g(r["fresh_loocv_mae_g"]), _g(r["ref_fresh_loocv_mae_g"]),
                     _g(r["dry_r2"]), _g(r["ref_dry_r2"]), _g(r["dry_loocv_mae_g"]),
                     _g(r["ref_dry_loocv_mae_g"])])
    parts.append(_md_table(["series", "fresh R²", "ref", "fresh MAE (g)", "ref", "dry R²", "ref",
                            "dry MAE (g)", "ref"], rows))
    parts += ["", "## One-way ANOVA p-values", ""]
    rows = [[r["series"]] + [c for t in ANOVA_TESTS
                             for c in (_g(r[f"{t}_p"], "{:.3g}"), _g(r[f"{t}_ref_p"], "{:.3g}"))]
            for r in anova]
    parts.append(_md_table(["series"] + [c for t in ANOVA_TESTS for c in (t, "ref")], rows))
    parts += ["", "## Occlusion coefficient k (g^-1/3; the reference table labels it 1/g)", ""]
    rows = [[r["series"], _g(r["fresh_k"]), _g(r["ref_fresh_k"]), _g(r["dry_k"]),
             _g(r["ref_dry_k"])] for r in occlusion]
    parts.append(_md_table(["series", "fresh k", "ref", "dry k", "ref"], rows))
    return "\n".join(parts) + "\n"


def write_report(out_dir: Path, rows, regression, anova, occlusion) -> list[Path]:
    """One plot per (series, mass) pair plus ``tables.md``; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for s in SERIES:
        reg = _find(regression, s.label)
        occ = _find(occlusion, s.label)
        if reg is None:
            continue
        for mass in MASSES:
            x, y = collect(rows, s.method_tag, s.metric, mass)
            short = mass.split("_")[1]
            line = (float(reg[f"{short}_slope"]), float(reg[f"{short}_intercept"]),
                    float(reg[f"{short}_r2"]))
            curve = None if occ is None else (float(occ[f"{short}_rho"]), float(occ[f"{short}_k"]))
            svg = scatter_svg(x, y, f"{s.label.replace('_', ' ')} vs {short} mass",
                              f"{s.method_tag}: {METRIC_LABEL[s.metric]}", MASS_LABEL[mass],
                              line, curve)
            path = out_dir / f"{s.label}__{short}.svg"
            path.write_text(svg, encoding="utf-8")
            written.append(path)
    path = out_dir / "tables.md"
    path.write_text(tables_markdown(regression, anova, occlusion), encoding="utf-8")
    written.append(path)
    return written
