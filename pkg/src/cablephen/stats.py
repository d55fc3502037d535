"""Regression, one-way ANOVA and the occlusion-compensated mass model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStatisticsError, ModelDomainError

DOMAIN_MARGIN = 0.05


# ---- regularized incomplete beta ------------------------------------------------

def _beta_cf(x: float, a: float, b: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    """Continued fraction for I_x(a, b), evaluated with the modified Lentz method."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(x: float, a: float, b: float) -> float:
    """I_x(a, b) = B(x; a, b) / B(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return float(x)
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the continued fraction converges fast only on one side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(x, a, b) / a
    return 1.0 - front * _beta_cf(1.0 - x, b, a) / b


def f_survival(f_stat: float, df1: float, df2: float) -> float:
    """Upper-tail probability P(F > f_stat) of the F(df1, df2) distribution."""
    if df1 <= 0 or df2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f_stat <= 0:
        return 1.0
    if math.isinf(f_stat):
        return 0.0
    return betainc_regularized(df2 / (df2 + df1 * f_stat), df2 / 2.0, df1 / 2.0)


# ---- linear regression ------------------------------------------------------------

@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    loocv_mae: float
    n: int

    def predict(self, x):
        return self.slope * np.asarray(x, float) + self.intercept


def _check_xy(x, y, min_n: int):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if len(x) < min_n:
        raise DegenerateStatisticsError(f"need at least {min_n} samples, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    return x, y


def _line(x, y):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx <= 1e-300 * max(1.0, np.sum(x * x)) or np.ptp(x) == 0:
        raise DegenerateStatisticsError("degenerate regressor")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    return float(slope), float(ym - slope * xm)


def loocv_mae(x, y) -> float:
    """Leave-one-out mean absolute error of the intercept model.

    Uses the leverage identity e_i / (1 - h_ii); a leave-one-out subset is
    degenerate exactly when some leverage reaches 1.
    """
    x, y = _check_xy(x, y, 4)
    slope, intercept = _line(x, y)
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    h = 1.0 / len(x) + (x - xm) ** 2 / sxx
    if np.any(h >= 1.0 - 1e-12):
        raise DegenerateStatisticsError("degenerate regressor in a leave-one-out subset")
    resid = y - (slope * x + intercept)
    return float(np.mean(np.abs(resid / (1.0 - h))))


def ols_fit(x, y) -> RegressionResult:
    x, y = _check_xy(x, y, 3)
    slope, intercept = _line(x, y)
    resid = y - (slope * x + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if sst == 0 else float(min(1.0, max(0.0, 1.0 - np.sum(resid ** 2) / sst)))
    mae = loocv_mae(x, y) if len(x) >= 4 else float("nan")
    return RegressionResult(slope, intercept, r2, mae, len(x))


# ---- one-way ANOVA ----------------------------------------------------------------

@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float
    ss_between: float = 0.0
    ss_within: float = 0.0


def anova_oneway(groups) -> AnovaResult:
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2:
        raise DegenerateStatisticsError("ANOVA needs at least two groups")
    if any(len(g) < 2 for g in groups):
        raise DegenerateStatisticsError("every ANOVA group needs at least two samples")
    n = sum(len(g) for g in groups)
    k = len(groups)
    if n <= k:
        raise DegenerateStatisticsError("ANOVA needs more samples than groups")
    grand = np.concatenate(groups).mean()
    ssb = float(sum(len(g) * (g.mean() - grand) ** 2 for g in groups))
    ssw = float(sum(np.sum((g - g.mean()) ** 2) for g in groups))
    dfb, dfw = k - 1, n - k
    if ssw == 0.0:
        if ssb == 0.0:
            raise DegenerateStatisticsError("all samples identical")
        return AnovaResult(math.inf, dfb, dfw, 0.0, ssb, ssw)
    f = (ssb / dfb) / (ssw / dfw)
    return AnovaResult(float(f), dfb, dfw, f_survival(f, dfb, dfw), ssb, ssw)


# ---- occlusion-compensated mass model ---------------------------------------------

@dataclass(frozen=True)
class OcclusionFit:
    rho: float
    k: float
    sse: float
    n: int
    iterations: int = 0
    converged: bool = True


def _occ_terms(X, rho, k):
    y = rho * X
    c = np.cbrt(y)
    return y, c, 1.0 - k * c


def predict_occ(fit: OcclusionFit | tuple, X) -> np.ndarray:
    """Occlusion-compensated mass rho*X / (1 - k*(rho*X)^(1/3))."""
    rho, k = (fit.rho, fit.k) if isinstance(fit, OcclusionFit) else fit
    X = np.asarray(X, dtype=float)
    y, _, denom = _occ_terms(X, rho, k)
    if np.any(denom <= 0):
        raise ModelDomainError("outside model domain")
    return y / denom


def _feasible(X, rho, k, margin=DOMAIN_MARGIN) -> bool:
    return rho > 0 and bool(np.all(_occ_terms(X, rho, k)[2] >= margin))


def _sse(X, m, rho, k) -> float:
    y, _, denom = _occ_terms(X, rho, k)
    return float(np.sum((m - y / denom) ** 2))


def _gauss_newton(X, m, rho, k, max_iter=200, tol=1e-10):
    """Levenberg-damped Gauss-Newton that only accepts feasible, improving steps."""
    lam = 1e-3
    sse = _sse(X, m, rho, k)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y, c, D = _occ_terms(X, rho, k)
        r = m - y / D
        J = np.column_stack([X / D + (k * c * X / 3.0) / D ** 2, y * c / D ** 2])
        # scale columns so rho (g per metric unit) and k are comparable
        scale = np.sqrt(np.sum(J * J, axis=0))
        scale[scale == 0] = 1.0
        Js = J / scale
        A = Js.T @ Js
        g = Js.T @ r
        accepted = False
        while lam < 1e12:
            try:
                step = np.linalg.solve(A + lam * np.diag(np.diag(A) + 1e-12), g) / scale
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            r_new, k_new = rho + step[0], k + step[1]
            if _feasible(X, r_new, k_new):
                sse_new = _sse(X, m, r_new, k_new)
                if sse_new <= sse:
                    accepted = True
                    break
            lam *= 10
        if not accepted:
            converged = True  # no feasible improving step remains
            break
        rel = max(abs(step[0]) / max(abs(rho), 1e-300), abs(step[1]) / max(abs(k), 1.0))
        rho, k, sse = r_new, k_new, sse_new
        lam = max(lam / 10, 1e-12)
        if rel < tol:
            converged = True
            break
    return rho, k, sse, it, converged


def fit_occlusion_model(X, m, seed: int = 0, n_perturbed: int = 8) -> OcclusionFit:
    """Least-squares (rho, k) for m ~ rho*X / (1 - k*(rho*X)^(1/3)).

    Starts from the through-origin slope with k = 0 plus ``n_perturbed``
    seeded perturbations; the lowest SSE wins (earliest start on ties).
    """
    X = np.asarray(X, dtype=float)
    m = np.asarray(m, dtype=float)
    if X.shape != m.shape or X.ndim != 1:
        raise ValueError("X and m must be 1-D arrays of equal length")
    if len(X) < 5:
        raise DegenerateStatisticsError("occlusion fit needs at least 5 samples")
    if np.any(X <= 0) or np.any(m <= 0):
        raise ValueError("X and m must be positive")
    rho0 = float(X @ m / (X @ X))
    rng = np.random.default_rng(seed)
    cmax = float(np.cbrt(rho0 * X.max()))
    starts = [(rho0, 0.0)]
    for _ in range(n_perturbed):
        starts.append((rho0 * float(np.exp(rng.normal(0.0, 0.3))),
                       float(rng.uniform(-0.5, 0.9)) / cmax))
    best = None
    for rho, k in starts:
        if not _feasible(X, rho, k):
            continue
        r = _gauss_newton(X, m, rho, k)
        if best is None or r[2] < best[2]:
            best = r
    if best is None:
        raise ModelDomainError("occlusion model infeasible")
    rho, k, sse, it, conv = best
    return OcclusionFit(float(rho), float(k), float(sse), len(X), it, conv)
