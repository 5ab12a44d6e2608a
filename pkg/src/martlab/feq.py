"""Quadratic and D'Alembert functional equations and their martingale pipelines.

The classifiers decide membership through the martingale side (evenness,
normalization at 0, vanishing martingale residual, form fit) and report a
concrete point of the functional equation as the witness when ``f`` is not
a solution. The anchor ``(1, 1)`` is tried first, which is where the
scaling ``f(2) + f(0) = 4 f(1)`` lives, followed by the largest residual on
the probe grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import martingale as mg
from .config import DEFAULT_GRID, DEFAULT_TOLERANCES, ProbeGrid, Tolerances
from .errors import DomainError, EvaluationError
from .families import FunctionSpec, SampledFunction
from .paths import PathEnsemble, sample_stats

QUADRATIC = "quadratic"
DALEMBERT = "dalembert"

SOLUTION = "solution"
NOT_SOLUTION = "not_solution"
OUT_OF_SCOPE = "out_of_scope"

ANCHOR = (1.0, 1.0)


def _fsum3(a, b, c):
    """Element-wise correctly-rounded ``a + b + c`` for equally shaped arrays."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float),
                                  np.asarray(c, float))
    out = np.array([math.fsum(v) for v in zip(a.ravel(), b.ravel(), c.ravel())])
    return out.reshape(a.shape) if a.ndim else float(out[0])


def quadratic_residual(f: FunctionSpec, x, y):
    """``f(x+y) + f(x-y) - 2 f(x) - 2 f(y)``."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = _fsum3(f(x + y), f(x - y), -2.0 * (np.asarray(f(x)) + np.asarray(f(y))))
    return out


def dalembert_residual(f: FunctionSpec, x, y):
    """``f(x+y) + f(x-y) - 2 f(x) f(y)``."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return _fsum3(f(x + y), f(x - y), -2.0 * np.asarray(f(x)) * np.asarray(f(y)))


RESIDUALS = {QUADRATIC: quadratic_residual, DALEMBERT: dalembert_residual}


def residual_grid(f: FunctionSpec, equation: str, values=None):
    """Rows ``(x, y, residual)`` over the square probe grid."""
    values = np.asarray(DEFAULT_GRID.feq_values if values is None else values, dtype=float)
    xx, yy = np.meshgrid(values, values, indexing="ij")
    res = RESIDUALS[equation](f, xx, yy)
    return [(float(a), float(b), float(r)) for a, b, r in zip(xx.ravel(), yy.ravel(), res.ravel())]


def rational_scaling_defect(f: FunctionSpec, r, x):
    """``f(r x) - r^2 f(x)`` for rational ``r = p/q`` given as ``(p, q)``."""
    p, q = r
    if q == 0:
        raise DomainError("rational r = p/q needs q != 0")
    if p == q:
        return 0.0 * np.asarray(f(x)) if np.ndim(x) else 0.0
    rv = p / q
    return f(rv * np.asarray(x, float)) - rv * rv * f(x)


def cauchy_exp_defect(g: SampledFunction, s, t):
    """``g(t) - g(t - s) g(s)`` with linear interpolation between samples."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    return g(t) - g(t - s) * g(s)


@dataclass
class FeqVerdict:
    equation: str
    status: str
    residual_sup: float
    params: dict = field(default_factory=dict)
    witness: tuple | None = None  # (x, y, residual)
    failed_check: str | None = None
    detail: str | None = None
    reason: str | None = None

    @property
    def passed(self) -> bool:
        return self.status == SOLUTION


def _witness(f, equation, values, tol):
    res_fn = RESIDUALS[equation]
    try:
        r = float(res_fn(f, *ANCHOR))
        if abs(r) > tol:
            return (*ANCHOR, r)
    except EvaluationError:
        pass
    rows = residual_grid(f, equation, values)
    return max(rows, key=lambda row: abs(row[2]))


def _first_failure(x, defect, tol):
    """First point with ``defect > tol``, trying ``x = 1`` before the grid."""
    bad = np.nonzero(np.asarray(defect) > tol)[0]
    if bad.size == 0:
        return None
    hits = [i for i in bad if x[i] == 1.0]
    return float(x[hits[0] if hits else bad[0]])


def _grid_with_anchor(grid: ProbeGrid):
    x = grid.x
    return np.unique(np.concatenate([x, -x, [1.0, -1.0]]))


def _residual_sup(f, equation, values):
    return max(abs(r) for _, _, r in residual_grid(f, equation, values))


def _not_solution(f, equation, check, detail, grid, tol):
    w = _witness(f, equation, grid.feq_values, tol)
    return FeqVerdict(equation, NOT_SOLUTION, _residual_sup(f, equation, grid.feq_values),
                      witness=w, failed_check=check, detail=detail)


def theorem3_classify(f: FunctionSpec, grid: ProbeGrid = DEFAULT_GRID,
                      tol: Tolerances = DEFAULT_TOLERANCES, rule=None) -> FeqVerdict:
    """Decide whether ``f`` solves the quadratic equation, i.e. ``f = a x^2``."""
    eps = tol.feq
    x = _grid_with_anchor(grid)
    fx = np.asarray(f(x), dtype=float)
    even = np.abs(fx - np.asarray(f(-x), dtype=float))
    bad_x = _first_failure(x, even, eps)
    if bad_x is not None:
        return _not_solution(f, QUADRATIC, "evenness",
                             f"f({bad_x}) - f({-bad_x}) = {float(f(bad_x) - f(-bad_x))!r}",
                             grid, eps)
    f0 = float(f(0.0))
    if abs(f0) > eps:
        return _not_solution(f, QUADRATIC, "origin", f"f(0) = {f0!r}", grid, eps)
    report = mg.verify_martingale(f, mg.ADDITIVE, grid, tol, rule=rule)
    if not report.passed:
        s, t, xw, r = report.witness
        return _not_solution(f, QUADRATIC, "martingale",
                             f"additive residual {r!r} at (s={s}, t={t}, x={xw})", grid, eps)
    a = float(f(1.0))
    fit_err = float(np.max(np.abs(fx - a * x * x)))
    sup = _residual_sup(f, QUADRATIC, grid.feq_values)
    if fit_err > eps or sup > eps:
        return _not_solution(f, QUADRATIC, "form", f"max |f - a x^2| = {fit_err!r}", grid, eps)
    return FeqVerdict(QUADRATIC, SOLUTION, sup, params={"a": a},
                      detail=report.claim)


def theorem4_classify(f: FunctionSpec, grid: ProbeGrid = DEFAULT_GRID,
                      tol: Tolerances = DEFAULT_TOLERANCES, rule=None) -> FeqVerdict:
    """Decide whether a strictly positive ``f`` solves D'Alembert's equation (``cosh``)."""
    eps = tol.feq
    x = _grid_with_anchor(grid)
    try:
        fx = np.asarray(f(x), dtype=float)
    except EvaluationError as exc:
        return FeqVerdict(DALEMBERT, OUT_OF_SCOPE, math.nan, reason=str(exc))
    nonpos = np.nonzero(~(fx > 0))[0]
    if nonpos.size:
        xb = float(x[nonpos[0]])
        return FeqVerdict(DALEMBERT, OUT_OF_SCOPE,
                          _residual_sup(f, DALEMBERT, grid.feq_values),
                          reason=f"not strictly positive: f({xb!r}) = {float(fx[nonpos[0]])!r}")
    f0 = float(f(0.0))
    if abs(f0 - 1.0) > eps:
        return _not_solution(f, DALEMBERT, "origin", f"f(0) = {f0!r}", grid, eps)
    even = np.abs(fx - np.asarray(f(-x), dtype=float)) / np.maximum(1.0, np.abs(fx))
    bad_x = _first_failure(x, even, eps)
    if bad_x is not None:
        return _not_solution(f, DALEMBERT, "evenness", f"f({bad_x}) != f({-bad_x})", grid, eps)
    try:
        report = mg.verify_martingale(f, mg.MULTIPLICATIVE, grid, tol, rule=rule)
    except EvaluationError as exc:
        return _not_solution(f, DALEMBERT, "martingale", str(exc), grid, eps)
    if not report.passed:
        s, t, xw, r = report.witness
        return _not_solution(f, DALEMBERT, "martingale",
                             f"multiplicative residual {r!r} at (s={s}, t={t}, x={xw})", grid, eps)
    ratio = np.asarray(f.d2x(x), dtype=float) / fx
    neg = np.nonzero(ratio < -eps)[0]
    if neg.size:
        return _not_solution(f, DALEMBERT, "curvature",
                             f"f''/f = {float(ratio[neg[0]])!r} < 0 at x={float(x[neg[0]])}",
                             grid, eps)
    mean = float(ratio.mean())
    if float(ratio.max() - ratio.min()) > tol.constancy * (1 + abs(mean)):
        return _not_solution(f, DALEMBERT, "curvature", "f''/f is not constant", grid, eps)
    lam = math.sqrt(max(mean, 0.0))
    fit_err = float(np.max(np.abs(fx - np.cosh(lam * x)) / np.maximum(1.0, fx)))
    sup = _residual_sup(f, DALEMBERT, grid.feq_values)
    scale = float(np.max(np.abs(f(np.asarray(grid.feq_values)))))**2
    if fit_err > eps or sup > eps * max(1.0, scale):
        return _not_solution(f, DALEMBERT, "form", f"max rel |f - cosh(lam x)| = {fit_err!r}",
                             grid, eps)
    return FeqVerdict(DALEMBERT, SOLUTION, sup, params={"lambda": lam}, detail=report.claim)


@dataclass
class ReflectionResult:
    s: float
    t: float
    statistics: list  # McStatistic rows
    variance: float
    variance_se: float
    variance_target: float

    def variance_ok(self, k=3.0) -> bool:
        if self.variance_se == 0.0:
            return self.variance == self.variance_target
        return abs(self.variance - self.variance_target) <= k * self.variance_se

    def z_ok(self, threshold) -> bool:
        return all(abs(m.z) <= threshold for m in self.statistics)


def reflection_test(e: PathEnsemble, f: FunctionSpec, s, t,
                    testfns=mg.DEFAULT_TEST_FUNCTIONS) -> ReflectionResult:
    """z-statistics of ``mean[(f(2W_s - W_t) - f(W_t)) phi(W_s)]`` over paths."""
    if s > t:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    ws, wt = e.at(s), e.at(t)
    refl = 2.0 * ws - wt
    diff = np.asarray(f(refl), dtype=float) - np.asarray(f(wt), dtype=float)
    stats = []
    for name, phi in mg._resolve_testfns(testfns):
        z, mean, se = mg._z(diff * phi(ws))
        stats.append(mg.McStatistic(float(s), float(t), name, z, mean, se))
    vs = sample_stats(refl)
    return ReflectionResult(float(s), float(t), stats, vs.variance, vs.se_variance,
                            e.sigma**2 * t)
