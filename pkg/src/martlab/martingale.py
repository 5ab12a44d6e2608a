"""Martingale residuals for ``f(W_t) - E f(W_t)`` and ``f(W_t) / E f(W_t)``.

With ``g(t) = E f(W_t)`` the additive transform is a martingale iff, for all
``s < t`` and start values ``x``,

    E f(x + W_{t-s}) - g(t) = f(x) - g(s),

and the multiplicative one iff ``E f(x + W_{t-s}) / g(t) = f(x) / g(s)``.
Both sides are evaluated by quadrature on a finite probe grid, so a passing
report means "no counterexample on the probe grid", not a proof.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_GRID, DEFAULT_TOLERANCES, ProbeGrid, Tolerances
from .errors import ConfigurationError, DomainError, EvaluationError, PositivityError
from .families import FunctionSpec, SampledFunction
from .paths import PathEnsemble
from .quadrature import QuadratureRule, expect_heat, gauss_hermite_rule, quadrature_points

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"
MODES = (ADDITIVE, MULTIPLICATIVE)

NO_COUNTEREXAMPLE = "no counterexample on probe grid"
COUNTEREXAMPLE = "counterexample found on probe grid"


def _wclip(w):
    return np.where(np.abs(w) < 2.0, w, 0.0)


TEST_FUNCTIONS = {
    "one": np.ones_like,
    "tanh": np.tanh,
    "wclip": _wclip,
    "sqclip": lambda w: np.minimum(w * w, 4.0),
}
DEFAULT_TEST_FUNCTIONS = ("one", "tanh", "wclip")


def rule_for(f: FunctionSpec, t_max: float, sigma: float = 1.0,
             tol: Tolerances = DEFAULT_TOLERANCES) -> QuadratureRule:
    """Default-order rule, escalated for steep exponentials."""
    rate = abs(f.exp_rate * sigma) * math.sqrt(max(t_max, 0.0))
    order = tol.quad_order_escalated if rate > tol.escalation_threshold else tol.quad_order
    return gauss_hermite_rule(order)


def _check_mode(mode):
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")


def _require_static(f):
    if f.time_dependent:
        raise DomainError(f"{f.family!r} is time-dependent; use the timedep residuals")


def g_profile(f: FunctionSpec, t_grid, rule: QuadratureRule | None = None) -> SampledFunction:
    """Sampled ``g(t) = E f(W_t)`` on ``t_grid`` (sorted, duplicates dropped)."""
    _require_static(f)
    times = sorted({float(t) for t in t_grid})
    if times and times[0] < 0:
        raise DomainError("g-profile times must be >= 0")
    rule = rule or rule_for(f, times[-1] if times else 0.0)
    return SampledFunction(tuple(times), tuple(expect_heat(f, t, 0.0, rule) for t in times))


def _order(s, t):
    if not 0 <= s < t:
        raise DomainError(f"need 0 <= s < t, got s={s}, t={t}")


def additive_residual(f: FunctionSpec, s, t, x, rule: QuadratureRule):
    """``E f(x + W_{t-s}) - g(t) - (f(x) - g(s))``; vectorized over ``x``."""
    _require_static(f)
    _order(s, t)
    forward = expect_heat(f, t - s, x, rule)
    return forward - expect_heat(f, t, 0.0, rule) - (f(x) - expect_heat(f, s, 0.0, rule))


def _assert_positive(f, points, time=None):
    vals = np.asarray(f(points, t=time), dtype=float)
    bad = ~(vals > 0)
    if np.any(bad):
        where = np.asarray(points, dtype=float)[bad].ravel()
        raise PositivityError(
            f"f must be strictly positive; f({where[0]!r}) = {vals[bad].ravel()[0]!r}", where)


def multiplicative_residual(f: FunctionSpec, s, t, x, rule: QuadratureRule):
    """``E f(x + W_{t-s}) / g(t) - f(x) / g(s)``; positivity is enforced at every node."""
    _require_static(f)
    _order(s, t)
    for tt, x0 in ((t - s, x), (t, 0.0), (s, 0.0)):
        _assert_positive(f, quadrature_points(tt, x0, rule))
    _assert_positive(f, np.asarray(x, dtype=float))
    gt = expect_heat(f, t, 0.0, rule)
    gs = expect_heat(f, s, 0.0, rule)
    return expect_heat(f, t - s, x, rule) / gt - f(x) / gs


@dataclass
class McStatistic:
    s: float
    t: float
    testfn: str
    z: float
    mean: float
    se: float


@dataclass
class MartingaleReport:
    mode: str
    residual_table: list  # rows (s, t, x, residual)
    max_abs_residual: float
    max_scaled_residual: float
    witness: tuple | None
    g_samples: list  # rows (t, g)
    tolerance: float
    verdict: str
    claim: str
    sigma: float | None = None
    mc_statistics: list | None = None
    z_threshold: float | None = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def residual_csv_rows(self):
        return [(self.mode, s, t, x, r) for s, t, x, r in self.residual_table]


def _scale(mode, fx, gs):
    if mode == ADDITIVE:
        return np.ones_like(np.asarray(fx, dtype=float))
    return np.maximum(1.0, np.abs(fx / gs))


def assemble_report(mode, rows, scaled, g_samples, tol, sigma=None, mc=None, z_threshold=None):
    """Aggregate residual rows into a report; ``verdict`` follows the tolerance rule."""
    abs_res = [abs(r[3]) for r in rows]
    if rows:
        i = int(np.argmax(scaled))
        max_abs = max(abs_res)
        max_scaled = float(scaled[i])
        witness = rows[i]
    else:
        max_abs = max_scaled = 0.0
        witness = None
    ok = max_scaled <= tol
    if mc:
        ok = ok and all(abs(m.z) <= z_threshold for m in mc)
    return MartingaleReport(
        mode=mode, residual_table=rows, max_abs_residual=float(max_abs),
        max_scaled_residual=max_scaled, witness=witness, g_samples=g_samples,
        tolerance=tol, verdict="pass" if ok else "fail",
        claim=NO_COUNTEREXAMPLE if ok else COUNTEREXAMPLE, sigma=sigma,
        mc_statistics=mc, z_threshold=z_threshold if mc else None)


def residual_rows(f, mode, grid: ProbeGrid = DEFAULT_GRID, rule=None):
    """Residual rows over the probe grid plus the per-row tolerance scale."""
    _check_mode(mode)
    rule = rule or rule_for(f, max(grid.t_values))
    x = grid.x
    resid = additive_residual if mode == ADDITIVE else multiplicative_residual
    rows, scales = [], []
    for s, t in grid.pairs:
        r = resid(f, s, t, x, rule)
        gs = expect_heat(f, s, 0.0, rule)
        sc = _scale(mode, f(x), gs)
        rows.extend((s, t, float(xi), float(ri)) for xi, ri in zip(x, r))
        scales.extend(float(v) for v in np.abs(r) / sc)
    return rows, np.asarray(scales)


def verify_martingale(f: FunctionSpec, mode: str, grid: ProbeGrid = DEFAULT_GRID,
                      tol: Tolerances = DEFAULT_TOLERANCES, rule=None,
                      ensemble: PathEnsemble | None = None, testfns=DEFAULT_TEST_FUNCTIONS,
                      mc_pairs=None) -> MartingaleReport:
    """Deterministic residual check, optionally backed by a Monte Carlo test."""
    _require_static(f)
    rule = rule or rule_for(f, max(grid.t_values))
    rows, scaled = residual_rows(f, mode, grid, rule)
    times = sorted({0.0, *grid.s_values, *grid.t_values})
    g = g_profile(f, times, rule)
    mc = None
    if ensemble is not None:
        h = martingale_transform(f, mode, rule)
        pairs = mc_pairs or default_mc_pairs(ensemble)
        mc = mc_martingale_test(ensemble, h, pairs, testfns)
    eps = tol.additive if mode == ADDITIVE else tol.multiplicative
    return assemble_report(mode, rows, scaled, list(zip(g.times, g.values)), eps,
                           mc=mc, z_threshold=tol.z_threshold)


# --- Monte Carlo ---------------------------------------------------------

def default_mc_pairs(e: PathEnsemble):
    """All (s, t) grid pairs with ``0 < s < t``."""
    ts = [t for t in e.grid.times if t > 0]
    return [(s, t) for i, s in enumerate(ts) for t in ts[i + 1:]]


def martingale_transform(f: FunctionSpec, mode: str, rule=None):
    """``h(t, w) = f(w) - g(t)`` or ``f(w) / g(t)`` with ``g`` by quadrature."""
    _check_mode(mode)
    cache = {}

    def g(t):
        if t not in cache:
            cache[t] = expect_heat(f, t, 0.0, rule or rule_for(f, t))
        return cache[t]

    if mode == ADDITIVE:
        return lambda t, w: f(w) - g(t)
    return lambda t, w: f(w) / g(t)


def _z(values):
    n = values.size
    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if n > 1 else 0.0
    se = sd / math.sqrt(n)
    if se == 0.0:
        return (0.0 if mean == 0.0 else math.copysign(math.inf, mean)), mean, 0.0
    return mean / se, mean, se


def _resolve_testfns(testfns):
    if isinstance(testfns, dict):
        return list(testfns.items())
    out = []
    for item in testfns:
        if isinstance(item, str):
            if item not in TEST_FUNCTIONS:
                raise ConfigurationError(f"unknown test function {item!r}")
            out.append((item, TEST_FUNCTIONS[item]))
        else:
            out.append(item)
    return out


def mc_martingale_test(e: PathEnsemble, h, pairs, testfns=DEFAULT_TEST_FUNCTIONS):
    """z-statistics of ``mean[(h(t, W_t) - h(s, W_s)) * phi(W_s)]``.

    Under the martingale hypothesis each z is asymptotically standard normal.
    A constant-zero integrand yields ``z = 0`` exactly.
    """
    fns = _resolve_testfns(testfns)
    out = []
    for s, t in pairs:
        if not s < t:
            raise DomainError(f"need s < t, got ({s}, {t})")
        ws, wt = e.at(s), e.at(t)
        diff = np.asarray(h(t, wt), dtype=float) - np.asarray(h(s, ws), dtype=float)
        for name, phi in fns:
            z, mean, se = _z(diff * phi(ws))
            out.append(McStatistic(float(s), float(t), name, z, mean, se))
    return out


# --- structural criteria ---------------------------------------------------

@dataclass
class CriterionResult:
    name: str
    passed: bool
    params: dict
    max_deviation: float


def _log_g_slope(f, t, rule, cap):
    h = min(t / 2.0, cap)
    lo, hi = expect_heat(f, t - h, 0.0, rule), expect_heat(f, t + h, 0.0, rule)
    if lo <= 0 or hi <= 0:
        raise PositivityError(f"g must be positive near t={t}")
    return (math.log(hi) - math.log(lo)) / (2 * h)


def _g_slope(f, t, rule, cap):
    h = min(t / 2.0, cap)
    return (expect_heat(f, t + h, 0.0, rule) - expect_heat(f, t - h, 0.0, rule)) / (2 * h)


def _spread(values):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    return mean, float(values.max() - values.min())


def fg_criterion(f: FunctionSpec, grid: ProbeGrid = DEFAULT_GRID,
                 tol: Tolerances = DEFAULT_TOLERANCES, rule=None) -> CriterionResult:
    """Separation test ``f''(x)/f(x) = 2 g'(t)/g(t) = const`` for positive ``f``."""
    _require_static(f)
    rule = rule or rule_for(f, max(grid.t_slices) * 1.1)
    x = grid.x
    fx = f(x)
    if np.any(fx <= 0):
        raise PositivityError("f''/f criterion needs f > 0 on the x-grid")
    ratio = f.d2x(x) / fx
    mean, spread = _spread(ratio)
    rhs = np.array([2.0 * _log_g_slope(f, t, rule, tol.g_step_cap) for t in grid.t_slices])
    dev = float(np.max(np.abs(rhs - mean)))
    const_ok = spread <= tol.constancy * (1 + abs(mean))
    ok = const_ok and dev <= tol.constancy * (1 + abs(mean))
    return CriterionResult("fg", bool(ok), {"ratio_mean": mean, "ratio_spread": spread,
                                            "two_dlogg": [float(v) for v in rhs]}, dev)


def mf2_criterion(f: FunctionSpec, grid: ProbeGrid = DEFAULT_GRID,
                  tol: Tolerances = DEFAULT_TOLERANCES, rule=None) -> CriterionResult:
    """Separation test ``f''(x)/2 = g'(t) = a``."""
    _require_static(f)
    rule = rule or rule_for(f, max(grid.t_slices) * 1.1)
    half = 0.5 * np.asarray(f.d2x(grid.x), dtype=float)
    mean, spread = _spread(half)
    slopes = np.array([_g_slope(f, t, rule, tol.g_step_cap) for t in grid.t_slices])
    dev = float(np.max(np.abs(slopes - mean)))
    ok = spread <= tol.constancy * (1 + abs(mean)) and dev <= tol.constancy * (1 + abs(mean))
    return CriterionResult("mf2", bool(ok), {"a": mean, "half_f2_spread": spread,
                                             "g_slopes": [float(v) for v in slopes]}, dev)


def fit_quadratic_form(f: FunctionSpec, x):
    """Least-squares ``(a, b, c, max_error)`` of ``f`` against ``a x^2 + b x + c``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(f(x), dtype=float)
    design = np.column_stack([x * x, x, np.ones_like(x)])
    (a, b, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    err = float(np.max(np.abs(design @ np.array([a, b, c]) - y)))
    return float(a), float(b), float(c), err


def fit_exponential_form(f: FunctionSpec, x, t=None):
    """Fit ``a e^{lam x} + b e^{-lam x}`` with ``lam = sqrt(mean f''/f)``.

    Returns ``(lam, a, b, max_relative_error)``. Rows are weighted by
    ``1/f`` so the fit is relative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(f(x, t=t), dtype=float)
    ratio = float(np.mean(np.asarray(f.d2x(x, t=t), dtype=float) / y))
    lam = math.sqrt(max(ratio, 0.0))
    if lam == 0.0:
        a = b = float(np.mean(y)) / 2.0
        return 0.0, a, b, float(np.max(np.abs(a + b - y) / np.abs(y)))
    design = np.column_stack([np.exp(lam * x), np.exp(-lam * x)]) / y[:, None]
    (a, b), *_ = np.linalg.lstsq(design, np.ones_like(y), rcond=None)
    err = float(np.max(np.abs(design @ np.array([a, b]) - 1.0)))
    return lam, float(a), float(b), err


def corollary1_check(f: FunctionSpec, report: MartingaleReport,
                     grid: ProbeGrid = DEFAULT_GRID, tol: Tolerances = DEFAULT_TOLERANCES):
    """Additive martingale with constant ``g`` must be linear (``a = 0``).

    Returns ``(consistent, g_constant, a)``.
    """
    gs = np.array([g for _, g in report.g_samples])
    g_const = bool(np.ptp(gs) <= tol.additive * (1 + np.max(np.abs(gs))))
    a, _, _, _ = fit_quadratic_form(f, grid.x)
    if report.passed and g_const:
        return abs(a) <= tol.additive * 10, g_const, a
    return True, g_const, a


def positive_on(f: FunctionSpec, x, t=None) -> bool:
    try:
        return bool(np.all(np.asarray(f(x, t=t)) > 0))
    except EvaluationError:
        return False
