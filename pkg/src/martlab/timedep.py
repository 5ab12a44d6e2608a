"""Time-dependent transforms ``f(t, sigma W_t)``.

Covers the residuals of both normalizations, the two-sigma classifiers that
pin down ``a x^2 + b x + c(t)`` and ``c(t)(a e^{lam x} + b e^{-lam x})``, the
gradient growth condition with its quadratic-variation evidence, and the
exponential-mixture martingales that escape every polynomial form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import martingale as mg
from .config import DEFAULT_GRID, DEFAULT_SIGMAS, DEFAULT_TOLERANCES, ProbeGrid, Tolerances
from .errors import ConfigurationError, DomainError, EvaluationError, PositivityError
from .families import ExpMixture, FunctionSpec
from .paths import PathEnsemble
from .quadrature import expect_heat, quadrature_points

FORM = "form"
NOT_FORM = "not_form"


def g_sigma(f: FunctionSpec, u, sigma, rule):
    """``E f(u, sigma W_u)``."""
    return expect_heat(f, u, 0.0, rule, f_time=u, scale=sigma)


def _positive(f, points, time):
    vals = np.asarray(f(points, t=time), dtype=float)
    bad = ~(vals > 0)
    if np.any(bad):
        where = np.asarray(points, dtype=float)[bad].ravel()
        raise PositivityError(f"f({time}, {where[0]!r}) = {vals[bad].ravel()[0]!r} is not positive",
                              where)


def timedep_residual(f: FunctionSpec, sigma, s, t, x, rule, mode=mg.ADDITIVE):
    """Martingale defect of ``f(t, sigma W_t)`` between ``s`` and ``t`` from state ``x``.

    additive:       E f(t, x + sigma W_{t-s}) - g(t) - (f(s, x) - g(s))
    multiplicative: E f(t, x + sigma W_{t-s}) / g(t) - f(s, x) / g(s)
    """
    if not 0 <= s < t:
        raise DomainError(f"need 0 <= s < t, got s={s}, t={t}")
    if sigma == 0:
        raise DomainError("sigma must be nonzero")
    mg._check_mode(mode)
    forward = expect_heat(f, t - s, x, rule, f_time=t, scale=sigma)
    gt, gs = g_sigma(f, t, sigma, rule), g_sigma(f, s, sigma, rule)
    if mode == mg.ADDITIVE:
        return forward - gt - (f(x, t=s) - gs)
    _positive(f, quadrature_points(t - s, x, rule, sigma), t)
    _positive(f, quadrature_points(t, 0.0, rule, sigma), t)
    _positive(f, quadrature_points(s, 0.0, rule, sigma), s)
    _positive(f, np.asarray(x, dtype=float), s)
    return forward / gt - f(x, t=s) / gs


def _rule(f, sigma, grid, tol):
    return mg.rule_for(f, max(grid.t_values), sigma, tol)


def timedep_rows(f, sigma, mode, grid: ProbeGrid = DEFAULT_GRID,
                 tol: Tolerances = DEFAULT_TOLERANCES, rule=None):
    rule = rule or _rule(f, sigma, grid, tol)
    x = grid.x
    rows, scales = [], []
    for s, t in grid.pairs:
        r = np.asarray(timedep_residual(f, sigma, s, t, x, rule, mode))
        if mode == mg.ADDITIVE:
            sc = np.ones_like(r)
        else:
            sc = np.maximum(1.0, np.abs(f(x, t=s) / g_sigma(f, s, sigma, rule)))
        rows.extend((s, t, float(xi), float(ri)) for xi, ri in zip(x, r))
        scales.extend(float(v) for v in np.abs(r) / sc)
    return rows, np.asarray(scales)


def verify_timedep(f: FunctionSpec, sigma=1.0, mode=mg.ADDITIVE,
                   grid: ProbeGrid = DEFAULT_GRID, tol: Tolerances = DEFAULT_TOLERANCES,
                   rule=None) -> mg.MartingaleReport:
    """Probe-grid martingale report for ``f(t, sigma W_t)`` with ``g(t, sigma)`` samples."""
    rule = rule or _rule(f, sigma, grid, tol)
    rows, scaled = timedep_rows(f, sigma, mode, grid, tol, rule)
    times = sorted({0.0, *grid.s_values, *grid.t_values})
    g = [(t, float(g_sigma(f, t, sigma, rule))) for t in times]
    eps = tol.additive if mode == mg.ADDITIVE else tol.multiplicative
    return mg.assemble_report(mode, rows, scaled, g, eps, sigma=float(sigma))


@dataclass
class TwoSigmaVerdict:
    mode: str
    sigmas: tuple
    status: str
    residual_sups: dict
    params: dict = field(default_factory=dict)
    c_samples: list = field(default_factory=list)  # (t, c(t))
    witness: dict | None = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == FORM


def _check_sigmas(sigmas):
    s1, s2 = sigmas
    if s1 == 0 or s2 == 0 or s1 == s2:
        raise ConfigurationError(f"need two distinct nonzero sigmas, got {sigmas}")
    return float(s1), float(s2)


def _sigma_reports(f, sigmas, mode, grid, tol):
    reports, sups, witness = {}, {}, None
    for sg in sigmas:
        try:
            rep = verify_timedep(f, sg, mode, grid, tol)
        except EvaluationError as exc:
            sups[sg] = math.inf
            witness = witness or {"check": "residual", "sigma": sg, "error": str(exc)}
            continue
        reports[sg] = rep
        sups[sg] = rep.max_abs_residual
        if not rep.passed and witness is None:
            s, t, x, r = rep.witness
            witness = {"check": "residual", "sigma": sg, "s": s, "t": t, "x": x, "residual": r}
    return reports, sups, witness


def _constant(values, tol):
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    return float(values.max() - values.min()) <= tol * (1 + abs(mean)), mean


def two_sigma_additive_classify(f: FunctionSpec, sigmas=DEFAULT_SIGMAS,
                                grid: ProbeGrid = DEFAULT_GRID,
                                tol: Tolerances = DEFAULT_TOLERANCES) -> TwoSigmaVerdict:
    """Classify ``f`` as ``a x^2 + b x + c(t)`` from two additive martingale tests."""
    sigmas = _check_sigmas(sigmas)
    reports, sups, witness = _sigma_reports(f, sigmas, mg.ADDITIVE, grid, tol)
    c = [(float(t), float(f(0.0, t=t))) for t in grid.t_slices]
    v = TwoSigmaVerdict(mg.ADDITIVE, sigmas, NOT_FORM, sups, c_samples=c)
    if witness is not None:
        v.witness = witness
        return v
    x = grid.x
    design = np.column_stack([x * x, x, np.ones_like(x)])
    fits = []
    for t in grid.t_slices:
        y = np.asarray(f(x, t=t), dtype=float)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        err = float(np.max(np.abs(design @ coef - y)))
        if err > tol.additive * (1 + float(np.max(np.abs(y)))):
            v.witness = {"check": "trinomial", "t": float(t), "max_fit_error": err}
            return v
        fits.append(coef)
    fits = np.array(fits)
    a_ok, a = _constant(fits[:, 0], tol.constancy)
    b_ok, b = _constant(fits[:, 1], tol.constancy)
    v.params = {"a": a, "b": b, "a_slices": fits[:, 0].tolist(), "b_slices": fits[:, 1].tolist()}
    if not (a_ok and b_ok):
        v.witness = {"check": "constant_coefficients", "a_spread": float(np.ptp(fits[:, 0])),
                     "b_spread": float(np.ptp(fits[:, 1]))}
        return v
    recon = max(float(np.max(np.abs(a * x * x + b * x + ct - np.asarray(f(x, t=t)))))
                for t, ct in c)
    if recon > tol.additive * 100:
        v.witness = {"check": "reconstruction", "max_error": recon}
        return v
    v.status = FORM
    # g(t, sigma) constant in t for both sigmas means f(t, sigma W_t) itself is a martingale
    g_const = all(_constant([g for _, g in reports[sg].g_samples], tol.additive)[0]
                  for sg in sigmas)
    v.params["g_constant"] = g_const
    if g_const:
        v.params["linear"] = abs(a) <= tol.constancy and _constant([ct for _, ct in c],
                                                                   tol.constancy)[0]
    return v


def two_sigma_multiplicative_classify(f: FunctionSpec, sigmas=DEFAULT_SIGMAS,
                                      grid: ProbeGrid = DEFAULT_GRID,
                                      tol: Tolerances = DEFAULT_TOLERANCES) -> TwoSigmaVerdict:
    """Classify positive ``f`` as ``c(t) (a e^{lam x} + b e^{-lam x})`` with ``a + b = 1``.

    Assumes ``f`` is differentiable in ``t``; tables are classified through
    their smooth interpolant.
    """
    sigmas = _check_sigmas(sigmas)
    x = grid.x
    c = []
    for t in grid.t_slices:
        c.append((float(t), float(f(0.0, t=t))))
    v = TwoSigmaVerdict(mg.MULTIPLICATIVE, sigmas, NOT_FORM, {}, c_samples=c,
                        notes=["assumes f differentiable in t"])
    for t in grid.t_slices:
        if not mg.positive_on(f, x, t):
            v.witness = {"check": "positivity", "t": float(t)}
            return v
    _, sups, witness = _sigma_reports(f, sigmas, mg.MULTIPLICATIVE, grid, tol)
    v.residual_sups = sups
    if witness is not None:
        v.witness = witness
        return v
    ratios = []
    for t in grid.t_slices:
        r = np.asarray(f.d2x(x, t=t), dtype=float) / np.asarray(f(x, t=t), dtype=float)
        neg = np.nonzero(r < -tol.constancy)[0]
        if neg.size:
            v.witness = {"check": "curvature_sign", "t": float(t), "x": float(x[neg[0]]),
                         "ratio": float(r[neg[0]])}
            return v
        ok, mean = _constant(r, tol.constancy)
        if not ok:
            i = int(np.argmax(np.abs(r - mean)))
            v.witness = {"check": "curvature_constant_in_x", "t": float(t), "x": float(x[i]),
                         "ratio": float(r[i]), "mean": mean}
            return v
        ratios.append(mean)
    ok, lam2 = _constant(ratios, tol.constancy)
    if not ok:
        v.witness = {"check": "curvature_constant_in_t", "ratios": ratios}
        return v
    lam = math.sqrt(max(lam2, 0.0))
    alphas = []
    for t, ct in c:
        if lam == 0.0:
            alphas.append(0.5)
            continue
        y = np.asarray(f(x, t=t), dtype=float)
        design = np.column_stack([np.exp(lam * x), np.exp(-lam * x)]) / y[:, None]
        (A, B), *_ = np.linalg.lstsq(design, np.ones_like(y), rcond=None)
        err = float(np.max(np.abs(design @ np.array([A, B]) - 1.0)))
        if err > tol.constancy:
            v.witness = {"check": "two_exponential_fit", "t": float(t), "max_rel_error": err}
            return v
        alphas.append(A / (A + B))
    ok, a = _constant(alphas, tol.constancy)
    b = 1.0 - a
    v.params = {"a": a, "b": b, "lambda": lam, "a_slices": [float(al) for al in alphas]}
    if not ok:
        v.witness = {"check": "constant_weights", "a_slices": alphas}
        return v
    if a < -tol.constancy or b < -tol.constancy:
        v.witness = {"check": "weight_sign", "a": a, "b": b}
        return v
    v.params["ab_nonzero"] = bool(abs(a * b) > tol.constancy)
    v.status = FORM
    return v


# --- growth condition ------------------------------------------------------

@dataclass
class GrowthReport:
    n: int
    C: float
    gradient_pass: bool
    gradient_witness: dict | None
    max_ratio: float
    qv_checked: bool = False
    qv_pass: bool | None = None
    qv_max_excess: float | None = None
    qv_slack: float | None = None
    qv_worst_path: int | None = None
    label: str = "evidence"

    @property
    def passed(self) -> bool:
        return self.gradient_pass and (self.qv_pass is not False)


def _bound(C, n, t, x):
    return C * (1.0 + t + x * x) ** ((n - 1) / 2.0)


def growth_bound_check(f: FunctionSpec, n: int, C: float, t_values=None, x_values=None,
                       ensemble: PathEnsemble | None = None,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> GrowthReport:
    """Check ``|f_x(t, x)| <= C (1 + t + x^2)^((n-1)/2)`` on a grid, plus path evidence.

    With an ensemble, the discrete quadratic variation of ``f(t, W_t) - g(t)``
    minus ``C^2 * int (1 + s + W_s^2)^(n-1) ds`` must not increase by more
    than ``slack_factor * step * max bound`` along any path (squared ``C``
    because the process bound controls ``f_x^2``).
    """
    if n < 1:
        raise ConfigurationError("growth degree n must be >= 1")
    if not C > 0:
        raise ConfigurationError("growth constant C must be positive")
    t_values = np.linspace(0.0, 2.0, 21) if t_values is None else np.asarray(t_values, float)
    x_values = np.linspace(-3.0, 3.0, 61) if x_values is None else np.asarray(x_values, float)
    tt, xx = np.meshgrid(t_values, x_values, indexing="ij")
    with np.errstate(over="ignore"):
        fx = np.abs(np.asarray(f.dx(xx, t=tt), dtype=float))
    bound = _bound(C, n, tt, xx)
    ratio = fx / bound
    i = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    max_ratio = float(ratio[i])
    witness = None
    if max_ratio > 1.0:
        witness = {"t": float(tt[i]), "x": float(xx[i]), "abs_fx": float(fx[i]),
                   "bound": float(bound[i])}
    report = GrowthReport(n, float(C), witness is None, witness, max_ratio)
    if ensemble is None:
        return report

    times = np.asarray(ensemble.grid.times)
    w = ensemble.paths
    rule = mg.rule_for(f, times[-1], ensemble.sigma, tol)
    g = np.array([float(g_sigma(f, t, 1.0, rule)) for t in times])
    # paths already carry sigma; evaluate f on them directly
    m = np.column_stack([np.asarray(f(w[:, k], t=times[k]), dtype=float) for k in range(len(times))])
    m = m - g
    dt = np.diff(times)
    qv = np.cumsum(np.diff(m, axis=1) ** 2, axis=1)
    integrand = C * C * (1.0 + times[:-1] + w[:, :-1] ** 2) ** (n - 1)
    integral = np.cumsum(integrand * dt, axis=1)
    d = np.concatenate([np.zeros((w.shape[0], 1)), qv - integral], axis=1)
    excess = d - np.minimum.accumulate(d, axis=1)
    per_path = excess.max(axis=1)
    slack = tol.qv_slack_factor * dt.max() * (C * C * (1.0 + times[None, :]
                                                   + w**2) ** (n - 1)).max(axis=1)
    worst = int(np.argmax(per_path / slack))
    report.qv_checked = True
    report.qv_pass = bool(np.all(per_path <= slack))
    report.qv_max_excess = float(per_path[worst])
    report.qv_slack = float(slack[worst])
    report.qv_worst_path = worst
    return report


def exp_mixture_martingale(nu) -> ExpMixture:
    """Exponential martingale mixture ``sum w_i exp(s_i x - s_i^2 t / 2)`` for a probability ``nu``."""
    comps = tuple((float(w), float(s)) for w, s in nu)
    total = math.fsum(w for w, _ in comps)
    if abs(total - 1.0) > 1e-12:
        raise ConfigurationError(f"mixture weights must sum to 1, got {total!r}")
    return ExpMixture(comps)
