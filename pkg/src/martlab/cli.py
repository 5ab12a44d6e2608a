"""Command-line front end: one subcommand per family of checks.

Exit status is 0 when every check in the report passes, 1 when any check
fails (the report is still written) and 2 for usage errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import feq as fe
from . import martingale as mg
from . import timedep as td
from .config import DEFAULT_GRID, DEFAULT_SEED, DEFAULT_TOLERANCES, ProbeGrid
from .errors import ConfigurationError, EvaluationError, MartlabError, SpecSyntaxError
from .families import ExpMixture, FunctionSpec, parse_spec
from .heatpoly import (HeatPolynomial, build_from_constants, gen_function_partial, heat_defect,
                       hermite, hermite_decompose)
from .paths import TimeGrid, ensemble_stats, simulate
from .quadrature import gauss_hermite_rule
from .report import CheckRecord, ReportDocument, write_csv, write_report

SUBCOMMANDS = ("verify-martingale", "classify", "two-sigma", "growth", "feq", "heatpoly",
               "simulate", "reflection", "coverage")

# theorem-level anchor -> the one subcommand that exercises it
COVERAGE = {
    "Theorem 1": "verify-martingale",
    "Theorem 2": "verify-martingale",
    "Corollary 1": "verify-martingale",
    "Lemma 1": "reflection",
    "Scaling law (r)": "feq",
    "Quadratic equation (q1)": "feq",
    "D'Alembert equation (dq1)": "feq",
    "Cauchy exponential equation": "feq",
    "Theorem 3": "classify",
    "Theorem 4": "classify",
    "Theorem 5": "growth",
    "Corollary 2": "growth",
    "Remark 3": "growth",
    "Theorem 6": "two-sigma",
    "Corollary 3": "two-sigma",
    "Theorem 7": "two-sigma",
    "Remark 4": "heatpoly",
    "Appendix": "heatpoly",
}


class UsageError(MartlabError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    spec: str | None = None
    mode: str | None = None
    sigmas: tuple = (1.0, 2.0)
    order: int | None = None
    n: int | None = None
    seed: int = DEFAULT_SEED
    tol: float | None = None
    out: str = "martlab_output"
    formats: tuple = ("json", "csv")
    grid: ProbeGrid = field(default_factory=lambda: DEFAULT_GRID)
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        d = asdict(self)
        d["grid"] = {k: list(v) for k, v in asdict(self.grid).items()}
        d["sigmas"] = list(self.sigmas)
        d["formats"] = list(self.formats)
        return d


# --- option handling -------------------------------------------------------

def _floats(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _int(name):
    def conv(text):
        try:
            return int(text)
        except ValueError:
            raise UsageError(f"--{name} expects an integer, got {text!r}") from None
    return conv


def _positive_float(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise UsageError(f"--{name} expects a number, got {text!r}") from None
        if not v > 0:
            raise UsageError(f"--{name} must be positive")
        return v
    return conv


def _float(name):
    def conv(text):
        try:
            return float(text)
        except ValueError:
            raise UsageError(f"--{name} expects a number, got {text!r}") from None
    return conv


COMMON = {
    "spec": str, "mode": str, "sigmas": _floats, "order": _int("order"), "n": _int("n"),
    "seed": _int("seed"), "tol": _positive_float("tol"), "out": str,
    "format": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
    "config": str, "x_grid": _floats, "s_values": _floats, "t_values": _floats,
    "t_slices": _floats,
}
EXTRA = {
    "growth": {"degree": _int("degree"), "const": _positive_float("const"),
               "x_range": _floats, "t_range": _floats, "steps": _int("steps")},
    "feq": {"equation": str},
    "heatpoly": {"constants": str, "poly": str, "hdeg": _int("n"), "k": _int("k"),
                 "at": _floats, "K": _int("K")},
    "simulate": {"times": _floats},
    "reflection": {"s": _float("s"), "t": _float("t")},
    "verify-martingale": {"times": _floats},
}


def _read_config_file(path):
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--spec", default=S, help="function spec string, e.g. 'cosh lambda=1'")
    p.add_argument("--mode", default=S, help="additive or multiplicative")
    p.add_argument("--sigmas", default=S, help="comma-separated sigma values")
    p.add_argument("--order", default=S, help="quadrature order")
    p.add_argument("--n", default=S, help="number of simulated paths")
    p.add_argument("--seed", default=S, help="random seed (default 42)")
    p.add_argument("--tol", default=S, help="deterministic residual tolerance")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--format", default=S, help="json,csv")
    p.add_argument("--config", default=S, help="flat key=value config file")
    p.add_argument("--x-grid", dest="x_grid", default=S, help="lo,hi,points of the x probe grid")
    p.add_argument("--s-values", dest="s_values", default=S)
    p.add_argument("--t-values", dest="t_values", default=S)
    p.add_argument("--t-slices", dest="t_slices", default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="martlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"martlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    helps = {
        "verify-martingale": "probe-grid martingale residuals (additive or multiplicative)",
        "classify": "quadratic / D'Alembert classification through martingales",
        "two-sigma": "time-dependent classification from two sigmas",
        "growth": "gradient growth condition with quadratic-variation evidence",
        "feq": "functional-equation residual grids",
        "heatpoly": "heat polynomials: build, decompose, defect, genfun, hermite",
        "simulate": "simulate a Brownian ensemble and dump it",
        "reflection": "reflection identity 2W_s - W_t versus W_t",
        "coverage": "list which subcommand exercises each result",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == "heatpoly":
            p.add_argument("action", choices=("build", "decompose", "defect", "genfun", "hermite"))
            p.add_argument("--constants", default=S, help="C_0,...,C_n (fractions allowed)")
            p.add_argument("--poly", default=S, help="monomials coef*x^j*t^m joined by ','")
            p.add_argument("--n-degree", "--degree", dest="hdeg", default=S)
            p.add_argument("--k", default=S)
            p.add_argument("--at", default=S, help="sigma,t,x for genfun")
            p.add_argument("--K", default=S, help="truncation for genfun")
        if name == "growth":
            p.add_argument("--degree", default=S, help="polynomial degree n >= 1")
            p.add_argument("--const", default=S, help="growth constant C > 0")
            p.add_argument("--x-range", dest="x_range", default=S, help="lo,hi,points")
            p.add_argument("--t-range", dest="t_range", default=S, help="lo,hi,points")
            p.add_argument("--steps", default=S, help="time steps of the path grid")
        if name == "feq":
            p.add_argument("--equation", default=S, help="quadratic, dalembert or both")
        if name in ("simulate", "verify-martingale"):
            p.add_argument("--times", default=S, help="comma-separated grid times")
        if name == "reflection":
            p.add_argument("--s", default=S)
            p.add_argument("--t", default=S)
    return parser


def _heatpoly_n_flag(argv):
    # the shared --n flag means "path count" everywhere except `heatpoly`, where it is the degree
    if len(argv) > 0 and argv[0] == "heatpoly":
        return [("--n-degree" if a == "--n" else a) for a in argv]
    return argv


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "action")}
    merged = {}
    if "config" in given:
        merged.update(_read_config_file(given["config"]))
    merged.update(given)
    known = dict(COMMON)
    known.update(EXTRA.get(ns.subcommand, {}))
    unknown = set(merged) - set(known)
    if unknown:
        raise UsageError(f"unknown option(s) for {ns.subcommand}: {', '.join(sorted(unknown))}")
    vals = {k: known[k](v) if isinstance(v, str) else v for k, v in merged.items()}
    cfg = RunConfig(ns.subcommand)
    for key in ("spec", "mode", "order", "n", "seed", "tol", "out"):
        if key in vals:
            setattr(cfg, key, vals[key])
    if "sigmas" in vals:
        cfg.sigmas = vals["sigmas"]
    if "format" in vals:
        bad = set(vals["format"]) - {"json", "csv"}
        if bad:
            raise UsageError(f"unknown format(s): {', '.join(sorted(bad))}")
        cfg.formats = vals["format"]
    if cfg.mode is not None and cfg.mode not in mg.MODES:
        raise UsageError(f"--mode must be additive or multiplicative, got {cfg.mode!r}")
    grid = cfg.grid
    if "x_grid" in vals:
        lo, hi, pts = _triple(vals["x_grid"], "--x-grid")
        grid = replace(grid, x_values=tuple(float(v) for v in np.linspace(lo, hi, pts)))
    for key in ("s_values", "t_values", "t_slices"):
        if key in vals:
            grid = replace(grid, **{key: vals[key]})
    if not grid.pairs:
        raise UsageError("probe grid has no (s, t) pairs with s < t")
    cfg.grid = grid
    cfg.extra = {k: v for k, v in vals.items() if k in EXTRA.get(ns.subcommand, {})}
    if hasattr(ns, "action"):
        cfg.extra["action"] = ns.action
    if cfg.order is not None and not 1 <= cfg.order <= 512:
        raise UsageError("--order must be in [1, 512]")
    return cfg


def _triple(values, flag):
    if len(values) != 3:
        raise UsageError(f"{flag} expects lo,hi,points")
    return values[0], values[1], int(values[2])


# --- helpers -------------------------------------------------------------

def _tolerances(cfg):
    tol = DEFAULT_TOLERANCES.with_tol(cfg.tol)
    if cfg.order is not None:
        tol = replace(tol, quad_order=cfg.order, quad_order_escalated=max(cfg.order, 128))
    return tol


def _spec(cfg, default=None) -> FunctionSpec:
    text = cfg.spec or default
    if text is None:
        raise UsageError(f"{cfg.subcommand} needs --spec")
    return parse_spec(text)


def _need_mode(cfg, default=None):
    mode = cfg.mode or default
    if mode is None:
        raise UsageError(f"{cfg.subcommand} needs --mode additive|multiplicative")
    return mode


def _witness_dict(row):
    if row is None:
        return None
    s, t, x, r = row
    return {"s": s, "t": t, "x": x, "residual": r}


def _mg_record(rep: mg.MartingaleReport, cid, anchor):
    params = {"tolerance": rep.tolerance, "claim": rep.claim,
              "max_scaled_residual": rep.max_scaled_residual,
              "witness": _witness_dict(rep.witness),
              "g_samples": [[t, g] for t, g in rep.g_samples]}
    if rep.sigma is not None:
        params["sigma"] = rep.sigma
    stats = None
    if rep.mc_statistics:
        stats = {"z_threshold": rep.z_threshold,
                 "mc": [{"s": m.s, "t": m.t, "testfn": m.testfn, "z": m.z}
                        for m in rep.mc_statistics]}
    return CheckRecord(cid, anchor, rep.verdict, rep.max_abs_residual, params, stats)


def _verdict(ok):
    return "pass" if ok else "fail"


# --- subcommands -----------------------------------------------------------

def cmd_verify(cfg, doc, tables):
    f = _spec(cfg)
    mode = _need_mode(cfg)
    tol = _tolerances(cfg)
    grid = cfg.grid
    if f.time_dependent:
        sigma = cfg.sigmas[0]
        rep = td.verify_timedep(f, sigma, mode, grid, tol)
        anchor = "Theorem 5" if mode == mg.ADDITIVE else "Remark 3"
        doc.add(_mg_record(rep, "timedep-martingale-residual", anchor))
        tables["residuals.csv"] = (["mode", "s", "t", "x", "residual"], rep.residual_csv_rows())
        return
    ensemble = None
    if cfg.n:
        times = cfg.extra.get("times") or tuple(sorted({0.0, *grid.s_values, *grid.t_values}))
        ensemble = simulate(cfg.n, TimeGrid(times), 1.0, cfg.seed)
    try:
        rep = mg.verify_martingale(f, mode, grid, tol, ensemble=ensemble)
    except EvaluationError as exc:
        anchor = "Theorem 2 (a)" if mode == mg.ADDITIVE else "Theorem 1 (a)"
        doc.add(CheckRecord("martingale-residual", anchor, "fail", None, {"error": str(exc)}))
        return
    tables["residuals.csv"] = (["mode", "s", "t", "x", "residual"], rep.residual_csv_rows())
    if mode == mg.ADDITIVE:
        doc.add(_mg_record(rep, "martingale-residual", "Theorem 2 (a)"))
        crit = mg.mf2_criterion(f, grid, tol)
        a, b, c, err = mg.fit_quadratic_form(f, grid.x)
        doc.add(CheckRecord("separation-mf2", "Theorem 2 (a)",
                            _verdict(crit.passed and rep.passed), crit.max_deviation,
                            {**crit.params, "fit": {"a": a, "b": b, "c": c, "max_error": err}}))
        consistent, g_const, a_fit = mg.corollary1_check(f, rep, grid, tol)
        doc.add(CheckRecord("linear-when-g-constant", "Corollary 1 (a)", _verdict(consistent),
                            None, {"g_constant": g_const, "a": a_fit}))
    else:
        doc.add(_mg_record(rep, "martingale-residual", "Theorem 1 (a)"))
        try:
            crit = mg.fg_criterion(f, grid, tol)
            lam, a, b, err = mg.fit_exponential_form(f, grid.x)
            params = {**crit.params, "fit": {"lambda": lam, "a": a, "b": b, "max_rel_error": err},
                      "stated_condition": "a >= 0, b >= 0, ab != 0",
                      "ab_nonzero": bool(abs(a * b) > tol.constancy)}
            doc.add(CheckRecord("separation-fg", "Theorem 1 (a)",
                                _verdict(crit.passed and rep.passed), crit.max_deviation, params))
        except EvaluationError as exc:
            doc.add(CheckRecord("separation-fg", "Theorem 1 (a)", "fail", None,
                                {"error": str(exc)}))


def _feq_record(v: fe.FeqVerdict, cid, anchor):
    params = {"status": v.status, **v.params}
    for key in ("failed_check", "detail", "reason"):
        if getattr(v, key):
            params[key] = getattr(v, key)
    if v.witness is not None:
        x, y, r = v.witness
        params["witness"] = {"x": x, "y": y, "residual": r}
    sup = None if math.isnan(v.residual_sup) else v.residual_sup
    return CheckRecord(cid, anchor, _verdict(v.passed), sup, params)


def cmd_classify(cfg, doc, tables):
    f = _spec(cfg)
    tol = _tolerances(cfg)
    modes = [cfg.mode] if cfg.mode else list(mg.MODES)
    for mode in modes:
        if mode == mg.ADDITIVE:
            v = fe.theorem3_classify(f, cfg.grid, tol)
            doc.add(_feq_record(v, "quadratic-classify", "Theorem 3 (ii)"))
            tables["quadratic_grid.csv"] = (["x", "y", "residual"],
                                            fe.residual_grid(f, fe.QUADRATIC, cfg.grid.feq_values))
        else:
            v = fe.theorem4_classify(f, cfg.grid, tol)
            doc.add(_feq_record(v, "dalembert-classify", "Theorem 4 (ii)"))
            tables["dalembert_grid.csv"] = (["x", "y", "residual"],
                                            fe.residual_grid(f, fe.DALEMBERT, cfg.grid.feq_values))


def _two_sigma_record(v: td.TwoSigmaVerdict, cid, anchor):
    params = {"status": v.status, "sigmas": list(v.sigmas), **v.params}
    if v.witness:
        params["witness"] = v.witness
    if v.notes:
        params["notes"] = v.notes
    sups = {repr(k): s for k, s in v.residual_sups.items()}
    finite = [s for s in v.residual_sups.values() if math.isfinite(s)]
    return CheckRecord(cid, anchor, _verdict(v.passed), max(finite) if finite else None, params,
                       {"residual_sups": sups, "c_samples": [[t, c] for t, c in v.c_samples]})


def cmd_two_sigma(cfg, doc, tables):
    f = _spec(cfg)
    mode = _need_mode(cfg)
    tol = _tolerances(cfg)
    if len(cfg.sigmas) != 2:
        raise UsageError("--sigmas needs exactly two values")
    if mode == mg.ADDITIVE:
        v = td.two_sigma_additive_classify(f, cfg.sigmas, cfg.grid, tol)
        doc.add(_two_sigma_record(v, "two-sigma-additive", "Theorem 6 (b)"))
        if v.passed:
            consistent = (not v.params["g_constant"]) or v.params["linear"]
            doc.add(CheckRecord("linear-when-g-constant", "Corollary 3 (b)", _verdict(consistent),
                                None, {"g_constant": v.params["g_constant"],
                                       "linear": v.params.get("linear")}))
    else:
        v = td.two_sigma_multiplicative_classify(f, cfg.sigmas, cfg.grid, tol)
        doc.add(_two_sigma_record(v, "two-sigma-multiplicative", "Theorem 7 (b)"))
    tables["c_samples.csv"] = (["t", "c"], v.c_samples)


def cmd_growth(cfg, doc, tables):
    f = _spec(cfg)
    tol = _tolerances(cfg)
    n = cfg.extra.get("degree")
    C = cfg.extra.get("const")
    if n is None or C is None:
        raise UsageError("growth needs --degree and --const")
    xr = cfg.extra.get("x_range", (-3.0, 3.0, 61))
    tr = cfg.extra.get("t_range", (0.0, 2.0, 21))
    xs = np.linspace(*_triple(xr, "--x-range"))
    ts = np.linspace(*_triple(tr, "--t-range"))
    steps = cfg.extra.get("steps", 200)
    ensemble = simulate(cfg.n or 100, TimeGrid.uniform(float(ts[-1]), steps), 1.0, cfg.seed)
    r = td.growth_bound_check(f, n, C, ts, xs, ensemble, tol)
    anchor = "Corollary 2" if n == 2 else "Theorem 5 (C)"
    doc.add(CheckRecord("gradient-bound", anchor, _verdict(r.gradient_pass), None,
                        {"n": n, "C": C, "max_ratio": r.max_ratio,
                         "witness": r.gradient_witness}))
    doc.add(CheckRecord("qv-evidence", anchor, _verdict(bool(r.qv_pass)), None,
                        {"label": r.label, "max_excess": r.qv_max_excess, "slack": r.qv_slack,
                         "worst_path": r.qv_worst_path, "paths": ensemble.n}))
    if isinstance(f, ExpMixture):
        rep = td.verify_timedep(f, 1.0, mg.MULTIPLICATIVE, cfg.grid, tol)
        doc.add(_mg_record(rep, "mixture-martingale", "Remark 3"))


def cmd_feq(cfg, doc, tables):
    f = _spec(cfg)
    tol = _tolerances(cfg)
    eq = cfg.extra.get("equation", "both")
    if eq not in ("quadratic", "dalembert", "both"):
        raise UsageError("--equation must be quadratic, dalembert or both")
    values = cfg.grid.feq_values
    if eq in ("quadratic", "both"):
        rows = fe.residual_grid(f, fe.QUADRATIC, values)
        sup = max(abs(r) for *_, r in rows)
        doc.add(CheckRecord("quadratic-residual", "Quadratic equation (q1)",
                            _verdict(sup <= tol.feq), sup))
        tables["quadratic_grid.csv"] = (["x", "y", "residual"], rows)
        ratios = [(1, 2), (2, 3), (2, 1), (3, 1), (-1, 2)]
        x = np.asarray(values)
        defects = {f"{p}/{q}": float(np.max(np.abs(fe.rational_scaling_defect(f, (p, q), x))))
                   for p, q in ratios}
        worst = max(defects.values())
        doc.add(CheckRecord("scaling-law", "Scaling law (r)", _verdict(worst <= tol.feq), worst,
                            {"defects": defects}))
    if eq in ("dalembert", "both"):
        rows = fe.residual_grid(f, fe.DALEMBERT, values)
        sup = max(abs(r) for *_, r in rows)
        doc.add(CheckRecord("dalembert-residual", "D'Alembert equation (dq1)",
                            _verdict(sup <= tol.feq), sup))
        tables["dalembert_grid.csv"] = (["x", "y", "residual"], rows)
        times = tuple(np.round(np.arange(0, 9) * 0.25, 12))
        g = mg.g_profile(f, times)
        defects = [abs(float(fe.cauchy_exp_defect(g, s, t))) for t in times for s in times if s <= t]
        worst = max(defects)
        doc.add(CheckRecord("cauchy-exponential", "Cauchy exponential equation",
                            _verdict(worst <= tol.feq), worst,
                            {"g_samples": [[t, v] for t, v in zip(g.times, g.values)]}))


def _constants(text):
    try:
        return [Fraction(v.strip()) for v in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--constants expects comma-separated rationals, got {text!r}") from None


def _appendix_text(coeffs):
    n = coeffs.n
    return " + ".join(f"C_{k}*H_{n - k}" for k in range(n + 1)) + "  with  " + ", ".join(
        f"C_{k}={c}" for k, c in enumerate(coeffs.appendix_order))


def cmd_heatpoly(cfg, doc, tables, out=print):
    action = cfg.extra["action"]
    if action in ("build", "decompose") and "constants" in cfg.extra:
        cs = _constants(cfg.extra["constants"])
        n = cfg.extra.get("hdeg")
        if n is not None and n != len(cs) - 1:
            raise UsageError(f"--n {n} does not match {len(cs)} constants")
        p = build_from_constants(cs)
        n = len(cs) - 1
    elif "poly" in cfg.extra:
        p = HeatPolynomial.parse(cfg.extra["poly"])
        n = cfg.extra.get("hdeg")
    elif action in ("hermite", "genfun"):
        p, n = None, None
    else:
        raise UsageError(f"heatpoly {action} needs --constants or --poly")

    if action == "build":
        defect = heat_defect(p)
        out(f"P(t,x) = {p.render()}")
        doc.add(CheckRecord("build-from-constants", "Appendix", _verdict(defect.is_zero()), None,
                            {"polynomial": p.render(), "coefficients": p.to_json(),
                             "defect": defect.render()}))
    elif action == "decompose":
        coeffs = hermite_decompose(p, n)
        out(f"P(t,x) = {p.render()}")
        out("P = " + " + ".join(f"({c})*H_{k}" for k, c in enumerate(coeffs.by_index)))
        out("appendix order: " + _appendix_text(coeffs))
        back = coeffs.polynomial() == p
        doc.add(CheckRecord("hermite-decompose", "Remark 4", _verdict(back), None,
                            {"polynomial": p.render(), **coeffs.to_json()}))
    elif action == "defect":
        defect = heat_defect(p)
        out(f"defect = {defect.render()}")
        doc.add(CheckRecord("heat-defect", "Appendix", _verdict(defect.is_zero()), None,
                            {"polynomial": p.render(), "defect": defect.render()}))
    elif action == "hermite":
        k = cfg.extra.get("k", cfg.extra.get("hdeg"))
        if k is None:
            raise UsageError("heatpoly hermite needs --k")
        h = hermite(k)
        out(f"H_{k}(t,x) = {h.render()}")
        doc.add(CheckRecord("hermite", "Remark 4", _verdict(heat_defect(h).is_zero()), None,
                            {"k": k, "polynomial": h.render(), "coefficients": h.to_json()}))
    elif action == "genfun":
        at = cfg.extra.get("at")
        K = cfg.extra.get("K", 20)
        if at is None or len(at) != 3:
            raise UsageError("heatpoly genfun needs --at sigma,t,x")
        sg, t, x = at
        value = gen_function_partial(sg, t, x, K)
        exact = math.exp(sg * x - 0.5 * sg * sg * t)
        out(f"partial sum = {value!r}; exp(sigma x - sigma^2 t / 2) = {exact!r}")
        err = abs(value - exact)
        doc.add(CheckRecord("generating-function", "Appendix",
                            _verdict(err <= 1e-10 * max(1.0, abs(exact))), err,
                            {"sigma": sg, "t": t, "x": x, "K": K, "partial_sum": value,
                             "exponential": exact}))


def cmd_simulate(cfg, doc, tables):
    times = cfg.extra.get("times", (0.0, 0.5, 1.0, 2.0))
    e = simulate(cfg.n or 1000, TimeGrid(times), cfg.sigmas[0], cfg.seed)
    stats = {}
    for t in e.grid.times[1:]:
        st = ensemble_stats(e, t)
        stats[repr(t)] = {"mean": st.mean, "variance": st.variance, "se_mean": st.se_mean,
                          "se_variance": st.se_variance}
    doc.add(CheckRecord("simulate", "Brownian ensemble", "pass", None,
                        {"n": e.n, "sigma": e.sigma, "seed": e.seed, "times": list(e.grid.times)},
                        stats))
    tables["ensemble.csv"] = (["path", "t", "value"],
                              [(i, t, float(v)) for i, row in enumerate(e.paths)
                               for t, v in zip(e.grid.times, row)])


def cmd_reflection(cfg, doc, tables):
    f = _spec(cfg, "quadratic a=1 b=0 c=0")
    tol = _tolerances(cfg)
    s = cfg.extra.get("s", 1.0)
    t = cfg.extra.get("t", 2.0)
    times = tuple(sorted({0.0, s, t}))
    e = simulate(cfg.n or 200_000, TimeGrid(times), cfg.sigmas[0], cfg.seed)
    r = fe.reflection_test(e, f, s, t)
    ok = r.z_ok(tol.z_threshold) and r.variance_ok()
    doc.add(CheckRecord("reflection", "Lemma 1", _verdict(ok), None,
                        {"s": s, "t": t, "n": e.n, "z_threshold": tol.z_threshold},
                        {"z": {m.testfn: m.z for m in r.statistics}, "variance": r.variance,
                         "variance_se": r.variance_se, "variance_target": r.variance_target}))


def cmd_coverage(cfg, doc, tables, out=print):
    for anchor, command in COVERAGE.items():
        hits = [c for a, c in COVERAGE.items() if a == anchor]
        ok = len(hits) == 1 and command in SUBCOMMANDS
        out(f"{anchor:<30} -> {command}")
        doc.add(CheckRecord(f"coverage:{anchor}", anchor, _verdict(ok), None,
                            {"subcommand": command}))


COMMANDS = {
    "verify-martingale": cmd_verify, "classify": cmd_classify, "two-sigma": cmd_two_sigma,
    "growth": cmd_growth, "feq": cmd_feq, "heatpoly": cmd_heatpoly, "simulate": cmd_simulate,
    "reflection": cmd_reflection, "coverage": cmd_coverage,
}


def run(cfg: RunConfig) -> tuple[ReportDocument, dict]:
    doc = ReportDocument(config=cfg.echo())
    tables = {}
    COMMANDS[cfg.subcommand](cfg, doc, tables)
    return doc, tables


def write_outputs(cfg: RunConfig, doc: ReportDocument, tables: dict) -> None:
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        write_report(doc, "json", outdir / "report.json")
    if "csv" in cfg.formats:
        write_report(doc, "csv", outdir / "checks.csv")
        for name, (header, rows) in tables.items():
            write_csv(outdir / name, header, rows)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(_heatpoly_n_flag(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    if not ns.subcommand:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = resolve_config(ns)
        doc, tables = run(cfg)
    except (UsageError, SpecSyntaxError, ConfigurationError) as exc:
        print(f"martlab {ns.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except MartlabError as exc:
        print(f"martlab {ns.subcommand}: {exc}", file=sys.stderr)
        return 1
    try:
        write_outputs(cfg, doc, tables)
    except OSError as exc:
        print(f"martlab {ns.subcommand}: {exc}", file=sys.stderr)
        return 1
    for c in doc.checks:
        extra = "" if c.max_abs_residual is None else f"  max|res|={c.max_abs_residual:.3e}"
        print(f"{c.verdict.upper():4}  {c.id}  [{c.anchor}]{extra}")
    print(f"status: {doc.status}")
    return 0 if doc.status == "pass" else 1
