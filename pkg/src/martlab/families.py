"""Candidate functions ``f(x)`` and ``f(t, x)`` with closed-form derivatives.

Every variant is an immutable dataclass that evaluates element-wise on numpy
arrays: ``spec(x, t=None)``. Time-independent variants ignore ``t``, which is
how they are "lifted" into the time-dependent pipelines.

One-line text grammar (whitespace separated)::

    quadratic a=1 b=0 c=0
    expcombo a=0.5 b=0.5 lambda=1
    cosh lambda=2
    cos lambda=1
    expmixture nu=0.5:1,0.5:-2
    tdquad a=1 b=0 c=0:0,1:0.84,2:0.91
    tdexpcombo a=0.5 b=0.5 lambda=1 c=3
    heatpoly terms=1*x^3*t^0,-3*x^1*t^1 c=0
    table path/to/samples.csv

Sampled functions of ``t`` are written ``t:value,t:value,...`` (linear
interpolation) or as a single number for a constant.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, EvaluationError, SpecSyntaxError
from .heatpoly import HeatPolynomial

DEFAULT_FD_STEP = 1e-3


def _shape_like(x, value):
    value = np.asarray(value, dtype=float)
    if np.ndim(x) == 0 and value.ndim == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class SampledFunction:
    """A function of time known only at sample points, linearly interpolated."""

    times: tuple
    values: tuple

    def __post_init__(self):
        times = tuple(float(v) for v in self.times)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) != len(values) or not times:
            raise ConfigurationError("sampled function needs equally many times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("sample times must be strictly increasing")

    @classmethod
    def from_callable(cls, fn, times):
        times = tuple(float(v) for v in times)
        return cls(times, tuple(float(fn(v)) for v in times))

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        if np.any((t_arr < lo - 1e-12) | (t_arr > hi + 1e-12)):
            bad = t_arr[(t_arr < lo - 1e-12) | (t_arr > hi + 1e-12)].ravel()
            raise EvaluationError(f"time {bad[0]} outside sampled hull [{lo}, {hi}]", bad)
        if len(self.times) == 1:
            out = np.full(t_arr.shape, self.values[0])
        else:
            out = np.interp(t_arr, self.times, self.values)
        return _shape_like(t, out)

    def render(self) -> str:
        return ",".join(f"{t!r}:{v!r}" for t, v in zip(self.times, self.values))


def _value_of_c(c, t):
    if isinstance(c, SampledFunction):
        return c(t)
    return c


def _render_c(c) -> str:
    return c.render() if isinstance(c, SampledFunction) else repr(float(c))


class FunctionSpec:
    """Base class of all function variants."""

    family = ""
    time_dependent = False

    def __call__(self, x, t=None):
        raise NotImplementedError

    def dx(self, x, t=None, h=DEFAULT_FD_STEP):
        raise NotImplementedError

    def d2x(self, x, t=None, h=DEFAULT_FD_STEP):
        raise NotImplementedError

    @property
    def exp_rate(self) -> float:
        """Largest exponential rate in ``x``; drives quadrature-order escalation."""
        return 0.0

    def render(self) -> str:
        raise NotImplementedError

    def _need_t(self, t):
        if t is None:
            raise EvaluationError(f"time-dependent spec {self.family!r} requires t")
        return t


@dataclass(frozen=True)
class Quadratic(FunctionSpec):
    a: float
    b: float = 0.0
    c: float = 0.0
    family = "quadratic"

    def __call__(self, x, t=None):
        x = np.asarray(x, dtype=float) if np.ndim(x) else x
        return _shape_like(x, (self.a * x + self.b) * x + self.c)

    def dx(self, x, t=None, h=None):
        return _shape_like(x, 2 * self.a * np.asarray(x, dtype=float) + self.b)

    def d2x(self, x, t=None, h=None):
        return _shape_like(x, np.full(np.shape(x), 2.0 * self.a))

    def render(self):
        return f"quadratic a={self.a!r} b={self.b!r} c={self.c!r}"


def _check_exp_weights(a, b):
    if a < 0 or b < 0:
        raise ConfigurationError(f"exponential weights must be >= 0 (a={a}, b={b})")
    if not a + b > 0:
        raise ConfigurationError("exponential combination needs a + b > 0")


@dataclass(frozen=True)
class ExpCombo(FunctionSpec):
    """``a e^{lam x} + b e^{-lam x}`` with ``a, b >= 0`` and ``a + b > 0``."""

    a: float
    b: float
    lam: float
    family = "expcombo"

    def __post_init__(self):
        _check_exp_weights(self.a, self.b)

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        up = self.a * np.exp(self.lam * x) if self.a else np.zeros_like(x)
        down = self.b * np.exp(-self.lam * x) if self.b else np.zeros_like(x)
        return up, down

    def __call__(self, x, t=None):
        up, down = self._parts(x)
        return _shape_like(x, up + down)

    def dx(self, x, t=None, h=None):
        up, down = self._parts(x)
        return _shape_like(x, self.lam * (up - down))

    def d2x(self, x, t=None, h=None):
        up, down = self._parts(x)
        return _shape_like(x, self.lam**2 * (up + down))

    @property
    def exp_rate(self):
        return abs(self.lam)

    def render(self):
        return f"expcombo a={self.a!r} b={self.b!r} lambda={self.lam!r}"


@dataclass(frozen=True)
class Cosh(FunctionSpec):
    lam: float
    family = "cosh"

    def __call__(self, x, t=None):
        return _shape_like(x, np.cosh(self.lam * np.asarray(x, dtype=float)))

    def dx(self, x, t=None, h=None):
        return _shape_like(x, self.lam * np.sinh(self.lam * np.asarray(x, dtype=float)))

    def d2x(self, x, t=None, h=None):
        return _shape_like(x, self.lam**2 * np.cosh(self.lam * np.asarray(x, dtype=float)))

    @property
    def exp_rate(self):
        return abs(self.lam)

    def render(self):
        return f"cosh lambda={self.lam!r}"


@dataclass(frozen=True)
class Cos(FunctionSpec):
    lam: float
    family = "cos"

    def __call__(self, x, t=None):
        return _shape_like(x, np.cos(self.lam * np.asarray(x, dtype=float)))

    def dx(self, x, t=None, h=None):
        return _shape_like(x, -self.lam * np.sin(self.lam * np.asarray(x, dtype=float)))

    def d2x(self, x, t=None, h=None):
        return _shape_like(x, -self.lam**2 * np.cos(self.lam * np.asarray(x, dtype=float)))

    def render(self):
        return f"cos lambda={self.lam!r}"


@dataclass(frozen=True)
class ExpMixture(FunctionSpec):
    """``sum_i w_i exp(s_i x - s_i^2 t / 2)`` over components ``(w_i, s_i)``."""

    components: tuple
    family = "expmixture"
    time_dependent = True

    def __post_init__(self):
        comps = tuple((float(w), float(s)) for w, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ConfigurationError("mixture needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise ConfigurationError("mixture weights must be strictly positive")

    def _terms(self, x, t, power):
        t = self._need_t(t)
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast(x, t).shape)
        for w, s in self.components:
            out = out + w * s**power * np.exp(s * x - 0.5 * s * s * t)
        return _shape_like(x, out)

    def __call__(self, x, t=None):
        return self._terms(x, t, 0)

    def dx(self, x, t=None, h=None):
        return self._terms(x, t, 1)

    def d2x(self, x, t=None, h=None):
        return self._terms(x, t, 2)

    @property
    def weight_sum(self):
        return math.fsum(w for w, _ in self.components)

    @property
    def exp_rate(self):
        return max(abs(s) for _, s in self.components)

    def render(self):
        return "expmixture nu=" + ",".join(f"{w!r}:{s!r}" for w, s in self.components)


@dataclass(frozen=True)
class TimeDepQuadratic(FunctionSpec):
    """``a x^2 + b x + c(t)``."""

    a: float
    b: float
    c: object = 0.0
    family = "tdquad"
    time_dependent = True

    def __call__(self, x, t=None):
        t = self._need_t(t)
        x_arr = np.asarray(x, dtype=float)
        return _shape_like(x, (self.a * x_arr + self.b) * x_arr + _value_of_c(self.c, t))

    def dx(self, x, t=None, h=None):
        self._need_t(t)
        return _shape_like(x, 2 * self.a * np.asarray(x, dtype=float) + self.b
                           + 0 * np.asarray(t, dtype=float))

    def d2x(self, x, t=None, h=None):
        self._need_t(t)
        return _shape_like(x, np.full(np.broadcast(np.asarray(x), np.asarray(t)).shape,
                                      2.0 * self.a))

    def render(self):
        return f"tdquad a={self.a!r} b={self.b!r} c={_render_c(self.c)}"


@dataclass(frozen=True)
class TimeDepExpCombo(FunctionSpec):
    """``c(t) (a e^{lam x} + b e^{-lam x})``."""

    a: float
    b: float
    lam: float
    c: object = 1.0
    family = "tdexpcombo"
    time_dependent = True

    def __post_init__(self):
        _check_exp_weights(self.a, self.b)

    def _scaled(self, x, t, sign_b, power):
        t = self._need_t(t)
        x = np.asarray(x, dtype=float)
        base = (self.a * np.exp(self.lam * x) + sign_b * self.b * np.exp(-self.lam * x))
        return _shape_like(x, _value_of_c(self.c, t) * self.lam**power * base)

    def __call__(self, x, t=None):
        return self._scaled(x, t, 1.0, 0)

    def dx(self, x, t=None, h=None):
        return self._scaled(x, t, -1.0, 1)

    def d2x(self, x, t=None, h=None):
        return self._scaled(x, t, 1.0, 2)

    @property
    def exp_rate(self):
        return abs(self.lam)

    def render(self):
        return (f"tdexpcombo a={self.a!r} b={self.b!r} lambda={self.lam!r} "
                f"c={_render_c(self.c)}")


@dataclass(frozen=True)
class HeatPolyPlus(FunctionSpec):
    """``P(t, x) + c(t)`` for an exact polynomial ``P`` (not necessarily caloric)."""

    poly: HeatPolynomial
    c: object = 0.0
    family = "heatpoly"

    @property
    def time_dependent(self):
        return self.poly.has_time or isinstance(self.c, SampledFunction)

    def _t(self, t):
        if t is None:
            if self.time_dependent:
                self._need_t(t)
            return 0.0
        return t

    def __call__(self, x, t=None):
        t = self._t(t)
        return _shape_like(x, self.poly(t, x) + _value_of_c(self.c, t))

    def dx(self, x, t=None, h=None):
        t = self._t(t)
        return _shape_like(x, self.poly.d_dx()(t, x) + 0 * np.asarray(x, dtype=float))

    def d2x(self, x, t=None, h=None):
        t = self._t(t)
        return _shape_like(x, self.poly.d_dx().d_dx()(t, x) + 0 * np.asarray(x, dtype=float))

    def render(self):
        return f"heatpoly terms={self.poly.render(',')} c={_render_c(self.c)}"


@dataclass(frozen=True)
class Tabulated(FunctionSpec):
    """Natural cubic spline through ``(xs, values)``; evaluation outside the hull errors."""

    xs: tuple
    values: tuple
    source: str | None = None
    family = "table"

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        vs = tuple(float(v) for v in self.values)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vs)
        if len(xs) != len(vs):
            raise ConfigurationError("table needs as many values as grid points")
        if len(xs) < 4:
            raise ConfigurationError("table needs at least 4 grid points")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigurationError("table grid must be strictly increasing")

    @classmethod
    def from_function(cls, fn, xs, source=None):
        xs = np.asarray(xs, dtype=float)
        return cls(tuple(xs), tuple(np.asarray(fn(xs), dtype=float)), source)

    @classmethod
    def from_csv(cls, path):
        xs, vs = [], []
        first = True
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    x, v = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if first:  # header line
                        first = False
                        continue
                    raise ConfigurationError(f"{path}: bad table row {row!r}") from None
                first = False
                xs.append(x)
                vs.append(v)
        return cls(tuple(xs), tuple(vs), str(path))

    @cached_property
    def _spline(self):
        return CubicSpline(self.xs, self.values, bc_type="natural")

    @property
    def hull(self):
        return self.xs[0], self.xs[-1]

    def _check(self, x):
        lo, hi = self.hull
        bad = (x < lo) | (x > hi) | ~np.isfinite(x)
        if np.any(bad):
            pts = np.asarray(x)[bad].ravel()
            raise EvaluationError(f"x={pts[0]!r} outside table hull [{lo}, {hi}]", pts)

    def __call__(self, x, t=None):
        x_arr = np.asarray(x, dtype=float)
        self._check(x_arr)
        return _shape_like(x, self._spline(x_arr))

    def dx(self, x, t=None, h=DEFAULT_FD_STEP):
        x_arr = np.asarray(x, dtype=float)
        return _shape_like(x, (self(x_arr + h) - self(x_arr - h)) / (2 * h))

    def d2x(self, x, t=None, h=DEFAULT_FD_STEP):
        if not h > 0:
            raise ConfigurationError("finite-difference step h must be positive")
        x_arr = np.asarray(x, dtype=float)
        return _shape_like(x, (self(x_arr + h) - 2 * self(x_arr) + self(x_arr - h)) / (h * h))

    def render(self):
        if self.source is None:
            raise ConfigurationError("table built in memory has no source path to render")
        return f"table {self.source}"


def evaluate(spec: FunctionSpec, x, t=None):
    return spec(x, t)


def second_derivative(spec: FunctionSpec, x, t=None, h=DEFAULT_FD_STEP):
    """Analytic ``f_xx`` for parametric families, central difference for tables."""
    return spec.d2x(x, t=t, h=h)


def first_derivative(spec: FunctionSpec, x, t=None, h=DEFAULT_FD_STEP):
    return spec.dx(x, t=t, h=h)


def render_spec(spec: FunctionSpec) -> str:
    return spec.render()


# --- parsing -------------------------------------------------------------

_KEYS = {
    "quadratic": {"a", "b", "c"},
    "expcombo": {"a", "b", "lambda"},
    "cosh": {"lambda"},
    "cos": {"lambda"},
    "expmixture": {"nu"},
    "tdquad": {"a", "b", "c"},
    "tdexpcombo": {"a", "b", "lambda", "c"},
    "heatpoly": {"terms", "c"},
    "table": {"path"},
}
_POSITIONAL = {"expmixture": "nu", "table": "path", "heatpoly": "terms"}
_ALIASES = {"lam": "lambda", "λ": "lambda"}


def _tokens(text):
    pos = 0
    for piece in text.split():
        start = text.index(piece, pos)
        pos = start + len(piece)
        yield start, piece


def _number(value, where):
    try:
        return float(value)
    except ValueError:
        raise SpecSyntaxError(f"expected a number, got {value!r}", where) from None


def _sampled(value, where):
    if ":" not in value:
        return _number(value, where)
    times, vals = [], []
    for item in value.split(","):
        t, _, v = item.partition(":")
        times.append(_number(t, where))
        vals.append(_number(v, where))
    try:
        return SampledFunction(tuple(times), tuple(vals))
    except ConfigurationError as exc:
        raise SpecSyntaxError(str(exc), where) from None


def parse_spec(text: str, base_dir=None) -> FunctionSpec:
    """Parse a one-line spec string; construction invariants are enforced.

    Raises :class:`SpecSyntaxError` for grammar problems and
    :class:`ConfigurationError` for invariant violations such as ``a = b = 0``.
    """
    toks = list(_tokens(text))
    if not toks:
        raise SpecSyntaxError("empty function spec", 0)
    start, family = toks[0]
    family = family.lower()
    if family not in _KEYS:
        raise SpecSyntaxError(
            f"unknown family {family!r}; expected one of {', '.join(sorted(_KEYS))}", start)
    args, where = {}, {}
    for pos, tok in toks[1:]:
        key, eq, value = tok.partition("=")
        if not eq:
            if family in _POSITIONAL and _POSITIONAL[family] not in args:
                key, value = _POSITIONAL[family], tok
            else:
                raise SpecSyntaxError(f"expected key=value, got {tok!r}", pos)
        key = _ALIASES.get(key.lower(), key.lower())
        if key not in _KEYS[family]:
            raise SpecSyntaxError(f"unknown key {key!r} for family {family!r}", pos)
        if key in args:
            raise SpecSyntaxError(f"duplicate key {key!r}", pos)
        if not value:
            raise SpecSyntaxError(f"empty value for {key!r}", pos)
        args[key], where[key] = value, pos

    def num(key, default=None):
        if key not in args:
            if default is None:
                raise SpecSyntaxError(f"family {family!r} needs {key}=", len(text))
            return default
        return _number(args[key], where[key])

    if family == "quadratic":
        return Quadratic(num("a", 0.0), num("b", 0.0), num("c", 0.0))
    if family == "expcombo":
        return ExpCombo(num("a"), num("b"), num("lambda"))
    if family == "cosh":
        return Cosh(num("lambda"))
    if family == "cos":
        return Cos(num("lambda"))
    if family == "expmixture":
        if "nu" not in args:
            raise SpecSyntaxError("expmixture needs w:sigma pairs", len(text))
        comps = []
        for item in args["nu"].split(","):
            w, colon, s = item.partition(":")
            if not colon:
                raise SpecSyntaxError(f"mixture component {item!r} is not w:sigma", where["nu"])
            comps.append((_number(w, where["nu"]), _number(s, where["nu"])))
        return ExpMixture(tuple(comps))
    if family in ("tdquad", "tdexpcombo"):
        c = _sampled(args["c"], where["c"]) if "c" in args else (0.0 if family == "tdquad" else 1.0)
        if family == "tdquad":
            return TimeDepQuadratic(num("a", 0.0), num("b", 0.0), c)
        return TimeDepExpCombo(num("a"), num("b"), num("lambda"), c)
    if family == "heatpoly":
        if "terms" not in args:
            raise SpecSyntaxError("heatpoly needs terms=", len(text))
        poly = HeatPolynomial.parse(args["terms"])
        c = _sampled(args["c"], where["c"]) if "c" in args else 0.0
        return HeatPolyPlus(poly, c)
    # table
    if "path" not in args:
        raise SpecSyntaxError("table needs a CSV path", len(text))
    path = Path(args["path"])
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    if not path.exists():
        raise ConfigurationError(f"table file not found: {path}")
    table = Tabulated.from_csv(path)
    return Tabulated(table.xs, table.values, args["path"])
