"""Exact heat polynomials in ``(t, x)`` and their Hermite decomposition.

A heat polynomial solves the backward heat equation ``u_t + u_xx / 2 = 0``.
The caloric Hermite basis ``H_k`` is generated by
``exp(s*x - s^2*t/2) = sum_k s^k H_k(t, x) / k!`` and obeys the three-term
recurrence ``H_{k+1} = x H_k - k t H_{k-1}``.

All coefficients are :class:`fractions.Fraction`; nothing in this module
rounds.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, NotHeatPolynomialError, SpecSyntaxError

MAX_HERMITE_DEGREE = 64


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite coefficient {value}")
        return Fraction(value)
    return Fraction(value)


class HeatPolynomial:
    """Polynomial ``sum c[j, m] x^j t^m`` with exact rational coefficients.

    Zero coefficients are never stored. The degree weights ``t`` twice, so
    ``x^j t^m`` has degree ``j + 2m`` and ``H_k`` is homogeneous of degree ``k``.
    """

    __slots__ = ("_coeffs", "_hash")

    def __init__(self, coeffs=None):
        clean = {}
        for (j, m), c in (coeffs or {}).items():
            if j < 0 or m < 0:
                raise ValueError(f"negative exponent in monomial x^{j} t^{m}")
            c = _frac(c)
            if c:
                key = (int(j), int(m))
                clean[key] = clean.get(key, Fraction(0)) + c
                if not clean[key]:
                    del clean[key]
        self._coeffs = clean
        self._hash = None

    # construction helpers
    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def const(cls, c):
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, j, m=0, c=1):
        return cls({(j, m): c})

    @property
    def coeffs(self) -> dict:
        return dict(self._coeffs)

    def coeff(self, j, m=0) -> Fraction:
        return self._coeffs.get((j, m), Fraction(0))

    def is_zero(self) -> bool:
        return not self._coeffs

    @property
    def degree(self) -> int:
        """Weighted degree ``max(j + 2m)``; ``-1`` for the zero polynomial."""
        return max((j + 2 * m for j, m in self._coeffs), default=-1)

    @property
    def x_degree(self) -> int:
        return max((j for j, _ in self._coeffs), default=-1)

    @property
    def has_time(self) -> bool:
        return any(m for _, m in self._coeffs)

    def sorted_terms(self):
        """Monomials by descending weighted degree, then descending x-power."""
        return sorted(self._coeffs.items(), key=lambda kv: (-(kv[0][0] + 2 * kv[0][1]), -kv[0][0]))

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, HeatPolynomial):
            return other
        if isinstance(other, (int, Fraction)):
            return HeatPolynomial.const(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._coeffs)
        for k, c in other._coeffs.items():
            out[k] = out.get(k, Fraction(0)) + c
        return HeatPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return HeatPolynomial({k: -c for k, c in self._coeffs.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return HeatPolynomial({k: c * other for k, c in self._coeffs.items()})
        if not isinstance(other, HeatPolynomial):
            return NotImplemented
        out = {}
        for (j1, m1), c1 in self._coeffs.items():
            for (j2, m2), c2 in other._coeffs.items():
                key = (j1 + j2, m1 + m2)
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return HeatPolynomial(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = HeatPolynomial.const(other)
        if not isinstance(other, HeatPolynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._coeffs.items()))
        return self._hash

    # calculus
    def d_dx(self):
        return HeatPolynomial({(j - 1, m): c * j for (j, m), c in self._coeffs.items() if j})

    def d_dt(self):
        return HeatPolynomial({(j, m - 1): c * m for (j, m), c in self._coeffs.items() if m})

    # evaluation
    def evaluate_exact(self, t, x) -> Fraction:
        t, x = _frac(t), _frac(x)
        return sum((c * x**j * t**m for (j, m), c in self._coeffs.items()), Fraction(0))

    def __call__(self, t, x):
        """Floating-point evaluation, broadcasting over array ``t`` and ``x``."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(t, x).shape)
        for (j, m), c in self.sorted_terms():
            out = out + float(c) * x**j * t**m
        return out if out.ndim else float(out)

    # text forms
    def render(self, sep=" + ") -> str:
        """Sorted monomial list ``coef*x^j*t^m``; the zero polynomial renders as ``0``."""
        if not self._coeffs:
            return "0"
        return sep.join(f"{_render_frac(c)}*x^{j}*t^{m}" for (j, m), c in self.sorted_terms())

    def __str__(self):
        return self.render()

    def __repr__(self):
        return f"HeatPolynomial({self.render()!r})"

    @classmethod
    def parse(cls, text: str) -> "HeatPolynomial":
        """Inverse of :meth:`render`; accepts ``+`` or ``,`` between monomials."""
        stripped = text.strip()
        if stripped == "0":
            return cls()
        coeffs = {}
        offset = 0
        for piece in re.split(r"(\s*\+\s+|,)", text):
            if not piece or re.fullmatch(r"\s*\+\s+|,", piece):
                offset += len(piece)
                continue
            m = _MONOMIAL.fullmatch(piece.strip())
            if m is None:
                raise SpecSyntaxError(f"bad monomial {piece.strip()!r}; expected coef*x^j*t^m",
                                      offset)
            c = Fraction(m.group("c"))
            key = (int(m.group("j") or 0), int(m.group("m") or 0))
            coeffs[key] = coeffs.get(key, Fraction(0)) + c
            offset += len(piece)
        return cls(coeffs)

    def to_json(self) -> list:
        return [{"x": j, "t": m, "num": str(c.numerator), "den": str(c.denominator)}
                for (j, m), c in self.sorted_terms()]

    @classmethod
    def from_json(cls, items) -> "HeatPolynomial":
        return cls({(int(d["x"]), int(d["t"])): Fraction(int(d["num"]), int(d["den"]))
                    for d in items})


_MONOMIAL = re.compile(
    r"(?P<c>[+-]?\d+(?:/\d+)?)(?:\*x\^(?P<j>\d+))?(?:\*t\^(?P<m>\d+))?")


def _render_frac(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


X = HeatPolynomial.monomial(1, 0)
T = HeatPolynomial.monomial(0, 1)


@lru_cache(maxsize=None)
def hermite(k: int) -> HeatPolynomial:
    """Caloric Hermite polynomial ``H_k(t, x)``: ``H_0 = 1``, ``H_1 = x``, ``H_2 = x^2 - t``."""
    if not isinstance(k, int) or not 0 <= k <= MAX_HERMITE_DEGREE:
        raise ConfigurationError(f"Hermite degree must be in [0, {MAX_HERMITE_DEGREE}], got {k!r}")
    if k == 0:
        return HeatPolynomial.const(1)
    if k == 1:
        return X
    return X * hermite(k - 1) - T * hermite(k - 2) * (k - 1)


def heat_defect(p: HeatPolynomial) -> HeatPolynomial:
    """``dP/dt + (1/2) d^2P/dx^2``; zero exactly when ``P`` is a heat polynomial."""
    return p.d_dt() + p.d_dx().d_dx() * Fraction(1, 2)


def is_heat_polynomial(p: HeatPolynomial) -> bool:
    return heat_defect(p).is_zero()


@dataclass(frozen=True)
class HermiteCoeffs:
    """Coefficients of ``P = sum_k by_index[k] * H_k``.

    ``appendix_order`` lists the same numbers in the integration-constant
    convention ``C_0, ..., C_n`` where ``C_0`` multiplies ``H_n``.
    """

    by_index: tuple

    @property
    def n(self) -> int:
        return len(self.by_index) - 1

    @property
    def appendix_order(self) -> tuple:
        return tuple(reversed(self.by_index))

    def polynomial(self) -> HeatPolynomial:
        return sum((hermite(k) * c for k, c in enumerate(self.by_index)), HeatPolynomial())

    def to_json(self) -> dict:
        def enc(seq):
            return [_render_frac(c) for c in seq]
        return {"by_hermite_index": enc(self.by_index),
                "appendix_constants": enc(self.appendix_order)}


def _integrate_t(poly_t):
    """Antiderivative (zero constant) of a polynomial in t given as a coefficient list."""
    return [Fraction(0)] + [c / (m + 1) for m, c in enumerate(poly_t)]


def build_from_constants(constants) -> HeatPolynomial:
    """Heat polynomial ``sum_k a_k(t) x^(n-k)`` from the integration constants.

    ``n = len(constants) - 1``. Each chain is integrated exactly:
    ``a_k = C_k - ((n-k+2)(n-k+1)/2) * int a_{k-2} dt`` with ``a_0 = C_0`` and
    ``a_1 = C_1``, so ``a_k(0) = C_k``.
    """
    cs = [_frac(c) for c in constants]
    if not cs:
        raise ConfigurationError("need at least one constant (n >= 0)")
    n = len(cs) - 1
    a = []
    for k in range(n + 1):
        if k < 2:
            a.append([cs[k]])
            continue
        factor = Fraction((n - k + 2) * (n - k + 1), 2)
        integral = _integrate_t(a[k - 2])
        chain = [-factor * c for c in integral]
        chain[0] += cs[k]
        a.append(chain)
    out = {}
    for k, chain in enumerate(a):
        for m, c in enumerate(chain):
            if c:
                out[(n - k, m)] = c
    return HeatPolynomial(out)


def hermite_decompose(p: HeatPolynomial, n: int | None = None) -> HermiteCoeffs:
    """Unique exact expansion of a heat polynomial in ``H_0..H_n``.

    Eliminates from the highest x-power downward. ``n`` defaults to the
    weighted degree of ``p`` and may be given larger to pad with zeros.
    """
    defect = heat_defect(p)
    if not defect.is_zero():
        (j, m), c = defect.sorted_terms()[0]
        raise NotHeatPolynomialError(
            f"not a heat polynomial: defect has monomial {_render_frac(c)}*x^{j}*t^{m}")
    deg = max(p.degree, 0)
    n = deg if n is None else n
    if n < deg:
        raise ConfigurationError(f"n={n} is below the polynomial degree {deg}")
    coeffs = [Fraction(0)] * (n + 1)
    rest = p
    for k in range(n, -1, -1):
        lead = rest.coeff(k, 0)
        if lead:
            coeffs[k] = lead
            rest = rest - hermite(k) * lead
    if not rest.is_zero():  # pragma: no cover - guarded by the defect check
        raise NotHeatPolynomialError(f"elimination left remainder {rest}")
    return HermiteCoeffs(tuple(coeffs))


def gen_function_partial(sigma: float, t: float, x: float, k_max: int) -> float:
    """Partial sum ``sum_{k<=K} sigma^k H_k(t, x) / k!`` of the generating function."""
    if k_max < 0:
        raise ConfigurationError("truncation K must be >= 0")
    terms = []
    for k in range(k_max + 1):
        hk = hermite(k)(t, x)
        terms.append(sigma**k * hk / math.factorial(k))
    return math.fsum(terms)
