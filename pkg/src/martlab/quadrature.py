"""Gaussian heat-kernel integration.

Expectations of the form ``E f(x + sqrt(t) Z)`` with ``Z ~ N(0, 1)`` are
computed with probabilist Gauss-Hermite rules. Nodes come from the
eigenvalues of the symmetric tridiagonal Jacobi matrix and are then polished
by Newton steps on the orthonormal Hermite recurrence; weights are the
Christoffel numbers ``1 / sum_k p_k(x_i)^2``, which stay relatively accurate
even for the far-tail nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, DomainError, EvaluationError

MAX_ORDER = 512

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class HeatKernelQuery:
    t: float
    x: float
    y: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(
                f"heat kernel needs t > 0 (got t={self.t}); at t=0 it is a point mass")


def heat_kernel(q: HeatKernelQuery) -> float:
    """Transition density of standard Brownian motion from ``x`` to ``y`` in time ``t``."""
    d = q.y - q.x
    return math.exp(-d * d / (2.0 * q.t)) / (_SQRT_2PI * math.sqrt(q.t))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Probabilist Gauss-Hermite rule: ``sum w_i f(n_i) ~ E f(Z)``."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return self.order

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _orthonormal_hermite(x, m):
    """Return ``(p_m, p_{m-1}, log_scale, sum_{k<m} p_k^2)`` with running rescaling.

    ``p_k`` are the orthonormal probabilist Hermite polynomials. Values are
    returned divided by ``exp(log_scale)`` (elementwise), so that the far
    nodes of high-order rules do not overflow.
    """
    x = np.asarray(x, dtype=float)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    log_scale = np.zeros_like(x)
    sumsq = np.zeros_like(x)
    for k in range(m):
        sumsq += p * p
        p_next = (x * p - math.sqrt(k) * p_prev) / math.sqrt(k + 1)
        p_prev, p = p, p_next
        big = np.abs(p) > 1e100
        if np.any(big):
            p[big] *= 1e-100
            p_prev[big] *= 1e-100
            sumsq[big] *= 1e-200
            log_scale[big] += 100.0 * math.log(10.0)
    return p, p_prev, log_scale, sumsq


@lru_cache(maxsize=None)
def gauss_hermite_rule(m: int) -> QuadratureRule:
    """Probabilist Gauss-Hermite rule of order ``m`` (exact for degree <= 2m-1)."""
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool) or not 1 <= m <= MAX_ORDER:
        raise ConfigurationError(f"rule order must be an integer in [1, {MAX_ORDER}], got {m!r}")
    m = int(m)
    if m == 1:
        return QuadratureRule(np.array([0.0]), np.array([1.0]), 1)

    off = np.sqrt(np.arange(1, m, dtype=float))
    nodes = eigh_tridiagonal(np.zeros(m), off, eigvals_only=True)
    nodes = np.sort(nodes)
    for _ in range(3):
        p, p_prev, _, _ = _orthonormal_hermite(nodes, m)
        step = p / (math.sqrt(m) * p_prev)
        nodes = nodes - step
    nodes = 0.5 * (nodes - nodes[::-1])
    if m % 2:
        nodes[m // 2] = 0.0

    _, _, log_scale, sumsq = _orthonormal_hermite(nodes, m)
    with np.errstate(under="ignore"):
        weights = np.exp(-2.0 * log_scale) / sumsq
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / math.fsum(weights)
    return QuadratureRule(nodes, weights, m)


def _evaluate_on(f, points, f_time):
    try:
        values = f(points) if f_time is None else f(points, t=f_time)
        return np.asarray(values, dtype=float)
    except EvaluationError as exc:
        bad = exc.points or tuple(np.ravel(points)[:3])
        raise EvaluationError(f"cannot evaluate {f!r} at quadrature points {bad[:3]}: {exc}",
                              bad) from exc


def expect_heat(f, t, x0, rule: QuadratureRule, *, f_time=None, scale=1.0):
    """``E f(x0 + scale * W_t)`` by quadrature; ``f(x0)`` exactly at ``t = 0``.

    ``x0`` may be an array, in which case an array of expectations is
    returned. ``f_time`` is forwarded as the time argument of time-dependent
    specs.
    """
    if t < 0:
        raise DomainError(f"expect_heat needs t >= 0, got {t}")
    x0_arr = np.asarray(x0, dtype=float)
    if t == 0 or scale == 0:
        out = _evaluate_on(f, x0_arr, f_time)
        return out if x0_arr.ndim else float(out)
    spread = scale * math.sqrt(t) * rule.nodes
    pts = x0_arr[..., None] + spread
    vals = _evaluate_on(f, pts, f_time)
    out = vals @ rule.weights
    return out if x0_arr.ndim else float(out)


def quadrature_points(t, x0, rule: QuadratureRule, scale=1.0):
    """The abscissae ``x0 + scale*sqrt(t)*node`` used by :func:`expect_heat`."""
    x0_arr = np.asarray(x0, dtype=float)
    if t == 0 or scale == 0:
        return x0_arr[..., None]
    return x0_arr[..., None] + scale * math.sqrt(t) * rule.nodes
