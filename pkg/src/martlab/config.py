"""Central tolerances and probe grids.

Every verification pipeline reads its defaults from here so that the
acceptance suite can pin them in one place.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Tolerances:
    quad_order: int = 64
    quad_order_escalated: int = 128
    # escalate when |rate * sigma * sqrt(t)| exceeds this
    escalation_threshold: float = 4.0
    additive: float = 1e-8
    multiplicative: float = 1e-8  # relative
    feq: float = 1e-8
    z_threshold: float = 4.0
    # max - min <= constancy * (1 + |mean|)
    constancy: float = 1e-6
    g_step_cap: float = 0.05
    qv_slack_factor: float = 5.0

    def __post_init__(self):
        for name in ("additive", "multiplicative", "feq", "z_threshold",
                     "constancy", "g_step_cap", "qv_slack_factor"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"tolerance {name!r} must be positive")

    def with_tol(self, eps: float | None) -> "Tolerances":
        """Override the three deterministic residual tolerances at once."""
        if eps is None:
            return self
        return replace(self, additive=eps, multiplicative=eps, feq=eps)


def _linspace(a, b, n):
    return tuple(float(v) for v in np.linspace(a, b, n))


@dataclass(frozen=True)
class ProbeGrid:
    s_values: tuple = (0.25, 0.5, 1.0)
    t_values: tuple = (0.5, 1.0, 2.0)
    x_values: tuple = field(default_factory=lambda: _linspace(-3.0, 3.0, 33))
    t_slices: tuple = (0.25, 0.5, 1.0, 2.0)
    feq_values: tuple = field(default_factory=lambda: _linspace(-2.0, 2.0, 17))

    @property
    def pairs(self):
        """All (s, t) combinations with s < t."""
        return [(s, t) for s in self.s_values for t in self.t_values if s < t]

    @property
    def x(self):
        return np.asarray(self.x_values, dtype=float)


DEFAULT_TOLERANCES = Tolerances()
DEFAULT_GRID = ProbeGrid()
DEFAULT_SEED = 42
DEFAULT_SIGMAS = (1.0, 2.0)
