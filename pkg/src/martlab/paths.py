"""Seeded Brownian path ensembles on a shared time grid.

Increments are exact Gaussians, so there is no discretization error at grid
times. Paths are generated in fixed-size blocks; block ``b`` draws from its own
Philox stream keyed by ``SeedSequence(seed, spawn_key=(b,))``. Path ``i``
therefore always receives the same numbers no matter how many threads are used.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, GridLookupError

BLOCK_SIZE = 4096
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class TimeGrid:
    times: tuple

    def __post_init__(self):
        times = tuple(float(v) for v in self.times)
        object.__setattr__(self, "times", times)
        if len(times) < 2:
            raise ConfigurationError("time grid needs at least two points")
        if times[0] != 0.0:
            raise ConfigurationError("time grid must start at 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigurationError("time grid must be strictly increasing")

    @classmethod
    def uniform(cls, t_max, steps):
        return cls(tuple(np.linspace(0.0, t_max, steps + 1)))

    def __len__(self):
        return len(self.times)

    def index(self, t) -> int:
        for i, v in enumerate(self.times):
            if abs(v - t) <= 1e-12 * max(1.0, abs(t)):
                return i
        raise GridLookupError(f"time {t} is not a grid point of {self.times}")


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    grid: TimeGrid
    sigma: float
    paths: np.ndarray  # shape (n, len(grid))
    seed: int

    @property
    def n(self) -> int:
        return self.paths.shape[0]

    def at(self, t) -> np.ndarray:
        return self.paths[:, self.grid.index(t)]


def _thread_count(threads):
    if threads is None:
        env = os.environ.get("MARTLAB_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ConfigurationError(f"MARTLAB_THREADS must be an integer, got {env!r}") from None
        else:
            threads = 1
    return max(1, int(threads))


def _block(seed, block, rows, dt_sqrt):
    ss = np.random.SeedSequence(seed & _SEED_MASK, spawn_key=(block,))
    rng = np.random.Generator(np.random.Philox(ss))
    z = rng.standard_normal((rows, dt_sqrt.size))
    return z * dt_sqrt


def simulate(n: int, grid: TimeGrid, sigma: float = 1.0, seed: int = 42,
             threads: int | None = None) -> PathEnsemble:
    """Simulate ``n`` paths of ``sigma * W`` observed at ``grid.times``."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigurationError(f"path count must be >= 1, got {n!r}")
    if not isinstance(grid, TimeGrid):
        grid = TimeGrid(tuple(grid))
    dt_sqrt = sigma * np.sqrt(np.diff(np.asarray(grid.times)))
    n = int(n)
    blocks = [(b, min(BLOCK_SIZE, n - b * BLOCK_SIZE)) for b in range(math.ceil(n / BLOCK_SIZE))]
    workers = _thread_count(threads)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda br: _block(seed, br[0], br[1], dt_sqrt), blocks))
    else:
        parts = [_block(seed, b, rows, dt_sqrt) for b, rows in blocks]
    incs = np.vstack(parts)
    paths = np.zeros((n, len(grid.times)))
    np.cumsum(incs, axis=1, out=paths[:, 1:])
    paths.setflags(write=False)
    return PathEnsemble(grid, float(sigma), paths, int(seed))


@dataclass(frozen=True)
class EnsembleStats:
    t: float
    n: int
    mean: float
    variance: float
    se_mean: float
    se_variance: float


def sample_stats(values, t=float("nan")) -> EnsembleStats:
    """Unbiased mean/variance with standard errors (variance SE from the 4th central moment)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    mean = float(v.mean())
    if n < 2:
        return EnsembleStats(t, n, mean, 0.0, 0.0, 0.0)
    centred = v - mean
    var = float(centred @ centred / (n - 1))
    m4 = float(np.mean(centred**4))
    se_var = math.sqrt(max(m4 - var * var, 0.0) / n)
    return EnsembleStats(t, n, mean, var, math.sqrt(var / n), se_var)


def ensemble_stats(e: PathEnsemble, t: float) -> EnsembleStats:
    return sample_stats(e.at(t), t=float(t))


def dump_csv(e: PathEnsemble, path) -> None:
    """Write ``path,t,value`` rows, one per (path, grid time)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "t", "value"])
        for i, row in enumerate(e.paths):
            for t, v in zip(e.grid.times, row):
                w.writerow([i, repr(t), repr(float(v))])
