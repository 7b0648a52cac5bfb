"""Multiplicative binomial tracking of positive processes.

The log of the target is clipped, mollified and followed by the step
tracker, so every move of ``log y`` is ``+-M*delta``. On the price scale a
move multiplies ``y`` by ``1 + d2*delta`` or by ``1 - d1*delta``, with
``d1, d2`` chosen so these factors are exactly ``exp(+-M*delta)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .grid import PathEnsemble, SampledPath, TimeGrid
from .preprocess import preprocess
from .tracker import TrackerParams, coarse_samples, track_step


def rates_from_logslope(M: float, delta: float) -> tuple[float, float]:
    """Per-unit-time down/up rates ``(d1, d2)`` with
    ``log(1 - d1*delta) = -M*delta`` and ``log(1 + d2*delta) = M*delta``."""
    if not (M > 0 and delta > 0):
        raise InvalidArgumentError(f"M and delta must be positive, got M={M}, delta={delta}")
    md = M * delta
    with np.errstate(over="ignore"):
        d1, d2 = -np.expm1(-md) / delta, np.expm1(md) / delta
    if not (d1 * delta < 1 and np.isfinite(d2)):
        raise InvalidArgumentError(f"log move M*delta = {md:.6g} is too large to represent")
    return d1, d2


@dataclass(frozen=True)
class MultiplicativePath:
    """Node values ``y(t_k) = y0 * prod_{i<=k} (1 + zeta_i*delta)`` (leading axes = paths).

    ``eta`` holds the additive form ``log y0 + sum xi_i*delta`` built by the
    tracker; ``values`` recomputes the product form from the factors.
    """

    T: float
    n: int
    M: float
    y0: np.ndarray | float
    directions: np.ndarray
    eta: np.ndarray
    verified: np.ndarray | bool = True

    @property
    def delta(self) -> float:
        return self.T / self.n

    @property
    def rates(self) -> tuple[float, float]:
        return rates_from_logslope(self.M, self.delta)

    @property
    def d1(self) -> float:
        return self.rates[0]

    @property
    def d2(self) -> float:
        return self.rates[1]

    @property
    def xi(self) -> np.ndarray:
        return self.directions * self.M

    @property
    def zeta(self) -> np.ndarray:
        d1, d2 = self.rates
        return np.where(self.directions > 0, d2, -d1)

    @property
    def factors(self) -> np.ndarray:
        return 1.0 + self.zeta * self.delta

    @property
    def values(self) -> np.ndarray:
        y0 = np.asarray(self.y0, dtype=float)[..., None]
        out = np.empty(self.eta.shape)
        out[..., :1] = y0
        out[..., 1:] = y0 * np.cumprod(self.factors, axis=-1)
        return out

    @property
    def d1_exceeds_delta(self) -> bool:
        """True when ``d1 >= delta``; only ``0 < 1 - d1*delta < 1`` is enforced."""
        return bool(self.d1 >= self.delta)

    @property
    def coarse_times(self) -> np.ndarray:
        return self.T * np.arange(self.n + 1) / self.n

    def evaluate(self, grid: TimeGrid):
        """Right-continuous piecewise-constant interpolation of the node values."""
        r = grid.refinement(self.n)
        vals = self.values[..., np.arange(grid.n_fine + 1) // r]
        return SampledPath(grid, vals) if vals.ndim == 1 else PathEnsemble(grid, vals)

    def to_csv(self, path) -> None:
        """Columns ``k, t_k, y, zeta, eta``; ``zeta`` at row k is the move landing at ``t_k``."""
        if self.eta.ndim != 1:
            raise InvalidArgumentError("to_csv writes a single path")
        zeta = np.concatenate([[0.0], self.zeta])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t_k", "y", "zeta", "eta"])
            for k, row in enumerate(zip(self.coarse_times, self.values, zeta, self.eta)):
                w.writerow([k] + [repr(float(v)) for v in row])


def log_target(x, m: float | None, p: float):
    """Clipped (on the log scale) and mollified ``log x``."""
    v = np.asarray(x.values)
    if np.any(v <= 0):
        raise InvalidArgumentError("log tracking needs a strictly positive input")
    return preprocess(x.replace(np.log(v)), m, p)


def track_log(x, params: TrackerParams, clip: bool = True) -> MultiplicativePath:
    """Track a positive path multiplicatively.

    ``log y`` starts at ``log x(t_0)`` and follows the mollified log path with
    the step rule, so at the coarse points it stays within ``2*M*delta`` of
    the target whenever ``|log x(0)| <= m`` and the target slope is within
    budget.
    """
    target = log_target(x, params.m if clip else None, params.p)
    log_x0 = np.log(np.asarray(x.values)[..., 0])
    s = track_step(target, params, y0=log_x0)
    x0 = np.asarray(x.values)[..., 0]
    return MultiplicativePath(x.grid.T, params.n, params.M, x0 if x0.ndim else float(x0),
                              s.directions, s.values, s.verified)


def coarse_log_target(x, params: TrackerParams, clip: bool = True) -> np.ndarray:
    return coarse_samples(log_target(x, params.m if clip else None, params.p), params.n)
