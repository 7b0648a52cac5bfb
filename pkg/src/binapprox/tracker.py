"""Causal binomial trackers.

``track_affine`` builds a continuous path whose slope on every coarse
interval is ``+M`` or ``-M``; ``track_step`` builds a right-continuous
piecewise-constant path whose jumps are ``+M*delta`` or ``-M*delta``. The
direction on each interval is decided from the target's value at the left
coarse point only, so the output is adapted to the target.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnverifiedBoundWarning
from .grid import PathEnsemble, SampledPath, TimeGrid
from .preprocess import max_slope

MODES = ("affine", "step")


@dataclass(frozen=True)
class TrackerParams:
    """Coarse count ``n``, preprocessing ``(m, p)`` and drift budget ``K``.

    The tracking rate is ``M = 2*m*p + K`` unless ``rate`` is given, which
    replaces it outright (useful when a slope bound for the target is
    already known and no mollifier is involved).
    """

    n: int
    m: float = 1.0
    p: float = 1.0
    K: float = 0.0
    rate: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if self.K < 0:
            raise InvalidArgumentError(f"drift budget K must be nonnegative, got {self.K}")
        if self.m <= 0 or self.p <= 0:
            raise InvalidArgumentError("m and p must be positive")
        if not self.M > 0:
            raise InvalidArgumentError(f"tracking rate must be positive, got {self.M}")

    @property
    def M(self) -> float:
        if self.rate is not None:
            return float(self.rate)
        return 2.0 * self.m * self.p + self.K

    @property
    def target_slope_budget(self) -> float:
        """Largest target slope for which the error bounds are guaranteed."""
        return self.M - self.K

    def delta(self, T: float) -> float:
        return T / self.n


@dataclass(frozen=True)
class BinomialPath:
    """Output of a tracker (or an ensemble of them along the leading axes).

    ``values[..., k]`` is ``y(t_k)`` for ``k = 0..n``. In affine mode
    ``directions[..., k]`` is the sign of the slope on ``[t_k, t_{k+1})``; in
    step mode it is the sign of the jump at ``t_{k+1}`` (the first interval is
    constant). ``verified`` is False where the target violated the slope
    budget, in which case the error bounds are not guaranteed.
    """

    T: float
    n: int
    rate: float
    mode: str
    directions: np.ndarray
    values: np.ndarray
    verified: np.ndarray | bool = True

    @property
    def delta(self) -> float:
        return self.T / self.n

    @property
    def magnitude(self) -> float:
        return self.rate if self.mode == "affine" else self.rate * self.delta

    @property
    def y0(self):
        return self.values[..., 0]

    @property
    def coarse_times(self) -> np.ndarray:
        return self.T * np.arange(self.n + 1) / self.n

    def evaluate(self, grid: TimeGrid):
        return eval_binomial(self, grid)

    def bound(self) -> float:
        """Sup-distance guarantee to the tracked target on ``[0, T]``."""
        return (2.0 if self.mode == "affine" else 4.0) * self.rate * self.delta

    def coarse_bound(self) -> float:
        return 2.0 * self.rate * self.delta

    def to_csv(self, path) -> None:
        """Columns ``k, t_k, y(t_k), direction``.

        ``direction`` is the move that starts at ``t_k`` (affine) or the jump
        that lands at ``t_k`` (step); 0 where there is none.
        """
        if self.values.ndim != 1:
            raise InvalidArgumentError("to_csv writes a single path")
        dirs = np.zeros(self.n + 1, dtype=int)
        if self.mode == "affine":
            dirs[:-1] = self.directions
        else:
            dirs[1:] = self.directions
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t_k", "y", "direction"])
            for k, (t, y, d) in enumerate(zip(self.coarse_times, self.values, dirs)):
                w.writerow([k, repr(float(t)), repr(float(y)), int(d)])


def coarse_samples(x, n: int) -> np.ndarray:
    """Target values at the coarse points ``t_k = kT/n``."""
    r = x.grid.refinement(n)
    return x.values[..., ::r]


def _affine_recursion(target_k, y0, steps):
    """``y_{k+1} = y_k + sign * steps[k]`` with sign +1 iff ``y_k <= target_k``."""
    n = target_k.shape[-1] - 1
    y = np.empty(target_k.shape)
    d = np.empty(target_k.shape[:-1] + (n,), dtype=np.int8)
    y[..., 0] = y0
    for k in range(n):
        up = y[..., k] <= target_k[..., k]
        d[..., k] = np.where(up, 1, -1)
        y[..., k + 1] = np.where(up, y[..., k] + steps[..., k], y[..., k] - steps[..., k])
    return y, d


def _step_recursion(target_k, y0, jump):
    """Constant on the first interval, then a jump of ``+-jump`` at every ``t_k``, k >= 1."""
    n = target_k.shape[-1] - 1
    y = np.empty(target_k.shape)
    d = np.empty(target_k.shape[:-1] + (n,), dtype=np.int8)
    y[..., 0] = y0
    for k in range(1, n + 1):
        prev = y[..., k - 1]
        up = prev <= target_k[..., k]
        d[..., k - 1] = np.where(up, 1, -1)
        y[..., k] = np.where(up, prev + jump, prev - jump)
    return y, d


def _check_slope(target, budget: float):
    slope = max_slope(target)
    ok = slope <= budget * (1 + 1e-9) + 1e-12
    if not np.all(ok):
        warnings.warn(
            f"target slope {float(np.max(slope)):.6g} exceeds the budget {budget:.6g}; "
            "the tracking bound is not guaranteed",
            UnverifiedBoundWarning,
            stacklevel=3,
        )
    return ok


def track_affine(target, params: TrackerParams, y0=None) -> BinomialPath:
    """Continuous tracker with slope ``+-M`` on each coarse interval.

    Starts at ``target(0)`` unless ``y0`` is given, moves up on
    ``[t_k, t_{k+1})`` iff ``y(t_k) <= target(t_k)``. If the target's slope
    is at most ``M - K`` then ``sup |y - target| <= 2*M*delta``.
    """
    tk = coarse_samples(target, params.n)
    T = target.grid.T
    M = params.M
    start = tk[..., 0] if y0 is None else np.broadcast_to(y0, tk.shape[:-1])
    steps = np.full(params.n, M * params.delta(T))
    values, dirs = _affine_recursion(tk, start, steps)
    ok = _check_slope(target, params.target_slope_budget)
    return BinomialPath(T, params.n, M, "affine", dirs, values, ok)


def track_step(target, params: TrackerParams, y0=None) -> BinomialPath:
    """Piecewise-constant tracker with jumps ``+-M*delta``.

    ``y = target(0)`` on ``[t_0, t_1)``; at each later ``t_k`` it jumps up iff
    its value just before ``t_k`` is ``<= target(t_k)``. With target slope
    at most ``M - K``: ``|y - target| <= 4*M*delta`` everywhere and
    ``<= 2*M*delta`` at the coarse points.
    """
    tk = coarse_samples(target, params.n)
    T = target.grid.T
    M = params.M
    start = tk[..., 0] if y0 is None else np.broadcast_to(y0, tk.shape[:-1])
    values, dirs = _step_recursion(tk, start, M * params.delta(T))
    ok = _check_slope(target, params.target_slope_budget)
    return BinomialPath(T, params.n, M, "step", dirs, values, ok)


def track(target, params: TrackerParams, mode: str = "affine", y0=None) -> BinomialPath:
    if mode == "affine":
        return track_affine(target, params, y0)
    if mode == "step":
        return track_step(target, params, y0)
    raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")


def _fine_index(grid: TimeGrid, n: int, T: float):
    if abs(grid.T - T) > 1e-12 * max(1.0, T):
        raise InvalidArgumentError(f"grid horizon {grid.T} differs from the path horizon {T}")
    r = grid.refinement(n)
    j = np.arange(grid.n_fine + 1)
    return j // r, j % r


def eval_piecewise_affine(values, directions, rates, grid: TimeGrid, n: int, T: float):
    """Fine-grid values of ``y(t_k) + dir_k * rate_k * (t - t_k)``.

    ``rates`` is a scalar or one rate per interval.
    """
    k, off = _fine_index(grid, n, T)
    dirs = np.concatenate([directions, np.zeros(directions.shape[:-1] + (1,), np.int8)], axis=-1)
    rates = np.broadcast_to(np.asarray(rates, dtype=float), directions.shape)
    rates = np.concatenate([rates, np.zeros(rates.shape[:-1] + (1,))], axis=-1)
    return values[..., k] + dirs[..., k] * rates[..., k] * (off * grid.dt)


def eval_binomial(y: BinomialPath, grid: TimeGrid):
    """Evaluate ``y`` at every point of ``grid`` (which must refine the coarse grid).

    Returns a SampledPath for a single tracker output, otherwise a PathEnsemble.
    """
    if y.mode == "affine":
        vals = eval_piecewise_affine(y.values, y.directions, y.rate, grid, y.n, y.T)
    elif y.mode == "step":
        k, _ = _fine_index(grid, y.n, y.T)
        vals = y.values[..., k]
    else:
        raise InvalidArgumentError(f"unknown mode {y.mode!r}")
    return SampledPath(grid, vals) if vals.ndim == 1 else PathEnsemble(grid, vals)
