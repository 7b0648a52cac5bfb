"""Approximation by solutions of ``du/dt = f(u, t) + binary noise``.

The noise is the derivative (affine mode) or the jump sequence (step mode)
of a binomial path ``y`` that tracks the residual

    r(t) = x_moll(t) - x(0) - int_0^t f(u(t_k), s) ds,   t in [t_k, t_{k+1}),

while ``u(t) = x(0) + int_0^t f(u(s), s) ds + y(t)``. The three processes
are built together, one coarse interval at a time, so everything up to
``t_k`` depends on the input only up to ``t_k``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError
from .fields import DriftField
from .grid import PathEnsemble, SampledPath, TimeGrid
from .preprocess import max_slope
from .tracker import MODES, BinomialPath, TrackerParams


@dataclass(frozen=True)
class BinaryNoiseSolution:
    """``u``, ``y`` and the tracked residual ``r`` of one run (or an ensemble)."""

    x_moll: object
    u: object
    y: BinomialPath
    y_fine: object
    r: object
    params: TrackerParams
    drift: DriftField
    x0: object
    mode: str
    verified: np.ndarray | bool = True

    @property
    def grid(self) -> TimeGrid:
        return self.u.grid

    def tracking_bound(self) -> float:
        """Guarantee on ``sup |r - y|``."""
        return self.y.bound()

    def drift_bound(self) -> float:
        """Guarantee on ``sup |r_true - r|``: ``max(1, T) * c_f (c_f + M) T/n``."""
        T = self.grid.T
        c = self.drift.c_f
        return max(1.0, T) * c * (c + self.params.M) * T / self.params.n

    def bound(self) -> float:
        """Guarantee on ``sup |x_moll - u|`` (before Euler roundoff)."""
        return self.tracking_bound() + self.drift_bound()

    def to_csv(self, path, x=None) -> None:
        """Columns ``t, x, x_moll, r, y, u`` for a single run."""
        if np.ndim(self.u.values) != 1:
            raise InvalidArgumentError("to_csv writes a single path")
        xs = self.x_moll.values if x is None else x.values
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "x_moll", "r", "y", "u"])
            cols = (self.grid.times, xs, self.x_moll.values, self.r.values,
                    self.y_fine.values, self.u.values)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


def solve_binary_ode(x_moll, x0, f: DriftField, params: TrackerParams,
                     mode: str = "affine", certify: bool = True) -> BinaryNoiseSolution:
    """Build ``(r, y, u)`` for a mollified target ``x_moll``.

    ``params.K`` must dominate ``sup |f|`` so that ``r`` moves no faster than
    ``M = 2mp + K``. ``u`` is integrated by explicit Euler on the fine grid.
    In affine mode ``sup |x_moll - u| <= 2*M*delta + max(1,T)*c_f*(c_f+M)*T/n``;
    step mode has ``4*M*delta`` in place of ``2*M*delta``.

    With ``certify`` the drift is probed on a 64x64 lattice over the range
    of values actually visited; a probe exceeding ``c_f`` or ``K`` rejects
    the run.
    """
    if mode not in MODES:
        raise InvalidArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    if params.K < f.sup_f:
        raise InvalidArgumentError(
            f"drift budget K = {params.K} is below the certified sup|f| = {f.sup_f}"
        )
    grid = x_moll.grid
    T, dt = grid.T, grid.dt
    n = params.n
    rr = grid.refinement(n)
    M = params.M
    delta = params.delta(T)
    t = grid.times
    xm = np.asarray(x_moll.values, dtype=float)
    shape = xm.shape[:-1]
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), shape)

    u = np.empty(xm.shape)
    r = np.empty(xm.shape)
    yf = np.empty(xm.shape)
    yk = np.empty(shape + (n + 1,))
    dirs = np.empty(shape + (n,), dtype=np.int8)

    I = np.zeros(shape)     # int_0^t f(u(s), s) ds
    J = np.zeros(shape)     # int_0^t f(u(theta(s)), s) ds
    u[..., 0] = x0
    r[..., 0] = xm[..., 0] - x0
    yf[..., 0] = 0.0
    yk[..., 0] = 0.0
    cur_u = u[..., 0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            j0 = k * rr
            j1 = j0 + rr
            if mode == "affine":
                up = yk[..., k] <= r[..., j0]
                dirs[..., k] = np.where(up, 1, -1)
                slope = np.where(up, M, -M)
            else:
                slope = 0.0
            u_frozen = cur_u
            for i in range(rr):
                j = j0 + i
                J = J + f(u_frozen, t[j]) * dt
                I = I + f(cur_u, t[j]) * dt
                r[..., j + 1] = xm[..., j + 1] - x0 - J
                if j + 1 < j1:
                    yf[..., j + 1] = yk[..., k] + slope * ((i + 1) * dt)
                    cur_u = x0 + I + yf[..., j + 1]
                    u[..., j + 1] = cur_u
            if mode == "step":
                # jump at t_{k+1}, decided from the value just before it
                up = yk[..., k] <= r[..., j1]
                dirs[..., k] = np.where(up, 1, -1)
            yk[..., k + 1] = np.where(up, yk[..., k] + M * delta, yk[..., k] - M * delta)
            yf[..., j1] = yk[..., k + 1]
            cur_u = x0 + I + yk[..., k + 1]
            u[..., j1] = cur_u
    if not np.all(np.isfinite(u)):
        raise NumericOverflowError("binary-noise ODE solution became non-finite")

    ok = max_slope(x_moll) <= (M - params.K) * (1 + 1e-9) + 1e-12
    if certify:
        lo = float(min(u.min(), xm.min()))
        hi = float(max(u.max(), xm.max()))
        f.certify(lo - 1e-9, hi + 1e-9, T, K=params.K)

    def wrap(v):
        return SampledPath(grid, v) if v.ndim == 1 else PathEnsemble(grid, v)

    ybin = BinomialPath(T, n, M, mode, dirs, yk, ok)
    return BinaryNoiseSolution(x_moll, wrap(u), ybin, wrap(yf), wrap(r), params, f,
                               x0 if shape else float(x0), mode, ok)


def residual_true(x, x0, f, u, rule: str = "left"):
    """``x(t) - x(0) - int_0^t f(u(s), s) ds`` on the fine grid.

    ``rule="left"`` sums ``f(u(t_j), t_j) dt``, the quadrature implied by the
    Euler step that produced ``u``, so that ``x_moll - u == r_true - y`` up to
    roundoff. ``rule="trapezoid"`` is available for a solver-independent view.
    """
    if x.grid != u.grid:
        raise InvalidArgumentError("x and u live on different grids")
    grid = u.grid
    fu = np.asarray(f(np.asarray(u.values), grid.times), dtype=float)
    fu = np.broadcast_to(fu, np.shape(u.values))
    if rule == "left":
        pieces = fu[..., :-1] * grid.dt
    elif rule == "trapezoid":
        pieces = 0.5 * (fu[..., :-1] + fu[..., 1:]) * grid.dt
    else:
        raise InvalidArgumentError(f"rule must be 'left' or 'trapezoid', got {rule!r}")
    integral = np.zeros(np.shape(u.values))
    np.cumsum(pieces, axis=-1, out=integral[..., 1:])
    x0 = np.asarray(x0, dtype=float)[..., None] if np.ndim(x0) else float(x0)
    return x.replace(np.asarray(x.values) - x0 - integral)
