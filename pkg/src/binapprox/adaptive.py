"""Hoelder-class certificates and the tracker with per-interval slopes.

A path is certified when every increment over a lag ``eps <= eps0`` obeys
``|x(t) - x(t - eps)| <= sigma(t - theta) * eps**q``, with a modulus
``sigma`` known ``theta`` time units in advance. The tracker then moves with
slope ``delta**(q-1) * sigma(t_k)`` on ``[t_k, t_{k+1})`` instead of a fixed
rate, so the increment sizes follow the local roughness of the input.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, PreconditionError, UnverifiedBoundWarning
from .grid import SampledPath, TimeGrid
from .preprocess import mollify
from .tracker import _affine_recursion, eval_piecewise_affine


@dataclass(frozen=True)
class HoelderParams:
    q: float
    theta: float
    eps0: float
    C: float
    sigma: SampledPath

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise InvalidArgumentError(f"q must lie in (0, 1], got {self.q}")
        if not self.theta > 0 or not self.eps0 > 0:
            raise InvalidArgumentError("theta and eps0 must be positive")
        s = np.asarray(self.sigma.values)
        if np.any(s < 0) or np.any(s > self.C):
            raise InvalidArgumentError(f"sigma must stay within [0, C = {self.C}]")


@dataclass(frozen=True)
class HoelderCertificate:
    holds: bool
    worst_ratio: float
    worst_bound: float
    worst_location: tuple[float, float]
    theta_eff: float
    eps0_eff: float
    rows: np.ndarray = field(repr=False, default=None)

    @property
    def margin(self) -> float:
        """Largest ``ratio - bound`` seen; positive means a violation."""
        return self.worst_ratio - self.worst_bound

    def to_csv(self, path) -> None:
        """Columns ``t, eps, ratio, bound, pass``: the worst lag at each time."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "eps", "ratio", "bound", "pass"])
            for t, eps, ratio, bound, ok in self.rows:
                w.writerow([repr(float(t)), repr(float(eps)), repr(float(ratio)),
                            repr(float(bound)), int(ok)])


def _whole_steps(grid: TimeGrid, duration: float, name: str) -> int:
    k = int(np.floor(grid.steps(duration)))
    if k < 1:
        raise InvalidArgumentError(f"{name} = {duration} is below the fine spacing {grid.dt}")
    return k


def check_hoelder(x: SampledPath, hp: HoelderParams, rtol: float = 1e-12) -> HoelderCertificate:
    """Probe every fine-grid pair ``(t, eps)`` with ``0 < eps <= eps0``.

    ``x`` and ``sigma`` are extended by their initial values before ``t = 0``.
    ``eps0`` and ``theta`` are rounded down to whole fine steps.
    """
    grid = x.grid
    if hp.sigma.grid != grid:
        raise InvalidArgumentError("sigma and x live on different grids")
    L = _whole_steps(grid, hp.eps0, "eps0")
    lag = _whole_steps(grid, hp.theta, "theta")
    v = np.asarray(x.values)
    N = grid.n_fine
    j = np.arange(N + 1)
    bound = np.asarray(hp.sigma.values)[np.maximum(j - lag, 0)]

    best_excess = np.full(N + 1, -np.inf)
    best_ratio = np.zeros(N + 1)
    best_l = np.ones(N + 1, dtype=int)
    for l in range(1, L + 1):
        eps = l * grid.dt
        ratio = np.abs(v - v[np.maximum(j - l, 0)]) / eps ** hp.q
        excess = ratio - bound
        better = excess > best_excess
        best_excess[better] = excess[better]
        best_ratio[better] = ratio[better]
        best_l[better] = l
    passed = best_ratio <= bound * (1 + rtol) + rtol
    w = int(np.argmax(best_excess))
    rows = np.column_stack([grid.times, best_l * grid.dt, best_ratio, bound, passed])
    return HoelderCertificate(
        holds=bool(passed.all()),
        worst_ratio=float(best_ratio[w]),
        worst_bound=float(bound[w]),
        worst_location=(float(grid.times[w]), float(best_l[w] * grid.dt)),
        theta_eff=lag * grid.dt,
        eps0_eff=L * grid.dt,
        rows=rows,
    )


@dataclass(frozen=True)
class AdaptiveTrack:
    """Piecewise-affine tracker output with one slope magnitude per interval."""

    T: float
    n: int
    q: float
    directions: np.ndarray
    rates: np.ndarray
    values: np.ndarray
    target: SampledPath
    verified: bool
    certificate: HoelderCertificate

    @property
    def delta(self) -> float:
        return self.T / self.n

    def bound(self) -> float:
        """``2 * delta**q * max_k sigma(t_k)``."""
        return 2.0 * float(np.max(self.rates, initial=0.0)) * self.delta

    def evaluate(self, grid: TimeGrid | None = None) -> SampledPath:
        grid = self.target.grid if grid is None else grid
        return SampledPath(grid, eval_piecewise_affine(self.values, self.directions, self.rates,
                                                       grid, self.n, self.T))


def track_adaptive(x: SampledPath, hp: HoelderParams, n: int,
                   certificate: HoelderCertificate | None = None,
                   p: float | None = None) -> AdaptiveTrack:
    """Mollify ``x`` (no clipping) and track it with slope ``delta**(q-1) * sigma(t_k)``.

    Needs a passing certificate (computed here when not supplied) and
    ``delta = T/n <= min(eps0, theta)``. The window ``1/p`` defaults to
    ``delta``. Each interval's mollified slope is compared with its rate; a
    violation emits :class:`UnverifiedBoundWarning`.
    """
    if certificate is None:
        certificate = check_hoelder(x, hp)
    if not certificate.holds:
        t, eps = certificate.worst_location
        raise PreconditionError(
            f"Hoelder certificate fails at t={t:.6g}, eps={eps:.6g}: "
            f"ratio {certificate.worst_ratio:.6g} > bound {certificate.worst_bound:.6g}"
        )
    grid = x.grid
    r = grid.refinement(n)
    delta = grid.T / n
    if delta > min(certificate.eps0_eff, certificate.theta_eff) * (1 + 1e-12):
        raise InvalidArgumentError(
            f"delta = {delta:.6g} exceeds min(eps0, theta) = "
            f"{min(certificate.eps0_eff, certificate.theta_eff):.6g}"
        )
    target = mollify(x, 1.0 / delta if p is None else p)
    sigma_k = np.asarray(hp.sigma.values)[::r]
    rates = delta ** (hp.q - 1) * sigma_k[:-1]
    tk = np.asarray(target.values)[::r]
    values, dirs = _affine_recursion(tk, tk[0], rates * delta)

    slopes = np.abs(np.diff(np.asarray(target.values))) / grid.dt
    per_interval = slopes.reshape(n, r).max(axis=1)
    ok = bool(np.all(per_interval <= rates * (1 + 1e-9) + 1e-12))
    if not ok:
        warnings.warn("mollified slope exceeds the interval rate; the bound is not guaranteed",
                      UnverifiedBoundWarning, stacklevel=2)
    return AdaptiveTrack(grid.T, n, hp.q, dirs, rates, values, target, ok, certificate)
