"""Clipping and causal trailing-window averaging of sampled paths.

Both operations act on the last axis, so they accept a single
:class:`~binapprox.grid.SampledPath` or a :class:`~binapprox.grid.PathEnsemble`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PreprocessParams:
    m: float
    p: float

    def __post_init__(self):
        if not self.m > 0:
            raise InvalidArgumentError(f"clip level m must be positive, got {self.m}")
        if not self.p > 0:
            raise InvalidArgumentError(f"window parameter p must be positive, got {self.p}")

    @property
    def window(self) -> float:
        return 1.0 / self.p


def clip(x, m: float):
    """Clamp every sample of ``x`` to ``[-m, m]``."""
    if not m > 0:
        raise InvalidArgumentError(f"clip level m must be positive, got {m}")
    return x.replace(np.clip(x.values, -m, m))


def trailing_integral(values: np.ndarray, dt: float, lag_steps: float) -> np.ndarray:
    """``int_{t_j - lag}^{t_j} v(s) ds`` at every grid point.

    ``v`` is the piecewise-linear interpolant of ``values`` extended by
    ``values[..., 0]`` to the left of the grid; ``lag = lag_steps * dt`` need
    not be a whole number of steps. The result at ``j`` uses samples up to
    ``j`` only.
    """
    n = values.shape[-1] - 1
    v0 = values[..., :1]
    cum = np.zeros(values.shape)
    np.cumsum(0.5 * dt * (values[..., 1:] + values[..., :-1]), axis=-1, out=cum[..., 1:])

    j = np.arange(n + 1)
    s = j - lag_steps
    i = np.floor(s).astype(int)
    frac = s - i
    inside = i >= 0
    ic = np.clip(i, 0, n)
    ic1 = np.clip(i + 1, 0, n)
    a = values[..., ic]
    b = values[..., ic1]
    # integral from 0 to s (in steps) of the interpolant; s < 0 uses the constant extension
    left = np.where(
        inside,
        cum[..., ic] + dt * (frac * a + 0.5 * frac * frac * (b - a)),
        s * dt * v0,
    )
    return cum - left


def mollify(x, p: float):
    """Average of ``x`` over the trailing window ``[t - 1/p, t]``.

    Samples before ``t = 0`` are taken equal to ``x(0)``. The window is
    integrated exactly for the piecewise-linear interpolant of the samples,
    so the output slope never exceeds ``2 * sup|x| * p``.
    """
    if not p > 0:
        raise InvalidArgumentError(f"window parameter p must be positive, got {p}")
    grid = x.grid
    lag = grid.steps(1.0 / p)
    if lag < 1:
        raise InvalidArgumentError(
            f"window 1/p = {1.0 / p:.6g} is shorter than one fine step dt = {grid.dt:.6g}"
        )
    return x.replace(trailing_integral(x.values, grid.dt, lag) / (lag * grid.dt))


def preprocess(x, m: float | None, p: float):
    """Clip at ``m`` (skipped when ``m`` is None) and then mollify with window ``1/p``."""
    if m is not None:
        x = clip(x, m)
    return mollify(x, p)


def max_slope(x) -> np.ndarray:
    """Largest ``|x[j+1] - x[j]| / dt`` of each path."""
    return np.max(np.abs(np.diff(x.values, axis=-1)), axis=-1) / x.grid.dt
