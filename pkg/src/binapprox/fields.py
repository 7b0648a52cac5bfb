"""Drift fields with certified bounds, plus a few standard ones."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class DriftField:
    """A drift ``f(x, t)`` with caller-certified bounds.

    ``c_f`` bounds ``|f| + |df/dx|`` everywhere and ``sup_f`` bounds ``|f|``
    (defaults to ``c_f``). ``f`` must accept numpy arrays for ``x``.
    """

    f: Callable
    c_f: float
    sup_f: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not np.isfinite(self.c_f) or self.c_f < 0:
            raise InvalidArgumentError(f"c_f must be finite and nonnegative, got {self.c_f}")
        if self.sup_f is None:
            object.__setattr__(self, "sup_f", float(self.c_f))
        if self.sup_f > self.c_f:
            raise InvalidArgumentError("sup_f cannot exceed c_f")

    def __call__(self, x, t):
        return np.broadcast_to(np.asarray(self.f(x, t), dtype=float), np.shape(x))

    def probe(self, x_lo: float, x_hi: float, T: float, size: int = 64):
        """Largest ``|f|`` and ``|f| + |df/dx|`` seen on a ``size x size`` lattice.

        The derivative is a central difference.
        """
        xs = np.linspace(x_lo, x_hi, size)
        h = 1e-6 * max(1.0, abs(x_lo), abs(x_hi))
        sup_f = sup_cf = 0.0
        for t in np.linspace(0.0, T, size):
            fv = np.abs(self(xs, t))
            dfdx = np.abs(self(xs + h, t) - self(xs - h, t)) / (2 * h)
            sup_f = max(sup_f, float(fv.max()))
            sup_cf = max(sup_cf, float((fv + dfdx).max()))
        return sup_f, sup_cf

    def certify(self, x_lo: float, x_hi: float, T: float, K: float | None = None):
        """Reject the field if the lattice probe contradicts ``c_f`` or ``K``."""
        sup_seen, cf_seen = self.probe(x_lo, x_hi, T)
        slack = 1e-9 * max(1.0, self.c_f)
        if cf_seen > self.c_f + 1e-4 * max(1.0, self.c_f):
            raise InvalidArgumentError(
                f"drift {self.name!r}: probed |f|+|df/dx| = {cf_seen:.6g} exceeds c_f = {self.c_f}"
            )
        if K is not None and sup_seen > K + slack:
            raise InvalidArgumentError(
                f"drift budget K = {K} is below the probed sup|f| = {sup_seen:.6g}"
            )
        return sup_seen, cf_seen


def zero_drift() -> DriftField:
    return DriftField(lambda x, t: np.zeros_like(x, dtype=float), c_f=0.0, name="zero")


def constant_drift(c: float) -> DriftField:
    c = float(c)
    return DriftField(lambda x, t: np.full_like(x, c, dtype=float), c_f=abs(c), name=f"constant({c})")


def capped_mean_reversion(cap: float = 2.0) -> DriftField:
    """``-x/2`` near zero, smoothly saturating: ``f(x) = -(cap/2) tanh(x/cap)``.

    ``|f| <= cap/2`` and ``|df/dx| <= 1/2``.
    """
    cap = float(cap)
    if cap <= 0:
        raise InvalidArgumentError("cap must be positive")
    return DriftField(
        lambda x, t: -0.5 * cap * np.tanh(np.asarray(x, dtype=float) / cap),
        c_f=0.5 * cap + 0.5,
        sup_f=0.5 * cap,
        name=f"capped_mean_reversion({cap})",
    )


def constant_field(c: float):
    """Plain ``(x, t) -> c`` callable, e.g. a diffusion coefficient."""
    c = float(c)
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), c)


DRIFTS = {
    "zero": lambda param=None: zero_drift(),
    "constant": lambda param=0.0: constant_drift(param),
    "capped_mean_reversion": lambda param=2.0: capped_mean_reversion(param),
}


def drift_by_name(name: str, param=None) -> DriftField:
    try:
        factory = DRIFTS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown drift {name!r}; choose from {sorted(DRIFTS)}") from None
    return factory() if param is None else factory(param)
