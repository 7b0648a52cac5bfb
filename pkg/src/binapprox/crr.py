"""Cox-Ross-Rubinstein trees built from multiplicative tracker output.

Prices are discounted by the bond ``B_k = rho**k``; the discounted stock
moves by ``(1 + d2)`` or ``(1 - d1)`` per period and is a martingale under
the risk-neutral up-probability ``d1 / (d1 + d2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb, erf, exp, log, sqrt
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .grid import SampledPath
from .log_tracker import MultiplicativePath, rates_from_logslope, track_log
from .tracker import TrackerParams


def risk_neutral_prob(d1: float, d2: float) -> float:
    """Up-probability making ``S~`` a martingale: ``p*d2 - (1-p)*d1 = 0``."""
    if not (0 < d1 < 1 and d2 > 0):
        raise InvalidArgumentError(f"need 0 < d1 < 1 and d2 > 0, got d1={d1}, d2={d2}")
    return d1 / (d1 + d2)


@dataclass(frozen=True)
class CrrTree:
    """Recombining tree; ``d1``, ``d2`` are per-period (not per-unit-time) rates."""

    S0: float
    d1: float
    d2: float
    rho: float
    n: int

    def __post_init__(self):
        if not self.S0 > 0:
            raise InvalidArgumentError("S0 must be positive")
        if not (0 < self.d1 < 1 and self.d2 > 0):
            raise InvalidArgumentError(f"need 0 < d1 < 1 and d2 > 0, got d1={self.d1}, d2={self.d2}")
        if not self.rho >= 1:
            raise InvalidArgumentError(f"rho must be >= 1, got {self.rho}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError("n must be a positive integer")

    @property
    def p_star(self) -> float:
        return risk_neutral_prob(self.d1, self.d2)

    def discounted(self, k: int) -> np.ndarray:
        """Discounted prices at level ``k``, index = number of up moves."""
        i = np.arange(k + 1)
        return self.S0 * (1 + self.d2) ** i * (1 - self.d1) ** (k - i)

    def node_value(self, k: int, i: int) -> float:
        return float(self.S0 * (1 + self.d2) ** i * (1 - self.d1) ** (k - i))

    def prices(self, k: int) -> np.ndarray:
        """Undiscounted prices ``rho**k * S~`` at level ``k``."""
        return self.rho ** k * self.discounted(k)

    def to_csv(self, path) -> None:
        """Columns ``k, i, discounted, price``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "i", "discounted", "price"])
            for k in range(self.n + 1):
                for i, (s, S) in enumerate(zip(self.discounted(k), self.prices(k))):
                    w.writerow([k, i, repr(float(s)), repr(float(S))])


def price_european(tree: CrrTree, payoff: Callable) -> float:
    """``rho**-n * E*[payoff(S_n)]`` by backward induction.

    ``payoff`` maps an array of undiscounted terminal prices to payoffs.
    """
    v = np.asarray(payoff(tree.prices(tree.n)), dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("payoff is not finite on every terminal node")
    p = tree.p_star
    for _ in range(tree.n):
        v = (p * v[1:] + (1 - p) * v[:-1]) / tree.rho
    return float(v[0])


def price_european_sum(tree: CrrTree, payoff: Callable) -> float:
    """Same price from the binomial terminal distribution directly."""
    n = tree.n
    p = tree.p_star
    v = np.asarray(payoff(tree.prices(n)), dtype=float)
    w = np.array([comb(n, i) * p ** i * (1 - p) ** (n - i) for i in range(n + 1)])
    return float(np.dot(w, v) / tree.rho ** n)


def call(strike: float):
    return lambda S: np.maximum(np.asarray(S) - strike, 0.0)


def put(strike: float):
    return lambda S: np.maximum(strike - np.asarray(S), 0.0)


def tree_from_tracker(y: MultiplicativePath, rho: float = 1.0):
    """The complete-market tree in which ``y`` is one realized discounted path.

    Returns ``(tree, ups)`` where ``ups[k]`` is the number of up moves after
    ``k`` periods, so the realized node at level ``k`` is ``(k, ups[k])``.
    """
    if np.ndim(y.eta) != 1:
        raise InvalidArgumentError("tree_from_tracker takes a single path")
    d1, d2 = y.rates
    delta = y.delta
    moves = np.diff(y.eta)
    step = y.M * delta
    if not (np.all(np.abs(y.directions) == 1)
            and np.allclose(np.abs(moves), step, rtol=1e-9, atol=1e-12 * max(1.0, np.max(np.abs(y.eta))))):
        raise InvalidArgumentError("the path does not move by constant factors")
    tree = CrrTree(float(y.y0), d1 * delta, d2 * delta, rho, y.n)
    ups = np.concatenate([[0], np.cumsum(y.directions > 0)])
    return tree, ups


def tree_from_volatility(S0: float, sigma: float, T: float, n: int, r: float = 0.0) -> CrrTree:
    """Tree whose log moves are ``+-sigma*sqrt(delta)``, i.e. log-slope ``M = sigma/sqrt(delta)``."""
    delta = T / n
    d1, d2 = rates_from_logslope(sigma / np.sqrt(delta), delta)
    return CrrTree(S0, d1 * delta, d2 * delta, exp(r * delta), n)


def implied_volatility(tree: CrrTree, T: float) -> float:
    """Volatility matching the tree's symmetric log move: ``log(1+d2) / sqrt(delta)``."""
    return log(1 + tree.d2) / np.sqrt(T / tree.n)


def black_scholes_call(S0: float, strike: float, sigma: float, T: float, r: float = 0.0) -> float:
    if sigma <= 0 or T <= 0:
        return max(S0 - strike * exp(-r * T), 0.0)
    d1 = (log(S0 / strike) + (r + 0.5 * sigma * sigma) * T) / (sigma * sqrt(T))
    d2 = d1 - sigma * sqrt(T)
    N = lambda z: 0.5 * (1.0 + erf(z / sqrt(2.0)))
    return S0 * N(d1) - strike * exp(-r * T) * N(d2)


@dataclass(frozen=True)
class MarketDemo:
    """Side-by-side sampled discounted prices and the tracker's complete-market path."""

    times: np.ndarray
    sampled: np.ndarray
    tracked: np.ndarray
    sup_distance: float
    max_log_distance: float
    tree: CrrTree
    ups: np.ndarray
    strike: float
    tree_price: float
    realized_vol: float
    reference_price: float

    def to_csv(self, path) -> None:
        """Columns ``t_k, sampled, tracked, node_ups``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_k", "sampled", "tracked", "node_ups"])
            for row in zip(self.times, self.sampled, self.tracked, self.ups):
                w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])


def complete_market_demo(discounted: SampledPath, params: TrackerParams, r: float = 0.0,
                         strike: float | None = None) -> MarketDemo:
    """Track a discounted price path, build its CRR tree and price a call in it.

    The reference price is Black-Scholes at the path's realized volatility,
    so the gap shows how the constant-rate tree prices against the
    volatility the data actually had.
    """
    y = track_log(discounted, params)
    tree, ups = tree_from_tracker(y, exp(r * y.delta))
    r_ = discounted.grid.refinement(params.n)
    sampled = np.asarray(discounted.values)[::r_]
    tracked = y.values
    strike = float(sampled[0]) if strike is None else float(strike)
    logs = np.log(np.asarray(discounted.values))
    realized = float(np.sqrt(np.sum(np.diff(logs) ** 2) / discounted.grid.T))
    return MarketDemo(
        times=y.coarse_times,
        sampled=sampled,
        tracked=tracked,
        sup_distance=float(np.max(np.abs(sampled - tracked))),
        max_log_distance=float(np.max(np.abs(np.log(sampled) - y.eta))),
        tree=tree,
        ups=ups,
        strike=strike,
        tree_price=price_european(tree, call(strike)),
        realized_vol=realized,
        reference_price=black_scholes_call(float(sampled[0]), strike, realized, discounted.grid.T, r),
    )
