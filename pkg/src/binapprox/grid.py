"""Uniform time grids, sampled paths and the process generators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import InvalidArgumentError, NumericOverflowError

Field = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = j*T/n_fine`` on ``[0, T]``."""

    T: float
    n_fine: int

    def __post_init__(self):
        if not np.isfinite(self.T) or self.T <= 0:
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T}")
        if int(self.n_fine) != self.n_fine or self.n_fine < 1:
            raise InvalidArgumentError(f"n_fine must be a positive integer, got {self.n_fine}")
        object.__setattr__(self, "n_fine", int(self.n_fine))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.n_fine

    @property
    def times(self) -> np.ndarray:
        t = self.T * np.arange(self.n_fine + 1) / self.n_fine
        t[-1] = self.T
        return t

    def __len__(self):
        return self.n_fine + 1

    def refinement(self, n: int) -> int:
        """Fine steps per coarse interval when the grid is split into ``n`` pieces."""
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"coarse count n must be a positive integer, got {n}")
        if self.n_fine % int(n):
            raise InvalidArgumentError(
                f"coarse grid n={n} is not aligned with the fine grid n_fine={self.n_fine}"
            )
        return self.n_fine // int(n)

    def steps(self, duration: float) -> float:
        """``duration`` measured in fine steps, snapped to an integer when within roundoff."""
        k = duration / self.dt
        if abs(k - round(k)) < 1e-9 * max(1.0, abs(k)):
            k = float(round(k))
        return k


def make_grid(T: float, n_fine: int) -> TimeGrid:
    return TimeGrid(T, n_fine)


@dataclass(frozen=True)
class SampledPath:
    """Values of one realization at every point of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.grid),):
            raise InvalidArgumentError(
                f"expected {len(self.grid)} samples for this grid, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("path values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> float:
        """Value at grid time ``t`` (must be a grid point)."""
        j = self.grid.steps(t)
        if j != int(j) or not 0 <= j <= self.grid.n_fine:
            raise InvalidArgumentError(f"t={t} is not a point of the grid")
        return float(self.values[int(j)])

    def replace(self, values) -> "SampledPath":
        return SampledPath(self.grid, values)


@dataclass(frozen=True)
class PathEnsemble:
    """A stack of paths on a common grid; ``values[i]`` is path ``i``."""

    grid: TimeGrid
    values: np.ndarray
    seeds: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.grid):
            raise InvalidArgumentError(
                f"expected shape (n_paths, {len(self.grid)}), got {values.shape}"
            )
        if values.shape[0] == 0:
            raise InvalidArgumentError("ensemble is empty")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_paths

    def __iter__(self) -> Iterator[SampledPath]:
        for row in self.values:
            yield SampledPath(self.grid, row)

    def __getitem__(self, i) -> SampledPath:
        return SampledPath(self.grid, self.values[i])

    def replace(self, values) -> "PathEnsemble":
        return PathEnsemble(self.grid, values, self.seeds)

    @classmethod
    def from_paths(cls, paths: Sequence[SampledPath]) -> "PathEnsemble":
        if not paths:
            raise InvalidArgumentError("ensemble is empty")
        grid = paths[0].grid
        if any(p.grid != grid for p in paths):
            raise InvalidArgumentError("paths do not share a grid")
        return cls(grid, np.stack([p.values for p in paths]))


def path_seeds(seed_base: int, n_paths: int) -> np.ndarray:
    """Per-path seeds: path ``i`` of an ensemble uses ``seed_base + i``."""
    return int(seed_base) + np.arange(n_paths)


def _wiener_increments(grid: TimeGrid, seeds) -> np.ndarray:
    scale = np.sqrt(grid.dt)
    return np.stack(
        [np.random.default_rng(int(s)).standard_normal(grid.n_fine) * scale for s in seeds]
    )


def _cumulate(increments: np.ndarray, start=0.0) -> np.ndarray:
    out = np.empty(increments.shape[:-1] + (increments.shape[-1] + 1,))
    out[..., 0] = start
    np.cumsum(increments, axis=-1, out=out[..., 1:])
    out[..., 1:] += start
    return out


def gen_wiener(grid: TimeGrid, seed: int) -> SampledPath:
    """Standard Wiener path, ``w(0) = 0``, increments ``N(0, dt)``."""
    return SampledPath(grid, _cumulate(_wiener_increments(grid, [seed])[0]))


def gen_wiener_ensemble(grid: TimeGrid, n_paths: int, seed_base: int) -> PathEnsemble:
    seeds = path_seeds(seed_base, n_paths)
    return PathEnsemble(grid, _cumulate(_wiener_increments(grid, seeds)), seeds)


def _euler_maruyama(grid, f, b, x0, dw):
    t = grid.times
    dt = grid.dt
    x = np.empty(dw.shape[:-1] + (grid.n_fine + 1,))
    x[..., 0] = x0
    cur = x[..., 0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(grid.n_fine):
            cur = cur + f(cur, t[j]) * dt + b(cur, t[j]) * dw[..., j]
            x[..., j + 1] = cur
    return x


def gen_ito(grid: TimeGrid, f: Field, b: Field, x0: float, seed: int) -> SampledPath:
    """Euler-Maruyama path of ``dx = f(x,t) dt + b(x,t) dw``.

    The Wiener increments are those of ``gen_wiener(grid, seed)``, so
    ``f = 0, b = 1`` reproduces that path exactly.
    """
    dw = _wiener_increments(grid, [seed])[0]
    x = _euler_maruyama(grid, _vectorize(f), _vectorize(b), float(x0), dw)
    if not np.all(np.isfinite(x)):
        raise NumericOverflowError("Euler-Maruyama path became non-finite")
    return SampledPath(grid, x)


def gen_ito_ensemble(grid: TimeGrid, f: Field, b: Field, x0: float, n_paths: int,
                     seed_base: int, drop_failed: bool = False):
    """Ensemble version of :func:`gen_ito` with per-path seeds ``seed_base + i``.

    With ``drop_failed`` non-finite paths are discarded and the number of
    failures is returned alongside the ensemble; otherwise they raise.
    """
    seeds = path_seeds(seed_base, n_paths)
    dw = _wiener_increments(grid, seeds)
    x = _euler_maruyama(grid, _vectorize(f), _vectorize(b), float(x0), dw)
    ok = np.all(np.isfinite(x), axis=1)
    if drop_failed:
        if not ok.any():
            raise NumericOverflowError("every Euler-Maruyama path became non-finite")
        return PathEnsemble(grid, x[ok], seeds[ok]), int((~ok).sum())
    if not ok.all():
        raise NumericOverflowError(f"{int((~ok).sum())} Euler-Maruyama paths became non-finite")
    return PathEnsemble(grid, x, seeds)


def _vectorize(fn):
    def wrapped(x, t):
        return np.broadcast_to(np.asarray(fn(x, t), dtype=float), np.shape(x))
    return wrapped


def gen_example(grid: TimeGrid, which: str) -> SampledPath:
    """Deterministic fixtures: ``zero`` (x = 0) or ``step`` (0 before T/2, 1 from T/2 on)."""
    if which == "zero":
        return SampledPath(grid, np.zeros(len(grid)))
    if which == "step":
        j = np.arange(len(grid))
        # 2j >= n  <=>  t_j >= T/2, without float comparisons
        return SampledPath(grid, (2 * j >= grid.n_fine).astype(float))
    raise InvalidArgumentError(f"unknown example {which!r}; expected 'zero' or 'step'")


PROCESS_KINDS = ("wiener", "ito", "constant", "step_jump", "custom_table")


@dataclass(frozen=True)
class ProcessSpec:
    """Description of an underlying process.

    kind
        ``wiener``; ``ito`` (needs ``drift`` and ``diffusion`` callables and
        ``x0``); ``constant`` (``level``); ``step_jump`` (``level`` before
        ``jump_time``, ``jump_level`` from it on); ``custom_table``
        (``table_times``/``table_values`` linearly interpolated).
    """

    kind: str
    x0: float = 0.0
    drift: Field | None = None
    diffusion: Field | None = None
    level: float = 0.0
    jump_time: float | None = None
    jump_level: float = 1.0
    table_times: tuple = ()
    table_values: tuple = ()

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise InvalidArgumentError(f"unknown process kind {self.kind!r}")
        if self.kind == "ito" and (self.drift is None or self.diffusion is None):
            raise InvalidArgumentError("ito process needs both drift and diffusion")
        if self.kind == "custom_table":
            if len(self.table_times) < 1 or len(self.table_times) != len(self.table_values):
                raise InvalidArgumentError("custom_table needs matching, nonempty times and values")
            if np.any(np.diff(self.table_times) <= 0):
                raise InvalidArgumentError("custom_table times must be strictly increasing")

    @property
    def random(self) -> bool:
        return self.kind in ("wiener", "ito")

    def deterministic_path(self, grid: TimeGrid) -> np.ndarray:
        t = grid.times
        if self.kind == "constant":
            return np.full(len(grid), float(self.level))
        if self.kind == "step_jump":
            jt = grid.T / 2 if self.jump_time is None else self.jump_time
            j0 = grid.steps(jt)
            return np.where(np.arange(len(grid)) >= j0, float(self.jump_level), float(self.level))
        if self.kind == "custom_table":
            return np.interp(t, self.table_times, self.table_values)
        raise InvalidArgumentError(f"{self.kind} is not deterministic")


def generate(spec: ProcessSpec, grid: TimeGrid, n_paths: int, seed_base: int,
             drop_failed: bool = False):
    """Ensemble of ``n_paths`` paths of ``spec``; returns ``(ensemble, n_failed)``."""
    if spec.kind == "wiener":
        return gen_wiener_ensemble(grid, n_paths, seed_base), 0
    if spec.kind == "ito":
        if drop_failed:
            return gen_ito_ensemble(grid, spec.drift, spec.diffusion, spec.x0, n_paths,
                                    seed_base, drop_failed=True)
        return gen_ito_ensemble(grid, spec.drift, spec.diffusion, spec.x0, n_paths, seed_base), 0
    row = spec.deterministic_path(grid)
    return PathEnsemble(grid, np.tile(row, (n_paths, 1)), path_seeds(seed_base, n_paths)), 0
