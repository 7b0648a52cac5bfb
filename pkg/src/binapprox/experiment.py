"""Config-driven experiments: ensembles, parameter sweeps and the epsilon/3 tuner."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .adaptive import HoelderParams, track_adaptive, check_hoelder
from .errors import (BudgetExceededError, InvalidArgumentError, NumericOverflowError,
                     PreconditionError)
from .fields import DriftField, constant_field, drift_by_name
from .grid import PathEnsemble, ProcessSpec, SampledPath, TimeGrid, generate
from .metrics import estimate_from_integrals, path_integrals
from .ode_binary import solve_binary_ode
from .preprocess import clip, mollify
from .tracker import TrackerParams, track

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

PIPELINES = ("thm1_affine", "thm3_step", "thm2_ode", "thm4_ode_step", "thm5_log", "adaptive")


class ConfigError(InvalidArgumentError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field is one config-file key."""

    # process
    kind: str = "wiener"
    T: float = 1.0
    n_fine: int = 8192
    x0: float = 0.0
    drift: str = "zero"
    drift_param: float | None = None
    diffusion: float = 1.0
    level: float = 0.0
    jump_time: float | None = None
    jump_level: float = 1.0
    table_times: list = field(default_factory=list)
    table_values: list = field(default_factory=list)
    # sweep
    pipeline: str = "thm1_affine"
    q: float = 2.0
    norm: str = "X"
    m: list = field(default_factory=lambda: [5.0])
    p: list = field(default_factory=lambda: [8.0])
    n: list = field(default_factory=lambda: [64])
    paths: int = 100
    seed: int = 0
    chunk: int = 250
    out: str = "out"
    epsilon: float | None = None
    validate_paths: int = 0
    svg: bool = False
    # adaptive pipeline
    hoelder_q: float = 1.0
    theta: float = 0.05
    eps0: float = 0.05
    sigma: float = 1.0
    sigma_cap: float | None = None
    # pricing
    S0: float = 100.0
    strike: float = 100.0
    vol: float = 0.2
    r: float = 0.0
    option: str = "call"
    demo: bool = False

    def validate(self) -> "ExperimentConfig":
        def bad(key, msg):
            raise ConfigError(f"config key '{key}': {msg}")

        for key in ("m", "p", "n"):
            vals = getattr(self, key)
            if not isinstance(vals, (list, tuple)):
                vals = [vals]
                setattr(self, key, vals)
            if not vals:
                bad(key, "parameter list is empty")
            if any(not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0 for v in vals):
                bad(key, f"expected positive numbers, got {vals}")
        if any(int(v) != v for v in self.n):
            bad("n", f"coarse counts must be integers, got {self.n}")
        self.n = [int(v) for v in self.n]
        if self.pipeline not in PIPELINES:
            bad("pipeline", f"expected one of {PIPELINES}, got {self.pipeline!r}")
        if not (isinstance(self.q, (int, float)) and self.q >= 1):
            bad("q", f"must be >= 1, got {self.q}")
        if self.norm not in ("X", "Xc"):
            bad("norm", f"expected 'X' or 'Xc', got {self.norm!r}")
        if not (isinstance(self.T, (int, float)) and self.T > 0):
            bad("T", f"must be positive, got {self.T}")
        if not (isinstance(self.n_fine, int) and self.n_fine >= 1):
            bad("n_fine", f"must be a positive integer, got {self.n_fine}")
        for n in self.n:
            if self.n_fine % n:
                bad("n_fine", f"{self.n_fine} is not divisible by coarse count n={n}")
        for key in ("paths", "chunk"):
            v = getattr(self, key)
            if not (isinstance(v, int) and v >= 1):
                bad(key, f"must be a positive integer, got {v}")
        if self.epsilon is not None and not self.epsilon > 0:
            bad("epsilon", f"must be positive, got {self.epsilon}")
        if self.option not in ("call", "put"):
            bad("option", f"expected 'call' or 'put', got {self.option!r}")
        try:
            self.process_spec()
        except InvalidArgumentError as exc:
            bad("kind", str(exc))
        return self

    def process_spec(self) -> ProcessSpec:
        if self.kind == "ito":
            return ProcessSpec("ito", x0=self.x0, drift=self.drift_field(),
                               diffusion=constant_field(self.diffusion))
        return ProcessSpec(self.kind, x0=self.x0, level=self.level, jump_time=self.jump_time,
                           jump_level=self.jump_level, table_times=tuple(self.table_times),
                           table_values=tuple(self.table_values))

    def drift_field(self) -> DriftField:
        try:
            return drift_by_name(self.drift, self.drift_param)
        except InvalidArgumentError as exc:
            raise ConfigError(f"config key 'drift': {exc}") from None

    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n_fine)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; key '{nested[0]}' holds a table")
    return ExperimentConfig(**data).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    return config_from_dict(data)


@dataclass
class ReportRow:
    m: float
    p: float
    n: int
    M: float
    error: float
    std_error: float
    tracking_error: float
    tracking_std_error: float
    clip_error: float
    mollify_error: float
    max_sup_error: float
    bound: float
    bound_ok: bool
    verified: bool
    n_paths: int
    n_failed: int


@dataclass
class ConvergenceReport:
    rows: list
    config: ExperimentConfig | None = None

    @property
    def violations(self) -> list:
        """Rows whose preconditions held but whose sup error exceeds the bound."""
        return [r for r in self.rows if r.verified and not r.bound_ok]

    def to_csv(self, path) -> None:
        names = [f.name for f in fields(ReportRow)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in self.rows:
                w.writerow([_fmt(getattr(row, k)) for k in names])

    def plot_data(self, path) -> None:
        """One series per ``(m, p)``: columns ``series, n, error, std_error``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["series", "n", "error", "std_error"])
            for row in sorted(self.rows, key=lambda r: (r.m, r.p, r.n)):
                w.writerow([f"m={_fmt(row.m)},p={_fmt(row.p)}", row.n, _fmt(row.error),
                            _fmt(row.std_error)])

    def plot_svg(self, path) -> None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        series = {}
        for row in self.rows:
            series.setdefault((row.m, row.p), []).append((row.n, row.error))
        for (m, p), pts in sorted(series.items()):
            pts.sort()
            ax.loglog([a for a, _ in pts], [b for _, b in pts], marker="o",
                      label=f"m={_fmt(m)}, p={_fmt(p)}")
        ax.set_xlabel("n")
        ax.set_ylabel("error")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class CellResult:
    """Per-path quantities for one ``(m, p, n)`` cell and one chunk of paths."""

    total: np.ndarray           # int |x - approx|^q
    total_terminal: np.ndarray  # |x(T) - approx(T)|^q
    tracking: np.ndarray        # int |x_mp - approx|^q
    tracking_terminal: np.ndarray
    clip_part: np.ndarray
    moll_part: np.ndarray
    sup: np.ndarray             # sup |tracked target - approx| per path
    verified: np.ndarray
    bound: float


def _integrals(diff: np.ndarray, dt, q):
    return path_integrals(diff, dt, q), np.abs(diff[..., -1]) ** q


def run_cell(cfg: ExperimentConfig, x: PathEnsemble, m: float, p: float, n: int) -> CellResult:
    """Run one pipeline on a chunk of paths and collect per-path errors."""
    grid = x.grid
    dt, q = grid.dt, cfg.q
    if cfg.pipeline == "adaptive":
        return _run_adaptive(cfg, x, n)

    # for thm5_log the generated process plays the role of log x, so errors
    # are measured on the log scale where the tracker is a step tracker
    clipped = clip(x, m)
    target = mollify(clipped, p)
    values = np.asarray(x.values)
    if cfg.pipeline in ("thm1_affine", "thm3_step", "thm5_log"):
        mode = "affine" if cfg.pipeline == "thm1_affine" else "step"
        params = TrackerParams(n, m, p)
        yb = track(target, params, mode)
        approx = np.asarray(yb.evaluate(grid).values)
        verified = np.asarray(yb.verified) & (np.abs(values[:, 0]) <= m)
        bound = yb.bound()
        sup = np.max(np.abs(approx - np.asarray(target.values)), axis=-1)
    else:
        f = cfg.drift_field()
        mode = "affine" if cfg.pipeline == "thm2_ode" else "step"
        params = TrackerParams(n, m, p, K=f.sup_f)
        sol = solve_binary_ode(target, values[:, 0], f, params, mode)
        approx = np.asarray(sol.u.values)
        verified = np.asarray(sol.verified) & (np.abs(values[:, 0]) <= m)
        # Euler roundoff allowance on top of the analytic bound
        bound = sol.bound() + 1e-9
        sup = np.max(np.abs(approx - np.asarray(target.values)), axis=-1)

    tot, tot_T = _integrals(values - approx, dt, q)
    trk, trk_T = _integrals(np.asarray(target.values) - approx, dt, q)
    return CellResult(
        total=tot, total_terminal=tot_T, tracking=trk, tracking_terminal=trk_T,
        clip_part=path_integrals(values - np.asarray(clipped.values), dt, q),
        moll_part=path_integrals(np.asarray(clipped.values) - np.asarray(target.values), dt, q),
        sup=sup, verified=np.broadcast_to(verified, sup.shape), bound=bound,
    )


def _run_adaptive(cfg, x, n):
    grid = x.grid
    sigma = SampledPath(grid, np.full(len(grid), float(cfg.sigma)))
    cap = cfg.sigma if cfg.sigma_cap is None else cfg.sigma_cap
    hp = HoelderParams(cfg.hoelder_q, cfg.theta, cfg.eps0, cap, sigma)
    rows = {k: [] for k in ("tot", "totT", "sup", "ok")}
    bound = 0.0
    for path in x:
        cert = check_hoelder(path, hp)
        if not cert.holds:
            continue
        tr = track_adaptive(path, hp, n, certificate=cert)
        approx = tr.evaluate(grid).values
        tot, totT = _integrals(path.values - approx, grid.dt, cfg.q)
        rows["tot"].append(tot)
        rows["totT"].append(totT)
        rows["sup"].append(np.max(np.abs(approx - tr.target.values)))
        rows["ok"].append(tr.verified)
        bound = max(bound, tr.bound())
    if not rows["tot"]:
        raise PreconditionError("no path in the chunk passed the Hoelder certificate")
    tot = np.array(rows["tot"])
    totT = np.array(rows["totT"])
    zero = np.zeros_like(tot)
    return CellResult(tot, totT, tot, totT, zero, zero, np.array(rows["sup"]),
                      np.array(rows["ok"]), bound + 1e-9)


def _chunks(total: int, size: int):
    for start in range(0, total, size):
        yield start, min(size, total - start)


def measure(cfg: ExperimentConfig, m: float, p: float, n: int, n_paths: int | None = None,
            seed: int | None = None) -> ReportRow:
    """One report row, streaming the ensemble through in chunks of ``cfg.chunk`` paths."""
    spec = cfg.process_spec()
    grid = cfg.grid()
    n_paths = cfg.paths if n_paths is None else n_paths
    seed = cfg.seed if seed is None else seed
    parts = []
    failed = 0
    for start, count in _chunks(n_paths, cfg.chunk):
        try:
            x, nf = generate(spec, grid, count, seed + start, drop_failed=True)
        except NumericOverflowError:
            failed += count
            continue
        failed += nf
        parts.append(run_cell(cfg, x, m, p, n))
    if not parts:
        raise NumericOverflowError("every path failed numerically")
    return _aggregate(cfg, parts, m, p, n, failed)


def _aggregate(cfg, parts, m, p, n, failed) -> ReportRow:
    cat = lambda name: np.concatenate([getattr(c, name) for c in parts])
    q = cfg.q
    xc = cfg.norm == "Xc"
    total = estimate_from_integrals(cat("total"), q, cat("total_terminal") if xc else None)
    tracking = estimate_from_integrals(cat("tracking"), q, cat("tracking_terminal") if xc else None)
    clip_e = estimate_from_integrals(cat("clip_part"), q)
    moll_e = estimate_from_integrals(cat("moll_part"), q)
    sup = cat("sup")
    verified = cat("verified")
    bound = max(c.bound for c in parts)
    ok_paths = sup[verified] <= bound + 1e-9
    M = TrackerParams(n, m, p).M if cfg.pipeline != "adaptive" else float("nan")
    if cfg.pipeline in ("thm2_ode", "thm4_ode_step"):
        M = TrackerParams(n, m, p, K=cfg.drift_field().sup_f).M
    return ReportRow(
        m=float(m), p=float(p), n=int(n), M=float(M),
        error=total.value, std_error=total.std_error,
        tracking_error=tracking.value, tracking_std_error=tracking.std_error,
        clip_error=clip_e.value, mollify_error=moll_e.value,
        max_sup_error=float(sup.max()), bound=float(bound),
        bound_ok=bool(ok_paths.all()), verified=bool(verified.all()),
        n_paths=int(sup.size), n_failed=int(failed),
    )


def run_experiment(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> ConvergenceReport:
    """Sweep every ``(m, p, n)`` of the config and write the report files.

    Every cell sees the same ensemble (same seeds), so rows are comparable
    and the output is a pure function of the config.
    """
    cfg.validate()
    rows = []
    ms = [None] if cfg.pipeline == "adaptive" else cfg.m
    ps = [None] if cfg.pipeline == "adaptive" else cfg.p
    for m in ms:
        for p in ps:
            for n in cfg.n:
                row = measure(cfg, m if m is not None else 1.0, p if p is not None else 1.0, n)
                log.debug("m=%s p=%s n=%s error=%.6g sup=%.6g bound=%.6g", row.m, row.p, row.n,
                         row.error, row.max_sup_error, row.bound)
                rows.append(row)
    report = ConvergenceReport(rows, cfg)
    if write:
        out = cfg.out if out_dir is None else out_dir
        os.makedirs(out, exist_ok=True)
        report.to_csv(os.path.join(out, "convergence.csv"))
        report.plot_data(os.path.join(out, "plot_data.csv"))
        if cfg.svg:
            report.plot_svg(os.path.join(out, "convergence.svg"))
    return report


DEFAULT_M = (1, 2, 3, 4, 6, 8, 12, 16, 24, 32)
DEFAULT_P = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024)


@dataclass
class TuneResult:
    m: float
    p: float
    n: int
    n_min: int
    M: float
    clip_error: float
    clip_std_error: float
    mollify_error: float
    mollify_std_error: float
    tracker_bound: float
    epsilon: float

    def to_csv(self, path) -> None:
        d = asdict(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(d))
            w.writerow([_fmt(v) for v in d.values()])


def recipe_n(M: float, T: float, q: float, epsilon: float, norm: str = "X") -> int:
    """Smallest ``n`` with ``c * M * T/n <= epsilon/3``, ``c = 2 T^(1/q)`` (+2 for the Xc norm)."""
    c = 2.0 * T ** (1.0 / q) + (2.0 if norm == "Xc" else 0.0)
    target = epsilon / 3.0 * (1 + 1e-12)
    n = max(1, math.ceil(c * M * T / target))
    while c * M * T / n > target:
        n += 1
    return n


def tune_three_epsilon(ensemble: PathEnsemble, q: float, epsilon: float,
                       m_values=DEFAULT_M, p_values=DEFAULT_P, n_fine: int | None = None,
                       norm: str = "X") -> TuneResult:
    """Pick ``(m, p, n)`` so each error contribution is at most ``epsilon/3``.

    ``m`` is the smallest candidate whose measured clipping error fits, then
    ``p`` the smallest whose measured mollification error fits, then ``n`` the
    smallest divisor of ``n_fine`` (default: the ensemble's) at or above the
    closed-form requirement on the tracker bound.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    grid = ensemble.grid
    dt = grid.dt
    third = epsilon / 3.0
    xc = norm == "Xc"

    def est(diff):
        I = path_integrals(diff, dt, q)
        return estimate_from_integrals(I, q, np.abs(diff[:, -1]) ** q if xc else None)

    values = np.asarray(ensemble.values)
    best = {}
    chosen_m = clip_est = None
    for m in sorted(m_values):
        e = est(values - np.clip(values, -m, m))
        best["clip_error"] = min(best.get("clip_error", np.inf), e.value)
        if e.value <= third:
            chosen_m, clip_est = m, e
            break
    if chosen_m is None:
        raise BudgetExceededError(f"no m in {list(m_values)} brings the clipping error to {third:.6g}",
                                  best)
    clipped = clip(ensemble, chosen_m)
    chosen_p = moll_est = None
    for p in sorted(p_values):
        if grid.steps(1.0 / p) < 1:
            break
        e = est(np.asarray(clipped.values) - np.asarray(mollify(clipped, p).values))
        best["mollify_error"] = min(best.get("mollify_error", np.inf), e.value)
        if e.value <= third:
            chosen_p, moll_est = p, e
            break
    if chosen_p is None:
        best["m"] = chosen_m
        raise BudgetExceededError(
            f"no p in {list(p_values)} brings the mollification error to {third:.6g}", best)

    M = 2.0 * chosen_m * chosen_p
    n_min = recipe_n(M, grid.T, q, epsilon, norm)
    n_fine = grid.n_fine if n_fine is None else int(n_fine)
    divisors = [d for d in range(n_min, n_fine + 1) if n_fine % d == 0]
    if not divisors:
        best.update(m=chosen_m, p=chosen_p, n_min=n_min)
        raise BudgetExceededError(
            f"the recipe needs n >= {n_min} but the fine grid has only {n_fine} steps", best)
    n = divisors[0]
    c = 2.0 * grid.T ** (1.0 / q) + (2.0 if xc else 0.0)
    return TuneResult(chosen_m, chosen_p, n, n_min, M, clip_est.value, clip_est.std_error,
                      moll_est.value, moll_est.std_error, c * M * grid.T / n, epsilon)
