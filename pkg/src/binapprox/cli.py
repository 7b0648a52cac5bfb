"""Command-line front end: ``binapprox <command> [--config FILE] [options]``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from .adaptive import HoelderParams, check_hoelder, track_adaptive
from .crr import (black_scholes_call, call, complete_market_demo, price_european, put,
                  tree_from_volatility)
from .errors import (BudgetExceededError, InvalidArgumentError, NumericOverflowError,
                     PreconditionError, UnverifiedBoundWarning)
from .experiment import (ConvergenceReport, ExperimentConfig, load_config, measure, run_experiment,
                         tune_three_epsilon)
from .grid import SampledPath, generate
from .log_tracker import track_log
from .ode_binary import solve_binary_ode
from .preprocess import clip, mollify
from .tracker import TrackerParams, track

log = logging.getLogger("binapprox")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BOUND = 0, 1, 2, 3

FORMATS = """\
Output files (all floats written with full precision):

  simulate    paths.csv        t, path_0, path_1, ...
  track       tracker.csv      k, t_k, y, direction
              fine.csv         t, x, target, y
  ode         ode.csv          t, x, x_moll, r, y, u
  log-track   log_tracker.csv  k, t_k, y, zeta, eta
  adaptive    certificate.csv  t, eps, ratio, bound, pass
              adaptive.csv     t, x, target, y
  price       price.csv        option, S0, strike, vol, r, T, n, price, black_scholes
              tree.csv         k, i, discounted, price
              demo.csv         t_k, sampled, tracked, node_ups   (with demo = true)
  converge    convergence.csv  m, p, n, M, error, std_error, tracking_error,
                               tracking_std_error, clip_error, mollify_error,
                               max_sup_error, bound, bound_ok, verified,
                               n_paths, n_failed
              plot_data.csv    series, n, error, std_error
              convergence.svg  (with svg = true; needs matplotlib)
  tune        tune.csv         m, p, n, n_min, M, clip_error, clip_std_error,
                               mollify_error, mollify_std_error, tracker_bound,
                               epsilon
              validation.csv   same columns as convergence.csv (validate_paths > 0)

Exit codes: 0 success, 1 usage or config error, 2 numeric failure,
3 an error bound was violated on a path whose preconditions held.
"""

COMMANDS = {
    "simulate": "generate an ensemble and write it",
    "track": "clip, mollify and track the first path",
    "ode": "solve the binary-noise ODE for the first path",
    "log-track": "track exp(first path) multiplicatively",
    "adaptive": "certify and adaptively track the first path",
    "price": "price a European option on a CRR tree",
    "converge": "run the (m, p, n) sweep and write the convergence report",
    "tune": "pick (m, p, n) for a target epsilon",
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat TOML experiment file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides 'out')")
    common.add_argument("--seed", type=int, help="seed base (overrides 'seed')")
    common.add_argument("--paths", type=int, help="ensemble size (overrides 'paths')")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    ap = argparse.ArgumentParser(prog="binapprox", description="Causal binomial approximation of paths.",
                                 epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_ in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_, description=help_, epilog=FORMATS,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    return ap


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    over = {k: getattr(args, k) for k in ("out", "seed", "paths") if getattr(args, k) is not None}
    return replace(cfg, **over).validate() if over else cfg


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _first_path(cfg) -> SampledPath:
    x, _ = generate(cfg.process_spec(), cfg.grid(), 1, cfg.seed)
    return x[0]


def _cmd_simulate(cfg):
    x, failed = generate(cfg.process_spec(), cfg.grid(), cfg.paths, cfg.seed, drop_failed=True)
    v = np.asarray(x.values)
    _write_rows(os.path.join(cfg.out, "paths.csv"), ["t"] + [f"path_{i}" for i in range(len(v))],
                zip(cfg.grid().times, *v))
    log.info("wrote %d paths (%d failed)", len(v), failed)
    return EXIT_OK


def _cmd_track(cfg):
    x = _first_path(cfg)
    m, p, n = cfg.m[0], cfg.p[0], cfg.n[0]
    mode = "step" if cfg.pipeline in ("thm3_step", "thm4_ode_step", "thm5_log") else "affine"
    target = mollify(clip(x, m), p)
    y = track(target, TrackerParams(n, m, p), mode)
    y.to_csv(os.path.join(cfg.out, "tracker.csv"))
    fine = y.evaluate(x.grid).values
    _write_rows(os.path.join(cfg.out, "fine.csv"), ["t", "x", "target", "y"],
                zip(x.grid.times, x.values, target.values, fine))
    sup = float(np.max(np.abs(fine - target.values)))
    log.info("%s tracker: sup error %.6g, bound %.6g", mode, sup, y.bound())
    return _bound_status(bool(y.verified), sup, y.bound())


def _bound_status(verified, sup, bound):
    if verified and sup > bound + 1e-9:
        log.error("bound violated: %.17g > %.17g", sup, bound)
        return EXIT_BOUND
    return EXIT_OK


def _cmd_ode(cfg):
    x = _first_path(cfg)
    m, p, n = cfg.m[0], cfg.p[0], cfg.n[0]
    f = cfg.drift_field()
    mode = "step" if cfg.pipeline == "thm4_ode_step" else "affine"
    target = mollify(clip(x, m), p)
    sol = solve_binary_ode(target, float(x.values[0]), f, TrackerParams(n, m, p, K=f.sup_f), mode)
    sol.to_csv(os.path.join(cfg.out, "ode.csv"), x=x)
    sup = float(np.max(np.abs(sol.u.values - target.values)))
    log.info("ode (%s): sup |x_moll - u| %.6g, bound %.6g", mode, sup, sol.bound())
    return _bound_status(bool(sol.verified), sup, sol.bound())


def _cmd_log_track(cfg):
    x = _first_path(cfg)
    price = x.replace(np.exp(x.values))
    params = TrackerParams(cfg.n[0], cfg.m[0], cfg.p[0])
    y = track_log(price, params)
    y.to_csv(os.path.join(cfg.out, "log_tracker.csv"))
    if not np.all(y.values > 0):
        raise NumericOverflowError("multiplicative tracker left the positive half-line")
    log.info("log tracker: d1=%.6g d2=%.6g", y.d1, y.d2)
    return EXIT_OK


def _cmd_adaptive(cfg):
    x = _first_path(cfg)
    grid = x.grid
    cap = cfg.sigma if cfg.sigma_cap is None else cfg.sigma_cap
    hp = HoelderParams(cfg.hoelder_q, cfg.theta, cfg.eps0, cap,
                       SampledPath(grid, np.full(len(grid), float(cfg.sigma))))
    cert = check_hoelder(x, hp)
    cert.to_csv(os.path.join(cfg.out, "certificate.csv"))
    if not cert.holds:
        log.error("Hoelder certificate fails at t=%.6g eps=%.6g", *cert.worst_location)
        return EXIT_USAGE
    tr = track_adaptive(x, hp, cfg.n[0], certificate=cert)
    fine = tr.evaluate().values
    _write_rows(os.path.join(cfg.out, "adaptive.csv"), ["t", "x", "target", "y"],
                zip(grid.times, x.values, tr.target.values, fine))
    sup = float(np.max(np.abs(fine - tr.target.values)))
    log.info("adaptive tracker: sup error %.6g, bound %.6g", sup, tr.bound())
    return _bound_status(tr.verified, sup, tr.bound())


def _cmd_price(cfg):
    n = cfg.n[0]
    tree = tree_from_volatility(cfg.S0, cfg.vol, cfg.T, n, cfg.r)
    payoff = call(cfg.strike) if cfg.option == "call" else put(cfg.strike)
    price = price_european(tree, payoff)
    bs = black_scholes_call(cfg.S0, cfg.strike, cfg.vol, cfg.T, cfg.r)
    if cfg.option == "put":
        bs = bs - cfg.S0 + cfg.strike * math.exp(-cfg.r * cfg.T)
    _write_rows(os.path.join(cfg.out, "price.csv"),
                ["option", "S0", "strike", "vol", "r", "T", "n", "price", "black_scholes"],
                [[cfg.option, float(cfg.S0), float(cfg.strike), float(cfg.vol), float(cfg.r),
                  float(cfg.T), n, price, bs]])
    tree.to_csv(os.path.join(cfg.out, "tree.csv"))
    log.info("%s price %.10g (Black-Scholes %.10g)", cfg.option, price, bs)
    if cfg.demo:
        x = _first_path(cfg)
        s = x.replace(cfg.S0 * np.exp(cfg.vol * x.values - 0.5 * cfg.vol ** 2 * x.times))
        demo = complete_market_demo(s, TrackerParams(n, cfg.m[0], cfg.p[0]), cfg.r, cfg.strike)
        demo.to_csv(os.path.join(cfg.out, "demo.csv"))
        log.info("demo: sup distance %.6g, tree price %.6g, reference %.6g",
                 demo.sup_distance, demo.tree_price, demo.reference_price)
    return EXIT_OK


def _cmd_converge(cfg):
    report = run_experiment(cfg)
    for row in report.rows:
        log.info("m=%g p=%g n=%d error=%.6g +- %.2g sup=%.6g bound=%.6g%s", row.m, row.p, row.n,
                 row.error, row.std_error, row.max_sup_error, row.bound,
                 "" if row.bound_ok else "  VIOLATED")
    return EXIT_BOUND if report.violations else EXIT_OK


def _cmd_tune(cfg):
    if cfg.epsilon is None:
        raise InvalidArgumentError("config key 'epsilon': required by the tune command")
    x, _ = generate(cfg.process_spec(), cfg.grid(), cfg.paths, cfg.seed, drop_failed=True)
    res = tune_three_epsilon(x, cfg.q, cfg.epsilon, norm=cfg.norm)
    res.to_csv(os.path.join(cfg.out, "tune.csv"))
    log.info("tuned m=%g p=%g n=%d (closed form needs n >= %d)", res.m, res.p, res.n, res.n_min)
    if cfg.validate_paths:
        # fresh seeds, disjoint from the tuning ensemble
        row = measure(replace(cfg, pipeline="thm1_affine"), res.m, res.p, res.n,
                      n_paths=cfg.validate_paths, seed=cfg.seed + cfg.paths)
        ConvergenceReport([row], cfg).to_csv(os.path.join(cfg.out, "validation.csv"))
        log.info("validation: error %.6g +- %.2g (target %g)", row.error, row.std_error, cfg.epsilon)
    return EXIT_OK


HANDLERS = {
    "simulate": _cmd_simulate, "track": _cmd_track, "ode": _cmd_ode,
    "log-track": _cmd_log_track, "adaptive": _cmd_adaptive, "price": _cmd_price,
    "converge": _cmd_converge, "tune": _cmd_tune,
}


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", force=True)
    warnings.simplefilter("default", UnverifiedBoundWarning)
    try:
        cfg = _config(args)
        os.makedirs(cfg.out, exist_ok=True)
        return HANDLERS[args.command](cfg)
    except NumericOverflowError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except (InvalidArgumentError, PreconditionError, BudgetExceededError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
