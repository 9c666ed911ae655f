"""Experiment runner CLI.

Subcommands reproduce the desk-scale experiments: ``validate`` (closed
form vs Monte Carlo over the MT/BS density sweep), ``optimality``
(dual solver vs exhaustive grid search), ``benefits`` (admission sweep up
to 32 requests), ``gains`` (slicing gain over density/threshold cells),
``convergence`` (iteration counts and wall times) and ``eval`` (one PSE
evaluation). Every CSV carries the resolved configuration and seeds in
its header; re-running with identical inputs reproduces each file
byte-for-byte except the timestamp line (and the wall-time columns of
``convergence``, which are declared timing fields).

Exit codes: 0 ok, 2 configuration error, 3 solver non-convergence where
results would be misleading, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .admission import admit
from .config import (
    ConfigError,
    ExperimentConfig,
    db_to_linear,
    dbm_to_watt,
    draw_alphas,
    load_config,
    make_requests,
)
from .model import pse
from .montecarlo import estimate_pse
from .optimizer import brute_force_opt, solve_multitenant

SCHEMA_VERSION = 1
VALIDATE_RATIOS = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0)
GAIN_RATIOS = (50.0, 200.0, 500.0)
THRESHOLDS_DB = (-5.0, 0.0, 5.0)
ENV_THREADS = "RANSLICE_THREADS"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_IO = 4


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, command: str, cfg: ExperimentConfig, columns: list[str],
              rows: list[tuple], extra_header: list[str] | None = None,
              timing_columns: tuple[str, ...] = ()) -> None:
    lines = [
        f"# ranslice {__version__} schema {SCHEMA_VERSION}",
        f"# command: {command}",
        f"# timestamp: {datetime.now(timezone.utc).isoformat()}",
    ]
    if timing_columns:
        lines.append(f"# timing_columns: {','.join(timing_columns)}")
    for note in extra_header or []:
        lines.append(f"# {note}")
    for key, value in cfg.flatten():
        lines.append(f"# config: {key} = {value}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def cmd_validate(cfg: ExperimentConfig) -> tuple[list[tuple], int]:
    params = cfg.network.network_params()
    sim = cfg.sim
    rows = []
    for ratio in VALIDATE_RATIOS:
        lambda_t = ratio * cfg.network.lambda_bs
        analytic = pse(params.p_tot, params.b_tot, lambda_t, params)
        est = estimate_pse(params.p_tot, params.b_tot, lambda_t, params, sim,
                           n_workers=cfg.threads)
        rel = abs(analytic - est.mean) / analytic if analytic > 0.0 else 0.0
        rows.append((ratio, analytic, est.mean, est.ci95_half_width, rel))
    return rows, 0


def cmd_optimality(cfg: ExperimentConfig) -> tuple[list[tuple], int]:
    rows = []
    misleading = 0
    for t_index, threshold_db in enumerate(THRESHOLDS_DB):
        network = cfg.network.with_thresholds(threshold_db)
        params = network.network_params()
        for n in range(1, 7):
            alphas = draw_alphas(cfg.slice_gen, n, spawn_key=(t_index, n))
            requests = make_requests(alphas, network.lambda_t)
            storns = solve_multitenant(requests, params, cfg.solver)
            opt = brute_force_opt(requests, params, cfg.solver.grid_levels, cfg.solver)
            gap = (opt.sum_pse - storns.sum_pse) / opt.sum_pse * 100.0 if opt.sum_pse > 0 else 0.0
            any_unmet = any(not a.admitted for a in storns.allocations)
            if any_unmet and opt.converged:
                misleading += 1
            rows.append((n, threshold_db, storns.sum_pse, opt.sum_pse, gap))
    return rows, misleading


def cmd_benefits(cfg: ExperimentConfig) -> tuple[list[tuple], int]:
    params = cfg.network.network_params()
    reps = cfg.replications
    count = cfg.slice_gen.count
    per_rep_alphas = [draw_alphas(cfg.slice_gen, count, spawn_key=(rep,)) for rep in range(reps)]
    rows = []
    for n in range(1, count + 1):
        admitted = np.empty(reps)
        gains = np.empty(reps)
        for rep in range(reps):
            requests = make_requests(per_rep_alphas[rep][:n], cfg.network.lambda_t)
            result = admit(requests, params, cfg.solver)
            admitted[rep] = len(result.admitted)
            gains[rep] = result.gain
        std = float(np.std(gains, ddof=1)) if reps > 1 else 0.0
        rows.append((n, float(np.mean(admitted)), float(np.mean(gains)), std))
    return rows, 0


def cmd_gains(cfg: ExperimentConfig) -> tuple[list[tuple], int]:
    reps = cfg.replications
    rows = []
    for r_index, ratio in enumerate(GAIN_RATIOS):
        for t_index, threshold_db in enumerate(THRESHOLDS_DB):
            network = replace(cfg.network.with_thresholds(threshold_db), mt_ratio=ratio)
            params = network.network_params()
            gains = np.empty(reps)
            admitted = np.empty(reps)
            for rep in range(reps):
                alphas = draw_alphas(cfg.slice_gen, cfg.slice_gen.count,
                                     spawn_key=(r_index, t_index, rep))
                requests = make_requests(alphas, network.lambda_t)
                result = admit(requests, params, cfg.solver)
                gains[rep] = result.gain
                admitted[rep] = len(result.admitted)
            std = float(np.std(gains, ddof=1)) if reps > 1 else 0.0
            rows.append((ratio, threshold_db, float(np.mean(gains)), std,
                         float(np.mean(admitted)), reps))
    return rows, 0


def cmd_convergence(cfg: ExperimentConfig) -> tuple[list[tuple], int]:
    params = cfg.network.network_params()
    rows = []
    n_max = 8 if cfg.quick else 12
    for n in range(1, n_max + 1):
        alphas = draw_alphas(cfg.slice_gen, n, spawn_key=(n,))
        requests = make_requests(alphas, cfg.network.lambda_t)
        start = time.perf_counter()
        storns = solve_multitenant(requests, params, cfg.solver)
        storns_time = time.perf_counter() - start
        if n <= 6:
            start = time.perf_counter()
            brute_force_opt(requests, params, cfg.solver.grid_levels, cfg.solver)
            opt_time = time.perf_counter() - start
        else:
            opt_time = None
        rows.append((n, storns.iterations, storns_time, opt_time))
    return rows, 0


def cmd_eval(cfg: ExperimentConfig, power_w: float, bandwidth_hz: float,
             ratio: float, with_mc: bool) -> tuple[list[tuple], int]:
    params = cfg.network.network_params()
    lambda_t = ratio * cfg.network.lambda_bs
    analytic = pse(power_w, bandwidth_hz, lambda_t, params)
    if with_mc:
        est = estimate_pse(power_w, bandwidth_hz, lambda_t, params, cfg.sim,
                           n_workers=cfg.threads)
        rows = [(power_w, bandwidth_hz, ratio, analytic, est.mean, est.ci95_half_width)]
    else:
        rows = [(power_w, bandwidth_hz, ratio, analytic, None, None)]
    return rows, 0


_COLUMNS = {
    "validate": ["ratio", "analytic_pse", "mc_mean", "mc_ci95_half_width", "rel_error"],
    "optimality": ["n_tenants", "threshold_db", "storns_sum_pse", "opt_sum_pse", "gap_pct"],
    "benefits": ["n_requests", "mean_admitted", "mean_gain", "std_gain"],
    "gains": ["ratio", "threshold_db", "gain_mean", "gain_std", "mean_admitted", "n_replications"],
    "convergence": ["n_tenants", "dual_iterations", "storns_wall_s", "opt_wall_s"],
    "eval": ["power_w", "bandwidth_hz", "ratio", "analytic_pse", "mc_mean", "mc_ci95_half_width"],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ranslice",
        description="Stochastic-geometry RAN slicing experiments",
    )
    parser.add_argument("--version", action="version", version=f"ranslice {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--out", help="output directory (default from config)")
        p.add_argument("--seed", type=int, help="master seed override (simulation and demand)")
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--quick", action="store_true", default=True, dest="quick",
                          help="desk-scale settings (default)")
        mode.add_argument("--full", action="store_false", dest="quick",
                          help="paper-scale settings")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker count for Monte Carlo (default: ${ENV_THREADS} or 1)")

    for name in ("validate", "optimality", "benefits", "gains", "convergence"):
        common(sub.add_parser(name, help=f"run the {name} experiment"))

    ev = sub.add_parser("eval", help="evaluate the closed-form PSE at one operating point")
    common(ev)
    power = ev.add_mutually_exclusive_group()
    power.add_argument("--p-dbm", type=float, help="transmit power in dBm (default: config)")
    power.add_argument("--p-w", type=float, help="transmit power in watts")
    ev.add_argument("--b-hz", type=float, help="bandwidth in Hz (default: config)")
    ev.add_argument("--ratio", type=float, help="MT/BS density ratio (default: config)")
    ev.add_argument("--mc", action="store_true", help="add a Monte Carlo check")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.threads is not None:
        threads = args.threads
    else:
        env = os.environ.get(ENV_THREADS)
        try:
            threads = int(env) if env else 1
        except ValueError as exc:
            raise ConfigError(f"bad {ENV_THREADS} value: {env!r}") from exc
    if threads < 1:
        raise ConfigError(f"thread count must be positive, got {threads}")
    cfg = replace(cfg.resolve_mode(args.quick), threads=threads)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.seed is not None:
        cfg = replace(
            cfg,
            sim=replace(cfg.sim, seed=args.seed),
            slice_gen=replace(cfg.slice_gen, seed=args.seed),
        )
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    timing_columns: tuple[str, ...] = ()
    extra_header: list[str] = []
    try:
        if args.command == "validate":
            rows, misleading = cmd_validate(cfg)
        elif args.command == "optimality":
            extra_header.append(f"demand_seed_spawn: (threshold_index, n_tenants) from {cfg.slice_gen.seed}")
            rows, misleading = cmd_optimality(cfg)
        elif args.command == "benefits":
            extra_header.append(
                f"replication_seed_spawn: (replication,) from {cfg.slice_gen.seed}; "
                f"replications = {cfg.replications}"
            )
            rows, misleading = cmd_benefits(cfg)
        elif args.command == "gains":
            extra_header.append(
                f"replication_seed_spawn: (ratio_index, threshold_index, replication) "
                f"from {cfg.slice_gen.seed}; replications = {cfg.replications}"
            )
            rows, misleading = cmd_gains(cfg)
        elif args.command == "convergence":
            timing_columns = ("storns_wall_s", "opt_wall_s")
            extra_header.append(f"demand_seed_spawn: (n_tenants,) from {cfg.slice_gen.seed}")
            rows, misleading = cmd_convergence(cfg)
        elif args.command == "eval":
            power_w = (
                args.p_w if args.p_w is not None
                else dbm_to_watt(args.p_dbm) if args.p_dbm is not None
                else dbm_to_watt(cfg.network.p_tot_dbm)
            )
            bandwidth = args.b_hz if args.b_hz is not None else cfg.network.b_tot_hz
            ratio = args.ratio if args.ratio is not None else cfg.network.mt_ratio
            if power_w < 0.0 or bandwidth < 0.0 or ratio < 0.0:
                raise ConfigError("power, bandwidth and ratio must be nonnegative")
            rows, misleading = cmd_eval(cfg, power_w, bandwidth, ratio, args.mc)
        else:  # pragma: no cover - argparse enforces the choices
            raise AssertionError(args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    path = os.path.join(cfg.output_dir, f"{args.command}.csv")
    try:
        write_csv(path, args.command, cfg, _COLUMNS[args.command], rows,
                  extra_header=extra_header, timing_columns=timing_columns)
    except OSError as exc:
        print(f"error writing {path}: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"{args.command}: {len(rows)} rows -> {path}")
    for row in rows:
        print("  " + ", ".join(f"{c}={_fmt(v)}" for c, v in zip(_COLUMNS[args.command], row)))
    if misleading:
        print(
            f"warning: {misleading} instance(s) did not converge where the exhaustive "
            "baseline found a feasible solution; results may be misleading",
            file=sys.stderr,
        )
        return EXIT_NONCONVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
