"""Command-line front end: ``periodic-adp <command> [options]``."""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace

import numpy as np

from . import plotting, reporting
from .bench import (TABLE1_TRIALS, ReferenceCache, TrialConfig, config_from_dict, gain_series,
                    hat_gain_samples, max_gain_error, run_table1)
from .data_collection import ExplorationSignal, build_data_matrices, collect, write_log_csv
from .errors import AdpError
from .periodic_system import characteristic_multipliers, closed_loop, monodromy
from .pre_solver import steady_periodic_solution
from .systems import PENDULUM_PERIOD, build_triple_pendulum
from .vectorize import vecs
from .vi_adp import SimulatedPlant, run_algorithm_1, tune_parameters

log = logging.getLogger("periodic_adp")

FLAG_TO_FIELD = {
    "n_fourier": "N", "samples": "M", "dt": "dt", "sf": "s_f", "step": "h", "zeta": "zeta",
    "seed": "seed", "beta": "beta", "substeps": "substeps", "lbar_rule": "Lbar_rule",
}


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="JSON file with trial settings")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory")
    p.add_argument("--zeta", type=float, help="load disturbance magnitude")


def _add_adp(p):
    p.add_argument("--n-fourier", type=int, help="Fourier truncation order N")
    p.add_argument("--samples", type=int, metavar="M", help="number of sampling intervals")
    p.add_argument("--dt", type=float, help="sampling interval")
    p.add_argument("--sf", type=float, help="backward horizon s_f")
    p.add_argument("--step", type=float, metavar="h", help="backward-solve step h")
    p.add_argument("--seed", type=int, help="exploration seed")
    p.add_argument("--beta", type=float, help="state-norm reset threshold")
    p.add_argument("--substeps", type=int, help="RK4 steps per sampling interval")
    p.add_argument("--lbar-rule", choices=["plain", "clamped"], help="fit-window rule")
    p.add_argument("--strict", action="store_true",
                   help="raise on rank/window diagnostics instead of reporting them")


def build_parser():
    parser = argparse.ArgumentParser(prog="periodic-adp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-pre", help="model-based periodic Riccati oracle")
    _add_common(p)
    p.add_argument("--step", type=float, help="Riccati step (rounded to divide the period)")
    p.add_argument("--tol", type=float, default=1e-6)

    p = sub.add_parser("collect", help="collect exploration data and build data matrices")
    _add_common(p)
    _add_adp(p)

    p = sub.add_parser("run-adp", help="learn a gain from data end to end")
    _add_common(p)
    _add_adp(p)
    p.add_argument("--tune", type=int, metavar="RETRIES", default=0,
                   help="grow s_f and N until the coefficients are periodic (at most RETRIES runs)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("table1", help="run the benchmark trial table")
    _add_common(p)
    p.add_argument("--seed", type=int, help="exploration seed for every ADP trial")
    p.add_argument("--trials", default=None, help="comma-separated trial names (default all)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("stability", help="characteristic multipliers of a saved gain")
    _add_common(p)
    p.add_argument("gain", metavar="GAIN_CSV", help="coefficient CSV written by run-adp")
    return parser


def trial_config(args, base=None):
    cfg = base or TrialConfig()
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = config_from_dict(json.load(fh), cfg)
    overrides = {}
    for flag, fieldname in FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[fieldname] = value
    if getattr(args, "strict", False):
        overrides["strict"] = True
    return replace(cfg, **overrides)


def cmd_solve_pre(args):
    cfg = trial_config(args)
    sys_, cost = build_triple_pendulum(cfg.zeta)
    h = args.step or PENDULUM_PERIOD / 1000
    sol = steady_periodic_solution(sys_, cost, h, tol=args.tol)
    out = reporting.ensure_dir(args.out)
    K = sol.gain_grid()
    reporting.write_series_csv(os.path.join(out, "pstar.csv"),
                               ["t"] + [f"vecsP_{i + 1}" for i in range(vecs(sol.P[0]).size)],
                               [sol.s, np.array([vecs(P) for P in sol.P])])
    reporting.write_series_csv(os.path.join(out, "kstar.csv"),
                               ["t"] + [f"K_{i + 1}" for i in range(K[0].size)],
                               [sol.s, K.transpose(0, 2, 1).reshape(len(K), -1)])
    mods = characteristic_multipliers(monodromy(closed_loop(sys_, sol.gain_schedule())))
    summary = {"zeta": cfg.zeta, "horizon_used": sol.s_f, "gaps": sol.gaps,
               "closed_loop_multipliers": mods, "stable": bool(mods[0] < 1 - 1e-6)}
    reporting.write_json(summary, os.path.join(out, "solve_pre.json"))
    plotting.plot_periodic_gap(PENDULUM_PERIOD * np.arange(2, len(sol.gaps) + 2), sol.gaps,
                               os.path.join(out, "pre_convergence.png"))
    print(f"horizon {sol.s_f:.4g}, final gap {sol.gap:.3e}, max multiplier {mods[0]:.4g}")
    return 0


def cmd_collect(args):
    cfg = trial_config(args)
    sys_, cost = build_triple_pendulum(cfg.zeta)
    acfg = cfg.adp_config()
    signal = ExplorationSignal.from_config(acfg.exploration, sys_.m)
    trajectory = collect(sys_, signal, cfg.dt, cfg.M, cfg.beta, substeps=cfg.substeps)
    out = reporting.ensure_dir(args.out)
    write_log_csv(trajectory, os.path.join(out, "trajectory.csv"))
    np.savetxt(os.path.join(out, "frequencies.csv"), signal.frequencies, delimiter=",")
    dm = build_data_matrices(trajectory, cfg.N, cost, allow_rank_deficient=not cfg.strict)
    dm.save(os.path.join(out, "data_matrices.npz"))
    summary = {"config": asdict(cfg), "reset_count": trajectory.reset_count,
               "valid_rows": int(trajectory.valid.sum()), "theta_shape": dm.Theta.shape,
               "sigma_scaled": dm.sigma_scaled}
    reporting.write_json(summary, os.path.join(out, "collect.json"))
    print(f"resets {trajectory.reset_count}, Theta {dm.Theta.shape}, "
          f"sigma_min/M {dm.sigma_scaled:.3e}")
    return 0


def cmd_run_adp(args):
    cfg = trial_config(args)
    sys_, cost = build_triple_pendulum(cfg.zeta)
    start = time.perf_counter()
    history = None
    if args.tune:
        result, history = tune_parameters(SimulatedPlant(sys_), cost, cfg.adp_config(),
                                          max_retries=args.tune)
    else:
        result = run_algorithm_1(SimulatedPlant(sys_), cost, cfg.adp_config())
    runtime = time.perf_counter() - start
    ref = ReferenceCache().get(cfg.zeta)
    err = max_gain_error(result.K_bar, ref.K_at, sys_.period)
    out = reporting.ensure_dir(args.out)
    reporting.write_coefficients_csv(result.WK_bar, os.path.join(out, "K_coefficients.csv"),
                                     "K", (result.m, result.n))
    reporting.write_coefficients_csv(result.WH_bar, os.path.join(out, "H_coefficients.csv"), "H")
    ts, kb, ks = gain_series(result, ref, sys_.period)
    reporting.write_gain_series(os.path.join(out, "gains.csv"), ts, kb, ks)
    s_hat, k_hat = hat_gain_samples(result)
    reporting.write_series_csv(os.path.join(out, "hat_gains.csv"),
                               ["s"] + [f"Khat_{i + 1}" for i in range(k_hat.shape[1])],
                               [s_hat, k_hat])
    summary = {"config": asdict(cfg), "stable": result.stable, "max_gain_error": err,
               "Lbar": result.Lbar, "diagnostics": result.diagnostics, "runtime": runtime,
               "tuning": history}
    reporting.write_json(summary, os.path.join(out, "run_adp.json"))
    if not args.no_plots:
        plotting.plot_gain_comparison(ts, kb, ks, os.path.join(out, "gains.png"),
                                      result.m, result.n, hat=(s_hat, k_hat))
        plotting.plot_coefficient_norms(result.solution.s, result.solution.norms(),
                                        os.path.join(out, "coefficient_norms.png"), sys_.period)
    print(f"stable {result.stable}, max gain error {err:.4g}, runtime {runtime:.1f}s")
    return 0


def cmd_table1(args):
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        trials = [config_from_dict(d) for d in raw] if isinstance(raw, list) else None
        if trials is None:
            trials = [config_from_dict(raw, t) for t in TABLE1_TRIALS]
    else:
        trials = list(TABLE1_TRIALS)
    if args.seed is not None:
        trials = [replace(t, seed=args.seed) for t in trials]
    if args.zeta is not None:
        trials = [replace(t, zeta=args.zeta) for t in trials]
    if args.trials:
        wanted = set(args.trials.split(","))
        trials = [t for t in trials if t.name in wanted]
    out = reporting.ensure_dir(args.out)
    reports = run_table1(trials, out, plots=not args.no_plots)
    for rep in reports:
        row = rep.as_row()
        print("  ".join(f"{k}={v}" for k, v in row.items()))
    return 0


def cmd_stability(args):
    cfg = trial_config(args)
    gain = reporting.read_gain_csv(args.gain)
    sys_, _ = build_triple_pendulum(cfg.zeta)
    mods = characteristic_multipliers(monodromy(closed_loop(sys_, gain)))
    stable = bool(mods[0] < 1 - 1e-6)
    print(f"stable {stable}, multipliers {np.array2string(mods, precision=4)}")
    if args.out:
        reporting.ensure_dir(args.out)
        reporting.write_json({"zeta": cfg.zeta, "multipliers": mods, "stable": stable},
                             os.path.join(args.out, "stability.json"))
    return 0


COMMANDS = {"solve-pre": cmd_solve_pre, "collect": cmd_collect, "run-adp": cmd_run_adp,
            "table1": cmd_table1, "stability": cmd_stability}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AdpError as exc:
        stage = exc.stage or args.command
        print(f"error [{stage}]: {type(exc).__name__}: {exc.args[0] if exc.args else ''}",
              file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
