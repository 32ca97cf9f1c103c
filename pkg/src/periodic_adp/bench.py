"""Benchmark harness: pendulum trials, the model-based baseline and cost evaluation."""

import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import plotting, reporting
from .data_collection import ExplorationConfig
from .errors import AdpError, DivergentCost
from .periodic_system import (GainSchedule, _stage_times, _uniform_grid, characteristic_multipliers,
                              closed_loop, is_stable, monodromy, rk4_linear)
from .pre_solver import steady_periodic_solution
from .systems import PENDULUM_PERIOD, build_triple_pendulum
from .vi_adp import AdpConfig, SimulatedPlant, reconstruct_gains, run_algorithm_1

log = logging.getLogger(__name__)

GAIN_GRID_POINTS = 1000
REFERENCE_STEPS_PER_PERIOD = 1000


@dataclass
class TrialConfig:
    name: str = "trial"
    kind: str = "ADP"        # "ADP" or "MBPLQ"
    N: int = 6
    M: int = 800
    s_f: float = 40.0
    zeta: float = 1.0
    dt: float = 0.2
    h: float = 0.1
    seed: int = 0
    beta: float = 10.0
    Lbar_rule: str = "plain"
    strict: bool = False
    substeps: int = 200
    amplitude: float = 0.2
    num_sinusoids: int = 500
    freq_range: tuple = (-500.0, 500.0)

    def __post_init__(self):
        if self.kind not in ("ADP", "MBPLQ"):
            raise ValueError(f"unknown controller kind {self.kind!r}")
        for key in ("N", "M", "s_f", "dt", "h", "beta"):
            if self.kind == "ADP" and not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")
        self.freq_range = tuple(self.freq_range)

    def adp_config(self):
        return AdpConfig(
            N=self.N, M=self.M, dt=self.dt, s_f=self.s_f, h=self.h, beta=self.beta,
            substeps=self.substeps, Lbar_rule=self.Lbar_rule, strict=self.strict,
            exploration=ExplorationConfig(self.amplitude, self.num_sinusoids,
                                          self.freq_range, self.seed),
        )


TABLE1_TRIALS = [
    TrialConfig(name="1", N=6, M=800, s_f=40, zeta=1),
    TrialConfig(name="2", N=3, M=800, s_f=40, zeta=1),
    TrialConfig(name="3", N=1, M=800, s_f=40, zeta=1),
    TrialConfig(name="4", N=6, M=800, s_f=12, zeta=1),
    TrialConfig(name="5", N=6, M=800, s_f=8, zeta=1),
    TrialConfig(name="6", N=6, M=400, s_f=40, zeta=1),
    TrialConfig(name="7", kind="MBPLQ", zeta=0.1),
    TrialConfig(name="8", kind="MBPLQ", zeta=1),
]


@dataclass
class TrialReport:
    name: str
    kind: str
    N: int
    M: int
    s_f: float
    zeta: float
    stability: bool
    reset_count: int = None
    max_gain_error: float = None
    runtime: float = 0.0
    grid_points: int = GAIN_GRID_POINTS
    failed_stage: str = None
    message: str = None
    diagnostics: dict = field(default_factory=dict)

    def as_row(self):
        fmt = lambda v: "-" if v is None else v
        return {
            "trial": self.name, "controller": self.kind,
            "N": fmt(self.N), "M": fmt(self.M), "s_f": fmt(self.s_f), "zeta": self.zeta,
            "resets": fmt(self.reset_count),
            "stability": "Yes" if self.stability else "No",
            "max_gain_error": "-" if self.max_gain_error is None else f"{self.max_gain_error:.6g}",
            "failed_stage": fmt(self.failed_stage),
        }


def gain_error_grid(period, points=GAIN_GRID_POINTS):
    return np.linspace(0.0, period, points, endpoint=False)


def max_gain_error(gain, reference, period, points=GAIN_GRID_POINTS):
    """``max_t |K(t) - K_ref(t)|_F`` over ``points`` equispaced times in one period."""
    ts = gain_error_grid(period, points)
    return float(max(np.linalg.norm(gain(t) - reference(t)) for t in ts))


def mbplq_controller(sys_nominal, cost, h=PENDULUM_PERIOD / REFERENCE_STEPS_PER_PERIOD, N=30):
    """Optimal periodic gain of the nominal model, as a Fourier gain schedule."""
    return steady_periodic_solution(sys_nominal, cost, h, N_fit=N).gain_schedule()


def evaluate_cost(sys, cost, gain, x0, t0=0.0, horizon=None, step=None, rel_tail=1e-6):
    """Quadratic cost of ``u = -K(t) x`` from ``x(t0) = x0``.

    Without an explicit ``horizon`` the simulation runs for enough periods
    that the bound on the neglected tail, estimated from the largest
    characteristic multiplier, falls below ``rel_tail``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    if not np.any(x0):
        return 0.0
    T = sys.period
    cl = closed_loop(sys, gain)
    rho = characteristic_multipliers(monodromy(cl, t0))[0]
    if rho >= 1.0:
        raise DivergentCost(f"closed loop is unstable (largest multiplier {rho:.4g})")
    if horizon is None:
        periods = int(np.ceil(np.log(rel_tail) / (2.0 * np.log(max(rho, 1e-300))))) + 2
        horizon = max(periods, 2) * T
    if step is None:
        step = T / 1000
    ts = _uniform_grid(t0, t0 + horizon, step)
    if (len(ts) - 1) % 2:
        ts = np.linspace(t0, t0 + horizon, len(ts) + 1)
    st = _stage_times(ts)
    xs = rk4_linear(cl.A.sample(st), np.zeros((len(st), sys.n)), x0, ts[1] - ts[0])
    K = gain(ts) if isinstance(gain, GainSchedule) else gain.sample(ts)
    C = cost.C.sample(ts)
    R = cost.R.sample(ts)
    us = -np.einsum("kij,kj->ki", K, xs)
    cx = np.einsum("kij,kj->ki", C, xs)
    integrand = (cx ** 2).sum(axis=1) + np.einsum("ki,kij,kj->k", us, R, us)
    hstep = ts[1] - ts[0]
    w = np.full(len(ts), 2.0)
    w[1::2] = 4.0
    w[[0, -1]] = 1.0
    return float(hstep / 3.0 * w @ integrand)


class ReferenceCache:
    """Optimal periodic solutions of the pendulum, one per disturbance level."""

    def __init__(self, steps_per_period=REFERENCE_STEPS_PER_PERIOD):
        self.h = PENDULUM_PERIOD / steps_per_period
        self._cache = {}

    def get(self, zeta):
        key = float(zeta)
        if key not in self._cache:
            sys, cost = build_triple_pendulum(key)
            self._cache[key] = steady_periodic_solution(sys, cost, self.h)
        return self._cache[key]


def run_trial(cfg, refs=None):
    """Run one benchmark trial; failures are captured in the report."""
    refs = ReferenceCache() if refs is None else refs
    start = time.perf_counter()
    sys, cost = build_triple_pendulum(cfg.zeta)
    report = TrialReport(cfg.name, cfg.kind, cfg.N if cfg.kind == "ADP" else None,
                         cfg.M if cfg.kind == "ADP" else None,
                         cfg.s_f if cfg.kind == "ADP" else None, cfg.zeta, stability=False)
    artifacts = {}
    try:
        if cfg.kind == "MBPLQ":
            nominal, nominal_cost = build_triple_pendulum(0.0)
            gain = mbplq_controller(nominal, nominal_cost, refs.h)
            report.stability = is_stable(closed_loop(sys, gain))
            artifacts["gain"] = gain
        else:
            ref = refs.get(cfg.zeta)
            result = run_algorithm_1(SimulatedPlant(sys), cost, cfg.adp_config())
            report.stability = bool(result.stable)
            report.reset_count = result.diagnostics["reset_count"]
            report.max_gain_error = max_gain_error(result.K_bar, ref.K_at, sys.period)
            report.diagnostics = {k: v for k, v in result.diagnostics.items() if k != "timings"}
            report.diagnostics["timings"] = result.diagnostics["timings"]
            artifacts.update(result=result, reference=ref)
    except AdpError as exc:
        report.failed_stage = exc.stage
        report.message = str(exc)
        report.stability = False
        log = getattr(exc, "log", None)
        if log is not None:
            report.reset_count = log.reset_count
    report.runtime = time.perf_counter() - start
    return report, artifacts


def gain_series(result, reference, period, points=GAIN_GRID_POINTS):
    """Rows ``t, Kbar entries..., Kstar entries...`` on the report grid
    (entries in vec order)."""
    ts = gain_error_grid(period, points)
    kb = np.array([result.K_bar(t).ravel(order="F") for t in ts])
    ks = np.array([reference.K_at(t).ravel(order="F") for t in ts])
    return ts, kb, ks


def hat_gain_samples(result):
    """``s_k`` and vec(K_hat_k) over the fit window."""
    sol = result.solution
    _, K = reconstruct_gains(sol)
    idx = np.arange(result.Lbar + 1)
    return sol.s[idx], K[idx].transpose(0, 2, 1).reshape(len(idx), -1)


def config_from_dict(data, base=None):
    """Trial configuration from a JSON-style dict; unknown keys are rejected."""
    base = TrialConfig() if base is None else base
    known = set(asdict(base))
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    return replace(base, **data)


def run_table1(trials, out, plots=True, refs=None):
    """Run every trial, writing ``table1.csv``, ``table1.json`` and one gain
    series (plus figure) per ADP trial that produced a gain."""
    refs = ReferenceCache() if refs is None else refs
    reports = []
    for cfg in trials:
        log.info("trial %s", cfg.name)
        rep, art = run_trial(cfg, refs)
        reports.append(rep)
        result = art.get("result")
        if result is not None:
            ts, kb, ks = gain_series(result, art["reference"], PENDULUM_PERIOD)
            path = os.path.join(out, f"gains_trial{cfg.name}.csv")
            reporting.write_gain_series(path, ts, kb, ks)
            if plots:
                plotting.plot_gain_comparison(
                    ts, kb, ks, os.path.join(out, f"gains_trial{cfg.name}.png"),
                    result.m, result.n, hat=hat_gain_samples(result),
                    title=f"trial {cfg.name}")
    reporting.write_table_csv(reports, os.path.join(out, "table1.csv"))
    reporting.write_json([{"config": asdict(c), "report": asdict(r)}
                          for c, r in zip(trials, reports)], os.path.join(out, "table1.json"))
    return reports
