import inspect
import re

import numpy as np
import pytest

from conftest import SMALL_EXPLORATION, scalar_system, sin_drift_system
from periodic_adp import vi_adp
from periodic_adp.data_collection import (ExplorationSignal, build_data_matrices, collect,
                                          model_coefficients)
from periodic_adp.errors import BadWindow, Blowup, HorizonTooShort, NoConvergence, RankDeficient
from periodic_adp.fourier import FourierBasisSpec
from periodic_adp.periodic_system import CostSpec, PeriodicMatrixFunction
from periodic_adp.pre_solver import solve_pre_backward
from periodic_adp.vectorize import vecs
from periodic_adp.vi_adp import (AdpConfig, SimulatedPlant, ViSolution, default_window,
                                 detect_periodicity, fit_periodic_gains, pinv_product,
                                 reconstruct_gains, solve_vi_backward, tune_parameters, vi_rhs)


def const_cost(C, R, period):
    return CostSpec(PeriodicMatrixFunction.constant(C, period),
                    PeriodicMatrixFunction.constant(R, period))


def _scalar_data(a=0.0, N=0, period=1.0, M=200):
    sys, cost = scalar_system(a=a, period=period)
    sig = ExplorationSignal(0.5, [[1.0, 2.3, 4.1, 7.7]])
    log = collect(sys, sig, 0.1, M, 10.0)
    return sys, cost, build_data_matrices(log, N, cost)


def test_rhs_at_zero_is_state_cost():
    _, cost, dm = _scalar_data()
    X = pinv_product(dm)
    dH, dK = vi_rhs(np.zeros((1, 1)), np.zeros((1, 1)), 0.0, X, cost, dm.basis)
    # w(P) = X vecs(P) is linear in P, so the derivative is X(-1) for q = 1
    assert dH[0, 0] == pytest.approx(-X[0, 0])
    assert dK[0, 0] == pytest.approx(-X[1, 0])
    assert dK[0, 0] == pytest.approx(-1.0, abs=1e-6)
    assert abs(dH[0, 0]) < 1e-6


def test_zero_cost_gives_zero_coefficients():
    sys, _, dm = _scalar_data()
    cost = const_cost([[0.0]], [[1.0]], 1.0)
    sol = solve_vi_backward(dm, cost, 2.0, 0.1)
    assert np.all(sol.WH == 0.0) and np.all(sol.WK == 0.0)


def test_scalar_gain_follows_tanh():
    _, cost, dm = _scalar_data()
    sol = solve_vi_backward(dm, cost, 3.0, 0.01)
    _, K = reconstruct_gains(sol)
    assert np.max(np.abs(K[:, 0, 0] - np.tanh(3.0 - sol.s))) < 2e-2
    assert np.all(sol.WH[-1] == 0.0) and np.all(sol.WK[-1] == 0.0)
    assert sol.L == 300 and sol.h == pytest.approx(0.01)


def test_matches_model_riccati_on_periodic_scalar():
    # a(t) = sin t: H(s, t) = 2 sin(t) P(s) lies in the N = 1 span exactly
    sys = sin_drift_system()
    cost = const_cost([[1.0]], [[1.0]], 2 * np.pi)
    sig = ExplorationSignal(0.5, [[0.7, 1.9, 3.3, 5.1]])
    log = collect(sys, sig, 0.1, 400, 10.0)
    dm = build_data_matrices(log, 1, cost)
    sol = solve_vi_backward(dm, cost, 4.0, 0.01)
    pre = solve_pre_backward(sys, cost, [[0.0]], 4.0, 0.01)
    _, K = reconstruct_gains(sol)
    assert np.max(np.abs(K[:, 0, 0] - pre.P[:, 0, 0])) < 1e-4
    k = 100
    WH, WK = model_coefficients(sys, cost, pre.P[k], dm.basis)
    assert np.allclose(sol.WH[k], WH, atol=1e-4)
    assert np.allclose(sol.WK[k], WK, atol=1e-4)


def test_step_refinement():
    _, cost, dm = _scalar_data()
    k1 = reconstruct_gains(solve_vi_backward(dm, cost, 2.0, 0.1))[1][0, 0, 0]
    k2 = reconstruct_gains(solve_vi_backward(dm, cost, 2.0, 0.05))[1][0, 0, 0]
    assert abs(k1 - k2) < 1e-5


def test_grid_checks_and_blowup():
    _, cost, dm = _scalar_data()
    with pytest.raises(ValueError):
        solve_vi_backward(dm, cost, 1.05, 0.1)
    with pytest.raises(ValueError):
        solve_vi_backward(dm, cost, 1.0, 0.0)
    big = const_cost([[1e3]], [[1e-6]], 1.0)
    unstable_sys, _ = scalar_system(a=3.0)
    log = collect(unstable_sys, ExplorationSignal(0.5, [[1.0, 2.3]]), 0.1, 100, 10.0)
    dm2 = build_data_matrices(log, 0, big)
    with pytest.raises(Blowup) as info:
        solve_vi_backward(dm2, big, 50.0, 0.1, bound=1e4)
    assert info.value.stage == "solve_vi_backward"


def test_reconstruct_gains_layout():
    basis = FourierBasisSpec.from_period(1, 2 * np.pi)
    s = np.array([0.0, np.pi / 2])
    WH = np.zeros((2, 3, 3))
    WK = np.zeros((2, 2, 3))
    WH[:, :, 0] = [1.0, np.sqrt(2) * 2.0, 3.0]
    WK[:, :, 2] = [5.0, 7.0]       # sin coefficient
    H, K = reconstruct_gains(ViSolution(s, WH, WK, basis, 2, 1))
    assert np.allclose(H[0], [[1, 2], [2, 3]])
    assert np.allclose(K[0], 0.0)
    assert np.allclose(K[1], [[5.0, 7.0]])


def test_detect_periodicity():
    basis = FourierBasisSpec.from_period(0, 1.0)
    s = np.arange(51) * 0.1
    flat = ViSolution(s, np.ones((51, 1, 1)), np.ones((51, 1, 1)), basis, 1, 1)
    assert detect_periodicity(flat, 1.0)[0]
    ramp = ViSolution(s, s[:, None, None].copy(), np.ones((51, 1, 1)), basis, 1, 1)
    ok, ratio = detect_periodicity(ramp, 1.0)
    assert not ok and ratio > 0.05
    with pytest.raises(HorizonTooShort):
        detect_periodicity(flat, 3.0)


def test_pendulum_short_horizon_is_flagged(trial1):
    assert trial1.diagnostics["periodic"]
    short = ViSolution(trial1.solution.s[:81], trial1.solution.WH[:81],
                       trial1.solution.WK[:81], trial1.solution.basis, 6, 3)
    with pytest.raises(HorizonTooShort):
        detect_periodicity(short, 2 * np.pi)


def test_default_window():
    assert default_window(40.0, 0.1, 6, 2 * np.pi, "plain") == 133
    assert default_window(40.0, 0.1, 6, 2 * np.pi) == 133
    # short horizon: clamped rule moves the window past one period
    assert default_window(18.0, 0.1, 6, 2 * np.pi) == 63
    assert default_window(18.0, 0.1, 6, 2 * np.pi, "plain") == 60
    with pytest.raises(ValueError):
        default_window(18.0, 0.1, 6, 2 * np.pi, "other")


def _synthetic(coef_h, coef_k, basis, L=200, h=0.05):
    s = np.arange(L + 1) * h
    WH = np.repeat(coef_h[None], L + 1, axis=0)
    WK = np.repeat(coef_k[None], L + 1, axis=0)
    return ViSolution(s, WH, WK, basis, 1, 1)


def test_fit_recovers_trig_polynomial():
    basis = FourierBasisSpec.from_period(2, 2.0)
    ch = np.array([[1.0, 0.3, -0.2, 0.1, 0.05]])
    ck = np.array([[0.5, 0.0, 0.4, -0.1, 0.0]])
    sol = _synthetic(ch, ck, basis)
    res = fit_periodic_gains(sol, 60)
    assert np.allclose(res.WH_bar.W, ch, atol=1e-12)
    assert np.allclose(res.WK_bar.W, ck, atol=1e-12)
    assert res.K_bar(0.0)[0, 0] == pytest.approx(ck[0] @ [1, 1, 0, 1, 0])
    assert res.diagnostics["window_ok"]


def test_fit_window_checks():
    basis = FourierBasisSpec.from_period(2, 2.0)
    sol = _synthetic(np.ones((1, 5)), np.ones((1, 5)), basis)
    with pytest.raises(BadWindow):
        fit_periodic_gains(sol, 30)           # s_Lbar = 1.5 < T
    with pytest.raises(BadWindow):
        fit_periodic_gains(sol, 150)          # beyond L/2
    res = fit_periodic_gains(sol, 30, strict=False)
    assert not res.diagnostics["window_ok"]
    with pytest.raises(RankDeficient) as info:
        fit_periodic_gains(sol, 60, alpha=10.0)
    assert info.value.stage == "fit_periodic_gains"


def test_learner_never_reads_plant_matrices():
    # the data-driven stages only see data matrices and cost weights
    for fn in (vi_rhs, solve_vi_backward, reconstruct_gains, fit_periodic_gains,
               pinv_product, vi_adp.run_algorithm_1):
        src = inspect.getsource(fn)
        assert not re.search(r"\.(A|B)\b", src), fn.__name__
        assert "_sys" not in src, fn.__name__
    params = inspect.signature(solve_vi_backward).parameters
    assert list(params)[:4] == ["dm", "cost", "s_f", "h"]


def test_trial1_learns_stabilizing_gain(trial1, pendulum_star):
    from periodic_adp.bench import max_gain_error
    assert trial1.stable
    assert max_gain_error(trial1.gain, pendulum_star.K_at, 2 * np.pi) < 0.1
    d = trial1.diagnostics
    assert d["theta_shape"] == [d["valid_rows"], 507]
    assert 15 <= d["reset_count"] <= 40


def _two_state_cfg(N, s_f):
    return AdpConfig(N=N, M=800, dt=0.1, s_f=s_f, h=0.05, beta=10.0, substeps=20,
                     exploration=SMALL_EXPLORATION, strict=False, Lbar_rule="plain")


def test_tuning_lengthens_horizon(two_state, two_state_log):
    sys, cost = two_state
    res, history = tune_parameters(SimulatedPlant(sys), cost, _two_state_cfg(2, 8.0),
                                   log=two_state_log)
    assert res.diagnostics["periodic"]
    assert [h["s_f"] for h in history] == pytest.approx([8.0, 12.0, 18.0])
    assert history[-1]["outcome"] == "periodic"


def test_tuning_gives_up(two_state, two_state_log):
    sys, cost = two_state
    with pytest.raises(NoConvergence) as info:
        tune_parameters(SimulatedPlant(sys), cost, _two_state_cfg(2, 8.0), max_retries=2,
                        log=two_state_log)
    assert info.value.stage == "tune_parameters"
