"""Data-driven value iteration for periodic linear-quadratic control."""

from .bench import TABLE1_TRIALS, TrialConfig, TrialReport, evaluate_cost, mbplq_controller, \
    run_table1, run_trial
from .data_collection import DataMatrices, ExplorationConfig, ExplorationSignal, TrajectoryLog, \
    build_data_matrices, collect, exploration_input, verify_data_equation
from .errors import AdpError
from .fourier import FourierBasisSpec, FourierCoefficients, basis_eval, \
    coefficients_by_quadrature, fit_least_squares
from .periodic_system import CostSpec, CtlpSystem, GainSchedule, PeriodicMatrixFunction, \
    characteristic_multipliers, closed_loop, integrate_trajectory, is_stable, monodromy, \
    state_transition
from .pre_solver import PreSolution, SteadySolution, hk_from_p, solve_pre_backward, \
    steady_periodic_solution
from .systems import build_triple_pendulum
from .vectorize import quad_vec, vec, vec_inv, vecs, vecs_inv
from .vi_adp import AdpConfig, AdpResult, SimulatedPlant, ViSolution, detect_periodicity, \
    fit_periodic_gains, reconstruct_gains, run_algorithm_1, solve_vi_backward, tune_parameters, \
    vi_rhs

__version__ = "0.1.0"
