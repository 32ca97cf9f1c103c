"""Linear periodic plants, fixed-step RK4 simulation and Floquet analysis."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, NonFiniteState
from .fourier import FourierBasisSpec, FourierCoefficients, fit_least_squares

DEFAULT_STEPS_PER_PERIOD = 2000
STABILITY_TOL = 1e-6


@dataclass
class PeriodicMatrixFunction:
    """A T-periodic matrix-valued function of time.

    ``fn(t)`` returns the matrix at a scalar time. ``batch(ts)``, when given,
    returns the stacked matrices for an array of times in one call; it is an
    optional fast path used by the simulators.
    """

    fn: Callable[[float], np.ndarray]
    period: float
    shape: tuple
    batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        if not self.period > 0:
            raise ValueError("period must be positive")

    @classmethod
    def constant(cls, M, period):
        M = np.atleast_2d(np.asarray(M, dtype=float)).copy()
        M.setflags(write=False)
        return cls(lambda t: M, period, M.shape,
                   batch=lambda ts: np.broadcast_to(M, (len(ts),) + M.shape))

    def __call__(self, t):
        out = np.asarray(self.fn(t), dtype=float)
        if out.shape != self.shape:
            raise DimensionMismatch(f"evaluator returned {out.shape}, expected {self.shape}")
        return out

    def sample(self, ts):
        ts = np.asarray(ts, dtype=float)
        if self.batch is not None:
            return np.asarray(self.batch(ts), dtype=float)
        return np.array([self(t) for t in ts]).reshape((len(ts),) + self.shape)

    def check_periodic(self, times=(0.0, 0.3, 1.7), tol=1e-10):
        return all(np.allclose(self(t), self(t + self.period), atol=tol, rtol=0) for t in times)


@dataclass
class CtlpSystem:
    """Plant ``dx/dt = A(t) x + B(t) u`` with T-periodic A and B."""

    A: PeriodicMatrixFunction
    B: PeriodicMatrixFunction

    def __post_init__(self):
        n, n2 = self.A.shape
        if n != n2:
            raise DimensionMismatch("A must be square")
        if self.B.shape[0] != n:
            raise DimensionMismatch("B row count must match A")
        if not np.isclose(self.A.period, self.B.period, rtol=1e-12):
            raise DimensionMismatch("A and B must share the period")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def period(self):
        return self.A.period


@dataclass
class CostSpec:
    """Quadratic cost weights: integrand ``|C(t) x|^2 + u' R(t) u``."""

    C: PeriodicMatrixFunction
    R: PeriodicMatrixFunction

    def __post_init__(self):
        if self.R.shape[0] != self.R.shape[1]:
            raise DimensionMismatch("R must be square")
        T = self.R.period
        for t in np.linspace(0.0, T, 7):
            Rt = self.R(t)
            if np.min(np.linalg.eigvalsh(0.5 * (Rt + Rt.T))) <= 1e-10:
                raise ValueError(f"R(t) is not positive definite at t={t:.4g}")

    @property
    def period(self):
        return self.C.period


@dataclass
class GainSchedule:
    """Periodic feedback gain ``K(t)`` (m x n) stored as Fourier coefficients of vec(K)."""

    coeffs: FourierCoefficients
    m: int
    n: int

    def __post_init__(self):
        if self.coeffs.d != self.m * self.n:
            raise DimensionMismatch(f"coefficients have {self.coeffs.d} rows, need {self.m * self.n}")

    @property
    def period(self):
        return self.coeffs.basis.period

    def __call__(self, t):
        v = self.coeffs(t)
        if np.ndim(t) == 0:
            return v.reshape((self.m, self.n), order="F")
        return v.reshape((-1, self.n, self.m)).transpose(0, 2, 1)

    @classmethod
    def fit(cls, times, gains, period, N):
        """Least-squares Fourier fit of sampled gain matrices."""
        gains = np.asarray(gains, dtype=float)
        m, n = gains.shape[1:]
        values = gains.transpose(0, 2, 1).reshape(len(gains), m * n)
        coeffs, _ = fit_least_squares(times, values, FourierBasisSpec.from_period(N, period))
        return cls(coeffs, m, n)

    @classmethod
    def constant(cls, K, period):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        W = K.reshape(-1, 1, order="F")
        return cls(FourierCoefficients(W, FourierBasisSpec.from_period(0, period)), *K.shape)

    def as_matrix_function(self):
        return PeriodicMatrixFunction(self, self.period, (self.m, self.n), batch=self)


@dataclass
class TrajectoryLog:
    """Sampled trajectory, stored as one fine-grid segment per sampling interval.

    ``x[j]`` and ``u[j]`` hold ``substeps + 1`` points covering
    ``[t_j, t_{j+1}]``. ``reset[j]`` is True when the state was reset at
    ``t_j``; ``valid[j]`` marks intervals usable as data rows.
    """

    t: np.ndarray            # (M, S+1)
    x: np.ndarray            # (M, S+1, n)
    u: np.ndarray            # (M, S+1, m)
    dt: float
    reset: np.ndarray = None  # (M+1,) bool
    valid: np.ndarray = None  # (M,) bool
    beta: float = np.inf
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = self.t.shape[0]
        if self.reset is None:
            self.reset = np.zeros(M + 1, dtype=bool)
        if self.valid is None:
            self.valid = np.ones(M, dtype=bool)

    @property
    def M(self):
        return self.t.shape[0]

    @property
    def substeps(self):
        return self.t.shape[1] - 1

    @property
    def sample_times(self):
        return np.append(self.t[:, 0], self.t[-1, -1])

    @property
    def reset_count(self):
        return int(self.reset.sum())

    @property
    def times(self):
        """Flattened time grid (continuous when there were no resets)."""
        return np.concatenate([self.t[:, 0:-1].ravel(), self.t[-1, -1:]])

    @property
    def states(self):
        return np.concatenate([self.x[:, :-1].reshape(-1, self.x.shape[2]), self.x[-1, -1:]])

    @property
    def inputs(self):
        return np.concatenate([self.u[:, :-1].reshape(-1, self.u.shape[2]), self.u[-1, -1:]])

    @property
    def final_state(self):
        return self.x[-1, -1]


def _uniform_grid(t0, t1, step):
    if not step > 0:
        raise ValueError("step must be positive")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    nsteps = int(np.ceil((t1 - t0) / step - 1e-9))
    return np.linspace(t0, t1, nsteps + 1)


def _stage_times(ts):
    """Times at which RK4 evaluates the vector field: t_k, t_k + h/2, ..., t_K."""
    mids = 0.5 * (ts[:-1] + ts[1:])
    out = np.empty(2 * len(ts) - 1)
    out[0::2] = ts
    out[1::2] = mids
    return out


def rk4_step_maps(F, G, h):
    """Affine one-step RK4 maps ``x -> Phi_k x + g_k`` for ``dx/dt = F(t) x + g(t)``.

    ``F`` (2K+1, n, n) and ``G`` (2K+1, n) are sampled at the stage times.
    """
    K = (len(F) - 1) // 2
    h = np.broadcast_to(np.asarray(h, dtype=float), (K,))[:, None, None]
    F0, Fm, F1 = F[0:-1:2], F[1::2], F[2::2]
    G0, Gm, G1 = G[0:-1:2, :, None], G[1::2, :, None], G[2::2, :, None]
    n = F.shape[1]
    eye = np.eye(n)
    # stage derivatives written as (matrix acting on x, constant part)
    k1m, k1c = F0, G0
    k2m = Fm @ (eye + 0.5 * h * k1m)
    k2c = Fm @ (0.5 * h * k1c) + Gm
    k3m = Fm @ (eye + 0.5 * h * k2m)
    k3c = Fm @ (0.5 * h * k2c) + Gm
    k4m = F1 @ (eye + h * k3m)
    k4c = F1 @ (h * k3c) + G1
    Phi = eye + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
    g = (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    return Phi, g[..., 0]


def rk4_linear(F, G, x0, h):
    """RK4 for ``dx/dt = F(t) x + g(t)`` with the coefficients pre-sampled.

    ``F`` (2K+1, n, n) and ``G`` (2K+1, n) are sampled at the stage times;
    ``h`` is a scalar or per-step array. A matrix ``x0`` integrates each
    column of the homogeneous equation (``G`` is ignored). Returns the K+1
    states.
    """
    x = np.asarray(x0, dtype=float).copy()
    Phi, g = rk4_step_maps(F, np.asarray(G, dtype=float), h)
    K = len(Phi)
    out = np.empty((K + 1,) + x.shape)
    out[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        if x.ndim == 2:
            for k in range(K):
                x = Phi[k] @ x
                out[k + 1] = x
        else:
            for k in range(K):
                x = Phi[k] @ x + g[k]
                out[k + 1] = x
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("state became non-finite during integration")
    return out


def _input_samples(input, ts, m):
    if input is None:
        return np.zeros((len(ts), m))
    if hasattr(input, "sample"):
        return np.asarray(input.sample(ts), dtype=float).reshape(len(ts), m)
    return np.array([np.atleast_1d(input(t)) for t in ts], dtype=float).reshape(len(ts), m)


def integrate_trajectory(sys, x0, t0, t1, step, input=None):
    """Simulate the plant with RK4 on a uniform grid.

    ``input`` is None (unforced), a callable ``t -> u`` (open loop), or a
    :class:`GainSchedule` applied as ``u = -K(t) x``. The step is shrunk
    slightly when needed so the grid ends exactly at ``t1``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    ts = _uniform_grid(t0, t1, step)
    h = ts[1] - ts[0]
    st = _stage_times(ts)
    A = sys.A.sample(st)
    B = sys.B.sample(st)
    if isinstance(input, GainSchedule):
        K = input(st)
        F = A - B @ K
        xs = rk4_linear(F, np.zeros((len(st), sys.n)), x0, h)
        us = -np.einsum("kij,kj->ki", K[0::2], xs)
    else:
        U = _input_samples(input, st, sys.m)
        G = np.einsum("kij,kj->ki", B, U)
        xs = rk4_linear(A, G, x0, h)
        us = U[0::2]
    # one-step segments so the log shares TrajectoryLog's layout
    seg = np.stack([xs[:-1], xs[1:]], axis=1)
    useg = np.stack([us[:-1], us[1:]], axis=1)
    tseg = np.stack([ts[:-1], ts[1:]], axis=1)
    return TrajectoryLog(tseg, seg, useg, dt=h)


def state_transition(sys, t0, t1, step):
    """Transition matrix Phi(t1, t0) of the unforced plant."""
    n = sys.n
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return np.eye(n)
    ts = _uniform_grid(t0, t1, step)
    A = sys.A.sample(_stage_times(ts))
    out = rk4_linear(A, np.zeros((len(A), n)), np.eye(n), ts[1] - ts[0])
    return out[-1]


def closed_loop(sys, gain):
    """Plant with ``u = -K(t) x`` folded into the drift; B is kept for reference."""
    Kf = gain.as_matrix_function() if isinstance(gain, GainSchedule) else gain
    A, B = sys.A, sys.B

    def fn(t):
        return A(t) - B(t) @ Kf(t)

    def batch(ts):
        return A.sample(ts) - B.sample(ts) @ Kf.sample(ts)

    return CtlpSystem(PeriodicMatrixFunction(fn, A.period, A.shape, batch=batch), B)


def monodromy(sys, t0=0.0, step=None):
    """Phi(t0 + T, t0)."""
    T = sys.period
    if step is None:
        step = T / DEFAULT_STEPS_PER_PERIOD
    return state_transition(sys, t0, t0 + T, step)


def characteristic_multipliers(M):
    """Moduli of the monodromy eigenvalues, largest first."""
    return np.sort(np.abs(np.linalg.eigvals(M)))[::-1]


def is_stable(sys, t0=0.0, tol=STABILITY_TOL, step=None):
    try:
        mods = characteristic_multipliers(monodromy(sys, t0, step))
    except NonFiniteState:
        return False
    return bool(mods[0] < 1.0 - tol)
