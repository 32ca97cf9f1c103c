"""Exploration, trajectory logging with state resets, and data-matrix assembly."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Misconfiguration, TooFewRows
from .fourier import FourierBasisSpec, basis_eval, coefficients_by_quadrature
from .periodic_system import TrajectoryLog, _stage_times, rk4_linear
from .pre_solver import hk_from_p
from .vectorize import quad_vec, sym_dim, vec, vecs

DEFAULT_SUBSTEPS = 20


@dataclass(frozen=True)
class ExplorationConfig:
    """Sum-of-sines exploration input; frequencies are uniform on ``freq_range``."""

    amplitude: float = 0.2
    num_sinusoids: int = 500
    freq_range: tuple = (-500.0, 500.0)
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.freq_range[0] < self.freq_range[1]:
            raise ValueError("freq_range must satisfy lo < hi")
        if self.num_sinusoids < 1:
            raise ValueError("num_sinusoids must be positive")

    def frequencies(self, m):
        rng = np.random.default_rng(self.seed)
        lo, hi = self.freq_range
        return rng.uniform(lo, hi, size=(m, self.num_sinusoids))


class ExplorationSignal:
    """``u_i(t) = amplitude * sum_j sin(w_ij t)``."""

    def __init__(self, amplitude, frequencies):
        self.amplitude = float(amplitude)
        self.frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))

    @classmethod
    def from_config(cls, cfg, m):
        return cls(cfg.amplitude, cfg.frequencies(m))

    @property
    def m(self):
        return self.frequencies.shape[0]

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequencies * t).sum(axis=1)

    def sample(self, ts, block=1024):
        """Signal at many times. On a uniform grid the sum of sines is formed
        blockwise as ``Im(exp(i w (t0 + k dt)))`` products, which avoids one
        ``sin`` call per (time, frequency) pair."""
        ts = np.asarray(ts, dtype=float).ravel()
        out = np.empty((ts.size, self.m))
        if ts.size > 2 * block:
            steps = np.diff(ts)
            if np.allclose(steps, steps[0], rtol=1e-12, atol=1e-12 * max(1.0, abs(ts[-1]))):
                delta = (ts[-1] - ts[0]) / (ts.size - 1)
                starts = ts[0] + np.arange(0, ts.size, block) * delta
                offsets = np.arange(block) * delta
                for c in range(self.m):
                    w = self.frequencies[c]
                    rot = np.exp(1j * np.outer(offsets, w))       # (block, num)
                    base = np.exp(1j * np.outer(w, starts))       # (num, blocks)
                    vals = (rot @ base).imag.T.ravel()[:ts.size]
                    out[:, c] = vals
                return self.amplitude * out
        for i in range(0, ts.size, block):
            tt = ts[i:i + block]
            out[i:i + block] = np.sin(tt[:, None, None] * self.frequencies[None]).sum(axis=2)
        return self.amplitude * out


def exploration_input(cfg, t, m):
    return ExplorationSignal.from_config(cfg, m)(t)


def collect(sys, signal, dt, M, beta, x_reset=None, substeps=DEFAULT_SUBSTEPS, x0=None):
    """Drive the plant with ``signal`` for ``M`` sampling intervals of length ``dt``.

    Whenever ``|x(t_j)| > beta`` at a sampling instant the state is reset to
    ``x_reset``; the interval that ended outside the bound is marked invalid,
    as is any interval whose fine-grid states leave the ball.
    """
    n = sys.n
    x_reset = np.zeros(n) if x_reset is None else np.asarray(x_reset, dtype=float).reshape(n)
    x = x_reset.copy() if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    if not beta > 0:
        raise Misconfiguration("beta must be positive")
    if np.linalg.norm(x_reset) > beta or np.linalg.norm(x) > beta:
        raise Misconfiguration("reset/initial state lies outside the beta ball")
    if substeps < 10:
        raise Misconfiguration("substeps must be at least 10")
    if signal.m != sys.m:
        raise DimensionMismatch(f"signal has {signal.m} channels, plant has {sys.m} inputs")

    S = int(substeps)
    h = dt / S
    t_fine = np.arange(M * S + 1) * h
    st = _stage_times(t_fine)
    U_st = signal.sample(st)
    A_st = sys.A.sample(st)
    BU_st = np.einsum("kij,kj->ki", sys.B.sample(st), U_st)

    T = t_fine[:M * S].reshape(M, S) 
    tseg = np.concatenate([T, (T[:, -1] + h)[:, None]], axis=1)
    useg = np.empty((M, S + 1, sys.m))
    xseg = np.empty((M, S + 1, n))
    reset = np.zeros(M + 1, dtype=bool)
    valid = np.ones(M, dtype=bool)
    for j in range(M):
        if j > 0 and np.linalg.norm(x) > beta:
            x = x_reset.copy()
            reset[j] = True
            valid[j - 1] = False
        sl = slice(2 * j * S, 2 * (j + 1) * S + 1)
        xs = rk4_linear(A_st[sl], BU_st[sl], x, h)
        xseg[j] = xs
        useg[j] = U_st[sl][0::2]
        if np.max(np.linalg.norm(xs, axis=1)) > beta:
            valid[j] = False
        x = xs[-1]
    return TrajectoryLog(tseg, xseg, useg, dt=dt, reset=reset, valid=valid, beta=beta,
                         meta={"substeps": S})


@dataclass
class DataMatrices:
    """Stacked data equation ``Theta @ w ~= Gamma @ vecs(P)``.

    ``w`` stacks ``vec(W_H)`` and ``vec(W_K)`` (column-major vec of the
    coefficient matrices).
    """

    Theta: np.ndarray
    Gamma: np.ndarray
    N: int
    n: int
    m: int
    period: float
    sigma_scaled: float
    rows: np.ndarray = None
    quadrature: str = "simpson"
    log: TrajectoryLog = field(default=None, repr=False)

    @property
    def n1(self):
        return sym_dim(self.n)

    @property
    def n2(self):
        return self.n * self.m

    @property
    def basis(self):
        return FourierBasisSpec.from_period(self.N, self.period)

    @property
    def num_unknowns(self):
        return (self.n1 + self.n2) * (2 * self.N + 1)

    def save(self, path):
        np.savez(path, Theta=self.Theta, Gamma=self.Gamma, N=self.N, n=self.n, m=self.m,
                 period=self.period, sigma_scaled=self.sigma_scaled,
                 rows=np.asarray(self.rows if self.rows is not None else []),
                 quadrature=self.quadrature)

    @classmethod
    def load(cls, path):
        z = np.load(path)
        return cls(z["Theta"], z["Gamma"], int(z["N"]), int(z["n"]), int(z["m"]),
                   float(z["period"]), float(z["sigma_scaled"]), z["rows"], str(z["quadrature"]))


def _weights(S, h, rule):
    if rule == "trapezoid":
        w = np.full(S + 1, h)
        w[[0, -1]] = 0.5 * h
        return w
    if rule == "simpson":
        if S % 2:
            raise ValueError("simpson rule needs an even number of substeps")
        w = np.full(S + 1, 2.0 * h / 3.0)
        w[1::2] = 4.0 * h / 3.0
        w[[0, -1]] = h / 3.0
        return w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def interval_integrals(t, x, u, R, basis, weights):
    """Integrals over one sampling interval.

    Returns ``(I_Fx, I_Fxu)``: the integrals of ``F_N' kron xtilde'`` and
    ``F_N' kron x' kron (2 u' R)`` evaluated with the given quadrature
    weights on the fine grid.
    """
    F = basis_eval(basis, t) * weights[:, None]
    xt = quad_vec(x)
    v = 2.0 * np.einsum("kij,kj->ki", R, u)
    I_fx = (F.T @ xt).ravel()
    I_fxu = np.einsum("ka,kb,kc->abc", F, x, v).ravel()
    return I_fx, I_fxu


def build_data_matrices(log, N, cost, period=None, quadrature="simpson",
                        allow_rank_deficient=False):
    """Assemble ``Theta`` and ``Gamma`` from every valid interval of ``log``.

    Raises :class:`TooFewRows` when the valid rows do not exceed the number
    of unknowns ``(n1 + n2)(2N + 1)``, unless ``allow_rank_deficient``.
    """
    period = cost.period if period is None else period
    basis = FourierBasisSpec.from_period(N, period)
    n = log.x.shape[2]
    m = log.u.shape[2]
    n1, n2 = sym_dim(n), n * m
    cols = (n1 + n2) * basis.dim
    rows = np.flatnonzero(log.valid)
    if rows.size <= cols and not allow_rank_deficient:
        raise TooFewRows(f"{rows.size} valid rows, need more than {cols}")
    if rows.size == 0:
        raise TooFewRows("no valid intervals in the log")
    h = log.t[0, 1] - log.t[0, 0]
    w = _weights(log.substeps, h, quadrature)
    Theta = np.empty((rows.size, cols))
    Gamma = np.empty((rows.size, n1))
    for r, j in enumerate(rows):
        R = cost.R.sample(log.t[j])
        I_fx, I_fxu = interval_integrals(log.t[j], log.x[j], log.u[j], R, basis, w)
        Theta[r, :n1 * basis.dim] = I_fx
        Theta[r, n1 * basis.dim:] = I_fxu
        Gamma[r] = quad_vec(log.x[j, -1]) - quad_vec(log.x[j, 0])
    sigma = np.linalg.svd(Theta, compute_uv=False)
    sigma_scaled = float(sigma[-1] ** 2 / rows.size) if rows.size >= cols else 0.0
    return DataMatrices(Theta, Gamma, int(N), n, m, float(period), sigma_scaled, rows,
                        quadrature, log)


def model_coefficients(sys, cost, P, basis, quad_points=None):
    """Fourier coefficients ``(W_H, W_K)`` of ``vecs(H(t))`` and ``vec(K(t))``
    for a fixed P, computed from the model."""
    if quad_points is None:
        quad_points = max(8 * basis.dim, 256)

    def hk(t):
        H, K = hk_from_p(sys, cost, P, t)
        return np.concatenate([vecs(H), vec(K)])

    W = coefficients_by_quadrature(hk, basis, quad_points).W
    n1 = sym_dim(sys.n)
    return W[:n1], W[n1:]


def stack_w(WH, WK):
    """``[vec(W_H); vec(W_K)]``."""
    return np.concatenate([vec(WH), vec(WK)])


def verify_data_equation(dm, sys, cost, P, s=0.0, N_check=None):
    """Relative residual of the data equation for the model's H and K at P.

    ``s`` only labels the algorithmic time P belongs to. If ``N_check``
    differs from ``dm.N`` the matrices are rebuilt from ``dm.log``.
    """
    if N_check is not None and N_check != dm.N:
        if dm.log is None:
            raise ValueError("rebuilding at a new N needs the trajectory log")
        dm = build_data_matrices(dm.log, N_check, cost, dm.period, dm.quadrature,
                                 allow_rank_deficient=True)
    WH, WK = model_coefficients(sys, cost, P, dm.basis)
    rhs = dm.Gamma @ vecs(P)
    res = dm.Theta @ stack_w(WH, WK) - rhs
    denom = np.linalg.norm(rhs)
    if denom == 0.0:
        return float(np.linalg.norm(res))
    return float(np.linalg.norm(res) / denom)


def write_log_csv(log, path):
    """Columns ``t, x1..xn, u1..um, reset_flag, interval``; each interval's
    fine-grid points are written in full, so boundary times repeat."""
    n, m = log.x.shape[2], log.u.shape[2]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
                   + ["reset_flag", "interval", "valid"])
        for j in range(log.M):
            for k in range(log.substeps + 1):
                flag = int(k == 0 and log.reset[j])
                w.writerow([repr(float(log.t[j, k]))]
                           + [repr(float(v)) for v in log.x[j, k]]
                           + [repr(float(v)) for v in log.u[j, k]]
                           + [flag, j, int(log.valid[j])])


def read_log_csv(path, dt=None, beta=np.inf):
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    xs = [c for c in names if c.startswith("x")]
    us = [c for c in names if c.startswith("u")]
    intervals = data["interval"].astype(int)
    M = intervals.max() + 1
    S1 = data.size // M
    t = data["t"].reshape(M, S1)
    x = np.stack([data[c] for c in xs], axis=-1).reshape(M, S1, len(xs))
    u = np.stack([data[c] for c in us], axis=-1).reshape(M, S1, len(us))
    reset = np.zeros(M + 1, dtype=bool)
    reset[:M] = data["reset_flag"].reshape(M, S1)[:, 0] > 0
    valid = data["valid"].reshape(M, S1)[:, 0] > 0
    dt = t[0, -1] - t[0, 0] if dt is None else dt
    return TrajectoryLog(t, x, u, dt=dt, reset=reset, valid=valid, beta=beta)
