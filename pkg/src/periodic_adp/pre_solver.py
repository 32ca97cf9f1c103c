"""Model-based periodic Riccati solver used as the reference oracle.

The Riccati flow is integrated backward in algorithmic time ``s`` from a
final value ``P(s_f) = G``; internally that is a forward RK4 sweep in
``tau = s_f - s``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, RiccatiBlowup, SingularR
from .fourier import FourierBasisSpec, fit_least_squares
from .periodic_system import GainSchedule, _stage_times
from .vectorize import symmetrize, vecs, vecs_inv

BLOWUP_BOUND = 1e8
PERIODIC_TOL = 1e-6


@dataclass
class PreSolution:
    s: np.ndarray   # (L+1,) grid s_k = k h
    P: np.ndarray   # (L+1, n, n)
    G: np.ndarray
    s_f: float

    @property
    def h(self):
        return self.s[1] - self.s[0]

    def at(self, s):
        k = int(round(s / self.h))
        if abs(k * self.h - s) > 1e-9 * max(1.0, abs(s)):
            raise ValueError(f"s={s} is not on the solution grid")
        return self.P[k]


def _coefficients(sys, cost, s):
    """Sample A, C'C and B R^{-1} B' at algorithmic times ``s``."""
    A = sys.A.sample(s)
    B = sys.B.sample(s)
    C = cost.C.sample(s)
    R = cost.R.sample(s)
    try:
        RinvBt = np.linalg.solve(R, B.transpose(0, 2, 1))
    except np.linalg.LinAlgError as exc:
        raise SingularR(str(exc)) from exc
    return A, C.transpose(0, 2, 1) @ C, B @ RinvBt


def _riccati_sweep(A, Q, S, G, h, bound):
    """RK4 on dP/dtau = A'P + PA + Q - PSP with coefficients pre-sampled at
    the stage times, ordered by increasing tau."""
    K = (len(A) - 1) // 2

    def rhs(i, P):
        AP = A[i].T @ P
        PSP = P @ S[i] @ P
        D = AP + AP.T + Q[i] - PSP
        return 0.5 * (D + D.T)

    P = symmetrize(G)
    out = np.empty((K + 1,) + P.shape)
    out[0] = P
    for k in range(K):
        i0, im, i1 = 2 * k, 2 * k + 1, 2 * k + 2
        k1 = rhs(i0, P)
        k2 = rhs(im, P + 0.5 * h * k1)
        k3 = rhs(im, P + 0.5 * h * k2)
        k4 = rhs(i1, P + h * k3)
        P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norm = np.sqrt(np.sum(P * P))
        if not norm <= bound:
            raise RiccatiBlowup(f"|P| = {norm:.3e} exceeded {bound:.1e} after {k + 1} steps")
        out[k + 1] = P
    return out


def _check_psd(G):
    G = np.asarray(G, dtype=float)
    if np.linalg.norm(G - G.T) > 1e-8 * max(1.0, np.linalg.norm(G)):
        raise ValueError("final value G must be symmetric")
    if np.min(np.linalg.eigvalsh(symmetrize(G))) < -1e-10:
        raise ValueError("final value G must be positive semidefinite")
    return symmetrize(G)


def solve_pre_backward(sys, cost, G, s_f, h, bound=BLOWUP_BOUND):
    """Integrate the Riccati equation backward on ``[0, s_f]`` from ``P(s_f) = G``."""
    G = _check_psd(G)
    if not h > 0:
        raise ValueError("h must be positive")
    L = int(round(s_f / h))
    if L < 1 or abs(L * h - s_f) > 1e-9 * max(1.0, s_f):
        raise ValueError(f"s_f={s_f} is not a multiple of h={h}")
    s = np.arange(L + 1) * h
    # algorithmic times visited in order of increasing tau
    s_stage = _stage_times(s[::-1])
    A, Q, S = _coefficients(sys, cost, s_stage)
    sweep = _riccati_sweep(A, Q, S, G, h, bound)
    return PreSolution(s=s, P=sweep[::-1].copy(), G=G, s_f=float(s_f))


def hk_from_p(sys, cost, P, t):
    """``H = A(t)'P + P A(t)`` and ``K = R(t)^{-1} B(t)' P``."""
    A, B, R = sys.A(t), sys.B(t), cost.R(t)
    try:
        K = np.linalg.solve(R, B.T @ P)
    except np.linalg.LinAlgError as exc:
        raise SingularR(str(exc)) from exc
    AP = A.T @ P
    return AP + AP.T, K


@dataclass
class SteadySolution:
    """Periodic Riccati solution over one period ``[0, T]``.

    ``P`` holds the grid values; :meth:`P_at` evaluates a Fourier fit of
    them at arbitrary times.
    """

    s: np.ndarray
    P: np.ndarray
    s_f: float
    gap: float
    gaps: list
    sys: object
    cost: object
    N_fit: int = 30

    def __post_init__(self):
        T = self.sys.period
        spec = FourierBasisSpec.from_period(min(self.N_fit, (len(self.s) - 3) // 2), T)
        values = np.array([vecs(Pk) for Pk in self.P[:-1]])
        self._fit, _ = fit_least_squares(self.s[:-1], values, spec)

    @property
    def period(self):
        return self.sys.period

    def P_at(self, t):
        return vecs_inv(self._fit(float(t)))

    def K_at(self, t):
        return hk_from_p(self.sys, self.cost, self.P_at(t), t)[1]

    def H_at(self, t):
        return hk_from_p(self.sys, self.cost, self.P_at(t), t)[0]

    def gain_grid(self):
        return np.array([hk_from_p(self.sys, self.cost, P, t)[1] for t, P in zip(self.s, self.P)])

    def gain_schedule(self, N=None):
        """Fourier fit of the optimal gain over the period grid."""
        N = self.N_fit if N is None else N
        N = min(N, (len(self.s) - 3) // 2)
        return GainSchedule.fit(self.s[:-1], self.gain_grid()[:-1], self.period, N)


def steady_periodic_solution(sys, cost, h, tol=PERIODIC_TOL, max_horizon=400.0,
                             bound=BLOWUP_BOUND, N_fit=30):
    """Extend the backward horizon one period at a time from ``G = 0`` until
    consecutive period sections differ by less than ``tol`` (sup over the
    period of the Frobenius norm).

    ``h`` is rounded so the period holds an integer number of steps.
    Returns the section on ``[0, T]`` as a :class:`SteadySolution`.
    """
    T = sys.period
    steps = max(1, int(round(T / h)))
    h = T / steps
    n = sys.n
    # one period of coefficients, ordered by increasing tau = s_f - s with s_f a multiple of T
    s_stage = _stage_times(T - np.arange(steps + 1) * h)
    A, Q, S = _coefficients(sys, cost, s_stage)
    P = np.zeros((n, n))
    prev = None
    gaps = []
    horizon = 0.0
    while horizon < max_horizon - 1e-12:
        section = _riccati_sweep(A, Q, S, P, h, bound)
        P = section[-1]
        horizon += T
        section = section[::-1]   # index i <-> s = i h within [0, T]
        if prev is not None:
            gap = float(np.max(np.linalg.norm(section - prev, axis=(1, 2))))
            gaps.append(gap)
            if gap < tol:
                s = np.arange(steps + 1) * h
                return SteadySolution(s, section, horizon, gap, gaps, sys, cost, N_fit)
        prev = section
    raise NoConvergence(
        f"periodic gap {gaps[-1] if gaps else float('nan'):.3e} still above {tol:.1e} "
        f"at horizon {horizon:.4g}; stabilizability/detectability may fail"
    )
