"""Benchmark plants."""

import numpy as np

from .periodic_system import CostSpec, CtlpSystem, PeriodicMatrixFunction

PENDULUM_PERIOD = 2.0 * np.pi

_A22 = 0.5 * np.array([[-1.0, 0.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
_B2 = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])


def pendulum_a21(t, zeta=0.0):
    """Lower-left block of the pendulum drift with the load disturbance."""
    t = np.asarray(t, dtype=float)
    g = 1.0 + 2.0 * np.cos(t)
    out = np.empty(t.shape + (3, 3))
    out[..., 0, 0] = g - 3.0
    out[..., 0, 1] = 3.0 - g
    out[..., 0, 2] = -1.0
    out[..., 1, 0] = 4.0 - g
    out[..., 1, 1] = 2.0 * (g - 3.0)
    out[..., 1, 2] = 3.0 - g
    out[..., 2, 0] = -1.0
    out[..., 2, 1] = 4.0 - g
    out[..., 2, 2] = g - 3.0
    bump = zeta * (1.0 + np.sin(3.0 * t))
    for i in range(3):
        out[..., i, i] += bump
    return out


def build_triple_pendulum(zeta=0.0):
    """Linearized triple inverted pendulum under a periodically varying load.

    Returns ``(system, cost)`` with ``C = I6`` and ``R = I3``; period 2*pi.
    """
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    T = PENDULUM_PERIOD

    def a_batch(ts):
        ts = np.asarray(ts, dtype=float)
        A = np.zeros(ts.shape + (6, 6))
        A[..., 0:3, 3:6] = np.eye(3)
        A[..., 3:6, 0:3] = pendulum_a21(ts, zeta)
        A[..., 3:6, 3:6] = _A22
        return A

    A = PeriodicMatrixFunction(lambda t: a_batch(t), T, (6, 6), batch=a_batch)
    B = PeriodicMatrixFunction.constant(np.vstack([np.zeros((3, 3)), _B2]), T)
    cost = CostSpec(PeriodicMatrixFunction.constant(np.eye(6), T),
                    PeriodicMatrixFunction.constant(np.eye(3), T))
    return CtlpSystem(A, B), cost


def constant_system(A, B, C, R, period=1.0):
    """Time-invariant plant viewed as periodic with an arbitrary period."""
    sys = CtlpSystem(PeriodicMatrixFunction.constant(A, period),
                     PeriodicMatrixFunction.constant(B, period))
    cost = CostSpec(PeriodicMatrixFunction.constant(C, period),
                    PeriodicMatrixFunction.constant(R, period))
    return sys, cost


def _bump(ts, w):
    """Zero-mean periodic profile with geometrically decaying harmonics."""
    return 1.0 / (1.5 - np.cos(w * ts)) - 1.0 / np.sqrt(1.25)


def periodic_two_state(period=2.0 * np.pi, eps=0.5):
    """Small 2-state periodic test plant (unstable open loop).

    The drift and input gain vary through ``1 / (1.5 - cos(wt))``, whose
    Fourier coefficients decay geometrically, so truncating at order N leaves
    a visible but shrinking error.
    """
    w = 2.0 * np.pi / period

    def a_batch(ts):
        ts = np.asarray(ts, dtype=float)
        A = np.zeros(ts.shape + (2, 2))
        A[..., 0, 1] = 1.0
        A[..., 1, 0] = 1.0 + eps * _bump(ts, w)
        A[..., 1, 1] = -0.2
        return A

    def b_batch(ts):
        ts = np.asarray(ts, dtype=float)
        B = np.zeros(ts.shape + (2, 1))
        B[..., 1, 0] = 1.0 + 0.3 * eps * _bump(ts + 1.0, w)
        return B

    A = PeriodicMatrixFunction(lambda t: a_batch(t), period, (2, 2), batch=a_batch)
    B = PeriodicMatrixFunction(lambda t: b_batch(t), period, (2, 1), batch=b_batch)
    cost = CostSpec(PeriodicMatrixFunction.constant(np.eye(2), period),
                    PeriodicMatrixFunction.constant([[1.0]], period))
    return CtlpSystem(A, B), cost
