"""Independent reference computations used only by the tests."""

import numpy as np


def are_hamiltonian(A, B, Q, R):
    """Stabilizing solution of A'P + PA - PBR^{-1}B'P + Q = 0 from the stable
    invariant subspace of the Hamiltonian matrix."""
    n = A.shape[0]
    S = B @ np.linalg.solve(R, B.T)
    Hm = np.block([[A, -S], [-Q, -A.T]])
    w, V = np.linalg.eig(Hm)
    stable = V[:, w.real < 0]
    X, Y = stable[:n], stable[n:]
    P = np.real(Y @ np.linalg.inv(X))
    return 0.5 * (P + P.T)


def random_stabilizable(rng, n, m=1):
    """Random (A, B) with B of full row rank on the unstable part, C = I."""
    while True:
        A = rng.normal(size=(n, n))
        B = rng.normal(size=(n, m))
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
        if np.linalg.matrix_rank(ctrb) == n and np.linalg.cond(ctrb) < 1e4:
            return A, B


def trapezoid(values, h):
    values = np.asarray(values)
    return h * (values.sum(axis=0) - 0.5 * (values[0] + values[-1]))
