"""Truncated Fourier basis, quadrature coefficients and least-squares fits."""

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientQuadrature, RankDeficient

DEFAULT_ALPHA = 1e-6


@dataclass(frozen=True)
class FourierBasisSpec:
    """Basis ``[1, cos wt, sin wt, ..., cos Nwt, sin Nwt]`` with ``w = 2*pi/T``."""

    N: int
    omega: float

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("truncation order N must be nonnegative")
        if not self.omega > 0:
            raise ValueError("omega must be positive")

    @classmethod
    def from_period(cls, N, period):
        return cls(int(N), 2.0 * np.pi / period)

    @property
    def dim(self):
        return 2 * self.N + 1

    @property
    def period(self):
        return 2.0 * np.pi / self.omega


def basis_eval(spec, t):
    """Evaluate the basis at scalar ``t`` (length 2N+1) or an array of times
    (shape ``(len(t), 2N+1)``)."""
    t_arr = np.asarray(t, dtype=float)
    k = np.arange(1, spec.N + 1)
    phase = np.multiply.outer(t_arr, k) * spec.omega
    out = np.empty(t_arr.shape + (spec.dim,))
    out[..., 0] = 1.0
    out[..., 1::2] = np.cos(phase)
    out[..., 2::2] = np.sin(phase)
    return out


@dataclass
class FourierCoefficients:
    """Coefficient matrix ``W`` (d x 2N+1); the series is ``W @ F_N(t)``."""

    W: np.ndarray
    basis: FourierBasisSpec

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if self.W.shape[1] != self.basis.dim:
            raise ValueError(
                f"coefficient matrix has {self.W.shape[1]} columns, basis needs {self.basis.dim}"
            )

    @property
    def d(self):
        return self.W.shape[0]

    def __call__(self, t):
        F = basis_eval(self.basis, t)
        return F @ self.W.T


def coefficients_by_quadrature(f, spec, quad_points=None):
    """Fourier coefficients of a T-periodic vector function by the trapezoid
    rule on a uniform grid over one period.

    The constant column holds the mean (a0/2), so reconstruction is always
    ``W @ F_N(t)``.
    """
    min_points = 8 * spec.dim
    if quad_points is None:
        quad_points = min_points
    if quad_points < min_points:
        raise InsufficientQuadrature(f"need at least {min_points} points, got {quad_points}")
    T = spec.period
    ts = np.arange(quad_points) * (T / quad_points)
    values = np.array([np.atleast_1d(np.asarray(f(t), dtype=float)).ravel() for t in ts])
    F = basis_eval(spec, ts)
    # periodic trapezoid == plain mean over the open grid
    W = 2.0 * (values.T @ F) / quad_points
    W[:, 0] *= 0.5
    return FourierCoefficients(W, spec)


def fit_least_squares(times, values, spec, alpha=DEFAULT_ALPHA):
    """Over-determined least-squares fit of samples onto the basis.

    Returns the coefficients and a diagnostics dict with ``sigma_min_scaled``,
    the smallest eigenvalue of ``U.T @ U / count`` where ``U`` stacks the
    basis rows. Raises :class:`RankDeficient` when it falls below ``alpha``
    or when there are not more samples than basis functions.
    """
    times = np.asarray(times, dtype=float).ravel()
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    count = times.size
    if values.shape[0] != count:
        raise ValueError("times and values disagree in length")
    if count <= spec.dim:
        raise RankDeficient(f"{count} samples cannot determine {spec.dim} coefficients")
    U = basis_eval(spec, times)
    sigma = np.linalg.svd(U, compute_uv=False)
    sigma_min_scaled = float(sigma[-1] ** 2 / count)
    if sigma_min_scaled < alpha:
        raise RankDeficient(
            f"sigma_min(U^T U)/count = {sigma_min_scaled:.3e} below alpha = {alpha:.1e}"
        )
    Wt, *_ = np.linalg.lstsq(U, values, rcond=None)
    return FourierCoefficients(Wt.T, spec), {"sigma_min_scaled": sigma_min_scaled, "count": count}
