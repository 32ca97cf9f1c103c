"""Vectorization operators for matrices and symmetric matrices.

``vecs`` lists the upper triangle row by row with off-diagonal entries scaled
by sqrt(2), so that the Euclidean norm of ``vecs(Y)`` equals the Frobenius
norm of ``Y`` and ``v @ Y @ v == quad_vec(v) @ vecs(Y)``.
"""

import numpy as np

from .errors import AsymmetricInput, DimensionMismatch

SQRT2 = np.sqrt(2.0)

_index_cache = {}


def sym_dim(n):
    """Length of ``vecs`` for an n-by-n matrix."""
    return n * (n + 1) // 2


def _triu(n):
    if n not in _index_cache:
        rows, cols = np.triu_indices(n)
        scale = np.where(rows == cols, 1.0, SQRT2)
        _index_cache[n] = (rows, cols, scale)
    return _index_cache[n]


def dim_from_sym_length(length):
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if sym_dim(n) != length:
        raise DimensionMismatch(f"length {length} is not n(n+1)/2 for any n")
    return n


def vec(X):
    """Column-stacking vectorization."""
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, order="F")


def vec_inv(v, rows, cols):
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise DimensionMismatch(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def symmetrize(Y):
    Y = np.asarray(Y, dtype=float)
    return 0.5 * (Y + Y.T)


def vecs(Y):
    """Scaled half-vectorization of a symmetric matrix.

    Mild asymmetry (e.g. integration drift) is averaged out; asymmetry above
    1e-8 relative raises :class:`AsymmetricInput`.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise DimensionMismatch(f"vecs needs a square matrix, got shape {Y.shape}")
    asym = np.linalg.norm(Y - Y.T)
    if asym > 1e-8 * np.linalg.norm(Y):
        raise AsymmetricInput(f"matrix asymmetry {asym:.3e} exceeds tolerance")
    Y = 0.5 * (Y + Y.T)
    rows, cols, scale = _triu(Y.shape[0])
    return Y[rows, cols] * scale


def vecs_inv(v, n=None):
    """Inverse of :func:`vecs`; ``n`` is inferred from the length if omitted."""
    v = np.asarray(v, dtype=float).ravel()
    if n is None:
        n = dim_from_sym_length(v.size)
    elif v.size != sym_dim(n):
        raise DimensionMismatch(f"length {v.size} does not match n={n}")
    rows, cols, scale = _triu(n)
    Y = np.zeros((n, n))
    Y[rows, cols] = v / scale
    Y[cols, rows] = v / scale
    return Y


def quad_vec(v):
    """Vector ``q`` with ``q @ vecs(Y) == v @ Y @ v`` for every symmetric Y."""
    v = np.asarray(v, dtype=float)
    rows, cols, scale = _triu(v.shape[-1])
    return v[..., rows] * v[..., cols] * scale
