"""Dense float64 kernel: products, softmax/sigmoid maps, Cholesky log-determinants.

All matrices are 2-D C-contiguous ``numpy.ndarray`` of float64. The Cholesky
factorization is written out explicitly (rather than delegated) so that a
failed pivot can be reported by index; everything else leans on numpy.
"""

import numpy as np
from scipy.special import expit

from .exceptions import ConfigError, DataError, ShapeError, SingularMatrixError


def as_matrix(a):
    """Coerce to a 2-D float64 array, rejecting other ranks."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def matmul(a, b):
    """Matrix product with explicit shape validation and a finiteness guard."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise DataError("matmul produced non-finite entries")
    return out


def softmax(logits):
    """Max-shifted softmax of a 1-D logit vector; output sums to 1."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise ShapeError(f"softmax expects a vector, got ndim={z.ndim}")
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_columns(z):
    """Columnwise max-shifted softmax of a 2-D array (each column a logit vector)."""
    z = as_matrix(z)
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


def sigmoid(x):
    """Numerically stable logistic function, elementwise.

    Outputs are clipped to the largest representable open interval inside
    (0, 1) so that saturated values never round to exactly 0 or 1.
    """
    out = expit(np.asarray(x, dtype=np.float64))
    return np.clip(out, np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0))


def cholesky(g):
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises :class:`SingularMatrixError` carrying the failing pivot index when
    the matrix is not positive definite.
    """
    g = as_matrix(g)
    n, m = g.shape
    if n != m:
        raise ShapeError(f"cholesky expects a square matrix, got {g.shape}")
    L = np.zeros_like(g)
    for j in range(n):
        d = g[j, j] - L[j, :j] @ L[j, :j]
        if not np.isfinite(d) or d <= 0.0:
            raise SingularMatrixError(
                f"matrix not positive definite at pivot {j} (d={d})", pivot=j
            )
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (g[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_cholesky_factor(L, rhs):
    """Solve L L^T x = rhs given the lower-triangular factor L."""
    L = as_matrix(L)
    rhs = as_matrix(rhs)
    n = L.shape[0]
    if rhs.shape[0] != n:
        raise ShapeError(f"rhs has {rhs.shape[0]} rows, factor is {n}x{n}")
    y = np.empty_like(rhs)
    for i in range(n):
        y[i] = (rhs[i] - L[i, :i] @ y[:i]) / L[i, i]
    x = np.empty_like(rhs)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - L[i + 1 :, i] @ x[i + 1 :]) / L[i, i]
    return x


def cholesky_solve(g, rhs):
    """Solve g x = rhs for symmetric positive definite g.

    Raises :class:`SingularMatrixError` when g is not positive definite.
    """
    return solve_cholesky_factor(cholesky(g), rhs)


def logdet_gram(m, ridge=0.0):
    """log det of the Gram matrix G = m m^T + ridge I, and its gradient in m.

    Returns ``(value, grad)`` where ``grad = d logdet(G) / dm = 2 G^{-1} m``.
    Requires at least as many columns as rows (after ridging, G must be
    positive definite).
    """
    m = as_matrix(m)
    if ridge < 0.0:
        raise ConfigError(f"ridge must be nonnegative, got {ridge}")
    k = m.shape[0]
    g = m @ m.T + ridge * np.eye(k)
    L = cholesky(g)
    value = 2.0 * np.sum(np.log(np.diag(L)))
    grad = 2.0 * solve_cholesky_factor(L, m)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise SingularMatrixError("logdet_gram produced non-finite output")
    return float(value), grad
