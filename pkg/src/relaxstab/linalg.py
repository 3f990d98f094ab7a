"""Small dense linear-algebra kernels used throughout the package."""

import numpy as np
import scipy.linalg


def sym(M):
    """Symmetric part ``(M + M^T) / 2``."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def inf_norm(M):
    """Induced infinity norm (max absolute row sum); zero for empty input."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=1)))


def min_eig(M):
    """Smallest eigenvalue of the symmetric part of ``M``."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(sym(M))[0])


def max_eig(M):
    M = np.atleast_2d(M)
    if M.size == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(sym(M))[-1])


def eig_cutoff(M, rel=1e-10):
    """Eigenvalue cutoff ``rel * ||M||`` below which a value counts as zero."""
    return rel * inf_norm(M)


def is_psd(M, rel=1e-10):
    return min_eig(M) >= -eig_cutoff(M, rel)


def expm2(M):
    """Closed-form exponential of a real 2x2 matrix.

    Writes ``M = s I + D`` with ``D`` traceless, so ``D @ D = -det(D) I`` and
    the series collapses to cosh/sinh (or cos/sin) of ``sqrt(-det D)``.
    """
    M = np.asarray(M, dtype=float)
    s = 0.5 * (M[0, 0] + M[1, 1])
    D = M - s * np.eye(2)
    delta2 = -(D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0])
    if delta2 > 0.0:
        d = np.sqrt(delta2)
        c, f = np.cosh(d), np.sinh(d) / d
    elif delta2 < 0.0:
        d = np.sqrt(-delta2)
        c, f = np.cos(d), np.sin(d) / d
    else:
        c, f = 1.0, 1.0
    return np.exp(s) * (c * np.eye(2) + f * D)


def expm(M):
    """Matrix exponential: closed form for 1x1 and 2x2, scaling-and-squaring otherwise."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape == (1, 1):
        return np.exp(M)
    if M.shape == (2, 2):
        return expm2(M)
    return scipy.linalg.expm(M)
