"""Small compiled linear-algebra helpers shared by Python and numba code paths."""

import numba
import numpy as np

# Pivots at or below this fraction of the largest diagonal entry are treated as zero.
PIVOT_TOL = 1e-13


@numba.njit(cache=True)
def psd_cholesky(A):
    """Lower factor L with L @ L.T == A for symmetric PSD A.

    Rank-deficient directions get a zero column instead of failing, so
    degenerate covariances (e.g. C = 0) yield exact point masses.
    """
    d = A.shape[0]
    L = np.zeros((d, d))
    scale = 0.0
    for i in range(d):
        if A[i, i] > scale:
            scale = A[i, i]
    tol = PIVOT_TOL * scale
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= tol:
            continue
        ljj = np.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, d):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / ljj
    return L


@numba.njit(cache=True)
def mvn_from_normals(mean, cov, z):
    L = psd_cholesky(cov)
    return mean + L @ z


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)
