"""Small dense symmetric eigenproblems."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["jacobi_eigenvalues", "min_eigenvalue"]


def jacobi_eigenvalues(A, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps over the strict upper triangle until the off-diagonal Frobenius
    mass falls below ``tol`` times the Frobenius norm of `A`. Intended for the
    r x r Gram matrices of NMF factors, where r is a few dozen at most.

    Returns the eigenvalues in ascending order.
    """
    A = np.array(A, dtype=np.float64)
    n, m = A.shape
    if n != m:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * (1.0 + np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(A).copy())
    for _ in range(max_sweeps):
        off = np.linalg.norm(A[~np.eye(n, dtype=bool)])
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta**2 would overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(A).copy())


def min_eigenvalue(A, tol=1e-12):
    """Smallest eigenvalue of a symmetric matrix (Jacobi)."""
    return float(jacobi_eigenvalues(A, tol=tol)[0])
