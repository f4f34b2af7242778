"""Dense complex nonsymmetric eigenproblems for small blocks (n <= 8).

``eig_dense`` wraps the LAPACK Hessenberg-QR solver and certifies the result
(residuals, left/right pairing, per-eigenvalue condition).  ``char_poly_roots``
is an independent cross-check route: exact Faddeev-LeVerrier coefficients and
Durand-Kerner root iteration, sharing no code with the QR path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, AdmissibilityError

#: sentinel for the condition estimate of a defective eigenvalue
COND_DEFECTIVE = np.inf


def sort_key(values: np.ndarray) -> np.ndarray:
    """Fixed ordering: real part descending, ties by imaginary part descending."""
    return np.lexsort((-values.imag, -values.real))


@dataclass
class Spectrum:
    """Certified spectrum of one small dense matrix.

    ``right_vectors``/``left_vectors`` are unit-norm columns; ``condition[i]``
    is 1/|<l_i, r_i>| (inf marks a numerically defective pair, for which the
    biorthogonal scaling is skipped).
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    residuals: np.ndarray
    condition: np.ndarray

    def biorthogonal_left(self) -> np.ndarray:
        """Left vectors rescaled so <l_i, r_i> = 1 (columns with finite condition)."""
        out = self.left_vectors.astype(complex).copy()
        for i in range(out.shape[1]):
            if np.isfinite(self.condition[i]):
                ip = np.vdot(out[:, i], self.right_vectors[:, i])
                out[:, i] = out[:, i] / np.conj(ip)
        return out


def eig_dense(m: np.ndarray, tol: float = 1e-11, name: str = "matrix") -> Spectrum:
    """Eigenvalues with right/left eigenvectors, sorted, certified.

    Raises ConvergenceFailure (naming the matrix) if any accepted pair has
    residual above tol * ||M||.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n) or n > 8:
        raise AdmissibilityError(f"{name}: expected square matrix with n <= 8, got {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise AdmissibilityError(f"{name}: non-finite entries")

    w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    order = sort_key(w)
    w = w[order]
    vr = vr[:, order]
    vl = vl[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)

    scale = max(np.linalg.norm(m, 2), 1e-300)
    residuals = np.linalg.norm(m @ vr - vr * w[None, :], axis=0)
    if np.any(residuals > tol * scale):
        worst = float(np.max(residuals) / scale)
        raise ConvergenceFailure(
            f"{name}: eigenpair residual {worst:.3e} exceeds {tol:.1e} relative"
        )

    # scipy returns vl with vl^H M = w vl^H; pairing <l_i, r_i> gauges condition
    overlaps = np.array([np.vdot(vl[:, i], vr[:, i]) for i in range(n)])
    condition = np.empty(n)
    for i in range(n):
        if np.abs(overlaps[i]) < 1e3 * np.finfo(float).eps:
            condition[i] = COND_DEFECTIVE
        else:
            condition[i] = 1.0 / np.abs(overlaps[i])
    return Spectrum(
        matrix=m,
        eigenvalues=w,
        right_vectors=vr,
        left_vectors=vl,
        residuals=residuals,
        condition=condition,
    )


def char_poly_coefficients(m: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients by Faddeev-LeVerrier.

    Returns [1, c1, ..., cn] with det(lambda I - M) = sum c_k lambda^(n-k).
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    b = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        a = m @ b
        c = -np.trace(a) / k
        coeffs[k] = c
        b = a + c * np.eye(n)
    return coeffs


def durand_kerner(coeffs: np.ndarray, tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """All roots of a monic polynomial by simultaneous iteration."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n = len(coeffs) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    radius = 1.0 + np.max(np.abs(coeffs[1:]))
    seed = 0.4 + 0.9j
    roots = radius * seed ** np.arange(1, n + 1)

    def poly(x):
        acc = np.full_like(x, coeffs[0])
        for c in coeffs[1:]:
            acc = acc * x + c
        return acc

    for _ in range(max_iter):
        p = poly(roots)
        denom = np.ones(n, dtype=complex)
        for i in range(n):
            diff = roots[i] - np.delete(roots, i)
            denom[i] = np.prod(diff)
        step = p / denom
        roots = roots - step
        scale = max(1.0, float(np.max(np.abs(roots))))
        if np.max(np.abs(step)) <= tol * scale:
            return roots[sort_key(roots)]
    raise ConvergenceFailure(
        f"root iteration stagnated after {max_iter} iterations "
        f"(last step {float(np.max(np.abs(step))):.3e})"
    )


def char_poly_roots(m: np.ndarray, tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """Eigenvalues via the characteristic polynomial; cross-check oracle only."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[0]
    if m.shape != (n, n) or n > 6:
        raise AdmissibilityError(f"char_poly_roots expects n <= 6, got shape {m.shape}")
    return durand_kerner(char_poly_coefficients(m), tol=tol, max_iter=max_iter)


def match_sorted(a: np.ndarray, b: np.ndarray) -> float:
    """Max pairwise distance between two spectra under optimal matching."""
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))
