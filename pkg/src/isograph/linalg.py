"""Small dense-matrix primitives: permutation handling and a symmetric eigensolver.

Everything here operates on plain float64 ``numpy`` arrays.  Matrices are
tiny (template side length rarely above 8), so the routines favour exact,
deterministic behaviour over throughput: squared-distance sums use
``math.fsum`` (correctly rounded, independent of summation order) and the
eigensolver canonicalizes eigenvector signs so repeated runs agree bitwise.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, NumericalError

# Hard ceiling for permutation enumeration: 8! = 40320 candidates per window
# is already impractical in the matching inner loop.
MAX_BRUTE_K = 8

Permutation = tuple  # mapping[a] = image of index a; a bijection on 0..k-1


def frobenius_sq(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance ``sum_ij (a_ij - b_ij)^2``.

    Uses exact summation so the result does not depend on element order;
    two windows holding the same entries in different positions therefore
    score identically against matching templates.
    """
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = np.subtract(a, b).ravel()
    return math.fsum((d * d).tolist())


@lru_cache(maxsize=32)
def _permutations_cached(k: int) -> tuple:
    return tuple(itertools.permutations(range(k)))


def enumerate_permutations(k: int, limit: int = MAX_BRUTE_K) -> tuple:
    """All k! index mappings in lexicographic order.

    The ordering is load-bearing: permutation index j identifies a slice of
    the raw feature tensor, so it must be reproducible across runs.
    """
    if k < 1:
        raise ValueError(f"permutation length must be >= 1, got {k}")
    if k > limit:
        raise CapacityError(
            f"brute-force enumeration of {k}! permutations exceeds the "
            f"configured limit of {limit}"
        )
    return _permutations_cached(k)


def permute_conjugate(p: Permutation, mat: np.ndarray) -> np.ndarray:
    """Relabel rows and columns of ``mat`` simultaneously: out[a, b] = mat[p[a], p[b]].

    Equivalent to P @ mat @ P.T for the 0/1 matrix with P[a, p[a]] = 1, but
    done by reindexing, which is the dominant inner-loop operation of the
    brute matcher.
    """
    if len(p) != mat.shape[0] or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"permutation length {len(p)} does not match matrix {mat.shape}")
    idx = np.asarray(p)
    return mat[np.ix_(idx, idx)]


def invert_permutation(p: Permutation) -> Permutation:
    inv = [0] * len(p)
    for a, image in enumerate(p):
        inv[image] = a
    return tuple(inv)


def permutation_matrix(p: Permutation) -> np.ndarray:
    """The 0/1 matrix P with P[a, p[a]] = 1 (rows select images)."""
    k = len(p)
    m = np.zeros((k, k))
    m[np.arange(k), np.asarray(p)] = 1.0
    return m


def abs_entrywise(a: np.ndarray) -> np.ndarray:
    return np.abs(a)


@dataclass(frozen=True)
class EigenDecomposition:
    """Orthogonal eigenvectors (columns) and eigenvalues sorted descending.

    ``gap`` is the smallest spacing between adjacent eigenvalues; zero or
    near-zero gaps flag degenerate spectra, which downstream consumers may
    need to know about.
    """

    vectors: np.ndarray
    values: np.ndarray
    gap: float


def _off_diagonal_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return math.sqrt(float((off * off).sum()))


def symmetric_eigendecomposition(
    a: np.ndarray,
    sym_tol: float = 1e-9,
    conv_tol: float = 1e-10,
    max_sweeps: int = 100,
) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps Givens rotations over all (p, q) pairs until the off-diagonal
    Frobenius norm drops below ``conv_tol``.  Eigenvalues come back sorted
    descending with matching eigenvector columns, and each column's sign is
    fixed so its largest-magnitude entry is positive (first such entry on
    ties) — spectra of equal matrices are then reproduced exactly.

    Raises ``ValueError`` for inputs asymmetric beyond ``sym_tol`` and
    ``NumericalError`` (carrying the residual) if ``max_sweeps`` pass
    without convergence.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = math.sqrt(float(((a - a.T) ** 2).sum()))
    if asym > sym_tol:
        raise ValueError(f"matrix is asymmetric: ||a - a.T||_F = {asym:.3e} > {sym_tol:.1e}")

    k = a.shape[0]
    work = np.array(a, dtype=float)
    vecs = np.eye(k)
    if k == 1:
        return EigenDecomposition(vecs, np.array([float(work[0, 0])]), math.inf)

    # Pivots below conv_tol/k can be skipped: even if all k(k-1) of them
    # survive, the off-diagonal norm stays under conv_tol.
    pivot_tol = conv_tol / k
    converged = False
    for _ in range(max_sweeps):
        if _off_diagonal_norm(work) <= conv_tol:
            converged = True
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = work[p, q]
                if abs(apq) <= pivot_tol:
                    continue
                app = work[p, p]
                aqq = work[q, q]
                tau = (aqq - app) / (2.0 * apq)
                t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                # Rotated entries have closed forms; writing them directly
                # keeps the matrix exactly symmetric.
                work[p, q] = 0.0
                work[q, p] = 0.0
                work[p, p] = app - t * apq
                work[q, q] = aqq + t * apq
                vec_p = vecs[:, p].copy()
                vec_q = vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q
    else:
        converged = _off_diagonal_norm(work) <= conv_tol
    if not converged:
        residual = _off_diagonal_norm(work)
        raise NumericalError(
            f"Jacobi sweeps did not converge within {max_sweeps} sweeps "
            f"(off-diagonal norm {residual:.3e})",
            residual=residual,
        )

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    for j in range(k):
        col = vecs[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            vecs[:, j] = -col
    gap = float(np.min(values[:-1] - values[1:]))
    return EigenDecomposition(vecs, values, gap)
