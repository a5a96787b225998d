"""Core linear-algebra and special-function kernels.

Sparse operators are plain scipy.sparse matrices (CSC preferred).  The
wave operators assembled elsewhere are complex symmetric in the bilinear
sense (A = A^T without conjugation), which a general sparse LU with
partial pivoting handles without any Hermitian assumption.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import kv, kve

from .errors import DimensionError, DomainError, SingularMatrixError, ValidationError


@dataclass(frozen=True)
class Factorization:
    """Reusable direct factorization of one sparse matrix."""

    lu: object
    order: int

    def solve(self, rhs):
        return solve(self, rhs)


def validate_sparse(A, symmetric=False):
    """Check finiteness and, optionally, structural bilinear symmetry."""
    A = A.tocsc() if not sp.issparse(A) or A.format != "csc" else A
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"matrix is {A.shape}, expected square")
    if not np.all(np.isfinite(A.data)):
        raise ValidationError("sparse matrix contains non-finite entries")
    if symmetric:
        diff = (A - A.T).tocoo()
        if diff.nnz and np.max(np.abs(diff.data)) > 0:
            raise ValidationError("matrix is not bilinearly symmetric (A != A^T)")
    return A


def factorize(A):
    """LU-factorize a square sparse matrix for repeated solves.

    Raises SingularMatrixError (carrying the pivot index when SuperLU
    reports one) if elimination breaks down.
    """
    A = validate_sparse(A)
    # Zero rows/columns make SuperLU fail with an unhelpful message; detect
    # them first so the error carries the offending index.
    row_counts = np.diff(A.tocsr().indptr)
    if np.any(row_counts == 0):
        idx = int(np.argmin(row_counts))
        raise SingularMatrixError(f"matrix has empty row {idx}", pivot=idx)
    try:
        lu = spla.splu(A.astype(np.complex128))
    except RuntimeError as exc:  # SuperLU signals "Factor is exactly singular"
        pivot = None
        msg = str(exc)
        for tok in msg.replace("(", " ").replace(")", " ").split():
            if tok.isdigit():
                pivot = int(tok)
                break
        raise SingularMatrixError(msg, pivot=pivot) from exc
    return Factorization(lu=lu, order=A.shape[0])


def solve(fact, rhs):
    """Solve for one vector or a block of right-hand-side columns."""
    rhs = np.asarray(rhs)
    n = rhs.shape[0]
    if n != fact.order:
        raise DimensionError(f"rhs has {n} rows, factorization order is {fact.order}")
    return fact.lu.solve(np.ascontiguousarray(rhs, dtype=np.complex128))


def bessel_k(order, z, scaled=False):
    """Modified Bessel function K_0 or K_1 of complex argument.

    With scaled=True returns e^z * K(z), which stays representable when
    Re(z) is large and the plain value would underflow (and lets callers
    pair it against an opposite exponential without overflow).  Evaluation
    is conjugate-symmetric by construction: K(conj z) == conj(K(z)).
    """
    if order not in (0, 1):
        raise ValidationError(f"order must be 0 or 1, got {order}")
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z == 0):
        raise DomainError("K_n has a singularity at z = 0")
    fn = kve if scaled else kv
    flip = z.imag < 0
    zz = np.where(flip, np.conj(z), z)
    out = fn(order, zz)
    out = np.where(flip, np.conj(out), out)
    if out.ndim == 0:
        return complex(out)
    return out


def orthonormalize(V, drop_tol=1e-10, block=48):
    """Orthonormalize columns by twice-repeated (modified) Gram-Schmidt.

    Columns whose remainder falls below drop_tol relative to their original
    norm are dropped (rank detection).  Returns (Q, rank); Q has `rank`
    orthonormal columns spanning the input up to drop_tol.  Projections
    against already-accepted columns are applied blockwise (two passes,
    matrix products) so large column sets stay BLAS-bound; within a block
    the sweep is column-by-column with re-orthogonalization.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] == 0:
        raise ValidationError("orthonormalize needs a nonempty 2D column set")
    n, k = V.shape
    kept = np.empty((n, k), dtype=np.float64, order="F")
    rank = 0
    for start in range(0, k, block):
        B = V[:, start : min(start + block, k)].copy()
        ref = np.linalg.norm(B, axis=0)
        for _ in range(2):
            if rank:
                Q = kept[:, :rank]
                B -= Q @ (Q.T @ B)
        local = 0
        for j in range(B.shape[1]):
            if ref[j] == 0.0:
                continue
            v = B[:, j]
            for _ in range(2):
                if local:
                    Qb = kept[:, rank : rank + local]
                    v = v - Qb @ (Qb.T @ v)
            nrm = np.linalg.norm(v)
            if nrm <= drop_tol * ref[j]:
                continue
            kept[:, rank + local] = v / nrm
            local += 1
        rank += local
    return kept[:, :rank].copy(), rank


def thin_svd(M):
    """Thin SVD keeping left vectors and singular values only.

    Singular values come out non-negative and descending.
    """
    M = np.asarray(M)
    if not np.all(np.isfinite(M)):
        raise ValidationError("thin_svd input contains non-finite entries")
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    return U, s
