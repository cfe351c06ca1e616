"""Dense-matrix primitives and zero-pattern (mask) algebra.

Matrices are plain ``numpy.ndarray`` of shape ``(d, d)`` with float entries.
Masks are immutable :class:`ShapeMask` values so they can be hashed as
graph vertices; their bit order is row-major.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import DimensionMismatch, RankOutOfRange

# QR/Schur eigenvalue iteration is delegated to LAPACK (dgeev), which uses
# machine-precision convergence tests; GELFAND_POWER fixes the fallback
# power 2**10 used when LAPACK reports non-convergence.
GELFAND_POWER = 10


def as_matrix(m, dim: int | None = None) -> np.ndarray:
    """Coerce to a square float matrix, checking finiteness."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DimensionMismatch(f"expected dim {dim}, got {a.shape[0]}")
    if not np.isfinite(a).all():
        raise DimensionMismatch("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class ShapeMask:
    """Zero-one matrix recording a sparsity pattern, hashable by value."""

    dim: int
    bits: tuple[int, ...]  # row-major, length dim*dim, each 0 or 1

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("mask dim must be >= 1")
        if len(self.bits) != self.dim * self.dim:
            raise DimensionMismatch(
                f"mask of dim {self.dim} needs {self.dim**2} bits, got {len(self.bits)}"
            )
        if any(b not in (0, 1) for b in self.bits):
            raise DimensionMismatch("mask bits must be 0 or 1")

    @classmethod
    def from_array(cls, a) -> "ShapeMask":
        a = np.asarray(a)
        if a.ndim == 1:
            d = int(round(len(a) ** 0.5))
            if d * d != len(a):
                raise DimensionMismatch(f"flat mask of length {len(a)} is not square")
            a = a.reshape(d, d)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square mask, got shape {a.shape}")
        return cls(a.shape[0], tuple(int(x) for x in a.reshape(-1)))

    @classmethod
    def zero(cls, dim: int) -> "ShapeMask":
        return cls(dim, (0,) * (dim * dim))

    @classmethod
    def identity(cls, dim: int) -> "ShapeMask":
        return cls.from_array(np.eye(dim, dtype=int))

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8).reshape(self.dim, self.dim)

    def is_zero(self) -> bool:
        return not any(self.bits)

    def bitstring(self) -> str:
        """Row-major 0/1 string, the serialization form for vertices."""
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_bitstring(cls, s: str) -> "ShapeMask":
        return cls.from_array(np.array([int(c) for c in s], dtype=int))


def shape_of(m, zero_tol: float = 0.0) -> ShapeMask:
    """Mask of entries with ``|m(i,j)| > zero_tol``."""
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    a = as_matrix(m)
    return ShapeMask.from_array((np.abs(a) > zero_tol).astype(int))


def _check_same_dim(a: ShapeMask, b: ShapeMask):
    if a.dim != b.dim:
        raise DimensionMismatch(f"mask dims differ: {a.dim} vs {b.dim}")


def bool_product(a: ShapeMask, b: ShapeMask) -> ShapeMask:
    """Boolean-semiring product: bit (i,j) set iff some t has a(i,t) and b(t,j)."""
    _check_same_dim(a, b)
    prod = a.to_array().astype(int) @ b.to_array().astype(int)
    return ShapeMask.from_array((prod > 0).astype(int))


def mask_and(a: ShapeMask, b: ShapeMask) -> ShapeMask:
    _check_same_dim(a, b)
    return ShapeMask.from_array(np.minimum(a.to_array(), b.to_array()))


def mask_or(a: ShapeMask, b: ShapeMask) -> ShapeMask:
    _check_same_dim(a, b)
    return ShapeMask.from_array(np.maximum(a.to_array(), b.to_array()))


def l1_operator_norm(m) -> float:
    """Operator norm induced by the vector l1 norm: max absolute column sum."""
    a = as_matrix(m)
    return float(np.abs(a).sum(axis=0).max())


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(as_matrix(m), "fro"))


def frobenius_inner(a, b) -> float:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float((a * b).sum())


def compound_matrix(m, r: int) -> np.ndarray:
    """Matrix of all r-by-r minors, indexed by lexicographic row/column subsets.

    Entry ((J),(L)) is det of the submatrix with rows J and columns L, with
    J, L running over ``itertools.combinations(range(d), r)`` in order.
    """
    a = as_matrix(m)
    d = a.shape[0]
    if not 1 <= r <= d:
        raise RankOutOfRange(f"compound order r={r} outside [1, {d}]")
    subsets = list(combinations(range(d), r))
    n = comb(d, r)
    out = np.empty((n, n))
    for i, rows in enumerate(subsets):
        sub = a[np.ix_(rows, range(d))]
        for j, cols in enumerate(subsets):
            out[i, j] = np.linalg.det(sub[:, cols])
    return out


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus.

    Uses LAPACK's QR/Schur iteration (``numpy.linalg.eigvals``); if LAPACK
    reports non-convergence the Gelfand estimate ``||m^(2^10)||^(1/2^10)``
    is returned instead, with a warning carrying the diagnostics.
    """
    a = as_matrix(m)
    try:
        return float(np.abs(np.linalg.eigvals(a)).max())
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK stagnation
        rho = _gelfand_estimate(a)
        warnings.warn(
            f"eigenvalue iteration did not converge ({exc}); "
            f"returning Gelfand estimate ||m^n||^(1/n) at n=2^{GELFAND_POWER}: {rho}",
            RuntimeWarning,
            stacklevel=2,
        )
        return rho


def _gelfand_estimate(a: np.ndarray) -> float:
    # Repeated squaring with normalization; log-scale bookkeeping avoids overflow.
    acc = 0.0
    b = a.copy()
    for _ in range(GELFAND_POWER):
        nrm = l1_operator_norm(b)
        if nrm == 0.0:
            return 0.0
        b = (b / nrm) @ (b / nrm)
        acc = 2.0 * (acc + np.log(nrm))
    acc += np.log(max(l1_operator_norm(b), np.finfo(float).tiny))
    return float(np.exp(acc / 2**GELFAND_POWER))


def singular_values(m) -> np.ndarray:
    """Singular values in descending order."""
    return np.linalg.svd(as_matrix(m), compute_uv=False)


def qr_step(m) -> tuple[np.ndarray, np.ndarray]:
    """QR factorization with the sign convention diag(R) >= 0.

    Rank-deficient inputs yield zero diagonal entries in R rather than an
    error, so log-diagonal accumulation can detect them explicitly.
    """
    a = as_matrix(m)
    q, r = np.linalg.qr(a)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs, r * signs[:, None]
