"""Small dense symmetric matrices (order <= 4) and two definiteness tests.

The production test uses leading principal minors. The cyclic Jacobi
eigenvalue routine is kept as an independent oracle: the two must agree on
every input whose spectrum stays away from zero.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

MINOR_TOL = 1e-12
MAX_SWEEPS = 50


class ConvergenceError(RuntimeError):
    """Jacobi sweeps exhausted without annihilating the off-diagonal part."""


@dataclass(frozen=True)
class SymMatrix:
    """Symmetric matrix stored as its row-major upper triangle."""

    order: int
    upper: tuple[float, ...]

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if len(self.upper) != self.order * (self.order + 1) // 2:
            raise ValueError(f"upper triangle of order {self.order} needs "
                             f"{self.order * (self.order + 1) // 2} entries, "
                             f"got {len(self.upper)}")

    @classmethod
    def from_dense(cls, a, check: bool = True) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        if check and not np.allclose(a, a.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(a).max())):
            raise ValueError("matrix is not symmetric")
        n = a.shape[0]
        return cls(n, tuple(float(a[i, j]) for i in range(n) for j in range(i, n)))

    @classmethod
    def identity(cls, order: int, scale: float = 1.0) -> "SymMatrix":
        return cls.from_dense(scale * np.eye(order))

    def to_dense(self) -> np.ndarray:
        n = self.order
        a = np.empty((n, n))
        k = 0
        for i in range(n):
            for j in range(i, n):
                a[i, j] = a[j, i] = self.upper[k]
                k += 1
        return a

    def __getitem__(self, ij) -> float:
        i, j = ij
        if i > j:
            i, j = j, i
        # offset of row i in the packed upper triangle
        k = i * self.order - i * (i - 1) // 2 + (j - i)
        return self.upper[k]

    def principal(self, idx) -> "SymMatrix":
        """Principal submatrix on the (0-based) index list ``idx``."""
        a = self.to_dense()
        idx = list(idx)
        return SymMatrix.from_dense(a[np.ix_(idx, idx)], check=False)

    def shifted(self, margin: float) -> "SymMatrix":
        return SymMatrix.from_dense(self.to_dense() + margin * np.eye(self.order), check=False)

    @property
    def trace(self) -> float:
        return float(sum(self[i, i] for i in range(self.order)))


def eigenvalues_sym(A: SymMatrix, tol: float = 1e-15) -> list[float]:
    """Eigenvalues of ``A`` in ascending order by cyclic Jacobi rotations."""
    a = A.to_dense()
    n = A.order
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = np.sqrt(np.sum(a * a))
    if n == 1 or scale == 0.0:
        return sorted(float(v) for v in np.diag(a))

    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            return sorted(float(v) for v in np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
    raise ConvergenceError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")


def leading_minors(A: SymMatrix) -> list[float]:
    a = A.to_dense()
    return [float(np.linalg.det(a[:k, :k])) for k in range(1, A.order + 1)]


def is_negative_definite(A: SymMatrix, margin: float = 0.0) -> bool:
    """True iff ``A + margin*I`` is negative definite (strict).

    Sign test on leading principal minors: ``(-1)^k minor_k > tol * s^k`` with
    ``s`` the largest entry magnitude, so the verdict is scale invariant.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    B = A.shifted(margin) if margin else A
    s = max(abs(v) for v in B.upper)
    if not math.isfinite(s):
        return False
    if s == 0.0:
        return False
    for k, mk in enumerate(leading_minors(B), start=1):
        if (-1) ** k * mk <= MINOR_TOL * s ** k:
            return False
    return True


def is_negative_definite_eig(A: SymMatrix, margin: float = 0.0) -> bool:
    """Oracle verdict: largest eigenvalue below ``-margin``."""
    return eigenvalues_sym(A)[-1] < -margin
