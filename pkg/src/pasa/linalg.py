"""Symmetric positive-definite factorization with rank diagnostics."""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import lapack

from .errors import RankDeficiencyError

# squared Cholesky pivot relative to the diagonal entry, i.e. 1 - R^2 of a
# column regressed on the preceding ones
RANK_TOL = 1e-10


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


class SpdFactor:
    """Upper Cholesky factor of a symmetrized SPD matrix.

    Raises :class:`RankDeficiencyError` naming the first pivot that is
    non-positive or numerically zero relative to its diagonal entry.
    """

    def __init__(self, a: np.ndarray, what: str = "information matrix"):
        a = symmetrize(np.asarray(a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"{what} must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise RankDeficiencyError(f"{what} has non-finite entries", pivot=None)
        c, info = lapack.dpotrf(a, lower=False, clean=True)
        if info > 0:
            raise RankDeficiencyError(
                f"{what} is not positive definite (pivot {info - 1})",
                pivot=info - 1)
        if info < 0:  # pragma: no cover - argument error inside LAPACK
            raise ValueError(f"dpotrf argument {-info} invalid")
        rel = np.diag(c) ** 2 / np.diag(a)
        bad = np.flatnonzero(rel < RANK_TOL)
        if bad.size:
            raise RankDeficiencyError(
                f"{what} is numerically singular (pivot {bad[0]}, "
                f"relative pivot {rel[bad[0]]:.3g})", pivot=int(bad[0]))
        self.matrix = a
        self.factor = c

    @property
    def p(self) -> int:
        return self.factor.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.dpotrs(self.factor, b, lower=False)
        if info != 0:  # pragma: no cover
            raise ValueError(f"dpotrs failed with info={info}")
        return x

    def inverse(self) -> np.ndarray:
        return symmetrize(self.solve(np.eye(self.p)))

    def condition_number(self) -> float:
        d = np.diag(self.factor)
        return float((d.max() / d.min()) ** 2)


def condition_number(a: np.ndarray) -> float:
    """2-norm condition number of a symmetric matrix; inf when singular."""
    w = np.linalg.eigvalsh(symmetrize(np.asarray(a, dtype=float)))
    if w[0] <= 0:
        return math.inf
    return float(w[-1] / w[0])


def fsum_stack(arrays) -> np.ndarray:
    """Elementwise correctly rounded sum, independent of summation order."""
    stack = np.stack([np.asarray(a, dtype=float) for a in arrays])
    flat = stack.reshape(stack.shape[0], -1)
    out = np.fromiter((math.fsum(col) for col in flat.T), dtype=float,
                      count=flat.shape[1])
    return out.reshape(stack.shape[1:])
