"""Low-level linear-algebra helpers shared by the posterior and the
concentration lab."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegeneracyError

JITTER_LADDER = (1e-10, 1e-8, 1e-6)


def as_generator(seed) -> np.random.Generator:
    """Accept an int, a SeedSequence, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def cholesky_with_jitter(matrix: np.ndarray, ladder=JITTER_LADDER) -> np.ndarray:
    """Lower Cholesky factor of ``matrix + jitter*I``.

    The first rung of the ladder is always applied; rungs escalate until
    the factorization succeeds.  Raises DegeneracyError when the ladder
    is exhausted.
    """
    n = matrix.shape[0]
    eye = np.eye(n)
    for jitter in ladder:
        try:
            return np.linalg.cholesky(matrix + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise DegeneracyError(
        f"covariance factorization failed after jitter ladder {tuple(ladder)}"
    )


class GrowingCholesky:
    """Lower-triangular factor of a positive-definite matrix extended one
    row/column at a time.

    Appending costs O(t^2) (one triangular solve) instead of the O(t^3)
    full refactorization.  The factor is identical, up to rounding, to a
    fresh Cholesky of the full matrix.
    """

    def __init__(self, capacity: int = 64):
        self._L = np.zeros((capacity, capacity))
        self.t = 0

    def _grow(self, needed: int) -> None:
        cap = self._L.shape[0]
        if needed <= cap:
            return
        while cap < needed:
            cap *= 2
        fresh = np.zeros((cap, cap))
        fresh[: self.t, : self.t] = self._L[: self.t, : self.t]
        self._L = fresh

    @property
    def L(self) -> np.ndarray:
        """View of the current t x t factor (do not mutate)."""
        return self._L[: self.t, : self.t]

    def append(self, cross: np.ndarray, diag: float) -> float:
        """Extend the factored matrix by one row/column.

        ``cross`` holds the t off-diagonal entries of the new column and
        ``diag`` the new diagonal entry.  Returns the new pivot; raises
        DegeneracyError when the pivot is not strictly positive.
        """
        t = self.t
        self._grow(t + 1)
        if t:
            w = solve_triangular(self._L[:t, :t], cross, lower=True)
            pivot_sq = diag - float(w @ w)
            self._L[t, :t] = w
        else:
            pivot_sq = diag
        if pivot_sq <= 0.0:
            raise DegeneracyError(
                f"non-positive Cholesky pivot {pivot_sq:.6e} at step {t + 1}"
            )
        pivot = float(np.sqrt(pivot_sq))
        self._L[t, t] = pivot
        self.t = t + 1
        return pivot

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """Solve L x = b for the current factor."""
        if self.t == 0:
            return np.zeros_like(b)
        return solve_triangular(self.L, b, lower=True)

    def logdet(self) -> float:
        """log det of the factored matrix (2 * sum of log pivots)."""
        if self.t == 0:
            return 0.0
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))
