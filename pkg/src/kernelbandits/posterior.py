"""Gaussian-process posterior over a finite candidate set.

Two update routes are maintained:

batch      an incrementally extended Cholesky factor of (K_t + lam I);
           every observation triggers a recompute of the posterior mean
           and variance at all candidates from the factor:
               mu_t(x)    = k_t(x)' (K_t + lam I)^-1 y_1:t
               sigma_t^2  = k(x, x) - k_t(x)' (K_t + lam I)^-1 k_t(x)
           Batch mode also answers predictions, covariance, and function
           draws at arbitrary off-candidate points, which is what a
           per-round discretization grid needs.

recursive  inversion-free rank-one updates of the full candidate-pair
           posterior covariance table k_t(x, x'):
               mu_t(x)     = mu_{t-1}(x) + k_{t-1}(x, x_t) (y_t - mu_{t-1}(x_t)) / (lam + s)
               k_t(x, x')  = k_{t-1}(x, x') - k_{t-1}(x, x_t) k_{t-1}(x_t, x') / (lam + s)
               sigma_t^2   = k_t(x, x)
           with s = sigma_{t-1}^2(x_t).  O(n^2) per round, no factorization;
           the default for fixed candidate sets.

Both routes accumulate the running information-gain sum
sum_s log(1 + sigma_{s-1}^2(x_s) / lam), whose half equals
(1/2) log det(I + K_t / lam).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import CapacityError, DegeneracyError
from .kernels import Kernel, as_points, kernel_from_dict, kernel_to_dict
from .numerics import GrowingCholesky, as_generator, cholesky_with_jitter

__all__ = ["CandidateSet", "GaussianProcessPosterior"]

# Negative variances below -VAR_BREAKDOWN indicate accumulated cancellation
# damage; smaller negatives are clamped to zero and counted.
VAR_BREAKDOWN = 1e-6
DEFAULT_MEMORY_CAP = 512 * 1024**2


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """A finite decision set: points indexed densely by 0..n-1."""

    points: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))


class GaussianProcessPosterior:
    """Running posterior mean/variance over a fixed candidate set.

    Single-writer: ``update`` mutates in place.  Reads (``predict``,
    ``sample_function``, ``log_det_information``) are safe between
    updates; independent states parallelize across trials.
    """

    def __init__(
        self,
        kernel: Kernel,
        lam: float,
        candidates: CandidateSet,
        mode: str = "recursive",
        memory_cap: int = DEFAULT_MEMORY_CAP,
    ):
        if not (np.isfinite(lam) and lam > 0):
            raise ValueError(f"regularizer lam must be > 0, got {lam}")
        if mode not in ("batch", "recursive"):
            raise ValueError(f"mode must be 'batch' or 'recursive', got {mode!r}")
        if not isinstance(candidates, CandidateSet):
            candidates = CandidateSet(np.asarray(candidates, dtype=float))
        self.kernel = kernel
        self.lam = float(lam)
        self.candidates = candidates
        self.mode = mode

        n = len(candidates)
        self._prior_diag = kernel.diag(candidates.points)
        self.mu = np.zeros(n)
        self.var = self._prior_diag.copy()
        self._logdet_sum = 0.0
        self.clamped = 0
        self._hist_idx: list[int] = []
        self._hist_y: list[float] = []

        if mode == "recursive":
            need = n * n * 8
            if need > memory_cap:
                raise CapacityError(
                    f"recursive mode needs {need} bytes for the {n}x{n} covariance "
                    f"table, exceeding the cap of {memory_cap}"
                )
            self._cov = kernel.gram(candidates.points)
        else:
            self._chol = GrowingCholesky()
            self._obs_points = np.zeros((0, candidates.dim))
            self._cross = np.zeros((0, n))  # rows k(x_s, candidates)
            self._y = np.zeros(0)
            self._prior_gram = None  # cached lazily for posterior_cov

    # -- basic accessors ------------------------------------------------

    @property
    def t(self) -> int:
        return len(self._hist_y)

    @property
    def history(self) -> list[tuple[int, float]]:
        return list(zip(self._hist_idx, self._hist_y))

    def predict(self, idx: int) -> tuple[float, float]:
        """Cached (mu_t(x_idx), sigma_t^2(x_idx)); pure read."""
        n = len(self.candidates)
        if not 0 <= idx < n:
            raise IndexError(f"candidate index {idx} out of range [0, {n})")
        return float(self.mu[idx]), float(self.var[idx])

    def log_det_information(self) -> float:
        """(1/2) log det(I + K_t / lam) via the running per-round sum."""
        return 0.5 * self._logdet_sum

    # -- updates ----------------------------------------------------------

    def update(self, idx: int, y: float) -> None:
        """Record reward y at candidate idx and refresh the posterior."""
        n = len(self.candidates)
        if not 0 <= idx < n:
            raise IndexError(f"candidate index {idx} out of range [0, {n})")
        y = float(y)
        if not np.isfinite(y):
            raise ValueError(f"reward must be finite, got {y}")
        if self.mode == "recursive":
            self._update_recursive(idx, y)
        else:
            self._update_batch(self.candidates.points[idx], y, self.var[idx])
        self._hist_idx.append(int(idx))
        self._hist_y.append(y)

    def observe_point(self, x, y: float) -> None:
        """Batch-mode only: condition on an observation at an arbitrary
        point (e.g. a member of a per-round discretization grid)."""
        if self.mode != "batch":
            raise ValueError(
                "off-candidate observations need batch mode; the recursive "
                "covariance table is tied to the fixed candidate set"
            )
        x = as_points(x)[0]
        y = float(y)
        if not np.isfinite(y):
            raise ValueError(f"reward must be finite, got {y}")
        _, var_x = self.predict_at(x[None, :])
        self._update_batch(x, y, float(var_x[0]))
        self._hist_idx.append(-1)
        self._hist_y.append(y)

    def _update_recursive(self, idx: int, y: float) -> None:
        s = float(self.var[idx])
        denom = self.lam + s
        if denom <= 1e-12:
            raise DegeneracyError(
                f"rank-one update denominator {denom:.3e} at round {self.t + 1}"
            )
        kx = self._cov[:, idx].copy()
        self.mu += kx * ((y - self.mu[idx]) / denom)
        self._cov -= np.outer(kx, kx) / denom
        self._logdet_sum += float(np.log1p(s / self.lam))
        var = np.diagonal(self._cov).copy()
        self._clamp(var)
        self.var = var
        np.fill_diagonal(self._cov, var)

    def _update_batch(self, x: np.ndarray, y: float, prev_var: float) -> None:
        t = self.t
        cross_obs = (
            self.kernel.pairwise(x[None, :], self._obs_points)[0]
            if t
            else np.zeros(0)
        )
        kxx = float(self.kernel.diag(x[None, :])[0])
        try:
            self._chol.append(cross_obs, kxx + self.lam)
        except DegeneracyError as exc:
            raise DegeneracyError(f"batch factorization breakdown: {exc}") from exc

        row = self.kernel.pairwise(x[None, :], self.candidates.points)[0]
        self._obs_points = np.vstack([self._obs_points, x[None, :]])
        self._cross = np.vstack([self._cross, row[None, :]])
        self._y = np.append(self._y, y)
        self._logdet_sum += float(np.log1p(max(prev_var, 0.0) / self.lam))

        L = self._chol.L
        V = solve_triangular(L, self._cross, lower=True)
        u = solve_triangular(L, self._y, lower=True)
        self.mu = V.T @ u
        var = self._prior_diag - np.einsum("ij,ij->j", V, V)
        self._clamp(var)
        self.var = var

    def _clamp(self, var: np.ndarray) -> None:
        worst = float(var.min())
        if worst < -VAR_BREAKDOWN:
            raise DegeneracyError(
                f"posterior variance {worst:.3e} below -{VAR_BREAKDOWN} "
                f"at round {self.t + 1}"
            )
        neg = var < 0.0
        if np.any(neg):
            self.clamped += int(neg.sum())
            var[neg] = 0.0

    # -- off-candidate predictions (batch mode) ---------------------------

    def predict_at(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at arbitrary points (batch mode)."""
        if self.mode != "batch":
            raise ValueError("predict_at needs batch mode")
        X = as_points(X)
        prior = self.kernel.diag(X)
        if self.t == 0:
            return np.zeros(X.shape[0]), prior.copy()
        C = self.kernel.pairwise(self._obs_points, X)
        L = self._chol.L
        V = solve_triangular(L, C, lower=True)
        u = solve_triangular(L, self._y, lower=True)
        mu = V.T @ u
        var = prior - np.einsum("ij,ij->j", V, V)
        return mu, np.maximum(var, 0.0)

    def cov_at(self, X) -> np.ndarray:
        """Posterior covariance k_t(X, X) at arbitrary points (batch mode)."""
        if self.mode != "batch":
            raise ValueError("cov_at needs batch mode")
        X = as_points(X)
        K0 = self.kernel.gram(X)
        if self.t == 0:
            return K0
        C = self.kernel.pairwise(self._obs_points, X)
        V = solve_triangular(self._chol.L, C, lower=True)
        return K0 - V.T @ V

    def posterior_cov(self) -> np.ndarray:
        """Posterior covariance table over the candidate set."""
        if self.mode == "recursive":
            return self._cov.copy()
        if self._prior_gram is None:
            self._prior_gram = self.kernel.gram(self.candidates.points)
        if self.t == 0:
            return self._prior_gram.copy()
        V = solve_triangular(self._chol.L, self._cross, lower=True)
        return self._prior_gram - V.T @ V

    # -- function draws ----------------------------------------------------

    def sample_function(self, scale: float, seed) -> np.ndarray:
        """One draw of f ~ GP(mu_t, scale^2 k_t) at the candidates.

        Deterministic for a fixed seed.  The covariance factorization
        escalates through the jitter ladder before failing.
        """
        if not scale > 0:
            raise ValueError(f"scale must be > 0, got {scale}")
        cov = self.posterior_cov()
        L = cholesky_with_jitter(cov)
        z = as_generator(seed).standard_normal(len(self.candidates))
        return self.mu + scale * (L @ z)

    def sample_at(self, X, scale: float, seed) -> np.ndarray:
        """One posterior draw at arbitrary points (batch mode)."""
        if not scale > 0:
            raise ValueError(f"scale must be > 0, got {scale}")
        X = as_points(X)
        mu, _ = self.predict_at(X)
        cov = self.cov_at(X)
        L = cholesky_with_jitter(cov)
        z = as_generator(seed).standard_normal(X.shape[0])
        return mu + scale * (L @ z)

    # -- snapshots ----------------------------------------------------------

    def save(self, path) -> None:
        """Dump (kernel spec, lam, candidates, history) to an .npz record.

        Mean and variance are recomputed on restore, so snapshots do not
        depend on this implementation's internal caches.
        """
        spec = kernel_to_dict(self.kernel)
        arrays = dict(
            kernel_json=np.array(json.dumps(spec)),
            lam=np.array(self.lam),
            mode=np.array(self.mode),
            points=np.asarray(self.candidates.points),
            hist_idx=np.array(self._hist_idx, dtype=int),
            hist_y=np.array(self._hist_y, dtype=float),
        )
        if spec["family"] == "precomputed":
            arrays["kernel_table"] = self.kernel.table
        if self.mode == "batch":
            arrays["obs_points"] = self._obs_points
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "GaussianProcessPosterior":
        with np.load(path, allow_pickle=False) as data:
            spec = json.loads(str(data["kernel_json"]))
            table = data["kernel_table"] if "kernel_table" in data else None
            kernel = kernel_from_dict(spec, table=table)
            state = cls(
                kernel,
                float(data["lam"]),
                CandidateSet(data["points"]),
                mode=str(data["mode"]),
            )
            hist_idx = data["hist_idx"]
            hist_y = data["hist_y"]
            obs_points = data["obs_points"] if "obs_points" in data else None
        for s, (idx, y) in enumerate(zip(hist_idx, hist_y)):
            if idx >= 0:
                state.update(int(idx), float(y))
            else:
                state.observe_point(obs_points[s], float(y))
        return state
