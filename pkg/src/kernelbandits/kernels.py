"""Covariance kernel families, Gram-matrix construction, and derived
smoothness constants.

Families
--------
SquaredExponential   k(x, x') = exp(-s^2 / (2 l^2)),  s = ||x - x'||_2
Matern               half-integer smoothness nu in {0.5, 1.5, 2.5} via the
                     standard closed forms; other nu values are rejected
Linear               k(x, x') = x . x'  (unit variance NOT guaranteed;
                     callers that assume k(x, x) <= 1 must keep the domain
                     inside the unit ball, see ``unit_ball_rescale``)
Precomputed          a symmetric table over a fixed index set; points are
                     single-coordinate indices into the table

SquaredExponential and Matern have k(x, x) = 1, so posterior variances
start at 1 and confidence-width bookkeeping is scale-free.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Kernel",
    "SquaredExponential",
    "Matern",
    "Linear",
    "Precomputed",
    "lipschitz_constant",
    "load_gram_csv",
    "write_gram_csv",
    "kernel_to_dict",
    "kernel_from_dict",
    "unit_ball_rescale",
]

MATERN_NU_VALUES = (0.5, 1.5, 2.5)

# Block size for pairwise distance computation; keeps the (block, m, d)
# broadcast buffer small for large candidate sets.
_BLOCK = 256


def as_points(X) -> np.ndarray:
    """Validate and return an (n, d) float array of finite points."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-d array, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("point set must be nonempty with dimension >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite coordinates")
    return X


def _point(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.ndim != 1:
        raise ValueError(f"a point must be a 1-d array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point contains non-finite coordinates")
    return x


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise squared euclidean distances via explicit differences.

    The elementwise form (rather than the ||x||^2 + ||y||^2 - 2 x.y trick)
    keeps k(x, x') and k(x', x) bit-identical.
    """
    out = np.empty((X.shape[0], Y.shape[0]))
    for i in range(0, X.shape[0], _BLOCK):
        diff = X[i : i + _BLOCK, None, :] - Y[None, :, :]
        out[i : i + _BLOCK] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


class Kernel:
    """Base class: a symmetric positive-semidefinite similarity function."""

    def pairwise(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Cross-covariance matrix k(X[i], Y[j]) of shape (n, m)."""
        raise NotImplementedError

    def diag(self, X: np.ndarray) -> np.ndarray:
        """k(x, x) for each row of X."""
        raise NotImplementedError

    def __call__(self, x, y) -> float:
        """Evaluate k(x, y) for two single points."""
        x, y = _point(x), _point(y)
        if x.shape != y.shape:
            raise ValueError(
                f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}"
            )
        return float(self.pairwise(x[None, :], y[None, :])[0, 0])

    def gram(self, points) -> np.ndarray:
        """Gram matrix over a point list, exactly symmetric.

        The upper triangle is computed and mirrored onto the lower one, and
        the diagonal is filled from ``diag``, so K == K.T holds bit-exact.
        """
        X = as_points(points)
        K = self.pairwise(X, X)
        iu, ju = np.triu_indices(X.shape[0], k=1)
        K[ju, iu] = K[iu, ju]
        np.fill_diagonal(K, self.diag(X))
        return K


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    lengthscale: float

    def __post_init__(self):
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")

    def pairwise(self, X, Y):
        X, Y = as_points(X), as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        return np.exp(_sqdist(X, Y) / (-2.0 * self.lengthscale**2))

    def diag(self, X):
        X = as_points(X)
        return np.ones(X.shape[0])


@dataclass(frozen=True)
class Matern(Kernel):
    nu: float
    lengthscale: float

    def __post_init__(self):
        if self.nu not in MATERN_NU_VALUES:
            raise ValueError(
                f"Matern smoothness must be one of {MATERN_NU_VALUES}, got {self.nu}"
            )
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")

    def pairwise(self, X, Y):
        X, Y = as_points(X), as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        r = np.sqrt(_sqdist(X, Y))
        if self.nu == 0.5:
            return np.exp(-r / self.lengthscale)
        if self.nu == 1.5:
            z = (math.sqrt(3.0) / self.lengthscale) * r
            return (1.0 + z) * np.exp(-z)
        z = (math.sqrt(5.0) / self.lengthscale) * r
        return (1.0 + z + z * z / 3.0) * np.exp(-z)

    def diag(self, X):
        X = as_points(X)
        return np.ones(X.shape[0])


@dataclass(frozen=True)
class Linear(Kernel):
    def pairwise(self, X, Y):
        X, Y = as_points(X), as_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        return X @ Y.T

    def diag(self, X):
        X = as_points(X)
        return np.einsum("ij,ij->i", X, X)


@dataclass(frozen=True, eq=False)
class Precomputed(Kernel):
    """Kernel given by an explicit symmetric table; points are indices.

    A point for this family is a length-1 array holding an integer index
    into the table.  Use ``load_gram_csv`` to build one from a CSV file.
    """

    table: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError(f"table must be square, got shape {table.shape}")
        if not np.all(np.isfinite(table)):
            raise ValueError("table contains non-finite entries")
        asym = np.max(np.abs(table - table.T)) if table.size else 0.0
        if asym > 1e-9:
            raise ValueError(f"table asymmetric beyond tolerance: {asym:.3e} > 1e-9")
        # symmetrize by averaging so eval is bit-exact symmetric
        table = 0.5 * (table + table.T)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        if not self.ids:
            object.__setattr__(
                self, "ids", tuple(str(i) for i in range(table.shape[0]))
            )

    @property
    def size(self) -> int:
        return self.table.shape[0]

    def _indices(self, X) -> np.ndarray:
        X = as_points(X)
        if X.shape[1] != 1:
            raise ValueError("precomputed-kernel points are single index values")
        raw = X[:, 0]
        idx = np.rint(raw).astype(int)
        if np.max(np.abs(raw - idx)) > 1e-9:
            raise ValueError("precomputed-kernel point is not an integer index")
        if np.any(idx < 0) or np.any(idx >= self.size):
            raise ValueError(
                f"index out of range for table of size {self.size}"
            )
        return idx

    def pairwise(self, X, Y):
        i, j = self._indices(X), self._indices(Y)
        return self.table[np.ix_(i, j)].copy()

    def diag(self, X):
        i = self._indices(X)
        return np.diag(self.table)[i].copy()

    def index_points(self) -> np.ndarray:
        """The full index set as an (n, 1) point array."""
        return np.arange(self.size, dtype=float)[:, None]


def lipschitz_constant(kernel: Kernel, d: int) -> float:
    """Per-coordinate derivative bound L = sup_x max_j
    (d^2 k(p, q) / dp_j dq_j at p = q = x)^(1/2).

    Any function f in the kernel's native space is Lipschitz with constant
    ||f|| * L, which drives the per-round grid sizing in ``discretize``.
    Defined for SquaredExponential and differentiable Matern (nu > 1); the
    value does not depend on d for these stationary families.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if isinstance(kernel, SquaredExponential):
        return 1.0 / kernel.lengthscale
    if isinstance(kernel, Matern):
        if kernel.nu == 1.5:
            return math.sqrt(3.0) / kernel.lengthscale
        if kernel.nu == 2.5:
            return math.sqrt(5.0 / 3.0) / kernel.lengthscale
        raise ValueError(
            "no Lipschitz constant: Matern nu=0.5 is not differentiable"
        )
    raise ValueError(
        f"no Lipschitz constant for kernel family {type(kernel).__name__}"
    )


def unit_ball_rescale(points) -> np.ndarray:
    """Scale a point set so that max ||x||_2 <= 1.

    Restores the bounded-variance property k(x, x) <= 1 for the Linear
    kernel on an arbitrary box domain.
    """
    X = as_points(points)
    radius = float(np.max(np.linalg.norm(X, axis=1)))
    if radius <= 1.0:
        return X.copy()
    return X / radius


# ---------------------------------------------------------------------
# CSV Gram tables
# ---------------------------------------------------------------------
#
# Format: first row lists the point ids; each following row starts with
# its id followed by the row entries.  Asymmetry beyond 1e-9 is rejected;
# smaller asymmetries are averaged away.


def load_gram_csv(path, unit_diag: bool = True) -> Precomputed:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and row[0].strip() != ""]
    if len(rows) < 2:
        raise ValueError(f"{path}: expected a header row and at least one data row")
    ids = [c.strip() for c in rows[0] if c.strip() != ""]
    n = len(ids)
    if len(rows) != n + 1:
        raise ValueError(f"{path}: header lists {n} ids but found {len(rows) - 1} rows")
    table = np.empty((n, n))
    for r, row in enumerate(rows[1:]):
        if row[0].strip() != ids[r]:
            raise ValueError(
                f"{path}: row {r + 1} id {row[0]!r} does not match header id {ids[r]!r}"
            )
        entries = [c for c in row[1:] if c.strip() != ""]
        if len(entries) != n:
            raise ValueError(f"{path}: row {ids[r]} has {len(entries)} entries, expected {n}")
        table[r] = [float(c) for c in entries]
    if unit_diag and np.any(np.diag(table) > 1.0 + 1e-12):
        raise ValueError(
            f"{path}: diagonal entries exceed 1 (max {np.max(np.diag(table)):.6g}); "
            "rescale the table or pass unit_diag=False"
        )
    return Precomputed(table=table, ids=tuple(ids))


def write_gram_csv(path, table, ids=None) -> None:
    table = np.asarray(table, dtype=float)
    n = table.shape[0]
    if ids is None:
        ids = [str(i) for i in range(n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for r in range(n):
            writer.writerow([ids[r]] + [repr(v) for v in table[r]])


# ---------------------------------------------------------------------
# Config / snapshot serialization
# ---------------------------------------------------------------------


def kernel_to_dict(kernel: Kernel, include_table: bool = False) -> dict:
    if isinstance(kernel, SquaredExponential):
        return {"family": "se", "lengthscale": kernel.lengthscale}
    if isinstance(kernel, Matern):
        return {"family": "matern", "nu": kernel.nu, "lengthscale": kernel.lengthscale}
    if isinstance(kernel, Linear):
        return {"family": "linear"}
    if isinstance(kernel, Precomputed):
        spec = {"family": "precomputed", "ids": list(kernel.ids)}
        if include_table:
            spec["table"] = kernel.table.tolist()
        return spec
    raise ValueError(f"unknown kernel type {type(kernel).__name__}")


def kernel_from_dict(spec: dict, table: np.ndarray | None = None) -> Kernel:
    family = spec.get("family")
    if family == "se":
        return SquaredExponential(lengthscale=float(spec["lengthscale"]))
    if family == "matern":
        return Matern(nu=float(spec["nu"]), lengthscale=float(spec["lengthscale"]))
    if family == "linear":
        return Linear()
    if family == "precomputed":
        if table is None:
            table = spec.get("table")
        if table is None:
            raise ValueError("precomputed kernel needs its table to deserialize")
        return Precomputed(table=np.asarray(table, dtype=float),
                           ids=tuple(spec.get("ids", ())))
    raise ValueError(f"unknown kernel family {family!r}")
