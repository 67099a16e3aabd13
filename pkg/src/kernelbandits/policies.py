"""Arm-selection rules and confidence-width schedules.

Widths
------
IGP-UCB   beta_t  = B + R sqrt(2 (gamma_{t-1} + 1 + ln(1/delta)))
GP-UCB    beta~_t = sqrt(2 B^2 + 300 gamma_{t-1} ln^3(t/delta))
GP-TS     v_t     = B + R sqrt(2 (gamma_{t-1} + 1 + ln(2/delta)))

For any t >= 2, delta <= 0.5 and gamma >= 1 (B = R = 1) the IGP-UCB width
is strictly below the GP-UCB width, which is what makes IGP-UCB exploit
much earlier in practice.

gamma_{t-1} is the information-gain budget.  The default is the empirical
value (1/2) log det(I + K_{t-1} / lam) read off the posterior, which is a
valid and tighter stand-in for the worst-case maximum.  Closed-form growth
rates per kernel family and a fixed constant are available as alternates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .kernels import Kernel, Linear, Matern, Precomputed, SquaredExponential
from .numerics import as_generator
from .posterior import CandidateSet, GaussianProcessPosterior

__all__ = [
    "PolicyConfig",
    "beta_igp_ucb",
    "beta_gp_ucb",
    "v_gp_ts",
    "gamma_estimate",
    "select_igp_ucb",
    "select_gp_ts",
    "select_gp_ei",
    "select_gp_pi",
    "expected_improvement",
    "probability_of_improvement",
    "DiscretizationSpec",
    "DiscretizationResult",
    "discretize",
]

GAMMA_MODES = ("empirical", "theoretical", "fixed")
TIE_BREAKS = ("lowest_index", "random")

_SIGMA_FLOOR = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class PolicyConfig:
    """Shared knobs: norm bound B, sub-Gaussian scale R, confidence delta,
    regularizer lam, and how the information-gain budget is obtained.

    ``gamma_const`` is the multiplicative constant for theoretical mode and
    the value itself for fixed mode.
    """

    B: float
    R: float
    delta: float
    lam: float
    gamma_mode: str = "empirical"
    gamma_const: float = 1.0
    horizon: int | None = None
    tie_break: str = "lowest_index"

    def __post_init__(self):
        if not (np.isfinite(self.B) and self.B >= 0):
            raise ValueError(f"B must be finite and >= 0, got {self.B}")
        if not (np.isfinite(self.R) and self.R >= 0):
            raise ValueError(f"R must be finite and >= 0, got {self.R}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.gamma_mode not in GAMMA_MODES:
            raise ValueError(f"gamma_mode must be one of {GAMMA_MODES}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")


def beta_igp_ucb(cfg: PolicyConfig, gamma_prev: float) -> float:
    """IGP-UCB confidence width for the next round."""
    if gamma_prev < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma_prev}")
    return cfg.B + cfg.R * math.sqrt(
        2.0 * (gamma_prev + 1.0 + math.log(1.0 / cfg.delta))
    )


def beta_gp_ucb(cfg: PolicyConfig, gamma_prev: float, t: int) -> float:
    """Baseline GP-UCB width.

    ln(t/delta) is clamped at 0: for t >= 1 and delta < 1 the argument
    exceeds 1 anyway, but a cubed negative log would silently flip sign.
    """
    if gamma_prev < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma_prev}")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    log_term = max(math.log(t / cfg.delta), 0.0)
    return math.sqrt(2.0 * cfg.B**2 + 300.0 * gamma_prev * log_term**3)


def v_gp_ts(cfg: PolicyConfig, gamma_prev: float) -> float:
    """GP-TS posterior-scale multiplier for the next round."""
    if gamma_prev < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma_prev}")
    return cfg.B + cfg.R * math.sqrt(
        2.0 * (gamma_prev + 1.0 + math.log(2.0 / cfg.delta))
    )


def gamma_estimate(
    cfg: PolicyConfig,
    state: GaussianProcessPosterior,
    t: int,
    d: int,
) -> float:
    """Information-gain budget gamma_{t-1} used by round t's width.

    empirical    (1/2) log det(I + K_{t-1}/lam) from the posterior's
                 running sum
    theoretical  growth-rate formulas with constant c = gamma_const:
                 SE: c (ln t)^(d+1); Matern: c t^(d(d+1)/(2 nu + d(d+1))) ln t;
                 Linear: c d ln t
    fixed        gamma_const
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    if cfg.gamma_mode == "empirical":
        return state.log_det_information()
    if cfg.gamma_mode == "fixed":
        return float(cfg.gamma_const)
    kernel = state.kernel
    c = float(cfg.gamma_const)
    if isinstance(kernel, SquaredExponential):
        return c * math.log(t) ** (d + 1)
    if isinstance(kernel, Matern):
        expo = d * (d + 1) / (2.0 * kernel.nu + d * (d + 1))
        return c * t**expo * math.log(t) if t > 1 else 0.0
    if isinstance(kernel, Linear):
        return c * d * math.log(t)
    raise ValueError(
        f"no theoretical information-gain rate for {type(kernel).__name__}"
    )


def _argmax_with_ties(scores: np.ndarray, tie_break: str, rng) -> int:
    best = np.max(scores)
    ties = np.flatnonzero(scores == best)
    if tie_break == "lowest_index" or ties.size == 1:
        return int(ties[0])
    if tie_break == "random":
        return int(as_generator(rng).choice(ties))
    raise ValueError(f"tie_break must be one of {TIE_BREAKS}")


def select_igp_ucb(
    state: GaussianProcessPosterior,
    beta: float,
    tie_break: str = "lowest_index",
    rng=None,
) -> int:
    """argmax of mu_{t-1}(x) + beta sigma_{t-1}(x) over the candidates."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    scores = state.mu + beta * np.sqrt(state.var)
    return _argmax_with_ties(scores, tie_break, rng)


def select_gp_ts(
    state: GaussianProcessPosterior,
    v: float,
    seed,
    active_points: np.ndarray | None = None,
) -> int:
    """Draw f_t from GP(mu_{t-1}, v^2 k_{t-1}) and return its argmax.

    With ``active_points`` unset the draw covers the state's full candidate
    set (exact Thompson sampling).  Otherwise the draw is taken at the given
    points through batch-mode prediction and the returned index refers to
    ``active_points``.  Deterministic per (state, v, seed).
    """
    if active_points is None:
        draw = state.sample_function(v, seed)
    else:
        draw = state.sample_at(active_points, v, seed)
    return int(np.argmax(draw))


def expected_improvement(
    mu: np.ndarray, sigma: np.ndarray, f_best: float
) -> np.ndarray:
    """EI(x) = (mu - f_best) Phi(z) + sigma phi(z), z = (mu - f_best)/sigma.

    Degenerate arms (sigma < 1e-12) score max(mu - f_best, 0).
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gain = mu - f_best
    live = sigma >= _SIGMA_FLOOR
    out = np.maximum(gain, 0.0)
    if np.any(live):
        z = gain[live] / sigma[live]
        pdf = np.exp(-0.5 * z * z) / _SQRT_2PI
        out[live] = gain[live] * ndtr(z) + sigma[live] * pdf
    return out


def probability_of_improvement(
    mu: np.ndarray, sigma: np.ndarray, f_best: float, xi: float
) -> np.ndarray:
    """PI(x) = Phi((mu - f_best - xi) / sigma); degenerate arms score
    +/- inf by the sign of mu - f_best - xi."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    shift = mu - f_best - xi
    live = sigma >= _SIGMA_FLOOR
    out = np.where(shift > 0, np.inf, np.where(shift < 0, -np.inf, 0.0))
    if np.any(live):
        out[live] = ndtr(shift[live] / sigma[live])
    return out


def select_gp_ei(
    state: GaussianProcessPosterior,
    f_best: float,
    tie_break: str = "lowest_index",
    rng=None,
) -> int:
    scores = expected_improvement(state.mu, np.sqrt(state.var), f_best)
    return _argmax_with_ties(scores, tie_break, rng)


def select_gp_pi(
    state: GaussianProcessPosterior,
    f_best: float,
    xi: float,
    tie_break: str = "lowest_index",
    rng=None,
) -> int:
    if xi < 0:
        raise ValueError(f"xi must be >= 0, got {xi}")
    scores = probability_of_improvement(state.mu, np.sqrt(state.var), f_best, xi)
    return _argmax_with_ties(scores, tie_break, rng)


# ---------------------------------------------------------------------
# Per-round discretization grids
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class DiscretizationSpec:
    """Grid sizing for the box [0, r]^d: m = ceil(B L r d t^2) points per
    axis at round t, so that every x in the box has a grid point within
    L1 distance 1/(B L t^2).  ``cap`` bounds the total grid size."""

    B: float
    L: float
    r: float
    d: int
    cap: int = 1_000_000

    def __post_init__(self):
        for name in ("B", "L", "r"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")


@dataclass(frozen=True, eq=False)
class DiscretizationResult:
    candidates: CandidateSet
    per_axis: int
    capped: bool
    covering_radius_l1: float


def discretize(spec: DiscretizationSpec, t: int) -> DiscretizationResult:
    """Uniform cell-center grid over [0, r]^d for round t.

    When the target size m^d exceeds the cap, the grid is shrunk to the
    largest per-axis count that fits and the result is flagged, carrying
    the achieved L1 covering radius.
    """
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    m = max(int(math.ceil(spec.B * spec.L * spec.r * spec.d * t * t)), 1)
    capped = False
    if m**spec.d > spec.cap:
        capped = True
        m = max(int(spec.cap ** (1.0 / spec.d)), 1)
        while (m + 1) ** spec.d <= spec.cap:
            m += 1
        while m > 1 and m**spec.d > spec.cap:
            m -= 1
    axis = (np.arange(m) + 0.5) * (spec.r / m)
    mesh = np.meshgrid(*([axis] * spec.d), indexing="ij")
    points = np.stack([a.ravel() for a in mesh], axis=1)
    radius = spec.d * spec.r / (2.0 * m)
    return DiscretizationResult(
        candidates=CandidateSet(points),
        per_axis=m,
        capped=capped,
        covering_radius_l1=radius,
    )
