"""Noise estimation and empirical-Bayes shrinkage of detail coefficients.

Details are standardized by their per-coefficient noise gain (the norm of
the matching forward-matrix row), so a homoscedastic spike-and-slab model
applies: prior (1-nu) delta_0 + nu * quasi-Cauchy, mixing weight fit by
marginal maximum likelihood, shrinkage by the posterior median (or a hard
threshold derived from the same weight).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import norm

from .graph import Id, LineGraph
from .lifting import (
    CoefficientSet,
    LiftingConfig,
    LiftingError,
    LiftingRecord,
    forward,
    inverse,
)

MAD_SCALE = 0.6745


class ShrinkageError(ValueError):
    """Invalid shrinkage inputs."""


@dataclass(frozen=True)
class ShrinkageConfig:
    """Thresholding policy: which levels pass through, and which rule."""

    keep_coarsest: int = 2
    rule: str = "median"      # "median" (posterior median) or "hard"

    def __post_init__(self):
        if self.keep_coarsest < 0:
            raise ShrinkageError("keep_coarsest must be nonnegative")
        if self.rule not in ("median", "hard"):
            raise ShrinkageError(f"unknown shrinkage rule {self.rule!r}")


@dataclass
class DenoiseResult:
    estimates: Dict[Id, float]
    sigma_hat: float
    nu_hat: float
    shrunk_details: Dict[Id, float]
    levels: Dict[Id, int]
    scales: Dict[Id, float]


# ---------------------------------------------------------------------------
# quasi-Cauchy building blocks (vectorized over standardized coefficients)

def beta_cauchy(x: np.ndarray) -> np.ndarray:
    """(marginal/normal density ratio - 1) under the quasi-Cauchy slab."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, -0.5)
    nz = x != 0
    # norm.pdf underflows to 0 beyond |x| ~ 38; the cap below absorbs the inf
    with np.errstate(over="ignore", divide="ignore"):
        out[nz] = (norm.pdf(0) / norm.pdf(x[nz]) - 1.0) / x[nz] ** 2 - 1.0
    return np.minimum(out, 1e20)


def weight_from_thresh(thr: float) -> float:
    """Mixing weight whose posterior-median threshold equals `thr`."""
    fx = norm.pdf(thr)
    Fx = norm.cdf(thr)
    denom = math.sqrt(math.pi / 2.0) * fx * thr * thr
    if denom == 0:
        return 1.0
    inv = 1.0 + (Fx - thr * fx - 0.5) / denom
    return 1.0 / inv if math.isfinite(inv) else 1.0


def weight_from_data(x: np.ndarray) -> float:
    """Marginal maximum-likelihood mixing weight.

    The likelihood score S(w) = sum beta/(1 + w*beta) is decreasing in w;
    the solution is bracketed between the universal-threshold weight and 1.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    if m == 0:
        raise ShrinkageError("cannot fit mixing weight to zero coefficients")
    wlo = weight_from_thresh(math.sqrt(2.0 * math.log(m)))
    beta = beta_cauchy(x)

    def score(w: float) -> float:
        return float(np.sum(beta / (1.0 + w * beta)))

    if score(1.0) >= 0:
        return 1.0
    if score(wlo) <= 0:
        return wlo
    return float(brentq(score, wlo, 1.0, xtol=1e-12))


def _cauchy_med_objective(mu: np.ndarray, x: np.ndarray, w: float) -> np.ndarray:
    # posterior tail probability minus 1/2, up to common positive factors;
    # decreasing in mu, with the root at the posterior median
    y = x - mu
    fy = norm.pdf(y)
    yr = norm.cdf(y) - x * fy + (x * mu - 1.0) * fy * norm.cdf(-mu) / norm.pdf(mu)
    yl = 1.0 + np.exp(-x * x / 2.0) * (x * x * (1.0 / w - 1.0) - 1.0)
    return yl / 2.0 - yr


def post_med_cauchy(x: np.ndarray, w: float, n_iter: int = 60) -> np.ndarray:
    """Posterior median of the mean given standardized data, vectorized.

    Bisection over [0, |x|]; large |x| uses the asymptote x - 2/x; medians
    below 1e-7 are clipped to exact zero.
    """
    x = np.asarray(x, dtype=float)
    mag = np.abs(x)
    big = mag > 20.0
    work = np.where(big, 0.0, mag)

    lo = np.zeros_like(work)
    hi = work.copy()
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = _cauchy_med_objective(mid, work, w) <= 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    med = 0.5 * (lo + hi)

    med[big] = mag[big] - 2.0 / mag[big]
    med[med < 1e-7] = 0.0
    med = np.sign(x) * med
    clip = np.abs(med) > np.abs(x)
    med[clip] = x[clip]
    return med


def thresh_from_weight(w: float) -> float:
    """Hard-threshold location implied by a mixing weight."""

    def objective(z: float) -> float:
        fz = norm.pdf(z)
        return norm.cdf(z) - z * fz - 0.5 - z * z * math.sqrt(2 * math.pi) * fz * (1.0 / w - 1.0) / 2.0

    # z = 0 is always a root; the threshold is the interior one
    lo = 1e-4
    if objective(lo) >= 0:
        return 0.0
    if objective(20.0) <= 0:
        return 20.0
    return float(brentq(objective, lo, 20.0, xtol=1e-12))


# ---------------------------------------------------------------------------
# pipeline operations

def estimate_sigma_mad(details: Mapping[Id, float], levels: Mapping[Id, int]) -> float:
    """Robust noise scale from the finest artificial level.

    sigma = median(|d - median(d)|) / 0.6745 over finest-level details.
    """
    finest = [details[k] for k, lev in levels.items() if lev == 0]
    if len(finest) < 3:
        raise ShrinkageError(
            f"insufficient coefficients: finest level has {len(finest)}, need 3"
        )
    arr = np.asarray(finest)
    sigma = float(np.median(np.abs(arr - np.median(arr)))) / MAD_SCALE
    if sigma <= 0:
        raise ShrinkageError("degenerate finest level: MAD noise estimate is zero")
    return sigma


def ebayes_threshold(
    details: Mapping[Id, float],
    sigma: float,
    levels: Mapping[Id, int],
    config: ShrinkageConfig = ShrinkageConfig(),
) -> Tuple[Dict[Id, float], float]:
    """Shrink details level-aware; returns (shrunk details, fitted weight).

    The `keep_coarsest` coarsest levels pass through untouched; the rest
    are standardized by `sigma`, shrunk with one globally fitted mixing
    weight, and rescaled.
    """
    if not sigma > 0:
        raise ShrinkageError(f"noise scale must be positive, got {sigma}")
    n_levels = max(levels.values()) + 1 if levels else 0
    if not config.keep_coarsest < max(n_levels, 1):
        raise ShrinkageError(
            f"keep_coarsest={config.keep_coarsest} must be below {n_levels} levels"
        )
    cut = n_levels - config.keep_coarsest
    target = [k for k in details if levels[k] < cut]
    out = {k: float(details[k]) for k in details}
    if not target:
        return out, 0.0

    z = np.array([details[k] for k in target]) / sigma
    try:
        w = weight_from_data(z)
    except (ValueError, ArithmeticError) as exc:
        warnings.warn(f"mixing-weight fit failed ({exc}); falling back to 0.5")
        w = 0.5
    if config.rule == "median":
        shrunk = post_med_cauchy(z, w)
    else:
        thr = thresh_from_weight(w)
        shrunk = np.where(np.abs(z) > thr, z, 0.0)
    for k, v in zip(target, shrunk):
        out[k] = float(v) * sigma
    return out, w


def detail_gains(record: LiftingRecord) -> Dict[Id, float]:
    """Per-detail noise gain: the 2-norm of that forward-matrix row.

    Replays the archived filters on an identity matrix, so no further
    graph work is needed.
    """
    m = len(record.ids)
    pos = {k: i for i, k in enumerate(record.ids)}
    C = np.eye(m)
    gains: Dict[Id, float] = {}
    for st in record.stages:
        row = C[pos[st.removed]] - sum(
            a * C[pos[s]] for a, s in zip(st.a, st.neighbors)
        )
        gains[st.removed] = float(np.linalg.norm(row))
        for b, s in zip(st.b, st.neighbors):
            C[pos[s]] += b * row
    return gains


def denoise(
    values: Mapping[Id, float],
    lg: LineGraph,
    config: LiftingConfig,
    shrink_config: ShrinkageConfig = ShrinkageConfig(),
    trajectory: Optional[Sequence[Id]] = None,
    gains: Optional[Mapping[Id, float]] = None,
) -> DenoiseResult:
    """Forward transform, gain-standardize, shrink, invert.

    Precomputed `gains` (from detail_gains on a record with the same
    removal order) skip the replay when denoising many replicates on one
    graph.
    """
    coeffs, record = forward(values, lg, config, trajectory=trajectory)
    if gains is None:
        gains = detail_gains(record)
    std_details = {k: d / gains[k] for k, d in coeffs.details.items()}

    if coeffs.levels is None:
        raise ShrinkageError("too few detail coefficients to denoise")
    # on very small graphs the finest level alone is too thin for a MAD;
    # pool upward from the finest until at least 3 coefficients are in hand
    counts = sorted(set(coeffs.levels.values()))
    pool = 0
    for j in counts:
        if sum(1 for lev in coeffs.levels.values() if lev <= j) >= 3:
            pool = j
            break
    mad_levels = {k: (0 if lev <= pool else lev) for k, lev in coeffs.levels.items()}
    try:
        sigma = estimate_sigma_mad(std_details, mad_levels)
    except ShrinkageError as exc:
        if "degenerate" not in str(exc):
            raise
        # noiseless input: a zero MAD means there is nothing to shrink
        sigma, nu = 0.0, 0.0
        shrunk = dict(coeffs.details)
    else:
        shrunk_std, nu = ebayes_threshold(
            std_details, sigma, coeffs.levels, shrink_config
        )
        shrunk = {k: v * gains[k] for k, v in shrunk_std.items()}

    est_set = CoefficientSet(details=shrunk, scaling=coeffs.scaling, scales=coeffs.scales)
    estimates = inverse(est_set, record)
    return DenoiseResult(
        estimates=estimates,
        sigma_hat=sigma,
        nu_hat=nu,
        shrunk_details=shrunk,
        levels=coeffs.levels,
        scales=coeffs.scales,
    )


def random_trajectories(
    lg: LineGraph, config: LiftingConfig, n: int, seed: int
) -> List[Tuple[Id, ...]]:
    """n removal orders: uniform permutations truncated to length m - tau."""
    out = []
    for p in range(n):
        rng = np.random.default_rng((seed, p))
        perm = rng.permutation(lg.m)
        out.append(tuple(lg.ids[i] for i in perm[: lg.m - config.tau]))
    return out


def nlt_denoise(
    values: Mapping[Id, float],
    lg: LineGraph,
    config: LiftingConfig,
    shrink_config: ShrinkageConfig = ShrinkageConfig(),
    n_trajectories: int = 30,
    seed: int = 0,
) -> Tuple[DenoiseResult, List[DenoiseResult]]:
    """Average the denoiser over random removal orders.

    Each trajectory gets an independent substream derived from (seed,
    index), so results do not depend on evaluation order.  Returns the
    averaged result plus the per-trajectory results.
    """
    if n_trajectories < 1:
        raise ShrinkageError("need at least one trajectory")
    singles = []
    for traj in random_trajectories(lg, config, n_trajectories, seed):
        singles.append(denoise(values, lg, config, shrink_config, trajectory=traj))
    mean_est = {
        k: sum(r.estimates[k] for r in singles) / len(singles) for k in lg.ids
    }
    combined = DenoiseResult(
        estimates=mean_est,
        sigma_hat=float(np.mean([r.sigma_hat for r in singles])),
        nu_hat=float(np.mean([r.nu_hat for r in singles])),
        shrunk_details={},
        levels=singles[0].levels,
        scales=singles[0].scales,
    )
    return combined, singles
