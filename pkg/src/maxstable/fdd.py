"""Finite-dimensional distributions of the max-stable constructions.

P(eta(t_1) <= x_1, ..., eta(t_n) <= x_n) = exp(-V) where the exponent
V = E max_j exp(<X, t_j> - kappa(t_j)) / x_j is estimated by Monte Carlo
for general queries, and available in closed form for the one-point
marginal and for the bivariate Husler-Reiss case of Gaussian spectral
vectors.  Empirical-CDF utilities for comparing simulations against
these references live here as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .seeding import spawn
from .spectral import ShapeFunction, SpectralDistribution, cgf

_MC_CHUNK = 1 << 16

# lambda below this routes to the complete-dependence branch; the
# log-ratio term is numerically explosive there.
_HR_LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True)
class FddQuery:
    """Evaluation points and thresholds for one fdd probability."""

    ts: np.ndarray
    xs: np.ndarray

    def __init__(self, ts, xs):
        ts = np.asarray(ts, dtype=float)
        if ts.ndim == 1:
            ts = ts[:, None]
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if ts.shape[0] != xs.shape[0] or ts.shape[0] < 1:
            raise ValueError("need matching, non-empty points and thresholds")
        if np.any(xs <= 0):
            raise ValueError("thresholds must be positive")
        for i in range(ts.shape[0]):
            for j in range(i + 1, ts.shape[0]):
                if np.linalg.norm(ts[i] - ts[j]) <= 1e-12:
                    raise ValueError("query points must be pairwise distinct")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "xs", xs)

    @property
    def n(self) -> int:
        return self.xs.shape[0]


@dataclass(frozen=True)
class ExponentValue:
    value: float
    se: float
    method: str


def std_normal_cdf(z) -> np.ndarray:
    """Standard normal CDF via the complementary error function
    (|error| < 1e-15, accurate far into the tails)."""
    z = np.asarray(z, dtype=float)
    return 0.5 * erfc(-z / math.sqrt(2.0))


def exponent_mc(
    dist: SpectralDistribution,
    kappa: ShapeFunction,
    query: FddQuery,
    mc_n: int,
    rng,
) -> ExponentValue:
    """Monte Carlo estimate of V = E max_j exp(<X, t_j> - kappa(t_j)) / x_j.

    Uses the exact tilted decomposition

        V = sum_j  e^{phi(t_j) - kappa(t_j)} / x_j
                   * P(argmax is j under the t_j-tilted law of X),

    obtained by splitting the max over the (first-wins) argmax partition
    and absorbing each factor e^{<X, t_j>} into a change of measure.  Each
    summand is a bounded indicator probability, so both the estimate and
    its standard error stay reliable even when the naive summand
    e^{<X, t_j>} is catastrophically heavy-tailed (large ||t_j|| Sigma).

    mc_n samples are split evenly over the query points; each point draws
    in fixed-size chunks from its own sub-stream and reduces in index
    order, so the estimate does not depend on how chunks are scheduled.
    """
    if mc_n < 1000:
        raise ValueError("mc_n must be >= 1000")
    dist.check_domain(query.ts)
    kap = kappa.values(query.ts)
    phi = np.asarray(dist.cgf(query.ts), dtype=float)
    log_x = np.log(query.xs)
    weights = np.exp(phi - kap - log_x)
    m = max(mc_n // query.n, 1)
    point_streams = spawn(rng, query.n)
    value = 0.0
    var = 0.0
    for j in range(query.n):
        n_chunks = (m + _MC_CHUNK - 1) // _MC_CHUNK
        children = spawn(point_streams[j], n_chunks)
        hits = 0
        done = 0
        for child in children:
            size = min(_MC_CHUNK, m - done)
            x = dist.sample_tilted(query.ts[j], size, child)
            log_terms = x @ query.ts.T - kap[None, :] - log_x[None, :]
            hits += int((log_terms.argmax(axis=1) == j).sum())
            done += size
        p = hits / m
        value += weights[j] * p
        var += weights[j] ** 2 * p * (1.0 - p) / m
    return ExponentValue(value, math.sqrt(var), "mc")


def husler_reiss_V(gamma_h: float, x1: float, x2: float) -> ExponentValue:
    """Closed-form bivariate exponent for Gaussian spectral vectors.

    lambda = sqrt(gamma_h) / 2;
    V = Phi(lambda + log(x2/x1) / (2 lambda)) / x1
      + Phi(lambda + log(x1/x2) / (2 lambda)) / x2,
    with the complete-dependence limit max(1/x1, 1/x2) at lambda = 0.
    """
    if x1 <= 0 or x2 <= 0:
        raise ValueError("thresholds must be positive")
    if gamma_h < 0:
        raise ValueError("variogram value must be nonnegative")
    lam = math.sqrt(gamma_h) / 2.0
    if lam < _HR_LAMBDA_FLOOR:
        value = max(1.0 / x1, 1.0 / x2)
    else:
        log_ratio = math.log(x2 / x1)
        value = float(
            std_normal_cdf(lam + log_ratio / (2.0 * lam)) / x1
            + std_normal_cdf(lam - log_ratio / (2.0 * lam)) / x2
        )
    return ExponentValue(value, 0.0, "closed-bivariate")


def _closed_marginal(dist, kappa, query) -> ExponentValue:
    t = query.ts[0]
    value = math.exp(cgf(dist, t) - kappa(t)) / float(query.xs[0])
    return ExponentValue(value, 0.0, "closed-marginal")


def _closed_bivariate(dist, kappa, query) -> ExponentValue:
    if not hasattr(dist, "sigma") or dist.family != "gaussian":
        raise ValueError("closed bivariate exponent requires a gaussian spectral law")
    for t in query.ts:
        if abs(kappa(t) - cgf(dist, t)) > 1e-12:
            raise ValueError(
                "closed bivariate exponent requires kappa equal to the CGF "
                "at the query points"
            )
    h = query.ts[1] - query.ts[0]
    gamma_h = float(h @ dist.sigma @ h)
    return husler_reiss_V(gamma_h, float(query.xs[0]), float(query.xs[1]))


def fdd_cdf(
    dist: SpectralDistribution,
    kappa: ShapeFunction,
    query: FddQuery,
    method: str = "mc",
    rng=None,
    mc_n: int = 100_000,
) -> float:
    """exp(-V) with the exponent from the chosen method
    ({mc, closed-marginal, closed-bivariate})."""
    ev = fdd_exponent(dist, kappa, query, method, rng, mc_n)
    return math.exp(-ev.value)


def fdd_exponent(dist, kappa, query, method="mc", rng=None, mc_n=100_000) -> ExponentValue:
    if method == "mc":
        if rng is None:
            raise ValueError("mc method requires a generator")
        return exponent_mc(dist, kappa, query, mc_n, rng)
    if method == "closed-marginal":
        if query.n != 1:
            raise ValueError("closed marginal applies to one-point queries only")
        return _closed_marginal(dist, kappa, query)
    if method == "closed-bivariate":
        if query.n != 2:
            raise ValueError("closed bivariate applies to two-point queries only")
        return _closed_bivariate(dist, kappa, query)
    raise ValueError(f"unknown fdd method {method!r}")


# ---------------------------------------------------------------------------
# empirical CDFs and distances


def frechet_cdf(x) -> np.ndarray:
    """Unit Frechet CDF exp(-1/x) on (0, inf)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def frechet_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    return -1.0 / math.log(p)


def empirical_cdf(samples, x) -> float:
    """Right-continuous empirical CDF of >= 100 samples at x."""
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size < 100:
        raise ValueError("need at least 100 samples")
    return float(np.searchsorted(samples, x, side="right")) / samples.size


def ks_distance(samples, reference_cdf) -> float:
    """sup over sample points of |F_emp - F_ref| (both one-sided gaps)."""
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    ref = np.asarray(reference_cdf(samples), dtype=float)
    upper = np.arange(1, n + 1) / n - ref
    lower = ref - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


def ks_threshold(n: int, level: float = 0.01) -> float:
    """Asymptotic KS critical value; 1.628/sqrt(n) at the 1% level."""
    coeff = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628}.get(round(level, 2))
    if coeff is None:
        raise ValueError("supported levels: 0.10, 0.05, 0.01")
    return coeff / math.sqrt(n)


def bivariate_ecdf_distance(pairs_a, pairs_b, thresholds_x, thresholds_y=None) -> float:
    """sup over a threshold grid of |F_a(x, y) - F_b(x, y)| for two samples
    of bivariate observations (N, 2)."""
    a = np.asarray(pairs_a, dtype=float)
    b = np.asarray(pairs_b, dtype=float)
    tx = np.asarray(thresholds_x, dtype=float)
    ty = tx if thresholds_y is None else np.asarray(thresholds_y, dtype=float)
    worst = 0.0
    for x in tx:
        a1 = a[:, 0] <= x
        b1 = b[:, 0] <= x
        for y in ty:
            fa = float(np.mean(a1 & (a[:, 1] <= y)))
            fb = float(np.mean(b1 & (b[:, 1] <= y)))
            worst = max(worst, abs(fa - fb))
    return worst


def frechet_threshold_grid(levels=None) -> np.ndarray:
    """Frechet quantiles at probability levels 0.1 .. 0.9 (default)."""
    if levels is None:
        levels = np.arange(0.1, 0.95, 0.1)
    return np.array([frechet_quantile(float(p)) for p in levels])
