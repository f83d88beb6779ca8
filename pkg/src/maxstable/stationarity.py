"""Stationarity analysis of the general max-stable construction.

The process max_i U_i exp(<X_i, t> - kappa(t)) is stationary exactly when
the centered multivariate CGF is shift invariant:

    phi(sum u_i t_i) - sum u_i phi(t_i)
        = phi(h + sum u_i t_i) - sum u_i phi(t_i + h)

for every shift h and simplex weights u.  This module evaluates the
defect (the difference of the two sides), tests the equivalent affinity
of the CGF gradient, searches for violations, fits quadratics to phi,
and runs the end-to-end characterization experiment: marginals are
Frechet for any spectral law once kappa is its CGF, but the defect
vanishes identically only for Gaussian laws (quadratic phi).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import fdd
from .seeding import spawn
from .simulator import Grid, simulate_general
from .spectral import (
    DomainError,
    ShapeFunction,
    SimplexWeights,
    SpectralDistribution,
    cgf,
    cgf_gradient,
    cgf_multi,
)

TOL_DEFECT = 1e-6  # separates round-off (<=1e-10 gaussian) from genuine violations (>=1e-3)
_GRID_VALUES_PER_SCALAR = 5
_GRID_CAP = 20_000


@dataclass(frozen=True)
class CriterionConfig:
    """One probe of the shift-invariance criterion: points, weights, shift."""

    ts: np.ndarray
    weights: SimplexWeights
    h: np.ndarray

    def __init__(self, ts, weights, h):
        ts = np.atleast_2d(np.asarray(ts, dtype=float))
        if not isinstance(weights, SimplexWeights):
            weights = SimplexWeights(weights)
        h = np.atleast_1d(np.asarray(h, dtype=float))
        if len(weights) != ts.shape[0]:
            raise ValueError("weights must match the number of points")
        if h.shape[0] != ts.shape[1]:
            raise ValueError("shift dimension must match the points")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "h", h)

    def validate_domain(self, dist: SpectralDistribution):
        """All of ts, ts + h, sum u_i t_i and its shift must be inside."""
        combo = self.weights.u @ self.ts
        dist.check_domain(np.vstack([self.ts, self.ts + self.h, [combo, combo + self.h]]))

    def to_dict(self) -> dict:
        return {
            "ts": self.ts.tolist(),
            "u": self.weights.u.tolist(),
            "h": self.h.tolist(),
        }


def defect(dist: SpectralDistribution, cfg: CriterionConfig) -> float:
    """Difference of the two sides of the shift-invariance criterion;
    zero for all configs iff the construction is stationary."""
    cfg.validate_domain(dist)
    base = cgf_multi(dist, cfg.ts, cfg.weights)
    shifted = cgf_multi(dist, cfg.ts + cfg.h, cfg.weights)
    return base - shifted


def gradient_affinity_defect(dist, t1, t2, delta: float, h_dir) -> float:
    """Directional defect of gradient affinity:
    <grad phi((1-d)t1 + d t2) - (1-d) grad phi(t1) - d grad phi(t2), h_dir>.

    Vanishes for all inputs iff grad phi is affine (phi quadratic).
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    h_dir = np.atleast_1d(np.asarray(h_dir, dtype=float))
    mid = (1.0 - delta) * t1 + delta * t2
    gap = (
        cgf_gradient(dist, mid)
        - (1.0 - delta) * cgf_gradient(dist, t1)
        - delta * cgf_gradient(dist, t2)
    )
    return float(gap @ h_dir)


@dataclass(frozen=True)
class DefectReport:
    """Outcome of a violation search over many criterion configs."""

    defects: np.ndarray
    max_abs_defect: float
    argmax_config: CriterionConfig | None
    verdict: str
    tol: float
    n_evaluated: int
    n_skipped: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_abs_defect": self.max_abs_defect,
            "argmax_config": self.argmax_config.to_dict() if self.argmax_config else None,
            "tol": self.tol,
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
        }


def _simplex_grid(n: int) -> list:
    """Coarse simplex grid: weights with entries in multiples of 1/4."""
    steps = _GRID_VALUES_PER_SCALAR - 1
    out = []
    for combo in itertools.product(range(steps + 1), repeat=n):
        if sum(combo) == steps:
            out.append(np.array(combo, dtype=float) / steps)
    return out


def _coarse_grid_configs(n: int, box: np.ndarray):
    """Deterministic coarse grid: 5 values per free scalar of (ts, h),
    crossed with the coarse simplex grid, capped by stride subsampling."""
    d = box.shape[0]
    axis = [np.linspace(box[j, 0], box[j, 1], _GRID_VALUES_PER_SCALAR) for j in range(d)]
    u_grid = _simplex_grid(n)
    n_scalars = n * d + d
    total = (_GRID_VALUES_PER_SCALAR**n_scalars) * len(u_grid)
    stride = max(1, total // _GRID_CAP)
    idx = 0
    scalar_axes = [axis[j % d] for j in range(n_scalars)]
    for values in itertools.product(*scalar_axes):
        ts = np.array(values[: n * d]).reshape(n, d)
        h = np.array(values[n * d :])
        for u in u_grid:
            if idx % stride == 0:
                yield CriterionConfig(ts, u, h)
            idx += 1


def search_violation(
    dist: SpectralDistribution,
    n: int,
    budget: int,
    box,
    rng,
    tol_defect: float = TOL_DEFECT,
) -> DefectReport:
    """Probe the criterion on a deterministic coarse grid plus ``budget``
    random configs (ts, h uniform in the box, u uniform on the simplex).

    The verdict is "violated" iff max |defect| > tol_defect.  Configs
    whose shifted points leave the CGF domain are skipped.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    if box.shape[0] != dist.dim:
        raise ValueError("box dimension must match the distribution")
    if np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must have positive widths")
    # the box itself must be feasible for the CGF
    dist.check_domain(box.T)

    configs = list(_coarse_grid_configs(n, box))
    for _ in range(budget):
        ts = np.asarray(rng.uniform(box[:, 0], box[:, 1], size=(n, dist.dim)))
        h = np.asarray(rng.uniform(box[:, 0], box[:, 1], size=dist.dim))
        u = np.asarray(rng.dirichlet(np.ones(n)))
        configs.append(CriterionConfig(ts, u, h))

    defects = []
    kept = []
    skipped = 0
    for cfg in configs:
        try:
            defects.append(defect(dist, cfg))
            kept.append(cfg)
        except DomainError:
            skipped += 1
    if not kept:
        raise DomainError("no feasible criterion configs inside the box")
    defects = np.array(defects)
    # lowest index wins ties: np.argmax keeps the first maximum
    arg = int(np.argmax(np.abs(defects)))
    max_abs = float(abs(defects[arg]))
    verdict = "violated" if max_abs > tol_defect else "stationary-consistent"
    return DefectReport(defects, max_abs, kept[arg], verdict, tol_defect, len(kept), skipped)


# ---------------------------------------------------------------------------
# quadratic fit


@dataclass(frozen=True)
class QuadraticFitReport:
    mu: np.ndarray
    sigma: np.ndarray
    max_residual: float


def quadratic_fit_check(dist: SpectralDistribution, points) -> QuadraticFitReport:
    """Least-squares fit of phi by <mu, t> + 0.5 <t, Sigma t> (no constant:
    phi(0) = 0).  For gaussian input the fit is exact to round-off."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = dist.dim
    n_params = d + d * (d + 1) // 2
    if pts.shape[0] < (d * d + 3 * d + 2) // 2:
        raise ValueError(
            f"need at least {(d * d + 3 * d + 2) // 2} sample points in dimension {d}"
        )
    dist.check_domain(pts)
    phi = np.asarray(dist.cgf(pts), dtype=float)
    cols = [pts[:, j] for j in range(d)]
    quad_index = []
    for a in range(d):
        for b in range(a, d):
            cols.append(pts[:, a] * pts[:, b])
            quad_index.append((a, b))
    design = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(design, phi, rcond=None)
    if rank < n_params:
        raise ValueError("sample points are not in general position (rank-deficient fit)")
    mu = coef[:d]
    sigma = np.zeros((d, d))
    for (a, b), beta in zip(quad_index, coef[d:]):
        if a == b:
            sigma[a, a] = 2.0 * beta
        else:
            sigma[a, b] = sigma[b, a] = beta
    max_residual = float(np.abs(design @ coef - phi).max())
    return QuadraticFitReport(mu, sigma, max_residual)


# ---------------------------------------------------------------------------
# characterization experiment


@dataclass(frozen=True)
class CharacterizationReport:
    dist_spec: str
    verdict: str
    marginal_ks: list
    marginals_pass: bool
    defect_report: DefectReport
    shift_distance: float
    replicates: int

    def to_dict(self) -> dict:
        return {
            "dist": self.dist_spec,
            "verdict": self.verdict,
            "marginals_pass": self.marginals_pass,
            "marginal_ks": self.marginal_ks,
            "defect": self.defect_report.to_dict(),
            "shift_distance": self.shift_distance,
            "replicates": self.replicates,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def default_shift(dist: SpectralDistribution, grid: Grid) -> np.ndarray:
    """A shift keeping the grid inside the CGF domain: half the headroom
    to a bounded boundary, 0.7 per coordinate otherwise."""
    upper = dist.domain_upper()
    t_max = grid.locations.max(axis=0)
    h = np.empty(dist.dim)
    for j in range(dist.dim):
        h[j] = 0.7 if math.isinf(upper[j]) else 0.5 * (upper[j] - t_max[j])
    if np.any(h <= 0):
        raise DomainError("grid leaves no headroom for a domain-respecting shift")
    return h


def marginal_frechet_ks(
    dist: SpectralDistribution,
    grid: Grid,
    replicates: int,
    rng,
    n_points: int = 10_000,
    level: float = 0.01,
    threads: int = 1,
) -> list:
    """KS distance of simulated marginals against unit Frechet at each grid
    point, with kappa equal to the CGF of the spectral law."""
    kappa = ShapeFunction.from_cgf(dist)
    values = np.empty((replicates, grid.size))
    children = spawn(rng, replicates)
    jobs = ((rep, children[rep]) for rep in range(replicates))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        def job(item):
            rep, child = item
            return rep, simulate_general(dist, kappa, grid, n_points, child).values

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rep, vals in pool.map(job, jobs):
                values[rep] = vals
    else:
        for rep, child in jobs:
            values[rep] = simulate_general(dist, kappa, grid, n_points, child).values
    threshold = fdd.ks_threshold(replicates, level)
    table = []
    for j in range(grid.size):
        ks = fdd.ks_distance(values[:, j], fdd.frechet_cdf)
        table.append(
            {
                "t": grid.locations[j].tolist(),
                "ks": ks,
                "threshold": threshold,
                "pass": bool(ks < threshold),
            }
        )
    return table


def empirical_shift_distance(
    dist: SpectralDistribution,
    t1,
    t2,
    h,
    replicates: int,
    rng,
    n_points: int = 10_000,
    threads: int = 1,
) -> float:
    """Two-sample sup distance between the bivariate empirical CDFs at
    (t1, t2) and (t1 + h, t2 + h), over the Frechet-quantile threshold grid."""
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    kappa = ShapeFunction.from_cgf(dist)
    # the four query points may coincide (e.g. t2 = t1 + h); simulate on the
    # distinct locations and index back into them
    wanted = np.vstack([t1, t2, t1 + h, t2 + h])
    uniq: list = []
    index = []
    for p in wanted:
        for k, q in enumerate(uniq):
            if np.linalg.norm(p - q) <= 1e-12:
                index.append(k)
                break
        else:
            index.append(len(uniq))
            uniq.append(p)
    grid = Grid(np.array(uniq))
    index = np.array(index)
    pairs = np.empty((replicates, 4))
    children = spawn(rng, replicates)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        def job(rep):
            return rep, simulate_general(dist, kappa, grid, n_points, children[rep]).values

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for rep, vals in pool.map(job, range(replicates)):
                pairs[rep] = vals[index]
    else:
        for rep in range(replicates):
            vals = simulate_general(dist, kappa, grid, n_points, children[rep]).values
            pairs[rep] = vals[index]
    thresholds = fdd.frechet_threshold_grid()
    return fdd.bivariate_ecdf_distance(pairs[:, :2], pairs[:, 2:], thresholds)


def verify_characterization(
    dist: SpectralDistribution,
    grid: Grid,
    replicates: int,
    rng,
    *,
    n_points: int = 10_000,
    budget: int = 1000,
    box=None,
    shift=None,
    threads: int = 1,
) -> CharacterizationReport:
    """End-to-end experiment with kappa set to the CGF of the spectral law:
    (a) simulated marginals vs unit Frechet at every grid point, (b) the
    analytic defect search, (c) the empirical bivariate shift comparison.

    Concludes "Gaussian-consistent" when the defect search finds nothing,
    "non-stationary in dimension 2" otherwise (marginals are Frechet
    either way).
    """
    if grid.size < 2:
        raise ValueError("characterization needs at least two grid points")
    grid.validate_domain(dist)
    if box is None:
        lo = grid.locations.min(axis=0)
        hi = grid.locations.max(axis=0)
        width = np.where(hi - lo > 0, hi - lo, 1.0)
        box = np.column_stack([lo, np.where(hi > lo, hi, lo + 0.5 * width)])
    if shift is None:
        shift = default_shift(dist, grid)

    marg = marginal_frechet_ks(dist, grid, replicates, rng, n_points, threads=threads)
    report = search_violation(dist, 2, budget, box, rng)
    t1, t2 = grid.locations[0], grid.locations[1]
    shift_dist = empirical_shift_distance(
        dist, t1, t2, shift, replicates, rng, n_points, threads=threads
    )
    verdict = (
        "Gaussian-consistent"
        if report.verdict == "stationary-consistent"
        else "non-stationary in dimension 2"
    )
    return CharacterizationReport(
        dist.spec_string(),
        verdict,
        marg,
        all(row["pass"] for row in marg),
        report,
        shift_dist,
        replicates,
    )
