"""Method-of-moments variograms, WLS fitting and the naive-estimation bias study."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from infosel import rng
from infosel.covariogram import CovariogramModel, _as_locations
from infosel.design import DesignSpec, DesignVariableSpec, calibrate_xi0, draw_bpp, draw_ppp
from infosel.domain import Domain, Grid, make_grid
from infosel.errors import EmptyVariogramError, InvalidArgument
from infosel.gaussian_field import GaussianSpec, sampler_for

MAX_POPULATION_PAIRS = 2_000_000
_BLOCK = 512


@dataclass
class EmpiricalVariogram:
    """Binned semivariance; bins without pairs carry ``nan``."""

    bin_centers: np.ndarray
    tolerance: float
    counts: np.ndarray
    semivariance: np.ndarray
    se: np.ndarray | None = None
    zero_lag_count: int = 0

    @property
    def nonempty(self):
        return self.counts > 0


@dataclass
class VariogramFit:
    model: CovariogramModel
    objective: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list, repr=False)


def default_bins(points, n_bins=15):
    """Equal-width bins over (0, max_distance / 2] with half-width tolerance."""
    pts = _as_locations(points)
    if pts.shape[0] <= 5000:
        diff = pts[:, None, :] - pts[None, :, :]
        dmax = float(np.sqrt((diff**2).sum(-1)).max())
    else:
        dmax = float(np.sqrt(((pts.max(0) - pts.min(0)) ** 2).sum()))
    width = 0.5 * dmax / n_bins
    if width <= 0:
        raise InvalidArgument("points do not span a positive distance")
    return (np.arange(n_bins) + 0.5) * width, width / 2


def _check_bins(centers, tolerance):
    centers = np.asarray(centers, dtype=float)
    if tolerance <= 0:
        raise InvalidArgument("tolerance must be > 0")
    if centers.ndim != 1 or centers.size == 0:
        raise InvalidArgument("need at least one bin center")
    if np.any(np.diff(centers) < 2 * tolerance * (1 - 1e-12)):
        raise InvalidArgument("bins overlap: centers closer than twice the tolerance")
    return centers


def _bin_index(d, centers, tolerance):
    lo = centers - tolerance
    idx = np.searchsorted(lo, d, side="right") - 1
    ok = (idx >= 0) & (d > 0)
    ok[ok] &= d[ok] <= centers[idx[ok]] + tolerance
    return idx, ok


def _pair_sums(points, values, centers, tolerance, stride=1):
    """Per-bin pair counts and sums of squared differences over i < j."""
    n = points.shape[0]
    nb = centers.size
    counts = np.zeros(nb, dtype=np.int64)
    sums = np.zeros(nb)
    zero = 0
    for i0 in range(0, n, _BLOCK):
        i1 = min(n, i0 + _BLOCK)
        P = points[i0:i1]
        d = np.sqrt(((P[:, None, :] - points[None, i0:, :]) ** 2).sum(-1))
        sq = (values[i0:i1, None] - values[None, i0:]) ** 2
        ii = np.arange(i0, i1)[:, None]
        jj = np.arange(i0, n)[None, :]
        keep = jj > ii
        if stride > 1:
            keep &= (jj - ii) % stride == ii % stride
        d, sq = d[keep], sq[keep]
        zero += int(np.count_nonzero(d == 0))
        idx, ok = _bin_index(d, centers, tolerance)
        counts += np.bincount(idx[ok], minlength=nb)
        sums += np.bincount(idx[ok], weights=sq[ok], minlength=nb)
    return counts, sums, zero


def variogram_from_points(points, values, centers=None, tolerance=None, stride=1):
    pts = _as_locations(points)
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != pts.shape[0]:
        raise InvalidArgument("one value per location is required")
    if values.size < 2:
        raise InvalidArgument("need at least two observations")
    if centers is None:
        centers, tolerance = default_bins(pts)
    centers = _check_bins(centers, tolerance)
    counts, sums, zero = _pair_sums(pts, values, centers, tolerance, stride)
    if not counts.any():
        raise EmptyVariogramError("no pair falls in any distance bin")
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, 0.5 * sums / counts, np.nan)
    return EmpiricalVariogram(centers, float(tolerance), counts, gamma, zero_lag_count=zero)


def empirical_variogram(sample, grid, centers=None, tolerance=None):
    """Matheron estimator from a sample of grid draws with observed values.

    ``gamma(h) = mean of (Y[S_i] - Y[S_j])**2 / 2`` over unordered pairs of
    draws whose distance lies in ``[h - tolerance, h + tolerance]``. Pairs of
    repeated draws (distance 0) are only counted in ``zero_lag_count``.
    """
    if sample.values is None:
        raise InvalidArgument("sample has no observed values")
    if sample.size < 2:
        raise InvalidArgument("need a sample of size >= 2")
    return variogram_from_points(grid.points[sample.draws], sample.values, centers, tolerance)


def population_variogram(field, centers=None, tolerance=None, max_pairs=MAX_POPULATION_PAIRS):
    """Variogram from every grid value, systematically thinned above ``max_pairs``."""
    pts = field.points
    n = pts.shape[0]
    total = n * (n - 1) // 2
    stride = max(1, math.ceil(total / max_pairs)) if n > 128**2 else 1
    return variogram_from_points(pts, field.values, centers, tolerance, stride)


def gaussian_semivariogram(theta1, theta2, h):
    return theta1 * (1.0 - np.exp(-((np.asarray(h) / theta2) ** 2)))


def _wls_objective(log_theta, h, gamma, counts, weights):
    t1, t2 = np.exp(log_theta)
    model = gaussian_semivariogram(t1, t2, h)
    if weights == "cressie":
        with np.errstate(divide="ignore", invalid="ignore"):
            r = gamma / model - 1.0
        val = float(np.sum(counts * r * r))
    else:
        val = float(np.sum(counts * (gamma - model) ** 2))
    return val if math.isfinite(val) else 1e300


def wls_fit(empirical, family="gaussian", init=None, weights="cressie", restarts=3):
    """Weighted least squares fit of a Gaussian semivariogram to binned values.

    Cressie weights minimize ``sum_l N_l (gamma_l / gamma(h_l) - 1)**2``;
    ``weights="counts"`` minimizes ``sum_l N_l (gamma_l - gamma(h_l))**2``.
    Nelder-Mead runs on ``log(theta)`` inside a box; a solution on the box
    edge or a failed optimizer run is reported with ``converged=False``.
    """
    if family != "gaussian":
        raise InvalidArgument(f"unsupported family {family!r}")
    if weights not in ("cressie", "counts"):
        raise InvalidArgument("weights must be 'cressie' or 'counts'")
    ok = empirical.nonempty & np.isfinite(empirical.semivariance)
    if ok.sum() < 2:
        raise InvalidArgument("need at least two nonempty bins")
    h = empirical.bin_centers[ok]
    g = empirical.semivariance[ok]
    n = empirical.counts[ok].astype(float)
    gmax = float(g.max())
    hmax = float(h.max())
    if gmax <= 0:
        return VariogramFit(CovariogramModel(1e-300 if gmax == 0 else 1.0, hmax), 0.0, False, 0)
    bounds = [
        (math.log(gmax * 1e-8), math.log(gmax * 1e8)),
        (math.log(hmax * 1e-6), math.log(hmax * 1e3)),
    ]
    starts = [init] if init is not None else []
    tail = float(np.median(g[len(g) // 2 :]))
    starts += [(gmax, hmax / 3), (tail, hmax / 10), (float(g.mean()), hmax)][: max(restarts, 1)]
    args = (h, g, n, weights)
    # fatol is absolute in scipy; scale it so it stays above rounding noise
    scale = max(1.0, float(n.sum()))
    best = None
    for t1, t2 in starts:
        x0 = np.clip(np.log([t1, t2]), [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(
            _wls_objective, x0, args=args, method="Nelder-Mead", bounds=bounds,
            options={"xatol": 1e-9, "fatol": 1e-12 * scale, "maxiter": 4000},
        )
        if best is None or res.fun < best.fun:
            best = res
    history = []
    polish = optimize.minimize(
        _wls_objective, best.x, args=args, method="Nelder-Mead", bounds=bounds,
        callback=lambda xk: history.append(_wls_objective(xk, *args)),
        options={"xatol": 1e-11, "fatol": 1e-14 * scale, "maxiter": 4000},
    )
    res = polish if polish.fun <= best.fun else best
    on_edge = any(
        min(abs(v - lo), abs(v - hi)) < 1e-3 for v, (lo, hi) in zip(res.x, bounds)
    )
    t1, t2 = np.exp(res.x)
    return VariogramFit(
        CovariogramModel(float(t1), float(t2)),
        float(res.fun),
        bool(polish.success and not on_edge),
        int(best.nit + polish.nit),
        history,
    )


def _ratio_se(sums, counts):
    """Pooled ratio per bin and its linearization standard error over replications.

    ``sums``, ``counts``: arrays of shape (M, bins).
    """
    S = sums.sum(0)
    C = counts.sum(0)
    M = sums.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        R = np.where(C > 0, S / C, np.nan)
        resid = sums - R * counts
        se = np.sqrt(M / max(M - 1, 1) * (resid**2).sum(0)) / C
    return R, np.where(C > 0, se, np.nan)


def sample_semivariogram_mc(signal, design, grid, centers=None, tolerance=None, M=100, seed=0):
    """Monte Carlo sample semivariogram under an (informative) design.

    Each replication draws Y, eps, z and a sample, and adds half the squared
    differences of every pair of draws to its distance bin. Random-size
    designs only contribute through replications with at least two draws.
    The pooled ratio estimates the lag-conditioned expectation; ``se`` comes
    from the replication-level linearization.
    """
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    if centers is None:
        centers, tolerance = default_bins(grid)
    centers = _check_bins(centers, tolerance)
    xi = design.design_variable
    ys = sampler_for(signal, grid)
    es = sampler_for(xi.noise_spec, grid)
    sums = np.zeros((M, centers.size))
    counts = np.zeros((M, centers.size))
    for r in range(M):
        y = ys.batch(seed, "signal", r, 1)[0]
        e = es.batch(seed, "noise", r, 1)[0]
        z = np.exp(xi.xi0 + xi.xi1 * y + xi.xi2 * e)
        s = draw_bpp(z, design.n, seed, r) if design.family == "bpp" else draw_ppp(z, seed, r)
        if s.size < 2:
            continue
        c, sm, _ = _pair_sums(grid.points[s.draws], y[s.draws], centers, tolerance)
        counts[r] = c
        sums[r] = 0.5 * sm
    if not counts.any():
        raise EmptyVariogramError("no pair accumulated in any bin")
    R, se = _ratio_se(sums, counts)
    return EmpiricalVariogram(centers, float(tolerance), counts.sum(0).astype(np.int64), R, se)


# ---------------------------------------------------------------- bias study

@dataclass(frozen=True)
class StudyDesign:
    """A bpp design named in reports; ``xi1 = xi2 = 0`` gives bpp(1, n)."""

    name: str
    xi1: float = 0.0
    xi2: float = 0.0


DEFAULT_STUDY_DESIGNS = (
    StudyDesign("bpp(1,n)", 0.0, 0.0),
    StudyDesign("bpp(z1,n)", 0.0, 0.5),
    StudyDesign("bpp(z2,n)", 0.4, 0.3),
)


@dataclass(frozen=True)
class BiasStudyConfig:
    resolution: int = 64
    theta1: float = 5.0
    theta2: float = 0.1
    n: int = 100
    M: int = 200
    designs: tuple = DEFAULT_STUDY_DESIGNS
    eps_deviation: float = 1.0
    eps_scale: float = 0.1
    target_intensity: float = 10.0
    n_bins: int = 15
    field_mode: str = "fixed"
    weights: str = "cressie"
    hist_bins: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.field_mode not in ("fixed", "resampled"):
            raise InvalidArgument("field_mode must be 'fixed' or 'resampled'")


@dataclass
class DesignSummary:
    name: str
    xi: DesignVariableSpec
    fitted: np.ndarray          # (M, bins) fitted semivariogram at bin centers
    empirical: np.ndarray       # (M, bins) method-of-moments values, nan if empty
    reference_fitted: np.ndarray  # (M, bins) population fitted curve per replication
    reference_empirical: np.ndarray
    converged: np.ndarray
    sample_values: np.ndarray   # (M, n)
    correlation: float
    counts: np.ndarray = None   # (M, bins) pair counts per replication
    sums: np.ndarray = None     # (M, bins) sums of squared differences
    pooled_fitted: np.ndarray = None     # WLS fit of the replication-pooled estimate
    pooled_reference: np.ndarray = None  # WLS fit of the pooled population variogram
    pooled_se: np.ndarray = None         # jackknife SE of the pooled difference

    def _diff(self, a, b):
        d = a - b
        m = np.nanmean(d, axis=0)
        k = np.sum(np.isfinite(d), axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            se = np.nanstd(d, axis=0, ddof=1) / np.sqrt(k)
        return m, se

    @property
    def mean_fitted(self):
        return self.fitted.mean(axis=0)

    @property
    def fitted_deviation(self):
        """Mean and SE of (fitted sample curve - population variogram) per bin."""
        return self._diff(self.fitted, self.reference_fitted)

    @property
    def empirical_deviation(self):
        return self._diff(self.empirical, self.reference_empirical)

    def z_scores(self, kind="pooled"):
        """Standardized deviation from the population variogram per bin.

        ``"pooled"`` compares the fit of the mean sample variogram with the
        population fit (jackknife SE over replications); ``"fitted"`` averages
        per-replication fits; ``"empirical"`` uses the unfitted estimates.
        """
        if kind == "pooled":
            m, se = self.pooled_fitted - self.pooled_reference, self.pooled_se
        elif kind == "fitted":
            m, se = self.fitted_deviation
        elif kind == "empirical":
            m, se = self.empirical_deviation
        else:
            raise InvalidArgument(f"unknown kind {kind!r}")
        with np.errstate(invalid="ignore", divide="ignore"):
            return m / se


@dataclass
class BiasStudyReport:
    config: BiasStudyConfig
    bin_centers: np.ndarray
    tolerance: float
    population_empirical: np.ndarray
    population_fitted: np.ndarray
    population_values: np.ndarray
    designs: list


def _pooled_curve(sums, counts, centers, tolerance, weights):
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(counts > 0, 0.5 * sums / counts, np.nan)
    fit = wls_fit(EmpiricalVariogram(centers, tolerance, counts, g), weights=weights)
    return gaussian_semivariogram(fit.model.deviation, fit.model.scale, centers)


def pooled_fit_deviation(sums, counts, ref_sums, ref_counts, centers, tolerance, weights="cressie"):
    """Fit of the pooled sample variogram minus the pooled population fit.

    Inputs are per-replication ``(M, bins)`` arrays; the standard error is the
    delete-one-replication jackknife of the difference.
    """
    def diff(S, C, RS, RC):
        return (
            _pooled_curve(S, C, centers, tolerance, weights),
            _pooled_curve(RS, RC, centers, tolerance, weights),
        )

    tot = sums.sum(0), counts.sum(0), ref_sums.sum(0), ref_counts.sum(0)
    fitted, ref = diff(*tot)
    M = sums.shape[0]
    jk = np.empty((M, centers.size))
    for i in range(M):
        a, b = diff(tot[0] - sums[i], tot[1] - counts[i], tot[2] - ref_sums[i], tot[3] - ref_counts[i])
        jk[i] = a - b
    se = np.sqrt((M - 1) / M * ((jk - jk.mean(0)) ** 2).sum(0))
    return fitted, ref, se


def naive_bias_study(config):
    """Naive variogram estimation under bpp(1, n) and informative bpp(z, n).

    ``field_mode="fixed"`` keeps one signal realization (the population) and
    redraws the design variable noise and the sample in each replication;
    ``"resampled"`` also redraws the signal and compares each replication with
    its own population variogram.
    """
    cfg = config
    grid = make_grid(Domain(2), cfg.resolution)
    signal = GaussianSpec(CovariogramModel(cfg.theta1, cfg.theta2))
    centers, tol = default_bins(grid, cfg.n_bins)
    ys = sampler_for(signal, grid)
    noise = GaussianSpec(CovariogramModel(cfg.eps_deviation, cfg.eps_scale))
    es = sampler_for(noise, grid)
    pts = grid.points

    def population(y):
        emp = variogram_from_points(pts, y, centers, tol)
        fit = wls_fit(emp, weights=cfg.weights)
        curve = gaussian_semivariogram(fit.model.deviation, fit.model.scale, centers)
        return emp.semivariance, curve, emp.counts

    fixed_y = ys.batch(cfg.seed, "population", 0, 1)[0]
    pop_emp, pop_fit, pop_counts = population(fixed_y)
    M, nb = cfg.M, centers.size
    if cfg.field_mode == "fixed":
        ref = [(fixed_y, pop_emp, pop_fit, pop_counts)] * M
    else:
        ref = []
        for r in range(M):
            y = ys.batch(cfg.seed, "signal", r, 1)[0]
            ref.append((y, *population(y)))

    ref_counts = np.stack([r[3] for r in ref]).astype(float)
    ref_sums = np.nan_to_num(2.0 * np.stack([r[1] for r in ref]) * ref_counts)
    summaries = []
    for d in cfg.designs:
        xi0 = calibrate_xi0(d.xi1, d.xi2, cfg.theta1, cfg.eps_deviation, cfg.target_intensity)
        xi = DesignVariableSpec(xi0, d.xi1, d.xi2, cfg.eps_deviation, cfg.eps_scale)
        fitted = np.empty((M, nb))
        emp = np.empty((M, nb))
        conv = np.empty(M, dtype=bool)
        values = np.empty((M, cfg.n))
        counts = np.zeros((M, nb), dtype=np.int64)
        sums = np.zeros((M, nb))
        cors = np.empty(M)
        for r in range(M):
            y = ref[r][0]
            e = es.batch(cfg.seed, "noise", r, 1)[0]
            z = np.exp(xi0 + d.xi1 * y + d.xi2 * e)
            cors[r] = np.corrcoef(y, z)[0, 1] if np.ptp(z) > 0 else 0.0
            s = draw_bpp(z, cfg.n, cfg.seed, r)
            v = variogram_from_points(pts[s.draws], y[s.draws], centers, tol)
            fit = wls_fit(v, weights=cfg.weights)
            fitted[r] = gaussian_semivariogram(fit.model.deviation, fit.model.scale, centers)
            emp[r] = v.semivariance
            counts[r] = v.counts
            sums[r] = np.where(v.counts > 0, 2.0 * v.semivariance * v.counts, 0.0)
            conv[r] = fit.converged
            values[r] = y[s.draws]
        pf, pr, pse = pooled_fit_deviation(sums, counts, ref_sums, ref_counts, centers, tol, cfg.weights)
        summaries.append(
            DesignSummary(
                d.name, xi, fitted, emp,
                np.stack([ref[r][2] for r in range(M)]),
                np.stack([ref[r][1] for r in range(M)]),
                conv, values, float(np.mean(cors)), counts, sums, pf, pr, pse,
            )
        )
    return BiasStudyReport(cfg, centers, tol, pop_emp, pop_fit, fixed_y, summaries)
