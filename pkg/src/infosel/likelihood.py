"""Naive Gaussian likelihood and the selection-aware full log-likelihood."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.spatial.distance import pdist

from infosel.covariogram import CovariogramModel, _as_locations, cov_matrix
from infosel.density_ratio import _check_J, log_integrands, ratio_estimate
from infosel.errors import InvalidArgument, NumericalFailure
from infosel.gaussian_field import GaussianSpec, mvn_logpdf
from infosel.variogram import VariogramFit

COINCIDENT_TOL = 1e-9


@dataclass(frozen=True)
class LikelihoodEvaluation:
    """``full = log_rho + naive + log_sample_density``."""

    naive: float
    log_rho: float
    log_rho_se: float
    log_sample_density: float
    log_sample_density_se: float
    full: float
    full_se: float
    replications: int


def naive_loglik(theta, x, y, mean=0.0, jitter=None):
    """Gaussian log-likelihood of ``y`` at ``x``, ignoring the selection.

    This is the usual ``-n/2 log 2 pi - 1/2 log|Sigma| - 1/2 r' Sigma^-1 r``,
    i.e. the quantity the naive estimator maximizes.
    """
    pts = _as_locations(x)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (pts.shape[0],):
        raise InvalidArgument("one value per location is required")
    if pts.shape[0] > 1 and pdist(pts).min() <= COINCIDENT_TOL:
        raise NumericalFailure("coincident locations make the covariance singular")
    return mvn_logpdf(y, mean, cov_matrix(theta, pts, jitter))


def naive_mle(x, y, family="gaussian", init=None, mean=0.0, restarts=3):
    """Maximize :func:`naive_loglik` over log-parameterized (theta1, theta2).

    ``objective`` in the returned fit is the minimized negative log-likelihood.
    """
    if family != "gaussian":
        raise InvalidArgument(f"unsupported family {family!r}")
    pts = _as_locations(x)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size < 3:
        raise InvalidArgument("naive_mle needs at least 3 observations")
    if pdist(pts).min() <= COINCIDENT_TOL:
        raise NumericalFailure("coincident locations make the covariance singular")
    d = pdist(pts)
    var = max(float(np.var(y)), 1e-12)
    bounds = [
        (math.log(var * 1e-6), math.log(var * 1e6)),
        (math.log(d.min() * 1e-3), math.log(d.max() * 1e3)),
    ]

    def nll(p):
        t1, t2 = np.exp(p)
        try:
            return -naive_loglik(CovariogramModel(t1, t2), pts, y, mean)
        except NumericalFailure:
            return 1e300

    defaults = [(var, float(np.median(d)) / 2), (var, float(d.max()) / 10), (var, float(np.median(d)))]
    starts = ([tuple(init)] if init is not None else []) + defaults[: max(int(restarts), 0)]
    starts = starts or defaults[:1]
    # scipy's fatol is absolute; the log-likelihood grows with n
    fatol = 1e-9 * y.size
    best = None
    iterations = 0
    for t1, t2 in starts:
        x0 = np.clip(np.log([t1, t2]), [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(
            nll, x0, method="Nelder-Mead", bounds=bounds,
            options={"xatol": 1e-7, "fatol": fatol, "maxiter": 2000},
        )
        iterations += res.nit
        if best is None or res.fun < best.fun:
            best = res
    on_edge = any(min(abs(v - lo), abs(v - hi)) < 1e-3 for v, (lo, hi) in zip(best.x, bounds))
    t1, t2 = np.exp(best.x)
    return VariogramFit(
        CovariogramModel(float(t1), float(t2)),
        float(best.fun),
        bool(best.success and not on_edge and best.fun < 1e300),
        iterations,
    )


def full_loglik(theta, xi, x, y, design, grid, J, seed, mean=0.0, workers=1):
    """Evaluate the three-term log-likelihood of an observed informative sample.

    ``x`` are the grid cells of the n draws and ``y`` the observed values.
    The density ratio and the marginal sample density share one Monte Carlo
    run: per replication the denominator summand is ``f_{S|Z}(x | z)`` and the
    numerator summand the same quantity under the conditioned signal.
    """
    _check_J(J)
    x = [int(i) for i in np.atleast_1d(x)]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if len(x) != y.size or not x:
        raise InvalidArgument("x and y must be nonempty and aligned")
    if design.family == "bpp" and design.n != len(x):
        raise InvalidArgument("bpp sample size does not match the number of draws")
    model = theta if isinstance(theta, CovariogramModel) else CovariogramModel(*theta)
    naive = naive_loglik(model, grid.points[x], y, mean)
    signal = GaussianSpec(model, mean)
    ((den, num),) = log_integrands(
        grid, signal, design, [xi], x, [tuple(y)], int(J), seed, workers=workers, full_sample=True
    )
    est = ratio_estimate(num[:, 0], den, exact=design.family == "bpp")
    log_rho = est.log_numerator - est.log_denominator
    full = log_rho + naive + est.log_denominator
    return LikelihoodEvaluation(
        naive=naive,
        log_rho=log_rho,
        log_rho_se=est.se_log_value,
        log_sample_density=est.log_denominator,
        log_sample_density_se=est.se_log_denominator,
        full=full,
        full_se=est.se_log_numerator,
        replications=int(J),
    )
