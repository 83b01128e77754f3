"""Gaussian process simulation, densities and conditioning."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from infosel import rng
from infosel.covariogram import CovariogramModel, _as_locations, cov_matrix, cross_cov
from infosel.domain import Grid
from infosel.errors import InvalidArgument, NumericalFailure

MAX_JITTER = 1e-6  # relative to the deviation parameter


@dataclass(frozen=True)
class GaussianSpec:
    """Constant-mean isotropic Gaussian process."""

    model: CovariogramModel = field(default_factory=CovariogramModel)
    mean: float = 0.0


@dataclass
class FieldRealization:
    """Values of a process on a Grid or on an explicit (n, d) location array."""

    locations: object
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = self.locations.size if isinstance(self.locations, Grid) else len(self.locations)
        if self.values.shape != (n,):
            raise InvalidArgument(f"expected {n} values, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("field values must be finite")

    @property
    def points(self):
        return _as_locations(self.locations)


def cholesky_with_jitter(K, deviation, jitter):
    """Lower Cholesky factor of ``K + j I``, escalating j tenfold on failure.

    Returns ``(L, j)``; gives up once j would exceed ``1e-6 * deviation``.
    """
    j = float(jitter)
    limit = MAX_JITTER * deviation
    while True:
        try:
            A = K.copy()
            A[np.diag_indices_from(A)] += j
            return linalg.cholesky(A, lower=True, check_finite=False), j
        except linalg.LinAlgError:
            if j >= limit:
                raise NumericalFailure(
                    f"covariance not positive definite with jitter {j:.3g}"
                ) from None
            j = min(max(j * 10.0, 1e-12 * deviation), limit)


class FieldSampler:
    """Maps standard normal rows to realizations of a Gaussian process.

    On a :class:`Grid` the Gaussian covariogram is separable, so the
    covariance is a Kronecker product of per-axis matrices. The exact square
    root of ``cov_matrix + jitter * I`` is then available from the per-axis
    eigendecompositions. Other location sets use a jittered Cholesky factor.
    """

    def __init__(self, spec, locations, jitter=None):
        self.spec = spec
        self.locations = locations
        model = spec.model
        self.jitter = model.default_jitter if jitter is None else float(jitter)
        if isinstance(locations, Grid) and model.family == "gaussian":
            r = locations.axis
            R1 = model.correlation(np.abs(r[:, None] - r[None, :]))
            lam, Q = np.linalg.eigh(R1)
            lam = np.clip(lam, 0.0, None)
            eig = model.deviation
            for _ in range(locations.dim):
                eig = np.multiply.outer(eig, lam) if np.ndim(eig) else eig * lam
            self._Q = Q
            self._scale = np.sqrt(np.asarray(eig) + self.jitter).ravel()
            self._shape = locations.shape
            self._L = None
            self.size = locations.size
        else:
            pts = _as_locations(locations)
            K = cov_matrix(model, pts, jitter=0.0)
            self._L, self.jitter = cholesky_with_jitter(K, model.deviation, self.jitter)
            self.size = pts.shape[0]

    def transform(self, normals):
        """Correlate rows of i.i.d. standard normals, shape (B, n) -> (B, n)."""
        W = np.atleast_2d(np.asarray(normals, dtype=float))
        if self._L is not None:
            return self.spec.mean + W @ self._L.T
        B = W.shape[0]
        V = (W * self._scale).reshape((B,) + self._shape)
        for ax in range(1, V.ndim):
            V = np.moveaxis(np.tensordot(V, self._Q, axes=([ax], [1])), -1, ax)
        return self.spec.mean + V.reshape(B, -1)

    def batch(self, seed, tag, start, count):
        """Realizations for replications ``start .. start+count-1`` of a stream."""
        return self.transform(rng.standard_normals(seed, tag, start, count, self.size))


@lru_cache(maxsize=32)
def _cached_sampler(spec, grid, jitter):
    return FieldSampler(spec, grid, jitter)


def sampler_for(spec, locations, jitter=None):
    if isinstance(locations, Grid):
        return _cached_sampler(spec, locations, jitter)
    return FieldSampler(spec, locations, jitter)


def simulate(spec, locations, seed, jitter=None, tag="field"):
    """One realization at ``locations``, reproducible from ``seed``."""
    n = locations.size if isinstance(locations, Grid) else len(_as_locations(locations))
    if n < 1:
        raise InvalidArgument("need at least one location")
    values = sampler_for(spec, locations, jitter).batch(seed, tag, 0, 1)[0]
    return FieldRealization(locations, values)


def mvn_logpdf(y, mean, cov):
    """Log density of N(mean, cov) at y, via a Cholesky factor."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    mean = np.broadcast_to(np.asarray(mean, dtype=float), y.shape)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = y.shape[0]
    if cov.shape != (n, n):
        raise InvalidArgument(f"covariance shape {cov.shape} does not match n={n}")
    try:
        L = linalg.cholesky(cov, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"covariance is not positive definite: {exc}") from None
    z = linalg.solve_triangular(L, y - mean, lower=True)
    return float(-0.5 * n * np.log(2 * np.pi) - np.log(np.diag(L)).sum() - 0.5 * z @ z)


def _check_distinct(pts):
    if pts.shape[0] > 1:
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        d[np.diag_indices_from(d)] = np.inf
        if d.min() == 0.0:
            raise InvalidArgument("conditioning locations must be distinct")


def _factor_conditioners(model, xpts, jitter):
    K = cov_matrix(model, xpts, jitter)
    try:
        return linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError:
        raise NumericalFailure("conditioning covariance is singular") from None


def kriging_weights(model, targets, conditioners, jitter=None):
    """Rows of ``Sigma_{x',x} Sigma_{x,x}^{-1}`` for every target x'."""
    xpts = _as_locations(conditioners)
    _check_distinct(xpts)
    jitter = model.default_jitter if jitter is None else jitter
    cf = _factor_conditioners(model, xpts, jitter)
    Kt = cross_cov(model, targets, xpts, jitter)
    return linalg.cho_solve(cf, Kt.T).T


def conditional_moments(spec, targets, conditioners, y, jitter=None):
    """Mean and covariance of Y[targets] given Y[conditioners] = y."""
    model = spec.model
    jitter = model.default_jitter if jitter is None else jitter
    tpts = _as_locations(targets)
    xpts = _as_locations(conditioners)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (xpts.shape[0],):
        raise InvalidArgument("y must have one value per conditioning location")
    A = kriging_weights(model, tpts, xpts, jitter)
    mean = spec.mean + A @ (y - spec.mean)
    Ktt = cov_matrix(model, tpts, jitter)
    Ktx = cross_cov(model, tpts, xpts, jitter)
    cov = Ktt - A @ Ktx.T
    return mean, 0.5 * (cov + cov.T)


def _resolve_conditioners(realization, conditioners):
    c = np.asarray(conditioners)
    if c.ndim == 1 and np.issubdtype(c.dtype, np.integer):
        return realization.points[c]
    return _as_locations(c)


def condition_paths(realization, spec, conditioners, y, jitter=None):
    """Pathwise conditioning: ``Y + Sigma_{.,x} Sigma_{x,x}^{-1} (y - Y[x])``.

    ``conditioners`` are indices into the realization's locations or explicit
    coordinates that are among them.
    """
    model = spec.model
    pts = realization.points
    xpts = _resolve_conditioners(realization, conditioners)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    idx = _locate(pts, xpts)
    A = kriging_weights(model, pts, xpts, jitter)
    values = realization.values + A @ (y - realization.values[idx])
    return FieldRealization(realization.locations, values)


def _locate(pts, xpts):
    d = np.sqrt(((pts[None, :, :] - xpts[:, None, :]) ** 2).sum(-1))
    idx = d.argmin(axis=1)
    if np.any(d[np.arange(len(idx)), idx] > 1e-9):
        raise InvalidArgument("conditioning locations must belong to the realization")
    return idx


def conditional_logZ_moments(spec_y, spec_eps, xi, targets, conditioners, y, jitter=None):
    """Mean and variance of ``log Z[x']`` given ``Y[x] = y``.

    ``log Z = xi0 + xi1 * Y + xi2 * eps`` with eps independent of Y.
    """
    mean_y, cov_y = conditional_moments(spec_y, targets, conditioners, y, jitter)
    tpts = _as_locations(targets)
    var_eps = spec_eps.model.deviation + spec_eps.model.default_jitter
    mean = xi.xi0 + xi.xi1 * mean_y + xi.xi2 * spec_eps.mean
    var = xi.xi2**2 * np.full(tpts.shape[0], var_eps) + xi.xi1**2 * np.diag(cov_y)
    return mean, var
