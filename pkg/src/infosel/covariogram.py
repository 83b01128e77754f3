"""Gaussian covariogram model and covariance assembly."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from infosel.errors import EmptyLagError, InvalidArgument

FAMILIES = ("gaussian",)

DEFAULT_JITTER = 1e-10  # relative to the deviation parameter
LAG_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class CovariogramModel:
    """Isotropic covariogram ``C(h) = deviation * exp(-|h|^2 / scale^2)``.

    ``deviation`` is the variance C(0) (the sill of the semivariogram) and
    ``scale`` the correlation length.
    """

    deviation: float = 1.0
    scale: float = 1.0
    family: str = "gaussian"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown covariogram family {self.family!r}")
        if not (np.isfinite(self.deviation) and self.deviation > 0):
            raise InvalidArgument(f"deviation must be > 0, got {self.deviation!r}")
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise InvalidArgument(f"scale must be > 0, got {self.scale!r}")

    def correlation(self, dist):
        dist = np.asarray(dist, dtype=float)
        return np.exp(-((dist / self.scale) ** 2))

    def cov(self, dist):
        """Covariogram as a function of distance (vectorized)."""
        return self.deviation * self.correlation(dist)

    def semivariogram(self, dist):
        return self.deviation - self.cov(dist)

    @property
    def default_jitter(self):
        return DEFAULT_JITTER * self.deviation


def _norm(h):
    h = np.asarray(h, dtype=float)
    return float(np.sqrt(np.sum(h * h))) if h.ndim else abs(float(h))


def cov_eval(model, h):
    return float(model.cov(_norm(h)))


def semivariogram_eval(model, h):
    return float(model.semivariogram(_norm(h)))


def _as_locations(locations):
    pts = getattr(locations, "points", locations)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def cov_matrix(model, locations, jitter=None):
    """Covariance matrix ``C(|x_i - x_j|) + jitter * I``.

    ``jitter`` defaults to ``1e-10 * deviation``.
    """
    pts = _as_locations(locations)
    if pts.shape[0] == 0:
        raise InvalidArgument("location list is empty")
    if jitter is None:
        jitter = model.default_jitter
    if jitter < 0:
        raise InvalidArgument("jitter must be >= 0")
    K = model.cov(cdist(pts, pts))
    K[np.diag_indices_from(K)] += jitter
    return K


def cross_cov(model, targets, conditioners, jitter=None):
    """Cross-covariance between two location sets.

    Coincident locations receive the diagonal jitter too, which keeps the
    cross-covariance consistent with :func:`cov_matrix` of the union.
    """
    a = _as_locations(targets)
    b = _as_locations(conditioners)
    if jitter is None:
        jitter = model.default_jitter
    d = cdist(a, b)
    K = model.cov(d)
    if jitter:
        K[d == 0.0] += jitter
    return K


def pair_inverse(model, h, jitter=0.0):
    """Closed-form inverse of the 2x2 covariance of two points at distance h."""
    c0 = model.deviation + jitter
    ch = float(model.cov(h))
    det = c0 * c0 - ch * ch
    if det <= 0:
        raise InvalidArgument("pair covariance is singular")
    return np.array([[c0, -ch], [-ch, c0]]) / det


def pair_kriging_weights(model, targets, x1, x2, jitter=0.0):
    """Rows of ``Sigma_{x',x} Sigma_{x,x}^{-1}`` for a conditioning pair.

    Uses the explicit 2x2 algebra:
    ``[C0 C(x'-x1) - Ch C(x'-x2), C0 C(x'-x2) - Ch C(x'-x1)] / (C0^2 - Ch^2)``.
    """
    t = _as_locations(targets)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    h = _norm(x1 - x2)
    c0 = model.deviation + jitter
    ch = float(model.cov(h))
    d1 = np.sqrt(((t - x1) ** 2).sum(axis=1))
    d2 = np.sqrt(((t - x2) ** 2).sum(axis=1))
    k1 = model.cov(d1) + jitter * (d1 == 0)
    k2 = model.cov(d2) + jitter * (d2 == 0)
    det = c0 * c0 - ch * ch
    return np.stack([c0 * k1 - ch * k2, c0 * k2 - ch * k1], axis=1) / det


def averaged_semivariogram(model, grid, lag, tol=LAG_MATCH_TOL):
    """Grid analogue of the nu-averaged semivariogram at a vector lag.

    Averages ``Var[Y(x2) - Y(x1)] / 2`` over all ordered grid pairs with
    ``x2 - x1 = lag``.
    """
    pts = _as_locations(grid)
    lag = np.atleast_1d(np.asarray(lag, dtype=float))
    if lag.shape != (pts.shape[1],):
        raise InvalidArgument("lag dimension does not match the grid")
    if _norm(lag) <= tol:
        return 0.0
    shifted = pts + lag
    # locate partners by rounding to the lattice, then verify the match
    res = getattr(grid, "resolution", None)
    if res is not None:
        idx = np.rint(shifted * res - 0.5).astype(int)
        inside = np.all((idx >= 0) & (idx < res), axis=1)
        src = np.nonzero(inside)[0]
        dst = np.ravel_multi_index(tuple(idx[inside].T), grid.shape)
        ok = np.all(np.abs(pts[dst] - shifted[src]) <= tol, axis=1)
        src, dst = src[ok], dst[ok]
    else:
        diff = pts[None, :, :] - pts[:, None, :]
        src, dst = np.nonzero(np.all(np.abs(diff - lag) <= tol, axis=2))
    if src.size == 0:
        raise EmptyLagError(f"no grid pair realizes lag {lag.tolist()}")
    c0 = model.cov(0.0)
    half_var = c0 - model.cov(np.sqrt(((pts[dst] - pts[src]) ** 2).sum(axis=1)))
    return float(half_var.mean())
