"""Design variables, binomial/Poisson point-process designs and their densities.

Samples live on a grid: a draw is a cell index and the dominating measure of
one draw is the uniform cell weight, so densities below are with respect to
products of the grid measure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from infosel import rng
from infosel.covariogram import CovariogramModel
from infosel.domain import Grid
from infosel.errors import InvalidArgument
from infosel.gaussian_field import FieldRealization, GaussianSpec


@dataclass(frozen=True)
class DesignVariableSpec:
    """``Z = exp(xi0 + xi1 * Y + xi2 * eps)`` with eps an independent Gaussian field."""

    xi0: float = 0.0
    xi1: float = 0.0
    xi2: float = 0.0
    eps_deviation: float = 1.0
    eps_scale: float = 0.1

    def __post_init__(self):
        if self.xi2 < 0:
            raise InvalidArgument("xi2 must be >= 0")
        if self.eps_deviation <= 0 or self.eps_scale <= 0:
            raise InvalidArgument("eps_deviation and eps_scale must be > 0")

    @property
    def noise_spec(self):
        return GaussianSpec(CovariogramModel(self.eps_deviation, self.eps_scale), 0.0)

    def replace(self, **changes):
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return DesignVariableSpec(**values)


@dataclass(frozen=True)
class DesignSpec:
    """Point-process family driven by a design variable.

    ``family`` is ``"bpp"`` (n i.i.d. draws proportional to z) or ``"ppp"``
    (Poisson process with intensity z).
    """

    family: str = "bpp"
    n: int | None = None
    design_variable: DesignVariableSpec = field(default_factory=DesignVariableSpec)

    def __post_init__(self):
        if self.family not in ("bpp", "ppp"):
            raise InvalidArgument(f"unknown design family {self.family!r}")
        if self.family == "bpp" and (self.n is None or int(self.n) != self.n or self.n < 1):
            raise InvalidArgument("bpp designs need an integer sample size n >= 1")


@dataclass
class Sample:
    """Ordered draws (grid cell indices, repeats allowed) and observed values."""

    draws: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=np.int64).reshape(-1)
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float).reshape(-1)
            if self.values.shape != self.draws.shape:
                raise InvalidArgument("values must align with draws")

    @property
    def size(self):
        return int(self.draws.size)

    def observe(self, field_values):
        return Sample(self.draws, np.asarray(field_values)[self.draws])


def make_design_variable(y, eps, xi):
    """``z = exp(xi0 + xi1 * y + xi2 * eps)`` cell by cell."""
    if isinstance(y, FieldRealization) and isinstance(eps, FieldRealization):
        if y.locations != eps.locations:
            raise InvalidArgument("y and eps must share the same grid")
        locations = y.locations
    else:
        locations = getattr(y, "locations", None) or getattr(eps, "locations", None)
    yv = np.asarray(getattr(y, "values", y), dtype=float)
    ev = np.asarray(getattr(eps, "values", eps), dtype=float)
    if yv.shape != ev.shape:
        raise InvalidArgument("y and eps must have the same shape")
    z = np.exp(xi.xi0 + xi.xi1 * yv + xi.xi2 * ev)
    if locations is None:
        return z
    return FieldRealization(locations, z)


def calibrate_xi0(xi1, xi2, theta1, eps_deviation=1.0, target_mean_intensity=10.0):
    """Offset making ``E[Z]`` equal the target under the lognormal law.

    ``log Z`` has variance ``xi1**2 * theta1 + xi2**2 * eps_deviation`` when
    theta1 and eps_deviation are variances.
    """
    if target_mean_intensity <= 0:
        raise InvalidArgument("target intensity must be > 0")
    return float(np.log(target_mean_intensity) - (xi1**2 * theta1 + xi2**2 * eps_deviation) / 2)


def _cell_probabilities(z, grid):
    zv = np.asarray(getattr(z, "values", z), dtype=float)
    if zv.ndim != 1 or (grid is not None and zv.size != grid.size):
        raise InvalidArgument("z must be one value per grid cell")
    if not np.all(np.isfinite(zv)) or np.any(zv <= 0):
        raise InvalidArgument("design variable z must be finite and positive")
    # uniform cell weights cancel in the normalization
    return zv / zv.sum(), float(zv.mean())


def _grid_of(z):
    g = getattr(z, "locations", None)
    return g if isinstance(g, Grid) else None


def _categorical(gen, p, n):
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = gen.random(n)
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)


def draw_bpp(z, n, seed, index=0):
    """``n`` independent draws, cell i with probability ``z_i / sum(z)``."""
    if int(n) != n or n < 1:
        raise InvalidArgument("n must be a positive integer")
    p, _ = _cell_probabilities(z, _grid_of(z))
    gen = rng.stream(seed, "bpp", index)
    return Sample(_categorical(gen, p, int(n)))


def draw_ppp(z, seed, index=0):
    """Poisson process on the grid: ``N ~ Poisson((z.nu)(U))`` then i.i.d. draws."""
    p, total = _cell_probabilities(z, _grid_of(z))
    gen = rng.stream(seed, "ppp", index)
    n = int(gen.poisson(total))
    return Sample(_categorical(gen, p, n))


def _sizes(sample):
    draws = sample.draws if isinstance(sample, Sample) else np.asarray(sample, dtype=np.int64)
    return draws, int(draws.size)


def _log_total(z):
    zv = np.asarray(getattr(z, "values", z), dtype=float)
    return float(np.log(zv.mean())), zv


def sample_logdensity(design, z, sample):
    """Log density of a whole sample given ``Z = z``.

    bpp(n): ``-n log (z.nu)(U) + sum log z(x_l)``, ``-inf`` for other sizes.
    ppp: ``-log(size!) - (z.nu)(U) + sum log z(x_l)``.
    """
    draws, n = _sizes(sample)
    log_total, zv = _log_total(z)
    log_z = np.log(zv[draws]).sum() if n else 0.0
    if design.family == "bpp":
        if n != design.n:
            return -np.inf
        return float(log_z - n * log_total)
    return float(-special.gammaln(n + 1) - np.exp(log_total) + log_z)


def _poisson_log_interval(total, lo, hi):
    """log P(lo <= N <= hi) for N ~ Poisson(total); hi may be inf."""
    if hi < lo:
        return -np.inf
    if np.isinf(hi):
        p = special.gammainc(lo, total) if lo > 0 else 1.0
    else:
        upper = special.pdtr(hi, total)
        lower = special.pdtr(lo - 1, total) if lo > 0 else 0.0
        p = upper - lower
    return float(np.log(p)) if p > 0 else -np.inf


def _subsample_prefix(K, x):
    K = sorted({int(k) for k in K})
    if any(k < 1 for k in K):
        raise InvalidArgument("draw indices in K start at 1")
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size > len(K):
        raise InvalidArgument("more locations than indices in K")
    return K, K[: x.size], x


def subsample_logdensity(design, z, K, x):
    """Log density of the subsample ``S_K`` at ``x`` given ``Z = z``.

    ``x`` lists the cells of the draws in ``K' = {l in K : l <= N}``, which is
    the first ``len(x)`` elements of sorted ``K``.
    """
    K, Kp, x = _subsample_prefix(K, x)
    log_total, zv = _log_total(z)
    total = float(np.exp(log_total))
    if not K:
        if x.size:
            raise InvalidArgument("x must be empty when K is empty")
        return 0.0
    # N must satisfy max(K') <= N < next element of K after K'
    lo = Kp[-1] if Kp else 0
    hi = K[len(Kp)] - 1 if len(Kp) < len(K) else np.inf
    if design.family == "bpp":
        if not (lo <= design.n <= hi):
            return -np.inf
        log_n = 0.0
    else:
        log_n = _poisson_log_interval(total, lo, hi)
    if not x.size:
        return log_n
    return float(log_n + np.log(zv[x]).sum() - x.size * log_total)
