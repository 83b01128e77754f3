"""Study region U = [0, 1]^d, its uniform measure and cell-center grids."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from infosel.errors import InvalidArgument


@dataclass(frozen=True)
class Domain:
    """The unit cube [0, 1]^dim carrying the uniform probability measure."""

    dim: int = 2

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgument(f"dim must be a positive integer, got {self.dim!r}")

    @property
    def bounds(self):
        return ((0.0, 1.0),) * self.dim

    @property
    def volume(self):
        return 1.0


@dataclass(frozen=True, eq=True)
class Grid:
    """Regular lattice of cell centers, row-major over the axes.

    Point ``k`` has multi-index ``np.unravel_index(k, shape)`` and coordinate
    ``(i + 0.5) / m`` along each axis, so every point carries weight ``m**-d``.
    """

    dim: int
    resolution: int

    @property
    def shape(self):
        return (self.resolution,) * self.dim

    @property
    def size(self):
        return self.resolution**self.dim

    @property
    def spacing(self):
        return 1.0 / self.resolution

    @cached_property
    def axis(self):
        return (np.arange(self.resolution) + 0.5) / self.resolution

    @cached_property
    def points(self):
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def weights(self):
        w = np.full(self.size, 1.0 / self.size)
        w.setflags(write=False)
        return w

    @cached_property
    def log_weights(self):
        return np.full(self.size, -self.dim * np.log(self.resolution))

    def index_of(self, point):
        """Index of the cell containing ``point``."""
        p = np.asarray(point, dtype=float).reshape(self.dim)
        cell = np.clip(np.floor(p * self.resolution).astype(int), 0, self.resolution - 1)
        return int(np.ravel_multi_index(tuple(cell), self.shape))


def make_grid(domain, resolution):
    if int(resolution) != resolution or resolution < 2:
        raise InvalidArgument(f"resolution must be an integer >= 2, got {resolution!r}")
    return Grid(domain.dim, int(resolution))


def integrate(field, grid=None):
    """Quadrature of a field over U: ``sum_i w_i f_i``.

    ``field`` is a :class:`~infosel.gaussian_field.FieldRealization` on a grid,
    or a raw array together with ``grid``. A 2-D array integrates each row.
    """
    if grid is None:
        grid = getattr(field, "locations", None)
        if not isinstance(grid, Grid):
            raise InvalidArgument("field is not defined on a Grid")
        values = field.values
    else:
        values = getattr(field, "values", field)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise InvalidArgument(
            f"field has {values.shape[-1]} values but the grid has {grid.size} points"
        )
    # uniform weights: a mean is the exact quadrature and avoids weight rounding
    return values.mean(axis=-1) if values.ndim > 1 else float(values.mean())
