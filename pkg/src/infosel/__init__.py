"""Informative selection for spatial processes.

Simulation of Gaussian random fields on [0, 1]^d, informative point-process
designs driven by a log-Gaussian design variable, Monte Carlo density ratios
between the sample and population distributions of the signal, and the bias
of naive variogram and likelihood estimation under informative selection.
"""

from infosel.covariogram import CovariogramModel
from infosel.design import DesignSpec, DesignVariableSpec, Sample
from infosel.domain import Domain, Grid, make_grid
from infosel.errors import (
    EmptyLagError,
    EmptyVariogramError,
    InfoselError,
    InvalidArgument,
    NumericalFailure,
)
from infosel.gaussian_field import FieldRealization, GaussianSpec

__version__ = "0.1.0"

__all__ = [
    "CovariogramModel",
    "DesignSpec",
    "DesignVariableSpec",
    "Domain",
    "EmptyLagError",
    "EmptyVariogramError",
    "FieldRealization",
    "GaussianSpec",
    "Grid",
    "InfoselError",
    "InvalidArgument",
    "NumericalFailure",
    "Sample",
    "make_grid",
]
