import math

import numpy as np
import pytest

from infosel import CovariogramModel, DesignSpec, DesignVariableSpec, Domain, GaussianSpec
from infosel import InvalidArgument, make_grid
from infosel.design import calibrate_xi0, draw_bpp
from infosel.errors import NumericalFailure
from infosel.gaussian_field import sampler_for
from infosel.likelihood import full_loglik, naive_loglik, naive_mle
from oracles import direct_mvn_logpdf, gauss_cov, single_draw_expectations


def test_naive_loglik_single_point():
    assert naive_loglik(CovariogramModel(1.0, 1.0), [[0.5, 0.5]], [0.0]) == pytest.approx(
        -0.5 * math.log(2 * math.pi), abs=1e-9
    )


def test_naive_loglik_matches_direct_formula():
    rng = np.random.default_rng(1)
    for n in (2, 10, 50):
        pts = rng.random((n, 2))
        y = rng.standard_normal(n)
        model = CovariogramModel(2.0, 0.05)
        K = gauss_cov(pts, 2.0, 0.05) + model.default_jitter * np.eye(n)
        assert naive_loglik(model, pts, y, mean=0.3) == pytest.approx(direct_mvn_logpdf(y, 0.3, K), abs=1e-8)


def test_naive_loglik_errors():
    model = CovariogramModel(1.0, 0.1)
    with pytest.raises(NumericalFailure):
        naive_loglik(model, [[0.2, 0.2], [0.2, 0.2 + 1e-12]], [0.0, 1.0])
    with pytest.raises(InvalidArgument):
        naive_loglik(model, [[0.2, 0.2]], [0.0, 1.0])


def test_generating_parameters_win_on_average():
    g = make_grid(Domain(2), 16)
    pts = g.points[::5]
    true = CovariogramModel(1.0, 0.2)
    Y = sampler_for(GaussianSpec(true), pts).batch(1, "field", 0, 500)
    doubled = CovariogramModel(2.0, 0.2)
    diff = [naive_loglik(true, pts, y) - naive_loglik(doubled, pts, y) for y in Y]
    assert np.mean(diff) > 0


def test_naive_mle_consistent_under_srs(grid64):
    sig = GaussianSpec(CovariogramModel(5.0, 0.1))
    ys = sampler_for(sig, grid64)
    rng = np.random.default_rng(0)
    fits = []
    for r in range(100):
        idx = rng.choice(grid64.size, 400, replace=False)
        y = ys.batch(3, "signal", r, 1)[0]
        fits.append(naive_mle(grid64.points[idx], y[idx], restarts=1).model)
    assert abs(np.median([f.deviation for f in fits]) / 5.0 - 1) < 0.15
    assert abs(np.median([f.scale for f in fits]) / 0.1 - 1) < 0.15


def test_naive_mle_biased_under_informative_design(grid64):
    """bpp(z2, n) concentrates on high values; the fitted deviation shrinks."""
    theta1 = 5.0
    sig = GaussianSpec(CovariogramModel(theta1, 0.1))
    xi = DesignVariableSpec(calibrate_xi0(0.4, 0.3, theta1), 0.4, 0.3, 1.0, 0.1)
    ys = sampler_for(sig, grid64)
    es = sampler_for(xi.noise_spec, grid64)
    srs, inf = [], []
    for r in range(20):
        y = ys.batch(4, "signal", r, 1)[0]
        e = es.batch(4, "noise", r, 1)[0]
        z = np.exp(xi.xi0 + xi.xi1 * y + xi.xi2 * e)
        for target, weights in ((srs, np.ones_like(z)), (inf, z)):
            cells = np.unique(draw_bpp(weights, 200, 4, r).draws)
            target.append(naive_mle(grid64.points[cells], y[cells], restarts=1).model.deviation)
    assert np.median(inf) < np.median(srs)


def test_naive_mle_minimal_and_errors():
    fit = naive_mle([[0.1, 0.1], [0.5, 0.2], [0.9, 0.8]], [0.3, -0.2, 1.1])
    assert isinstance(fit.converged, bool)
    assert fit.model.deviation > 0
    with pytest.raises(InvalidArgument):
        naive_mle([[0.1, 0.1], [0.5, 0.2]], [0.3, -0.2])


@pytest.fixture(scope="module")
def setup():
    g = make_grid(Domain(2), 8)
    xi = DesignVariableSpec(0.0, 0.8, 0.5, 1.0, 0.2)
    return g, xi


def test_full_loglik_decomposition(setup):
    g, xi = setup
    d = DesignSpec("bpp", 3, xi)
    ev = full_loglik(CovariogramModel(1.0, 0.2), xi, [3, 17, 40], [0.5, -0.3, 1.2], d, g, 500, 1)
    assert ev.full == ev.log_rho + ev.naive + ev.log_sample_density
    assert ev.log_rho_se > 0 and ev.full_se > 0


def test_full_loglik_xi1_zero(setup):
    g, _ = setup
    xi = DesignVariableSpec(0.0, 0.0, 0.5, 1.0, 0.2)
    d = DesignSpec("bpp", 2, xi)
    ev = full_loglik(CovariogramModel(1.0, 0.2), xi, [3, 17], [0.5, -0.3], d, g, 300, 2)
    assert ev.log_rho == 0.0
    assert ev.full == ev.naive + ev.log_sample_density


def test_full_loglik_permutation_invariant(setup):
    g, xi = setup
    d = DesignSpec("bpp", 3, xi)
    model = CovariogramModel(1.0, 0.2)
    a = full_loglik(model, xi, [3, 17, 40], [0.5, -0.3, 1.2], d, g, 500, 3)
    b = full_loglik(model, xi, [40, 3, 17], [1.2, 0.5, -0.3], d, g, 500, 3)
    assert a.full == pytest.approx(b.full, abs=1e-10)


def test_full_loglik_errors(setup):
    g, xi = setup
    model = CovariogramModel(1.0, 0.2)
    with pytest.raises(InvalidArgument):
        full_loglik(model, xi, [3, 17], [0.5], DesignSpec("bpp", 2, xi), g, 500, 0)
    with pytest.raises(InvalidArgument):
        full_loglik(model, xi, [3, 17], [0.5, 0.1], DesignSpec("bpp", 3, xi), g, 500, 0)
    with pytest.raises(InvalidArgument):
        full_loglik(model, xi, [3, 17], [0.5, 0.1], DesignSpec("bpp", 2, xi), g, 10, 0)


def test_full_loglik_quadrature_anchor():
    """Single draw on 4 cells: full = log f_Y(y) + log E[f(x | Z) | Y_x = y]."""
    g = make_grid(Domain(2), 2)
    xi = DesignVariableSpec(0.0, 1.0, 0.5, 1.0, 0.5)
    d = DesignSpec("bpp", 1, xi)
    for y in (-1.0, 0.5, 2.0):
        ev = full_loglik(CovariogramModel(1.0, 0.5), xi, [1], [y], d, g, 20_000, 4)
        num, _ = single_draw_expectations(g.points, 1, y, 1.0, 0.5, 1.0, 0.5, 1.0, 0.5)
        # densities with respect to the uniform cell measure carry the factor 4
        expected = -0.5 * math.log(2 * math.pi) - 0.5 * y * y + math.log(4 * num)
        assert abs(ev.full - expected) < 3 * ev.full_se
