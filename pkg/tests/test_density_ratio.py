import math

import numpy as np
import pytest

from infosel import CovariogramModel, DesignSpec, DesignVariableSpec, Domain, GaussianSpec
from infosel import InvalidArgument, make_grid
from infosel.density_ratio import (
    RhoQuery,
    log_integrands,
    pair_at_distance,
    rho_curve,
    rho_mc,
    rho_property_suite,
    rho_small_scale_limit,
    rho_surface,
)
from infosel.design import Sample, make_design_variable, sample_logdensity
from infosel.gaussian_field import sampler_for

SIGNAL = GaussianSpec(CovariogramModel(1.0, 0.2))


def bpp(xi1=1.0, xi2=0.5, n=5, xi0=0.0, scale=0.2):
    return DesignSpec("bpp", n, DesignVariableSpec(xi0, xi1, xi2, 1.0, scale))


def test_small_scale_limit_values():
    assert rho_small_scale_limit([1.0], 0.0) == 1.0
    assert rho_small_scale_limit([1.0], 1.0) == pytest.approx(math.exp(0.5))
    assert rho_small_scale_limit([1.0, 1.0], 1.0) == pytest.approx(math.e)
    assert rho_small_scale_limit([1.0], 1.0, theta1=2.0) == pytest.approx(1.0)


def test_query_validation(grid8):
    with pytest.raises(InvalidArgument):
        RhoQuery((1, 2), (0.0,), bpp())
    with pytest.raises(InvalidArgument):
        rho_mc(RhoQuery((1,), (0.0,), bpp(), SIGNAL), grid8, 99, 0)


def test_empty_sample_is_one(grid8):
    e = rho_mc(RhoQuery((), (), bpp(), SIGNAL), grid8, 100, 0)
    assert e.value == 1.0 and e.mc_se == 0.0


@pytest.mark.parametrize("family", ["bpp", "ppp"])
def test_xi1_zero_exactly_one(grid8, family):
    d = DesignSpec(family, 4 if family == "bpp" else None, DesignVariableSpec(1.0, 0.0, 0.8, 1.0, 0.2))
    e = rho_mc(RhoQuery((3, 40), (2.0, -1.0), d, SIGNAL), grid8, 300, 1)
    assert e.value == 1.0
    assert e.exact == (family == "bpp")


def test_xi0_invariance_bpp(grid8):
    q = RhoQuery((10,), (1.5,), bpp(xi0=0.0), SIGNAL)
    a = rho_mc(q, grid8, 500, 2)
    b = rho_mc(RhoQuery((10,), (1.5,), bpp(xi0=7.3), SIGNAL), grid8, 500, 2)
    assert a.value == pytest.approx(b.value, rel=1e-12)
    assert a.mc_se == pytest.approx(b.mc_se, rel=1e-9)


def test_worker_count_invariance(grid8):
    q = RhoQuery((10, 11), (1.0, 0.5), bpp(), SIGNAL)
    a = rho_mc(q, grid8, 800, 3, workers=1)
    b = rho_mc(q, grid8, 800, 3, workers=3)
    assert a == b


def test_denominator_is_sample_density(grid8):
    """Denominator summands are the subsample density f(x | z) of each replication."""
    d = bpp(n=2)
    x = (5, 9)
    ((den, _),) = log_integrands(grid8, SIGNAL, d, [d.design_variable], x, [(0.0, 0.0)], 250, 4, full_sample=True)
    Y = sampler_for(SIGNAL, grid8).batch(4, "signal", 0, 3)
    E = sampler_for(d.design_variable.noise_spec, grid8).batch(4, "noise", 0, 3)
    for j in range(3):
        z = make_design_variable(Y[j], E[j], d.design_variable)
        assert den[j] == pytest.approx(sample_logdensity(d, z, Sample(list(x))), rel=1e-10)


def test_quadrature_anchor_other_cell():
    from oracles import rho_bpp_single_draw

    g = make_grid(Domain(2), 2)
    d = DesignSpec("bpp", 1, DesignVariableSpec(0.0, 0.7, 0.9, 1.0, 0.3))
    sig = GaussianSpec(CovariogramModel(1.5, 0.4))
    e = rho_mc(RhoQuery((3,), (1.2,), d, sig), g, 10_000, 11)
    ref = rho_bpp_single_draw(g.points, 3, 1.2, 1.5, 0.4, 1.0, 0.3, 0.7, 0.9)
    assert abs(e.value - ref) < 3 * e.mc_se


def test_mc_se_is_calibrated(grid8):
    q = RhoQuery((27,), (1.0,), bpp(), SIGNAL)
    runs = [rho_mc(q, grid8, 500, seed) for seed in range(200)]
    spread = np.std([r.value for r in runs], ddof=1)
    reported = np.mean([r.mc_se for r in runs])
    assert 0.5 <= spread / reported <= 2.0


def test_sign_flip(grid8):
    a = rho_mc(RhoQuery((27,), (1.0,), bpp(xi1=0.5), SIGNAL), grid8, 2000, 5)
    b = rho_mc(RhoQuery((27,), (-1.0,), bpp(xi1=-0.5), SIGNAL), grid8, 2000, 5)
    assert abs(a.value - b.value) < 3 * math.hypot(a.mc_se, b.mc_se)


def test_rho_curve_through_one_and_peak(grid64):
    sig = GaussianSpec(CovariogramModel(1.0, 0.1))
    d = DesignSpec("bpp", 10, DesignVariableSpec(0.0, 1.0, 1.0, 1.0, 0.1))
    x = grid64.index_of([0.5, 0.5])
    values = [round(-1 + 0.25 * k, 2) for k in range(13)]
    for y in (0.5, 1.0):
        rows = rho_curve(RhoQuery((x,), (y,), d, sig), grid64, "xi1", values, 4000, 1)
        at0 = rows[values.index(0.0)]
        assert abs(at0["rho"] - 1.0) <= 3 * at0["mc_se"] + 1e-12
        peak = values[int(np.argmax([r["rho"] for r in rows]))]
        assert abs(peak - y) <= 0.25


def test_rho_curve_xi2_sweep_tends_to_one(grid8):
    rows = rho_curve(RhoQuery((27,), (1.5,), bpp(), SIGNAL), grid8, "xi2", [0.0, 1.0, 4.0, 16.0], 2000, 6)
    dev = [abs(r["rho"] - 1) for r in rows]
    assert dev[0] > dev[-1]
    assert rows[0]["rho"] != 1.0
    with pytest.raises(InvalidArgument):
        rho_curve(RhoQuery((27,), (1.5,), bpp(), SIGNAL), grid8, "theta", [1.0], 200, 0)


def test_pair_at_distance(grid64):
    for target in (0.018, 0.074, 0.357, 0.711):
        i, j, achieved = pair_at_distance(grid64, target)
        assert np.linalg.norm(grid64.points[i] - grid64.points[j]) == pytest.approx(achieved)
        assert abs(achieved - target) <= grid64.spacing


def test_rho_surface_symmetry_and_independence(grid8):
    ys = [-1.0, 0.0, 1.0]
    pair = (18, 21)  # same row, symmetric under swapping the two draws
    rho, se = rho_surface(grid8, pair, ys, ys, bpp(), SIGNAL, 3000, 7)
    assert np.all(np.abs(rho - rho.T) <= 3 * np.hypot(se, se.T) + 1e-12)
    flat, _ = rho_surface(grid8, pair, ys, ys, bpp(xi1=0.0), SIGNAL, 200, 7)
    assert np.all(flat == 1.0)
    with pytest.raises(InvalidArgument):
        rho_surface(grid8, (1, 2, 3), ys, ys, bpp(), SIGNAL, 200, 7)


def test_property_suite(grid8):
    rows = rho_property_suite(bpp(n=5), SIGNAL, grid8, seed=3, J=2000)
    checks = {r["check"] for r in rows}
    assert {"xi1_zero", "xi2_growth", "theta_scale_growth", "sign_flip", "monotone_in_y", "empty_sample"} <= checks
    failed = [r for r in rows if r["asserted"] and not r["passed"]]
    assert not failed, failed
