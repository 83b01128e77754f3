import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import cholesky
from scipy.stats import special_ortho_group

from infosel import CovariogramModel, Domain, InvalidArgument, make_grid
from infosel.covariogram import (
    averaged_semivariogram,
    cov_eval,
    cov_matrix,
    cross_cov,
    pair_inverse,
    semivariogram_eval,
)
from infosel.errors import EmptyLagError
from infosel.domain import Grid
from oracles import gauss_cov

pos = st.floats(0.01, 10.0)


@pytest.mark.parametrize(
    "t1,t2,h,expected",
    [(1, 1, 0.0, 1.0), (1, 1, 1.0, math.exp(-1)), (5, 0.1, 0.1, 5 * math.exp(-1))],
)
def test_cov_eval_values(t1, t2, h, expected):
    assert cov_eval(CovariogramModel(t1, t2), [h, 0.0]) == pytest.approx(expected, rel=1e-14)


def test_semivariogram_values():
    m = CovariogramModel(1, 1)
    assert semivariogram_eval(m, [0.0, 0.0]) == 0.0
    assert semivariogram_eval(m, [1.0, 0.0]) == pytest.approx(1 - math.exp(-1))
    assert semivariogram_eval(m, [50.0, 0.0]) == pytest.approx(1.0)


def test_invalid_parameters():
    with pytest.raises(InvalidArgument):
        CovariogramModel(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        CovariogramModel(1.0, -1.0)
    with pytest.raises(InvalidArgument):
        CovariogramModel(1.0, 1.0, family="exponential")


@given(pos, pos, st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_isotropy(t1, t2, h):
    m = CovariogramModel(t1, t2)
    R = special_ortho_group.rvs(3, random_state=1)
    assert cov_eval(m, R @ np.array(h)) == pytest.approx(cov_eval(m, h), abs=1e-12)


@given(pos, pos, st.floats(0, 5))
def test_semivariogram_identity(t1, t2, r):
    m = CovariogramModel(t1, t2)
    h = [r, 0.0]
    assert semivariogram_eval(m, h) == cov_eval(m, [0, 0]) - cov_eval(m, h)
    assert semivariogram_eval(m, h) >= 0


def test_cov_matrix_matches_oracle():
    rng = np.random.default_rng(0)
    pts = rng.random((12, 2))
    m = CovariogramModel(2.0, 0.3)
    assert np.allclose(cov_matrix(m, pts, jitter=0.0), gauss_cov(pts, 2.0, 0.3), atol=1e-14)
    K = cov_matrix(m, pts, jitter=1e-3)
    assert np.allclose(np.diag(K), 2.001)


def test_cov_matrix_single_and_empty():
    m = CovariogramModel(3.0, 1.0)
    assert np.allclose(cov_matrix(m, [[0.2, 0.2]], jitter=0.5), [[3.5]])
    with pytest.raises(InvalidArgument):
        cov_matrix(m, np.empty((0, 2)))


def test_pair_inverse_closed_form():
    m = CovariogramModel(1.5, 0.2)
    pts = np.array([[0.1, 0.1], [0.2, 0.15]])
    h = float(np.linalg.norm(pts[0] - pts[1]))
    K = cov_matrix(m, pts, jitter=0.0)
    assert np.allclose(pair_inverse(m, h), np.linalg.inv(K), rtol=1e-12)


def test_cross_cov_jitter_on_coincident_points():
    m = CovariogramModel(1.0, 0.5)
    a = np.array([[0.1, 0.1], [0.3, 0.3]])
    K = cross_cov(m, a, a[:1], jitter=1e-4)
    assert K[0, 0] == pytest.approx(1.0001)
    assert K[1, 0] == pytest.approx(math.exp(-0.08 / 0.25))


def test_grid_subsample_factorizes():
    g = make_grid(Domain(2), 64)
    idx = np.random.default_rng(1).choice(g.size, 2000, replace=False)
    m = CovariogramModel(5.0, 0.1)
    K = cov_matrix(m, g.points[idx], jitter=1e-8 * 5.0)
    assert np.array_equal(K, K.T)
    cholesky(K, lower=True)


def test_averaged_semivariogram():
    m = CovariogramModel(2.0, 0.4)
    g1 = Grid(1, 4)
    assert averaged_semivariogram(m, g1, [0.25]) == pytest.approx(
        float(semivariogram_eval(m, [0.25])), abs=1e-12
    )
    g = make_grid(Domain(2), 8)
    lag = [0.25, -0.125]
    assert averaged_semivariogram(m, g, lag) == pytest.approx(float(semivariogram_eval(m, lag)), abs=1e-10)
    assert averaged_semivariogram(m, g, [0.0, 0.0]) == 0.0
    with pytest.raises(EmptyLagError):
        averaged_semivariogram(m, g, [0.1, 0.0])
    with pytest.raises(EmptyLagError):
        averaged_semivariogram(m, g, [1.5, 0.0])
