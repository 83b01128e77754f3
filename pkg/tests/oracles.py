"""Independent reference computations used by the tests.

Nothing here imports the library: covariances are written out with numpy so
an error in the package cannot cancel against the same error in the oracle.
"""

import itertools
import math

import numpy as np


def gauss_cov(points, theta1, theta2):
    p = np.asarray(points, dtype=float)
    n = p.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = theta1 * math.exp(-float(((p[i] - p[j]) ** 2).sum()) / theta2**2)
    return K


def direct_mvn_logpdf(y, mean, K):
    r = np.asarray(y, dtype=float) - mean
    n = r.size
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return -0.5 * n * math.log(2 * math.pi) - 0.5 * logdet - 0.5 * r @ np.linalg.solve(K, r)


def gauss_hermite_expectation(g, mean, cov, nodes=17):
    """E[g(W)] for W ~ N(mean, cov) by tensor Gauss-Hermite quadrature."""
    d = len(mean)
    t, w = np.polynomial.hermite.hermgauss(nodes)
    L = np.linalg.cholesky(cov)
    T = np.array(list(itertools.product(t, repeat=d)))
    W = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1) / math.pi ** (d / 2)
    X = mean + math.sqrt(2.0) * T @ L.T
    return float(W @ g(X))


def rho_bpp_single_draw(points, x, y, theta1, theta2, eps_dev, eps_scale, xi1, xi2, nodes=17):
    num, den = single_draw_expectations(points, x, y, theta1, theta2, eps_dev, eps_scale, xi1, xi2, nodes)
    return num / den


def single_draw_expectations(points, x, y, theta1, theta2, eps_dev, eps_scale, xi1, xi2, nodes=17):
    """E[P(S_1 = x | Z) | Y_x = y] and E[P(S_1 = x | Z)] for bpp(n=1) by quadrature.

    f(x | Z) is z_x / sum_i z_i, i.e. 1 / (1 + sum_{i != x} exp(W_i)) with
    W_i = xi1 (Y_i - Y_x) + xi2 (eps_i - eps_x), a Gaussian vector both
    unconditionally and given Y_x = y.
    """
    p = np.asarray(points, dtype=float)
    n = p.shape[0]
    others = [i for i in range(n) if i != x]
    KY = gauss_cov(p, theta1, theta2)
    KE = gauss_cov(p, eps_dev, eps_scale)
    D = np.zeros((n - 1, n))
    for r, i in enumerate(others):
        D[r, i] = 1.0
        D[r, x] = -1.0

    def g(Wv):
        return 1.0 / (1.0 + np.exp(Wv).sum(axis=1))

    # unconditional law of W
    cov_u = xi1**2 * D @ KY @ D.T + xi2**2 * D @ KE @ D.T
    den = gauss_hermite_expectation(g, np.zeros(n - 1), cov_u, nodes)
    # given Y_x = y the other Y are Gaussian with the usual kriging moments
    k = KY[others, x]
    mu = k / KY[x, x] * y
    S = KY[np.ix_(others, others)] - np.outer(k, k) / KY[x, x]
    E = D @ KE @ D.T
    num = gauss_hermite_expectation(g, xi1 * (mu - y), xi1**2 * S + xi2**2 * E, nodes)
    return num, den


def ppp_total_probability(z, weights, max_n):
    """Sum over ordered samples of size <= max_n of density * cell weights."""
    z = np.asarray(z, dtype=float)
    lam = float((z * weights).sum())
    total = 0.0
    for n in range(max_n + 1):
        for seq in itertools.product(range(z.size), repeat=n):
            idx = list(seq)
            total += math.exp(-lam) / math.factorial(n) * np.prod(z[idx] * weights[idx])
    return total
