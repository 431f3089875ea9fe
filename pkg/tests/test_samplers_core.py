import numpy as np
import pytest
from numpy.testing import assert_allclose

from tvpsvd.design import BLOCK, LOWER_TRI, assemble_static, thin_svd, whiten_system
from tvpsvd.errors import NumericalError
from tvpsvd.samplers import (
    draw_beta_tilde,
    draw_gamma,
    draw_ng_global,
    draw_ng_locals,
    draw_theta,
    posterior_moments,
)

from oracles import dense_factors, dense_posterior, dense_gls_posterior, dense_z


def materialized_cov(moments):
    """Dense posterior covariance from the factor bundle (tests only)."""
    factors = moments.factors
    T, K = factors.system.T, factors.system.K
    _, V = dense_factors(factors)
    D0 = np.kron(np.eye(T), np.diag(moments.d0))
    xi = moments.xi if moments.mode == LOWER_TRI else moments.xi[factors.perm]
    return D0 - D0 @ V @ np.diag(xi) @ V.T @ D0


def test_scalar_conjugate_posterior():
    system = assemble_static(np.array([[1.0]]), BLOCK)
    factors = thin_svd(system)
    m = posterior_moments(factors, np.array([1.0]), np.array([2.0]))
    assert_allclose(m.mu, [[1.0]])
    assert_allclose(materialized_cov(m), [[0.5]])


def test_no_likelihood_limit_returns_prior_mean():
    system = assemble_static(np.array([[1.0], [1.0]]), BLOCK)
    factors = thin_svd(system)
    b0 = np.array([[3.0], [-2.0]])
    m = posterior_moments(factors, np.array([1e-12]), np.zeros(2), b0=b0)
    assert_allclose(m.mu, b0, atol=1e-10)


@pytest.mark.parametrize("mode", [BLOCK, LOWER_TRI])
@pytest.mark.parametrize("with_b0", [False, True])
def test_moments_match_dense_oracle(mode, with_b0):
    rng = np.random.default_rng(10)
    for _ in range(15):
        T = int(rng.integers(1, 13))
        K = int(rng.integers(1, 9))
        X = rng.standard_normal((T, K))
        system = assemble_static(X, mode)
        factors = thin_svd(system)
        if mode == BLOCK:
            d0 = rng.uniform(0.1, 2.0, K)
        else:
            d0 = np.full(K, rng.uniform(0.1, 2.0))
        ystar = rng.standard_normal(T)
        b0 = None
        b0_kt = None
        if with_b0:
            if mode == LOWER_TRI:
                continue
            b0 = rng.standard_normal((T, K))
            b0_kt = b0.ravel()
        m = posterior_moments(factors, d0, ystar, b0=b0)
        Zd = dense_z(X, mode)
        mu_d, cov_d = dense_posterior(Zd, np.tile(d0, T), ystar, b0_kt)
        assert_allclose(m.mu.ravel(), mu_d, rtol=1e-8, atol=1e-10)
        assert_allclose(materialized_cov(m), cov_d, rtol=1e-8, atol=1e-10)


def test_lowertri_non_ridge_prior_rejected():
    system = assemble_static(np.ones((3, 2)), LOWER_TRI)
    factors = thin_svd(system)
    with pytest.raises(NumericalError):
        posterior_moments(factors, np.array([1.0, 2.0]), np.zeros(3))


@pytest.mark.parametrize("mode", [BLOCK, LOWER_TRI])
def test_whitened_pipeline_matches_dense_gls(mode):
    """End-to-end: whiten + SVD + moments == dense heteroskedastic posterior."""
    rng = np.random.default_rng(11)
    for _ in range(10):
        T = int(rng.integers(2, 13))
        K = int(rng.integers(1, 9))
        X = rng.standard_normal((T, K))
        sigma = rng.uniform(0.4, 2.5, T)
        y_hat = rng.standard_normal(T)
        if mode == BLOCK:
            psi = rng.uniform(0.1, 2.0, K)
            b0 = rng.standard_normal((T, K))
        else:
            psi = np.full(K, rng.uniform(0.1, 2.0))
            b0 = np.zeros((T, K))

        system = assemble_static(X, mode)
        white, ystar = whiten_system(system, y_hat, sigma, b0=b0 if mode == BLOCK else None)
        factors = thin_svd(white)
        m = posterior_moments(factors, psi, ystar)
        # Map back to the original scale: states = b0 + sigma_t * whitened.
        mu_lib = b0 + sigma[:, None] * m.mu
        scale_kt = np.repeat(sigma, K)
        cov_lib = materialized_cov(m) * np.outer(scale_kt, scale_kt)

        Zd = dense_z(X, mode)
        prior_cov = np.repeat(sigma**2, K) * np.tile(psi, T)
        mu_d, cov_d = dense_gls_posterior(Zd, prior_cov, b0.ravel(), y_hat, sigma**2)
        assert_allclose(mu_lib.ravel(), mu_d, rtol=1e-8, atol=1e-9)
        assert_allclose(cov_lib, cov_d, rtol=1e-8, atol=1e-9)


def test_affine_map_covariance_identity():
    """Explicit assembly of the two-noise map L satisfies L Cov L' = V."""
    rng = np.random.default_rng(12)
    T, K = 3, 2
    X = rng.standard_normal((T, K))
    for mode in (BLOCK, LOWER_TRI):
        system = assemble_static(X, mode)
        factors = thin_svd(system)
        d0 = rng.uniform(0.3, 1.5, K) if mode == BLOCK else np.full(K, 0.8)
        m = posterior_moments(factors, d0, rng.standard_normal(T))
        _, V = dense_factors(factors)
        D0 = np.kron(np.eye(T), np.diag(d0))
        xi = m.xi if mode == LOWER_TRI else m.xi[factors.perm]
        # beta = mu + a - D0 V Xi (V'a + b) = mu + L @ [a; b]
        L = np.concatenate(
            [np.eye(K * T) - D0 @ V @ np.diag(xi) @ V.T, -D0 @ V @ np.diag(xi)], axis=1
        )
        cov_ab = np.zeros((K * T + T, K * T + T))
        cov_ab[: K * T, : K * T] = D0
        cov_ab[K * T :, K * T :] = np.diag(1.0 / factors.lam**2)
        assert_allclose(L @ cov_ab @ L.T, materialized_cov(m), rtol=1e-8, atol=1e-10)


def test_point_mass_prior_collapses_draws():
    rng = np.random.default_rng(13)
    system = assemble_static(rng.standard_normal((4, 2)), BLOCK)
    factors = thin_svd(system)
    m = posterior_moments(factors, np.full(2, 1e-14), rng.standard_normal(4))
    draw = draw_beta_tilde(m, rng)
    assert_allclose(draw, np.zeros((4, 2)), atol=1e-5)


@pytest.mark.parametrize("mode", [BLOCK, LOWER_TRI])
def test_monte_carlo_covariance(mode):
    rng = np.random.default_rng(14)
    T, K = 3, 2
    X = rng.standard_normal((T, K))
    system = assemble_static(X, mode)
    factors = thin_svd(system)
    d0 = rng.uniform(0.3, 1.5, K) if mode == BLOCK else np.full(K, 0.8)
    m = posterior_moments(factors, d0, rng.standard_normal(T))
    n = 200_000
    draws = np.empty((n, T * K))
    for i in range(n):
        draws[i] = draw_beta_tilde(m, rng).ravel()
    target = materialized_cov(m)
    sample = np.cov(draws.T)
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n)
    assert np.all(np.abs(sample - target) <= 3.0 * se + 1e-12)
    assert_allclose(draws.mean(axis=0), m.mu.ravel(), atol=4.0 * np.sqrt(np.diag(target).max() / n))


def test_draw_gamma_limits_and_oracle():
    rng = np.random.default_rng(15)
    T, K = 200, 3
    X = rng.standard_normal((T, K))
    truth = np.array([1.0, -2.0, 0.5])
    sigma = np.full(T, 0.3)
    y = X @ truth + sigma * rng.standard_normal(T)
    z = np.zeros(T)

    # Vanishing prior precision: posterior mean ~= GLS estimate.
    draws = np.array([draw_gamma(y, z, X, sigma, np.full(K, 1e12), rng) for _ in range(400)])
    gls = np.linalg.lstsq(X / sigma[:, None], y / sigma, rcond=None)[0]
    assert_allclose(draws.mean(axis=0), gls, atol=0.02)

    # Dominating prior: draws collapse to zero.
    draws = np.array([draw_gamma(y, z, X, sigma, np.full(K, 1e-12), rng) for _ in range(50)])
    assert np.abs(draws).max() < 1e-4

    # Mean and covariance against the direct formula on a small instance.
    T, K = 10, 3
    X = rng.standard_normal((T, K))
    y = rng.standard_normal(T)
    sigma = rng.uniform(0.5, 1.5, T)
    tau = rng.uniform(0.2, 2.0, K)
    xw = X / sigma[:, None]
    cov = np.linalg.inv(xw.T @ xw + np.diag(1.0 / tau))
    mean = cov @ xw.T @ (y / sigma)
    n = 100_000
    draws = np.array([draw_gamma(y, np.zeros(T), X, sigma, tau, rng) for _ in range(n)])
    assert_allclose(draws.mean(axis=0), mean, atol=4 * np.sqrt(np.diag(cov).max() / n))
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n)
    assert np.all(np.abs(np.cov(draws.T) - cov) <= 4 * se + 1e-10)


def test_ng_global_edge_and_moments():
    rng = np.random.default_rng(16)
    # Empty coefficient block: reduces to the prior Gamma(a0, a1).
    draws = np.array([draw_ng_global(np.zeros(0), rng) for _ in range(40_000)])
    assert abs(draws.mean() - 1.0) < 0.1  # Gamma(0.01, 0.01) has mean 1
    # Large sum: concentrates near shape/rate.
    tau = np.full(50, 100.0)
    shape = 0.01 + 0.1 * 50
    rate = 0.01 + 0.05 * tau.sum()
    draws = np.array([draw_ng_global(tau, rng) for _ in range(20_000)])
    assert abs(draws.mean() - shape / rate) < 3 * np.sqrt(shape / rate**2 / 20_000) * 1.5


def test_ng_locals_scale_equivariance():
    # GIG(p, b/s, c*s) is the law of s * GIG(p, b, c): scaling gamma by c and
    # psi by 1/c^2 multiplies the local scales by c^2 in distribution.
    rng1 = np.random.default_rng(17)
    rng2 = np.random.default_rng(17)
    gamma = np.full(20_000, 0.7)
    c = 3.0
    tau1 = draw_ng_locals(gamma, 1.0, rng1)
    tau2 = draw_ng_locals(c * gamma, 1.0 / c**2, rng2)
    q1 = np.quantile(tau1 * c**2, [0.1, 0.25, 0.5, 0.75, 0.9])
    q2 = np.quantile(tau2, [0.1, 0.25, 0.5, 0.75, 0.9])
    assert_allclose(q1, q2, rtol=0.05)


def test_theta_mh_bounds_and_flat_target():
    rng = np.random.default_rng(18)
    beta = np.zeros((1, 1))

    # Proposals outside the bounds are always rejected.
    psi_fn = lambda th: np.array([th[0]])
    theta = np.array([0.9])
    accepted_any = False
    for _ in range(200):
        new, acc = draw_theta(theta, beta, psi_fn, (0.8, 1.0), 5.0, rng)
        if acc:
            accepted_any = True
            assert 0.8 <= new[0] <= 1.0
    assert accepted_any

    # Flat target (no states): acceptance rate lands in a broad sanity band.
    beta = np.zeros((0, 1))
    psi_fn = lambda th: np.array([1.0])  # constant prior, theta-free
    theta = np.array([1e-3])
    acc_n = 0
    n = 4000
    for _ in range(n):
        theta, acc = draw_theta(theta, beta, psi_fn, (1e-10, 1.0), 0.5, rng)
        acc_n += acc
    assert 0.1 <= acc_n / n <= 0.9
