"""Conditional posterior draws for the static-form TVP regression.

Everything here operates on the *whitened* system produced by
:func:`tvpsvd.design.whiten_system`: unit error variance, prior coefficient
blocks N(0, Psi) in block mode or N(0, theta I) in lower-triangular mode.
The state draw uses the thin-SVD representation of the posterior covariance

    V = D0 - D0 V_f Xi V_f' D0,   Xi = (diag(lam^2)^-1 + V_f' D0 V_f)^-1,

where Xi is diagonal for a block-diagonal design with any diagonal prior and
for a lower-triangular design with a scalar (ridge) prior.  No K*T-sized
matrix is ever formed or inverted; a single state draw costs O(T*K) in block
mode and O(T*K + T^2) in lower-triangular mode.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .design import BLOCK, LOWER_TRI
from .errors import DataError, NumericalError
from .gig import sample_gig

# Hyperparameters of the Normal-Gamma prior on the time-invariant
# coefficients; fixed, not estimated.
NG_VARTHETA = 0.1
NG_A0 = 0.01
NG_A1 = 0.01

# Floor for the squared-coefficient argument of the local-scale GIG draw;
# the exact conditional is improper at gamma_j == 0 (a measure-zero event).
_GIG_C_FLOOR = 1e-16


def draw_gamma(y, z_states, X, sigma, tau, rng):
    """Draw the time-invariant coefficients from their Gaussian conditional.

    Parameters
    ----------
    y : (T,) response.
    z_states : (T,) current fit of the time-varying part, Z @ vec(states).
    X : (T, K) covariates.
    sigma : (T,) error standard deviations.
    tau : (K,) prior variances (local Normal-Gamma scales).
    rng : Generator.
    """
    xw = X / sigma[:, None]
    yw = (y - z_states) / sigma
    prec = xw.T @ xw
    prec[np.diag_indices_from(prec)] += 1.0 / tau
    try:
        chol = scipy.linalg.cho_factor(prec, lower=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - tau > 0 prevents this
        raise NumericalError(f"non-SPD system in static-coefficient draw: {exc}") from exc
    mean = scipy.linalg.cho_solve(chol, xw.T @ yw)
    noise = scipy.linalg.solve_triangular(
        chol[0], rng.standard_normal(X.shape[1]), lower=True, trans="T"
    )
    return mean + noise


def draw_gamma_prior(tau, rng):
    """Prior draw of the time-invariant coefficients (no-data mode)."""
    return rng.standard_normal(tau.size) * np.sqrt(tau)


def draw_ng_locals(gamma, psi_global, rng, vartheta=NG_VARTHETA):
    """Local Normal-Gamma scales: tau_j ~ GIG(vartheta - 1/2, vartheta*psi, gamma_j^2)."""
    c = np.maximum(gamma**2, _GIG_C_FLOOR)
    return sample_gig(vartheta - 0.5, vartheta * psi_global, c, rng=rng)


def draw_ng_global(tau, rng, vartheta=NG_VARTHETA, a0=NG_A0, a1=NG_A1):
    """Global Normal-Gamma scale: Gamma(a0 + vartheta*K, a1 + vartheta/2 * sum tau)."""
    shape = a0 + vartheta * tau.size
    rate = a1 + 0.5 * vartheta * np.sum(tau)
    return rng.gamma(shape, 1.0 / rate)


@dataclass
class PosteriorMoments:
    """Posterior mean and implicitly factored covariance of the whitened states."""

    mu: np.ndarray          # (T, K) posterior mean
    xi: np.ndarray          # diagonal of Xi; t-indexed in block mode, sorted in lowertri
    d0: np.ndarray          # (K,) per-block prior variances
    factors: object         # SvdFactors of the whitened design
    mode: str


def _check_d0(factors, d0):
    d0 = np.asarray(d0, dtype=float)
    if d0.ndim != 1 or d0.size != factors.system.K:
        raise DataError("d0 must be a length-K vector of prior variances")
    if np.any(d0 <= 0.0):
        raise DataError("prior variances must be strictly positive")
    if factors.mode == LOWER_TRI and not np.allclose(d0, d0[0]):
        raise NumericalError(
            "Xi is not diagonal: lower-triangular designs require a scalar "
            "(ridge) prior variance"
        )
    return d0


def posterior_moments(factors, d0, ystar, b0=None):
    """Posterior mean of the whitened states plus the covariance factor bundle.

    Parameters
    ----------
    factors : SvdFactors
        Thin SVD of the whitened design.
    d0 : (K,) array
        Diagonal of the per-block prior variance (same every period).
    ystar : (T,) array
        Whitened response.
    b0 : (T, K) array, optional
        Prior mean blocks; omitted means zero (the usual case after
        whitening).

    Notes
    -----
    Block mode works entirely in time order: with row norms n_t and
    q_t = x_t' Psi x_t, the Xi diagonal is n_t^2 / (1 + q_t) and the mean
    costs one pass over the T x K data.  Lower-triangular mode uses the
    closed form mu = V diag(lam / (theta^-1 + lam^2)) U' ystar when the
    prior mean is zero.
    """
    d0 = _check_d0(factors, d0)
    system = factors.system

    if factors.mode == BLOCK:
        X = system.X
        norms2 = np.einsum("tk,tk->t", X, X)
        active = factors.active[factors.inv_perm]
        q = np.einsum("tk,k,tk->t", X, d0, X)
        xi = np.where(active, norms2 / (1.0 + q), 0.0)
        r = system.rmatvec(ystar)
        if b0 is not None:
            r = r + b0 / d0[None, :]
        rd = r * d0[None, :]
        s = np.einsum("tk,tk->t", X, rd)
        n_safe = np.where(active, norms2, 1.0)
        mu = rd - (X * d0[None, :]) * (xi * s / n_safe)[:, None]
        return PosteriorMoments(mu=mu, xi=xi, d0=d0, factors=factors, mode=BLOCK)

    theta = float(d0[0])
    lam = factors.lam
    xi = np.where(factors.active, lam**2 / (1.0 + theta * lam**2), 0.0)
    if b0 is None:
        s = np.where(factors.active, lam / (1.0 / theta + lam**2), 0.0)
        mu = factors.v(s * factors.ut(ystar))
    else:
        r = system.rmatvec(ystar) + b0 / theta
        vr = factors.vt(r)
        mu = theta * r - theta**2 * factors.v(xi * vr)
    return PosteriorMoments(mu=mu, xi=xi, d0=d0, factors=factors, mode=LOWER_TRI)


def draw_beta_tilde(moments, rng):
    """One exact draw of the whitened states via the two-noise affine map.

    Draws a ~ N(0, D0) and b ~ N(0, diag(lam^2)^-1) and returns
    mu + a - D0 V Xi (V'a + b), whose covariance is exactly the posterior
    covariance; verified against dense conjugate computation in the tests.
    """
    factors = moments.factors
    system = factors.system
    T, K = system.T, system.K
    a = rng.standard_normal((T, K)) * np.sqrt(moments.d0)[None, :]

    if moments.mode == BLOCK:
        X = system.X
        norms2 = np.einsum("tk,tk->t", X, X)
        active = factors.active[factors.inv_perm]
        n_safe = np.sqrt(np.where(active, norms2, 1.0))
        b = np.where(active, rng.standard_normal(T) / n_safe, 0.0)
        w = np.einsum("tk,tk->t", X, a) / n_safe + b
        return moments.mu + a - (X * moments.d0[None, :]) * (moments.xi * w / n_safe)[:, None]

    theta = float(moments.d0[0])
    lam_safe = np.where(factors.active, factors.lam, 1.0)
    b = np.where(factors.active, rng.standard_normal(T) / lam_safe, 0.0)
    w = factors.vt(a) + b
    return moments.mu + a - theta * factors.v(moments.xi * w)


def states_log_prior(beta_breve, psi):
    """Log density of the whitened states under their conditional prior N(0, Psi)."""
    T = beta_breve.shape[0]
    ssq = np.einsum("tk,tk->k", beta_breve, beta_breve)
    return -0.5 * (
        T * beta_breve.shape[1] * np.log(2.0 * np.pi)
        + T * np.sum(np.log(psi))
        + np.sum(ssq / psi)
    )


def draw_theta(theta, beta_breve, psi_fn, bounds, mh_scale, rng):
    """Random-walk Metropolis step for the prior-variance hyperparameters.

    The target is the conditional prior of the current whitened states times
    a flat prior on [bounds[0], bounds[1]] per component; proposals are
    log-normal with a shared scale.  Proposals outside the bounds are
    rejected outright.

    Returns
    -------
    (ndarray, bool)
        New hyperparameter vector and whether the proposal was accepted.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lo, hi = bounds
    prop = theta * np.exp(mh_scale * rng.standard_normal(theta.size))
    if np.any(prop < lo) or np.any(prop > hi):
        return theta, False
    cur_lp = states_log_prior(beta_breve, psi_fn(theta))
    prop_lp = states_log_prior(beta_breve, psi_fn(prop))
    # log-normal proposal Jacobian: q(theta -> prop) / q(prop -> theta).
    log_ratio = prop_lp - cur_lp + np.sum(np.log(prop) - np.log(theta))
    if np.log(rng.uniform()) <= log_ratio:
        return prop, True
    return theta, False


class MhAdapter:
    """Multiplicative scale adaptation targeting a 20-40% acceptance rate.

    Active only during the first quarter of burn-in; the scale is
    bit-constant afterwards.
    """

    def __init__(self, scale=0.1, batch=50, lo=0.2, hi=0.4, factor=1.1):
        self.scale = float(scale)
        self.batch = int(batch)
        self.lo, self.hi, self.factor = lo, hi, factor
        self.accepted = 0
        self.tried = 0
        self._batch_accepted = 0
        self._batch_tried = 0

    def update(self, accepted, adapting):
        self.tried += 1
        self.accepted += bool(accepted)
        if not adapting:
            return
        self._batch_tried += 1
        self._batch_accepted += bool(accepted)
        if self._batch_tried >= self.batch:
            rate = self._batch_accepted / self._batch_tried
            if rate > self.hi:
                self.scale *= self.factor
            elif rate < self.lo:
                self.scale /= self.factor
            self._batch_accepted = 0
            self._batch_tried = 0

    @property
    def acceptance_rate(self):
        return self.accepted / max(self.tried, 1)


# ---------------------------------------------------------------------------
# Stochastic volatility block
# ---------------------------------------------------------------------------

# Ten-component Gaussian mixture approximation to log chi^2_1 (Omori,
# Chib, Shephard & Nakajima 2007).
_SV_PROBS = np.array(
    [0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
     0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
)
_SV_MEANS = np.array(
    [1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
     -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
)
_SV_VARS = np.array(
    [0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
     0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
)

_SV_OFFSET_REL = 1e-4


@dataclass
class SvPrior:
    """Priors of the log-variance AR(1): level, persistence, innovation variance."""

    mu_mean: float = 0.0
    mu_var: float = 10.0
    rho_a: float = 25.0
    rho_b: float = 5.0
    sig_shape: float = 0.5
    sig_rate: float = 0.5


@dataclass
class SvParams:
    mu: float = 0.0
    rho: float = 0.95
    sig2: float = 0.05


def _sample_sv_indicators(ystar, h, rng):
    """Mixture-component indicators for pseudo-observations ystar (T, J)."""
    resid = ystar - h[:, None]
    logp = (
        np.log(_SV_PROBS)
        - 0.5 * np.log(2.0 * np.pi * _SV_VARS)
        - 0.5 * (resid[..., None] - _SV_MEANS) ** 2 / _SV_VARS
    )
    logp -= logp.max(axis=-1, keepdims=True)
    probs = np.exp(logp)
    probs /= probs.sum(axis=-1, keepdims=True)
    cum = np.cumsum(probs, axis=-1)
    u = rng.uniform(size=ystar.shape)
    return (u[..., None] > cum).sum(axis=-1)


def _draw_h_path(ystar, comps, params, rng):
    """Joint draw of the log-variance path given mixture indicators.

    The posterior precision is tridiagonal (AR(1) prior with stationary
    initialization plus independent pseudo-observations), so the draw is one
    banded Cholesky solve.
    """
    T = ystar.shape[0]
    m = _SV_MEANS[comps]
    v = _SV_VARS[comps]
    obs_prec = np.sum(1.0 / v, axis=1)
    obs_lin = np.sum((ystar - m) / v, axis=1)

    rho, sig2, mu = params.rho, params.sig2, params.mu
    diag = np.full(T, (1.0 + rho**2) / sig2)
    diag[0] = 1.0 / sig2
    diag[-1] = 1.0 / sig2
    if T == 1:
        diag[0] = (1.0 - rho**2) / sig2
    off = np.full(T - 1, -rho / sig2)

    prior_lin = np.full(T, (1.0 - rho) ** 2 / sig2) * mu
    prior_lin[0] = (1.0 - rho) / sig2 * mu
    prior_lin[-1] = (1.0 - rho) / sig2 * mu

    band = np.zeros((2, T))
    band[0, 1:] = off
    band[1, :] = diag + obs_prec
    chol = scipy.linalg.cholesky_banded(band, lower=False)
    mean = scipy.linalg.cho_solve_banded((chol, False), prior_lin + obs_lin)
    noise = scipy.linalg.solve_banded((0, 1), chol, rng.standard_normal(T))
    return mean + noise


def _draw_h_prior(T, params, rng):
    """Path draw from the AR(1) prior alone (no-data mode)."""
    h = np.empty(T)
    sd = np.sqrt(params.sig2)
    h[0] = params.mu + sd / np.sqrt(1.0 - params.rho**2) * rng.standard_normal()
    eps = rng.standard_normal(T - 1) * sd
    for t in range(1, T):
        h[t] = params.mu + params.rho * (h[t - 1] - params.mu) + eps[t - 1]
    return h


def _draw_sv_params(h, params, prior, rng):
    """Gibbs/MH updates of (mu, rho, sig2) given the log-variance path."""
    T = h.size
    rho, sig2 = params.rho, params.sig2

    # Level: Gaussian conjugate given (rho, sig2).
    prec = (1.0 - rho**2) / sig2 + (T - 1) * (1.0 - rho) ** 2 / sig2 + 1.0 / prior.mu_var
    lin = (
        (1.0 - rho**2) / sig2 * h[0]
        + (1.0 - rho) / sig2 * np.sum(h[1:] - rho * h[:-1])
        + prior.mu_mean / prior.mu_var
    )
    mu = lin / prec + rng.standard_normal() / np.sqrt(prec)

    # Persistence: independence MH, proposing from the transition-likelihood
    # Gaussian; the stationary-init factor and the Beta prior enter the ratio.
    z = h - mu
    sxx = np.sum(z[:-1] ** 2)
    if sxx > 0.0:
        rho_hat = np.sum(z[1:] * z[:-1]) / sxx
        rho_sd = np.sqrt(sig2 / sxx)
        prop = rho_hat + rho_sd * rng.standard_normal()
        if abs(prop) < 1.0:
            def log_extra(r):
                return (
                    0.5 * np.log(1.0 - r**2)
                    - 0.5 * (1.0 - r**2) * z[0] ** 2 / sig2
                    + (prior.rho_a - 1.0) * np.log((1.0 + r) / 2.0)
                    + (prior.rho_b - 1.0) * np.log((1.0 - r) / 2.0)
                )

            if np.log(rng.uniform()) <= log_extra(prop) - log_extra(rho):
                rho = prop

    # Innovation variance: the Gamma prior yields an exact GIG conditional.
    resid = z[1:] - rho * z[:-1]
    s = (1.0 - rho**2) * z[0] ** 2 + np.sum(resid**2)
    sig2 = sample_gig(prior.sig_shape - 0.5 * T, 2.0 * prior.sig_rate, s, rng=rng)

    return SvParams(mu=float(mu), rho=float(rho), sig2=float(sig2))


def sv_sweep(ystar, params, prior, rng, h=None, no_data=False):
    """One full SV block update: indicators, joint path, then parameters.

    Parameters
    ----------
    ystar : (T, J) array
        log(u^2) pseudo-observations sharing one latent path; J > 1 when
        several Gaussian terms per period inform the same variance.
    params : SvParams
    prior : SvPrior
    h : (T,) array, optional
        Current path (required unless ``no_data``).
    no_data : bool
        Draw the path from its AR(1) prior instead (prior-reproduction runs).
    """
    T = ystar.shape[0]
    if no_data:
        h_new = _draw_h_prior(T, params, rng)
    else:
        comps = _sample_sv_indicators(ystar, h, rng)
        h_new = _draw_h_path(ystar, comps, params, rng)
    params_new = _draw_sv_params(h_new, params, prior, rng)
    return h_new, params_new


def log_sq(x):
    """log(x^2) with a data-scaled additive offset.

    The offset bounds how far a single near-zero residual can drag the
    latent log-variance; an absolute machine-scale constant would make
    perfectly fitted periods produce pseudo-observations around -23 and
    pin the local variance there.
    """
    sq = np.asarray(x) ** 2
    return np.log(sq + _SV_OFFSET_REL * (np.mean(sq) + 1e-300))


def sv_pseudo_obs_block(y_hat, X, mean_blocks, psi):
    """Collapsed SV observation for a block design: states integrated out.

    With states ~ N(m_t, sigma_t^2 Psi), the period-t residual satisfies
    (y_hat_t - x_t' m_t) / s_t = sigma_t u_t with s_t^2 = x_t' Psi x_t + 1,
    a standard univariate SV observation.
    """
    resid = y_hat if mean_blocks is None else y_hat - np.einsum("tk,tk->t", X, mean_blocks)
    scale2 = np.einsum("tk,k,tk->t", X, psi, X) + 1.0
    return log_sq(resid / np.sqrt(scale2))[:, None]


def sv_pseudo_obs_lowertri(y_hat, system, states, theta):
    """SV pseudo-observations conditional on the states (lower-triangular mode).

    Each period contributes K + 1 Gaussian terms scaled by sigma_t: the
    observation residual plus the K state shocks with prior variance
    sigma_t^2 * theta.
    """
    resid = y_hat - system.matvec(states)
    cols = np.concatenate([resid[:, None], states / np.sqrt(theta)], axis=1)
    return log_sq(cols)


def sv_pseudo_obs_tiv(y_hat):
    """SV observation for the time-invariant model (no state block)."""
    return log_sq(y_hat)[:, None]


def fit_sv(series, n_draws=3000, n_burn=1000, rng=None, prior=None):
    """Fit a pure SV model x_t = sigma_t * eps_t; returns kept draws.

    Used by the forecasting harness for the random-walk benchmark and by the
    parameter-recovery tests.

    Returns
    -------
    dict with "h" (n_keep, T), "mu", "rho", "sig2" arrays.
    """
    if rng is None:
        rng = np.random.default_rng()
    prior = prior or SvPrior()
    series = np.asarray(series, dtype=float)
    T = series.size
    ystar = log_sq(series)[:, None]

    params = SvParams(mu=float(np.log(np.var(series) + 1e-12)), rho=0.9, sig2=0.1)
    h = np.full(T, params.mu)
    keep = n_draws - n_burn
    out = {
        "h": np.empty((keep, T)),
        "mu": np.empty(keep),
        "rho": np.empty(keep),
        "sig2": np.empty(keep),
    }
    for it in range(n_draws):
        h, params = sv_sweep(ystar, params, prior, rng, h=h)
        j = it - n_burn
        if j >= 0:
            out["h"][j] = h
            out["mu"][j] = params.mu
            out["rho"][j] = params.rho
            out["sig2"][j] = params.sig2
    return out
