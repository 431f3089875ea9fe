"""Sparse finite mixture prior on the coefficient-block means.

Each period's coefficient block gets a Gaussian prior centred on one of G
component means; a shrinking symmetric Dirichlet prior on the weights
empties superfluous components, so the number of occupied components G0 is
inferred rather than fixed.  All conditionals are conjugate except the
Dirichlet concentration, which moves by a random-walk Metropolis step.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NumericalError
from .gig import sample_gig

_RANGE_FLOOR = 1e-8
_GIG_C_FLOOR = 1e-16


@dataclass
class MixtureState:
    """Weights, labels, component means, and the mean-shrinkage hierarchy.

    ``pi_diag`` caches the diagonal of the component-mean prior variance,
    upsilon_j * range_j^2.
    """

    weights: np.ndarray        # (G,) simplex
    labels: np.ndarray         # (T,) ints in [0, G)
    means: np.ndarray          # (G, K) component means
    common_mean: np.ndarray    # (K,)
    upsilon: np.ndarray        # (K,) positive scales
    ranges: np.ndarray         # (K,) per-coefficient range of the states
    concentration: float       # Dirichlet concentration a (weights ~ Dir(a/G))

    @property
    def n_groups(self):
        return self.weights.size

    @property
    def pi_diag(self):
        return self.upsilon * self.ranges**2

    def mean_blocks(self):
        """Per-period prior mean blocks m_t = mu_{label_t}, shape (T, K)."""
        return self.means[self.labels]


def init_mixture(n_groups, K, T, rng, concentration=1.0):
    """Diffuse starting state: uniform weights, random labels, zero means."""
    return MixtureState(
        weights=np.full(n_groups, 1.0 / n_groups),
        labels=rng.integers(0, n_groups, size=T),
        means=np.zeros((n_groups, K)),
        common_mean=np.zeros(K),
        upsilon=np.ones(K),
        ranges=np.ones(K),
        concentration=float(concentration),
    )


def count_groups(labels, n_groups):
    """Number of non-empty components, G0 = G - #{empty}."""
    return int(np.unique(labels).size) if labels.size else 0


def group_counts(labels, n_groups):
    return np.bincount(labels, minlength=n_groups)


def draw_weights(counts, pi, rng):
    """Dirichlet draw with parameters pi + T_g."""
    return rng.dirichlet(pi + counts)


def draw_indicators(states, means, weights, sigma, psi, rng):
    """Categorical label draw per period, Gumbel-max in log space.

    Pr(label_t = g) is proportional to w_g * N(states_t | mu_g, sigma_t^2 Psi);
    the sigma-dependent normalization is common across g and drops out.
    """
    scaled_b = states / np.sqrt(psi)[None, :]
    scaled_m = means / np.sqrt(psi)[None, :]
    # Squared Mahalanobis distances (T, G) without forming (T, G, K).
    sq = (
        np.sum(scaled_b**2, axis=1)[:, None]
        - 2.0 * scaled_b @ scaled_m.T
        + np.sum(scaled_m**2, axis=1)[None, :]
    )
    with np.errstate(divide="ignore"):
        logits = np.log(weights)[None, :] - 0.5 * sq / (sigma**2)[:, None]
    if not np.any(np.isfinite(logits), axis=1).all():
        raise NumericalError("all mixture components carry zero probability")
    gumbel = -np.log(-np.log(rng.uniform(size=logits.shape)))
    return np.argmax(logits + gumbel, axis=1)


def draw_means(states, labels, sigma, psi, pi_diag, common_mean, n_groups, rng):
    """Joint Gaussian draw of all component means.

    The conditional factorizes over (group, coefficient): occupied groups
    blend the precision-weighted state average with the common mean; empty
    groups are redrawn from their prior N(common_mean, Pi), keeping the
    chain irreducible.
    """
    w = 1.0 / sigma**2
    sums = np.zeros((n_groups, states.shape[1]))
    np.add.at(sums, labels, states * w[:, None])
    wsum = np.bincount(labels, weights=w, minlength=n_groups)

    prec = wsum[:, None] / psi[None, :] + 1.0 / pi_diag[None, :]
    lin = sums / psi[None, :] + (common_mean / pi_diag)[None, :]
    mean = lin / prec
    return mean + rng.standard_normal(mean.shape) / np.sqrt(prec)


def draw_common_mean(means, pi_diag, rng):
    """Flat-prior conditional: N(average of component means, Pi / G)."""
    G = means.shape[0]
    return means.mean(axis=0) + rng.standard_normal(means.shape[1]) * np.sqrt(pi_diag / G)


def draw_mean_scales(means, common_mean, ranges, rng, c0=0.6, c1=0.6):
    """GIG draw of the mean-shrinkage scales upsilon_j.

    Ranges at zero (constant coefficient path) are floored at 1e-8 with a
    warning; the G/2 term makes the c0 - G/2 shape negative for any G >= 2,
    which the GIG sampler handles through inversion.
    """
    if np.any(ranges <= 0.0):
        warnings.warn("zero coefficient range floored at 1e-8 in mean-scale draw")
    r = np.maximum(ranges, _RANGE_FLOOR)
    G = means.shape[0]
    dev = np.maximum(np.sum((means - common_mean[None, :]) ** 2, axis=0) / r**2, _GIG_C_FLOOR)
    return sample_gig(c0 - 0.5 * G, 2.0 * c1, dev, rng=rng)


def concentration_log_target(a, weights, n_groups, prior_shape=10.0, prior_rate=10.0):
    """Log density of a (up to a constant): Gamma prior x Dirichlet likelihood."""
    lp = (prior_shape - 1.0) * np.log(a) - prior_rate * a
    if weights is not None:
        piece = a / n_groups
        lp += gammaln(a) - n_groups * gammaln(piece) + (piece - 1.0) * np.sum(np.log(weights))
    return lp


def draw_concentration(a, weights, n_groups, mh_scale, rng, prior_shape=10.0, prior_rate=10.0):
    """Random-walk MH on log a; pass weights=None to target the prior alone.

    Returns (a_new, accepted).
    """
    prop = a * np.exp(mh_scale * rng.standard_normal())
    log_ratio = (
        concentration_log_target(prop, weights, n_groups, prior_shape, prior_rate)
        - concentration_log_target(a, weights, n_groups, prior_shape, prior_rate)
        + np.log(prop)
        - np.log(a)
    )
    if np.log(rng.uniform()) <= log_ratio:
        return float(prop), True
    return float(a), False


def permute_labels(state, rng):
    """Apply one uniform random relabeling jointly to (weights, means, labels).

    Leaves every label-invariant quantity (including the per-period mean
    blocks) exactly unchanged; forces the sampler to visit all symmetric
    posterior modes.
    """
    G = state.n_groups
    perm = rng.permutation(G)
    inv = np.argsort(perm)
    state.weights = state.weights[perm]
    state.means = state.means[perm]
    state.labels = inv[state.labels]
    return state


def order_by_first_coefficient(weights, means, labels):
    """Relabel so component means ascend in the first coefficient.

    Reporting-only identification for single-coefficient models; never used
    while sampling or forecasting.
    """
    perm = np.argsort(means[:, 0], kind="stable")
    inv = np.argsort(perm)
    return weights[perm], means[perm], inv[labels]


def mixture_log_joint(state, states, sigma, psi, c0=0.6, c1=0.6,
                      prior_shape=10.0, prior_rate=10.0):
    """Log joint density of all label-bearing quantities (diagnostics/tests).

    Includes states | labels, labels | weights, weights | a, means | common
    mean, and the scale and concentration priors; exactly invariant under
    joint relabeling.
    """
    m = state.mean_blocks()
    resid2 = np.sum((states - m) ** 2 / psi[None, :], axis=1)
    lp = np.sum(
        -0.5 * resid2 / sigma**2
        - 0.5 * states.shape[1] * np.log(2.0 * np.pi * sigma**2)
        - 0.5 * np.sum(np.log(psi))
    )
    with np.errstate(divide="ignore"):
        lp += np.sum(np.log(state.weights[state.labels]))
    pi_diag = state.pi_diag
    lp += np.sum(
        -0.5 * (state.means - state.common_mean[None, :]) ** 2 / pi_diag[None, :]
        - 0.5 * np.log(2.0 * np.pi * pi_diag)[None, :]
    )
    piece = state.concentration / state.n_groups
    lp += gammaln(state.concentration) - state.n_groups * gammaln(piece)
    lp += np.sum((piece - 1.0) * np.log(state.weights))
    lp += np.sum((c0 - 1.0) * np.log(state.upsilon) - c1 * state.upsilon)
    lp += (prior_shape - 1.0) * np.log(state.concentration) - prior_rate * state.concentration
    return lp
