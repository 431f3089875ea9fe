"""Gibbs-loop orchestration, draw storage, and chain diagnostics.

One sweep cycles, in order: time-invariant coefficients, their local and
global Normal-Gamma scales, the joint state draw through the SVD kernel, the
stochastic-volatility block, the prior-variance hyperparameters (MH), and -
with clustering - weights (plus the Dirichlet concentration), labels,
component and common means, mean scales, and a random label permutation.
"""

import hashlib
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from ._rng import RngBundle
from .design import BLOCK, LOWER_TRI, assemble_static, thin_svd, whiten_system
from .errors import ConfigError, NumericalError
from . import mixture as mix
from .priors import PriorSpec, PsiMetadata, build_psi, default_metadata, RIDGE
from .samplers import (
    MhAdapter,
    SvParams,
    SvPrior,
    draw_beta_tilde,
    draw_gamma,
    draw_gamma_prior,
    draw_ng_global,
    draw_ng_locals,
    draw_theta,
    posterior_moments,
    sv_pseudo_obs_block,
    sv_pseudo_obs_lowertri,
    sv_pseudo_obs_tiv,
    sv_sweep,
)

_SWEEP_STEPS_BASE = ("gamma", "ng_local", "ng_global", "states", "sv", "theta")
_SWEEP_STEPS_CLUSTER = ("weights", "labels", "means", "scales", "permute")


@dataclass
class ModelData:
    """Arrays a chain runs on: response, covariates, prior metadata."""

    y: np.ndarray
    X: np.ndarray
    psi_metadata: PsiMetadata | None = None

    @property
    def T(self):
        return self.y.size

    @property
    def K(self):
        return self.X.shape[1]


@dataclass
class RunConfig:
    """Everything that determines a chain besides the data."""

    draws: int = 30_000
    burn: int = 10_000
    thin: int = 1
    chains: int = 1
    seed: int = 0
    mode: str = BLOCK
    prior: PriorSpec = field(default_factory=PriorSpec)
    sv: bool = True
    tiv: bool = False
    store_states: bool = False
    no_data: bool = False
    trace: bool = False
    truncate_svd: bool = False

    def __post_init__(self):
        if self.burn >= self.draws:
            raise ConfigError("burn-in must be smaller than the total number of draws")
        if self.thin < 1:
            raise ConfigError("thinning must be >= 1")
        if self.tiv and self.prior.clustering:
            raise ConfigError("the time-invariant model has no states to cluster")
        self.prior.validate_mode(self.mode)

    @property
    def n_keep(self):
        return (self.draws - self.burn + self.thin - 1) // self.thin

    def to_dict(self):
        d = asdict(self)
        d["prior"] = self.prior.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("prior"), dict):
            d["prior"] = PriorSpec.from_dict(d["prior"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad run configuration: {exc}") from exc

    def digest(self):
        """Stable hash of the configuration for run manifests."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class DrawStore:
    """Kept draws of one chain, keyed by parameter group.

    Full state paths are stored only under ``store_states`` (memory is
    K*T*n_keep floats); otherwise a thinned buffer of at most
    ``state_buffer`` paths retains enough draws for per-period quantiles.
    """

    STATE_BUFFER = 256

    def __init__(self, config, data):
        n, T, K = config.n_keep, data.T, data.K
        self.config = config
        self.arrays = {
            "gamma": np.empty((n, K)),
            "theta": np.empty((n, config.prior.n_hyper)),
            "ng_global": np.empty(n),
            "sv_mu": np.empty(n),
            "sv_rho": np.empty(n),
            "sv_sig2": np.empty(n),
            "h": np.empty((n, T)),
        }
        clustering = config.prior.clustering and not config.tiv
        if clustering:
            g = config.prior.n_groups
            self.arrays["g0"] = np.empty(n, dtype=int)
            self.arrays["concentration"] = np.empty(n)
            self.arrays["weights"] = np.empty((n, g))
            self.arrays["means"] = np.empty((n, g, K))
        if not config.tiv:
            self.arrays["states_last_cum"] = np.empty((n, K))
            if config.store_states:
                self.arrays["states"] = np.empty((n, T, K))
                if clustering:
                    self.arrays["mean_path"] = np.empty((n, T, K))
            else:
                stride = max(1, n // self.STATE_BUFFER)
                nbuf = len(range(0, n, stride))
                self._state_stride = stride
                self.arrays["states_buffer"] = np.empty((nbuf, T, K))
        self.meta = {}
        self.sweep_trace = [] if config.trace else None

    def __getitem__(self, key):
        return self.arrays[key]

    def __contains__(self, key):
        return key in self.arrays

    def record(self, j, **groups):
        for key, value in groups.items():
            if key in self.arrays:
                self.arrays[key][j] = value
        if "states" in groups and "states_buffer" in self.arrays:
            if j % self._state_stride == 0:
                self.arrays["states_buffer"][j // self._state_stride] = groups["states"]

    def state_draws(self):
        """Kept (or buffered) state paths, shape (n, T, K)."""
        if "states" in self.arrays:
            return self.arrays["states"]
        if "states_buffer" in self.arrays:
            return self.arrays["states_buffer"]
        raise KeyError("this run stored no state paths (time-invariant model)")

    def beta_paths(self, gamma_included=True):
        """Coefficient paths beta_t implied by stored states: (n, T, K).

        Lower-triangular runs accumulate the shocks; adding gamma gives the
        full coefficient.
        """
        states = np.array(self.state_draws())
        if self.config.mode == LOWER_TRI:
            states = np.cumsum(states, axis=1)
        if gamma_included:
            g = self.arrays["gamma"]
            if states.shape[0] != g.shape[0]:  # buffered subset
                stride = self._state_stride
                g = g[::stride][: states.shape[0]]
            states = states + g[:, None, :]
        return states

    def g0_table(self):
        """Posterior probabilities of each occupied-component count."""
        g0 = self.arrays["g0"]
        G = self.config.prior.n_groups
        return np.bincount(g0, minlength=G + 1)[1:] / g0.size

    def to_dir(self, path):
        """Serialize to a directory of CSV files plus a JSON manifest."""
        import csv
        from pathlib import Path

        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for key, arr in self.arrays.items():
            arr = np.asarray(arr)
            flat = arr.reshape(arr.shape[0], -1)
            with open(path / f"{key}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow([f"{key}_{i}" for i in range(flat.shape[1])])
                writer.writerows(flat.tolist())
        manifest = {
            "config": self.config.to_dict(),
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "versions": _versions(),
            "meta": {k: v for k, v in self.meta.items() if _jsonable(v)},
        }
        with open(path / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, default=float)
        return path


def _jsonable(v):
    return isinstance(v, (int, float, str, bool, list, dict, type(None)))


def _versions():
    import numpy
    import scipy

    return {"tvpsvd": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__}


def run_chain(config, data, chain=0):
    """Run one Gibbs chain and return its DrawStore.

    The sweep order follows the posterior-computation recipe exactly; set
    ``config.trace`` to record the executed step names per sweep (test mode).
    (seed, config, data) fully determine every stored draw.
    """
    y = np.asarray(data.y, dtype=float)
    X = np.asarray(data.X, dtype=float)
    T, K = X.shape
    prior = config.prior
    rngs = RngBundle(config.seed, chain)

    metadata = data.psi_metadata if data.psi_metadata is not None else default_metadata(K)
    psi_fn = lambda th: build_psi(prior, th, metadata)
    bounds = prior.bounds(T, K)

    system = assemble_static(X, config.mode)
    factors = thin_svd(system, truncate=config.truncate_svd) if config.mode == BLOCK else None

    # --- state initialization -------------------------------------------
    gamma = np.zeros(K)
    tau = np.ones(K)
    ng_global = 1.0
    theta = np.full(prior.n_hyper, max(bounds[1] / 10.0, bounds[0] * 10.0))
    psi = psi_fn(theta)
    states = np.zeros((T, K))
    states_white = np.zeros((T, K))
    z_states = np.zeros(T)

    clustering = prior.clustering and not config.tiv
    mixture = None
    var_resid = max(np.var(y), 1e-12)
    if clustering:
        mixture = mix.init_mixture(
            prior.n_groups, K, T, rngs.get("mixture-init"),
            concentration=prior.concentration_fixed or 1.0,
        )
        # Seed the mixture from a k-means pass over the row-wise
        # least-squares states; starting with one wide cluster and a
        # variance at var(y) is a well-known trapped mode.
        proxy = X * (y / np.maximum(np.einsum("tk,tk->t", X, X), 1e-12))[:, None]
        centers, labels, within = _kmeans_seed(proxy, prior.n_groups, rngs.get("mixture-init"))
        mixture.means = centers
        mixture.labels = labels
        mixture.ranges = np.maximum(proxy.max(axis=0) - proxy.min(axis=0), 1e-3)
        var_resid = max(within, 1e-8)

    sv_params = SvParams(mu=float(np.log(var_resid)), rho=0.95, sig2=0.05)
    sv_prior = SvPrior(
        mu_var=prior.sv_mu_var,
        rho_a=prior.sv_rho_a,
        rho_b=prior.sv_rho_b,
        sig_shape=prior.sv_sig_shape,
        sig_rate=prior.sv_sig_rate,
    )
    h = np.full(T, sv_params.mu)
    sigma = np.exp(0.5 * h)

    theta_adapter = MhAdapter(scale=0.5)
    conc_adapter = MhAdapter(scale=0.5)
    adapt_until = config.burn // 4

    store = DrawStore(config, data)
    t_start = time.perf_counter()

    for it in range(config.draws):
        adapting = it < adapt_until
        steps = []

        # 1. time-invariant coefficients
        if config.no_data:
            gamma = draw_gamma_prior(tau, rngs.get("gamma"))
        else:
            gamma = draw_gamma(y, z_states, X, sigma, tau, rngs.get("gamma"))
        steps.append("gamma")

        # 2./3. Normal-Gamma scales
        tau = draw_ng_locals(gamma, ng_global, rngs.get("ng"), vartheta=prior.ng_vartheta)
        steps.append("ng_local")
        ng_global = draw_ng_global(
            tau, rngs.get("ng"), vartheta=prior.ng_vartheta, a0=prior.ng_a0, a1=prior.ng_a1
        )
        steps.append("ng_global")

        y_hat = y - X @ gamma
        mean_blocks = mixture.mean_blocks() if clustering else None

        # 4. joint state draw through the SVD kernel
        if not config.tiv:
            psi = psi_fn(theta)
            if config.no_data:
                states_white = rngs.get("states").standard_normal((T, K)) * np.sqrt(psi)
            else:
                if config.mode == BLOCK:
                    _, ystar = whiten_system(system, y_hat, sigma, b0=mean_blocks)
                    moments = posterior_moments(factors, psi, ystar)
                else:
                    white, ystar = whiten_system(system, y_hat, sigma)
                    factors_w = thin_svd(white, truncate=config.truncate_svd)
                    moments = posterior_moments(factors_w, psi, ystar)
                states_white = draw_beta_tilde(moments, rngs.get("states"))
            states = sigma[:, None] * states_white
            if mean_blocks is not None:
                states = states + mean_blocks
            z_states = system.matvec(states)
            steps.append("states")

        # 5. stochastic volatility
        if config.sv:
            if config.tiv:
                ystar_sv = sv_pseudo_obs_tiv(y_hat)
            elif config.mode == BLOCK:
                ystar_sv = sv_pseudo_obs_block(y_hat, X, mean_blocks, psi)
            else:
                ystar_sv = sv_pseudo_obs_lowertri(y_hat, system, states, float(psi[0]))
            h, sv_params = sv_sweep(
                ystar_sv, sv_params, sv_prior, rngs.get("sv"), h=h, no_data=config.no_data
            )
            sigma = np.exp(0.5 * h)
            steps.append("sv")

        # 6. prior-variance hyperparameters (skipped for the TIV model)
        if not config.tiv:
            base = states if mean_blocks is None else states - mean_blocks
            states_white = base / sigma[:, None]
            theta, accepted = draw_theta(
                theta, states_white, psi_fn, bounds, theta_adapter.scale, rngs.get("theta")
            )
            theta_adapter.update(accepted, adapting)
            steps.append("theta")

        # 7.-10. clustering hierarchy
        if clustering:
            counts = mix.group_counts(mixture.labels, prior.n_groups)
            a = mixture.concentration
            mixture.weights = mix.draw_weights(counts, a / prior.n_groups, rngs.get("weights"))
            if prior.concentration_fixed is None:
                a, acc = mix.draw_concentration(
                    a, mixture.weights, prior.n_groups, conc_adapter.scale,
                    rngs.get("concentration"),
                    prior_shape=prior.concentration_a, prior_rate=prior.concentration_b,
                )
                mixture.concentration = a
                conc_adapter.update(acc, adapting)
            steps.append("weights")

            mixture.labels = mix.draw_indicators(
                states, mixture.means, mixture.weights, sigma, psi, rngs.get("labels")
            )
            steps.append("labels")

            pi_diag = mixture.pi_diag
            mixture.means = mix.draw_means(
                states, mixture.labels, sigma, psi, pi_diag,
                mixture.common_mean, prior.n_groups, rngs.get("means"),
            )
            mixture.common_mean = mix.draw_common_mean(mixture.means, pi_diag, rngs.get("means"))
            steps.append("means")

            mixture.ranges = states.max(axis=0) - states.min(axis=0)
            mixture.upsilon = mix.draw_mean_scales(
                mixture.means, mixture.common_mean, mixture.ranges, rngs.get("scales"),
                c0=prior.mix_c0, c1=prior.mix_c1,
            )
            steps.append("scales")

            mix.permute_labels(mixture, rngs.get("permute"))
            steps.append("permute")

        if store.sweep_trace is not None:
            store.sweep_trace.append(steps)

        j = it - config.burn
        if j >= 0 and j % config.thin == 0:
            j //= config.thin
            rec = {
                "gamma": gamma,
                "theta": theta,
                "ng_global": ng_global,
                "sv_mu": sv_params.mu,
                "sv_rho": sv_params.rho,
                "sv_sig2": sv_params.sig2,
                "h": h,
            }
            if not config.tiv:
                rec["states"] = states
                rec["states_last_cum"] = (
                    states.sum(axis=0) if config.mode == LOWER_TRI else states[-1]
                )
            if clustering:
                rec["g0"] = mix.count_groups(mixture.labels, prior.n_groups)
                rec["concentration"] = mixture.concentration
                rec["weights"] = mixture.weights
                rec["means"] = mixture.means
                rec["mean_path"] = mixture.mean_blocks()
            store.record(j, **rec)

    store.meta.update(
        theta_accept_rate=theta_adapter.acceptance_rate,
        theta_scale=theta_adapter.scale,
        concentration_accept_rate=conc_adapter.acceptance_rate if clustering else None,
        runtime_seconds=time.perf_counter() - t_start,
        bounds=list(bounds),
    )
    return store


def _kmeans_seed(proxy, n_groups, rng):
    """k-means initialization of the mixture; returns (centers, labels, within-var)."""
    import warnings

    from scipy.cluster.vq import kmeans2

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        centers, labels = kmeans2(
            proxy, n_groups, minit="++", seed=int(rng.integers(2**31 - 1))
        )
    resid = proxy - centers[labels]
    return centers, labels, float(np.mean(resid**2))


def run_chains(config, data):
    """Run ``config.chains`` independent chains sequentially."""
    return [run_chain(config, data, chain=c) for c in range(config.chains)]


def inefficiency_factor(trace):
    """1 + 2 * sum of autocorrelations with initial-monotone truncation.

    The inverse relative effective sample size of an MCMC trace: about 1 for
    independent draws, (1+rho)/(1-rho) for an AR(1) trace.
    """
    trace = np.asarray(trace, dtype=float)
    n = trace.size
    if n < 100:
        raise ValueError("trace too short for a stable inefficiency factor")
    centered = trace - trace.mean()
    var = centered @ centered / n
    if var == 0.0:
        raise NumericalError("constant trace: inefficiency factor undefined")
    nlags = min(n - 2, 2 * int(np.sqrt(n)) + 100)
    acf = np.empty(nlags + 1)
    for k in range(nlags + 1):
        acf[k] = centered[: n - k] @ centered[k:] / n / var

    # Geyer initial monotone sequence on paired autocorrelations.
    total = 0.0
    prev = np.inf
    for m in range(0, nlags, 2):
        pair = acf[m] + acf[m + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
    return max(2.0 * total - 1.0, 1e-12)


def if_summary(traces):
    """Mean/median/min/max and 5th/95th percentiles of per-trace IFs."""
    ifs = np.array([inefficiency_factor(t) for t in traces])
    return {
        "mean": float(ifs.mean()),
        "median": float(np.median(ifs)),
        "min": float(ifs.min()),
        "max": float(ifs.max()),
        "p05": float(np.percentile(ifs, 5)),
        "p95": float(np.percentile(ifs, 95)),
    }


def rhat(traces):
    """Split-chain potential scale reduction (bonus diagnostic, not in the
    core recipe)."""
    parts = []
    for t in traces:
        t = np.asarray(t, dtype=float)
        half = t.size // 2
        parts.extend([t[:half], t[half : 2 * half]])
    parts = np.array(parts)
    m, n = parts.shape
    means = parts.mean(axis=1)
    b = n * means.var(ddof=1)
    w = parts.var(axis=1, ddof=1).mean()
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))
