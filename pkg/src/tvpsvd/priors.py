"""Hierarchical prior specification and the per-coefficient variance matrix.

Three families for the diagonal prior variance Psi of the time-varying
coefficient blocks:

* ``"minnesota"``: own lag l gets zeta1^2 / l^2, exogenous lag l of series j
  gets (zeta2^2 / l^2) * (s2_own / s2_j), the intercept gets zeta2^2.  Two
  hyperparameters (zeta1, zeta2).
* ``"g"``: Psi = xi * Omega with Omega_jj the AR-residual variance ratio
  s2_own / s2_j for exogenous columns and 1 for own lags and the intercept.
* ``"ridge"``: Psi = xi * I (required by lower-triangular designs).

Hyperparameters carry a flat prior on [1e-10, kappa * T / K^2]; the upper
bound caps the admissible amount of period-to-period coefficient variation.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, DataError

MINNESOTA = "minnesota"
G_PRIOR = "g"
RIDGE = "ridge"
_FAMILIES = (MINNESOTA, G_PRIOR, RIDGE)

#: Lower hyperprior bound, fixed.
S0 = 1e-10

# Column tags understood by build_psi.
OWN = "own"
EXOG = "exog"
INTERCEPT = "intercept"


def hyper_bound(kappa, T, K):
    """Upper bound kappa * T / K**2 of the flat hyperprior."""
    if not 0.0 < kappa <= 1.0:
        raise ConfigError(f"kappa must lie in (0, 1], got {kappa}")
    if T < 1 or K < 1:
        raise ConfigError("T and K must be positive")
    return kappa * T / K**2


@dataclass
class PriorSpec:
    """Prior family, clustering switch, and all fixed hyperparameters.

    Attributes
    ----------
    family : {"minnesota", "g", "ridge"}
    clustering : bool
        Sparse finite mixture on the coefficient-block means.
    kappa : float
        Scale of the hyperprior upper bound, in (0, 1].
    n_groups : int
        Mixture size G (ignored without clustering).
    concentration_fixed : float or None
        Fix the Dirichlet concentration at this value instead of sampling it.
    """

    family: str = G_PRIOR
    clustering: bool = False
    kappa: float = 0.1
    n_groups: int = 12
    # Normal-Gamma prior on the time-invariant coefficients.
    ng_vartheta: float = 0.1
    ng_a0: float = 0.01
    ng_a1: float = 0.01
    # Log-volatility AR(1) hyperpriors.
    sv_mu_var: float = 10.0
    sv_rho_a: float = 25.0
    sv_rho_b: float = 5.0
    sv_sig_shape: float = 0.5
    sv_sig_rate: float = 0.5
    # Mixture hyperparameters.
    mix_c0: float = 0.6
    mix_c1: float = 0.6
    concentration_a: float = 10.0
    concentration_b: float = 10.0
    concentration_fixed: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown prior family {self.family!r}; expected {_FAMILIES}")
        if not 0.0 < self.kappa <= 1.0:
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.family == MINNESOTA and self.clustering:
            raise ConfigError(
                "the Minnesota family already groups coefficients by lag "
                "structure; combining it with clustering is rejected"
            )
        if self.clustering and self.n_groups < 1:
            raise ConfigError("clustering needs n_groups >= 1")

    @property
    def n_hyper(self):
        return 2 if self.family == MINNESOTA else 1

    def validate_mode(self, mode):
        if mode == "lowertri" and self.family != RIDGE:
            raise ConfigError("lower-triangular designs require the ridge family")
        if mode == "lowertri" and self.clustering:
            raise ConfigError("clustering is a block-mode prior (states are shocks here)")

    def bounds(self, T, K):
        return S0, hyper_bound(self.kappa, T, K)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad prior specification: {exc}") from exc


@dataclass
class PsiMetadata:
    """Column tags plus AR-residual variances feeding build_psi.

    ``tags`` holds one tuple per design column: ("own", lag),
    ("exog", series_index, lag) or ("intercept",).  ``s2_own`` and
    ``s2_exog`` are the AR(p) residual variances of the target and of each
    exogenous series, computed once on the estimation sample.
    """

    tags: list
    s2_own: float = 1.0
    s2_exog: np.ndarray | None = None


def ar_variances(series_list, p):
    """OLS residual variance of an AR(p) with intercept, per series."""
    out = np.empty(len(series_list))
    for i, x in enumerate(series_list):
        x = np.asarray(x, dtype=float)
        if x.size <= p + 1:
            raise DataError(f"series {i} too short for an AR({p}) fit")
        Y = x[p:]
        cols = [np.ones(x.size - p)] + [x[p - l : x.size - l] for l in range(1, p + 1)]
        Xreg = np.column_stack(cols)
        rank = np.linalg.matrix_rank(Xreg)
        if rank < Xreg.shape[1]:
            raise DataError(f"singular AR({p}) system for series {i} (constant series?)")
        coef, _, _, _ = np.linalg.lstsq(Xreg, Y, rcond=None)
        resid = Y - Xreg @ coef
        dof = max(Y.size - Xreg.shape[1], 1)
        out[i] = resid @ resid / dof
    return out


def build_psi(spec, theta, metadata):
    """Diagonal of the prior variance Psi for the current hyperparameters.

    Parameters
    ----------
    spec : PriorSpec
    theta : array_like
        Current hyperparameter vector: (zeta1, zeta2) for Minnesota, (xi,)
        otherwise.
    metadata : PsiMetadata
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    tags = metadata.tags
    K = len(tags)
    psi = np.empty(K)

    if spec.family == RIDGE:
        psi[:] = theta[0]
        return psi

    if spec.family == G_PRIOR:
        xi = theta[0]
        for i, tag in enumerate(tags):
            if tag[0] == EXOG:
                psi[i] = xi * metadata.s2_own / metadata.s2_exog[tag[1]]
            elif tag[0] in (OWN, INTERCEPT):
                psi[i] = xi
            else:
                raise DataError(f"unknown column tag {tag!r}")
        return psi

    zeta1, zeta2 = theta
    for i, tag in enumerate(tags):
        if tag[0] == OWN:
            psi[i] = zeta1**2 / tag[1] ** 2
        elif tag[0] == EXOG:
            psi[i] = (zeta2**2 / tag[2] ** 2) * metadata.s2_own / metadata.s2_exog[tag[1]]
        elif tag[0] == INTERCEPT:
            psi[i] = zeta2**2
        else:
            raise DataError(f"unknown column tag {tag!r}")
    return psi


def default_metadata(K):
    """Ridge-style metadata when no column structure is known (all tags own)."""
    return PsiMetadata(tags=[(INTERCEPT,)] * K, s2_own=1.0, s2_exog=None)
