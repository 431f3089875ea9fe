"""Fast Bayesian inference for time-varying-parameter regressions.

The model is a TVP regression written as one static regression with K*T
coefficients; exact joint state draws go through the thin SVD of the
structured design, hierarchical shrinkage priors control the amount of time
variation, and an optional sparse finite mixture pools the coefficient
blocks into a data-determined number of regimes.
"""

__version__ = "0.1.0"

from .design import BLOCK, LOWER_TRI, assemble_static, thin_svd, whiten_system
from .gig import sample_gig
from .mcmc import ModelData, RunConfig, inefficiency_factor, run_chain, run_chains
from .priors import G_PRIOR, MINNESOTA, RIDGE, PriorSpec, PsiMetadata, ar_variances, build_psi, hyper_bound
from .samplers import draw_beta_tilde, posterior_moments

__all__ = [
    "BLOCK",
    "LOWER_TRI",
    "G_PRIOR",
    "MINNESOTA",
    "RIDGE",
    "ModelData",
    "PriorSpec",
    "PsiMetadata",
    "RunConfig",
    "ar_variances",
    "assemble_static",
    "build_psi",
    "draw_beta_tilde",
    "hyper_bound",
    "inefficiency_factor",
    "posterior_moments",
    "run_chain",
    "run_chains",
    "sample_gig",
    "thin_svd",
    "whiten_system",
]
