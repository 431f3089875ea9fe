"""Static-form design matrices and their exact thin SVD.

A time-varying-coefficient regression stacked over T periods is a single
regression with a T x (K*T) design.  Two structures arise:

* ``"block"``: row t loads only on coefficient block t (white-noise-style
  deviations).  The design is never materialized; the thin SVD has a closed
  form with singular values ||x_t||.
* ``"lowertri"``: row t loads on all blocks s <= t (the coefficient blocks
  are then shocks of a random-walk path).  The thin SVD is obtained from the
  symmetric eigendecomposition of the T x T Gram matrix, so the K*T-wide
  design is never materialized either.

All public operations are pure; systems and factors are treated as immutable
and safe to share across threads.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DataError, SingularValueUnderflow

BLOCK = "block"
LOWER_TRI = "lowertri"
_MODES = (BLOCK, LOWER_TRI)

#: Relative threshold under which a singular value counts as underflowed.
SVD_RTOL = 1e-12


@dataclass(frozen=True)
class StaticSystem:
    """Structured T x (K*T) design with optional row/column scaling.

    ``row_scale`` and ``col_scale`` hold the diagonal scalings produced by
    whitening a lower-triangular system; they stay ``None`` for block mode
    where whitening leaves the design untouched.
    """

    X: np.ndarray
    mode: str
    row_scale: np.ndarray | None = None
    col_scale: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def T(self):
        return self.X.shape[0]

    @property
    def K(self):
        return self.X.shape[1]

    def matvec(self, coefs):
        """Z @ vec(coefs) for coefs of shape (T, K)."""
        if self.mode == BLOCK:
            return np.einsum("tk,tk->t", self.X, coefs)
        scaled = coefs if self.col_scale is None else coefs * self.col_scale[:, None]
        path = np.cumsum(scaled, axis=0)
        out = np.einsum("tk,tk->t", self.X, path)
        if self.row_scale is not None:
            out = out * self.row_scale
        return out

    def rmatvec(self, v):
        """Z' @ v reshaped to (T, K)."""
        if self.mode == BLOCK:
            return self.X * v[:, None]
        vr = v if self.row_scale is None else v * self.row_scale
        w = self.X * vr[:, None]
        w = np.cumsum(w[::-1], axis=0)[::-1]
        if self.col_scale is not None:
            w = w * self.col_scale[:, None]
        return w

    def gram(self):
        """Z @ Z' as a dense T x T matrix (lower-triangular mode only)."""
        if self.mode != LOWER_TRI:
            raise DataError("gram() is only needed for lower-triangular systems")
        xxt = self._cache.get("xxt")
        if xxt is None:
            xxt = self.X @ self.X.T
            self._cache["xxt"] = xxt
        cs2 = np.ones(self.T) if self.col_scale is None else self.col_scale**2
        cum = np.cumsum(cs2)
        idx = np.minimum.outer(np.arange(self.T), np.arange(self.T))
        g = xxt * cum[idx]
        if self.row_scale is not None:
            g = g * np.outer(self.row_scale, self.row_scale)
        return g


def assemble_static(X, mode):
    """Wrap a T x K covariate matrix as a static-form system.

    Parameters
    ----------
    X : array_like, shape (T, K)
        Stacked covariate rows x_t'.
    mode : {"block", "lowertri"}
        Block-diagonal or lower-triangular stacking.
    """
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError("X must be a T x K matrix with T >= 1 and K >= 1")
    if mode not in _MODES:
        raise DataError(f"unknown mode {mode!r}; expected one of {_MODES}")
    return StaticSystem(X=X, mode=mode)


@dataclass(frozen=True)
class SvdFactors:
    """Exact rank-T thin SVD of a static system, Z = U diag(lam) V'.

    Stored structurally: block mode keeps a permutation instead of U and the
    normalized covariate rows instead of V; lower-triangular mode keeps the
    dense T x T factor U plus a reference to the system so V = Z' U Lam^-1
    is applied on the fly.  ``active`` flags directions whose singular value
    survived the underflow threshold (all True unless truncation was asked
    for).
    """

    system: StaticSystem
    lam: np.ndarray
    active: np.ndarray
    perm: np.ndarray | None = None
    inv_perm: np.ndarray | None = None
    U: np.ndarray | None = None

    @property
    def T(self):
        return self.lam.size

    @property
    def mode(self):
        return self.system.mode

    def ut(self, y):
        """U' @ y."""
        if self.mode == BLOCK:
            return y[self.perm]
        return self.U.T @ y

    def u(self, w):
        """U @ w."""
        if self.mode == BLOCK:
            return w[self.inv_perm]
        return self.U @ w

    def vt(self, coefs):
        """V' @ vec(coefs) for coefs of shape (T, K)."""
        lam_safe = np.where(self.lam > 0, self.lam, 1.0)
        if self.mode == BLOCK:
            dots = np.einsum("tk,tk->t", self.system.X, coefs)
            return np.where(self.active, dots[self.perm] / lam_safe, 0.0)
        out = self.ut(self.system.matvec(coefs)) / lam_safe
        return np.where(self.active, out, 0.0)

    def v(self, s):
        """V @ s reshaped to (T, K)."""
        lam_safe = np.where(self.lam > 0, self.lam, 1.0)
        s_eff = np.where(self.active, s / lam_safe, 0.0)
        if self.mode == BLOCK:
            return self.system.X * s_eff[self.inv_perm][:, None]
        return self.system.rmatvec(self.u(s_eff))


def thin_svd(system, truncate=False, rtol=SVD_RTOL):
    """Exact thin SVD of a static system.

    Block mode is closed form: singular values are the row norms ||x_t||,
    U is a sorting permutation and the t-th column of V is the unit row
    x_t / ||x_t|| placed in block t.  Lower-triangular mode goes through the
    T x T Gram matrix; the wide design never exists in memory.

    Parameters
    ----------
    system : StaticSystem
    truncate : bool
        If True, directions with singular value below ``rtol`` times the
        largest are dropped (prior-only in the downstream posterior) instead
        of raising :class:`SingularValueUnderflow`.
    """
    X = system.X
    norms = np.linalg.norm(X, axis=1)
    if system.mode == LOWER_TRI and system.row_scale is not None:
        norms = norms * system.row_scale

    if system.mode == BLOCK:
        lam_max = norms.max()
        bad = norms < rtol * lam_max
        if bad.any() and not truncate:
            t_bad = int(np.argmin(norms))
            raise SingularValueUnderflow(t_bad, norms[t_bad], rtol * lam_max)
        perm = np.argsort(-norms, kind="stable")
        inv_perm = np.argsort(perm, kind="stable")
        lam = norms[perm]
        active = lam >= rtol * lam_max
        return SvdFactors(
            system=system, lam=lam, active=active, perm=perm, inv_perm=inv_perm
        )

    g = system.gram()
    evals, evecs = scipy.linalg.eigh(g)
    evals = evals[::-1]
    evecs = evecs[:, ::-1]
    lam = np.sqrt(np.clip(evals, 0.0, None))
    lam_max = lam[0]
    active = lam >= rtol * lam_max
    if not active.all() and not truncate:
        t_bad = int(np.argmin(norms))
        raise SingularValueUnderflow(t_bad, lam.min(), rtol * lam_max)
    return SvdFactors(system=system, lam=lam, active=active, U=np.ascontiguousarray(evecs))


def whiten_system(system, y_hat, sigma, b0=None):
    """Standardize a heteroskedastic system to unit error variance.

    Block mode substitutes coef_t = b0_t + sigma_t * coef*_t, which leaves
    the design (and hence its SVD) unchanged; only the response moves.
    Lower-triangular mode rescales rows by 1/sigma_t and coefficient blocks
    by sigma_s, so the SVD of the returned system must be recomputed whenever
    sigma changes.

    Parameters
    ----------
    system : StaticSystem
        Unwhitened system (no scales attached).
    y_hat : array, shape (T,)
        Response net of any time-invariant component.
    sigma : array, shape (T,)
        Per-period error standard deviations, all positive.
    b0 : array, shape (T, K), optional
        Prior mean blocks (block mode only; the lower-triangular prior mean
        is zero).

    Returns
    -------
    (StaticSystem, ndarray)
        The standardized system and response.  In block mode the system is
        the input object itself.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0) or not np.all(np.isfinite(sigma)):
        raise DataError("sigma must be strictly positive and finite")
    y_hat = np.asarray(y_hat, dtype=float)

    if system.mode == BLOCK:
        shifted = y_hat if b0 is None else y_hat - np.einsum("tk,tk->t", system.X, b0)
        return system, shifted / sigma
    if b0 is not None and np.any(b0 != 0.0):
        raise DataError("lower-triangular mode uses a zero prior mean")
    white = StaticSystem(
        X=system.X, mode=LOWER_TRI, row_scale=1.0 / sigma, col_scale=sigma.copy()
    )
    if "xxt" in system._cache:
        white._cache["xxt"] = system._cache["xxt"]
    return white, y_hat / sigma
