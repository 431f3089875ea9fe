"""Generalized inverse Gaussian random variates.

Parameterization used throughout the package:

    p(x) \\propto x**(p - 1) * exp(-(b*x + c/x) / 2),  x > 0.

Draws are exact (rejection based, no approximation).  The implementation
follows the ratio-of-uniforms samplers of Hormann & Leydold (2014), with a
three-piece composition sampler for the near-degenerate corner
(0 < lambda < 1 with tiny two-parameter omega) where ratio-of-uniforms
becomes inefficient.  Boundary cases reduce to Gamma (c == 0, p > 0) and
inverse Gamma (b == 0, p < 0).  All samplers are vectorized elementwise over
heterogeneous parameter arrays.

scipy.stats.geninvgauss implements the same distribution but is an order of
magnitude too slow inside a Gibbs sweep; the test-suite uses it as the
reference CDF only.
"""

import numpy as np

from .errors import NumericalError

_MAX_REJECTION_ROUNDS = 5000


def _log_kernel(x, lam, om):
    return (lam - 1.0) * np.log(x) - 0.5 * om * (x + 1.0 / x)


def _mode(lam, om):
    # Two algebraically equal forms; the second stays accurate for small om.
    hi = lam >= 1.0
    num = np.where(hi, (lam - 1.0) + np.hypot(lam - 1.0, om), om)
    den = np.where(hi, om, (1.0 - lam) + np.hypot(1.0 - lam, om))
    return num / den


def _rejection_loop(n, propose, rng):
    """Run `propose(idx, rng) -> (x, accept)` until every slot is filled."""
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(_MAX_REJECTION_ROUNDS):
        x, ok = propose(todo, rng)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
        if todo.size == 0:
            return out
    raise NumericalError("GIG rejection sampler stalled")


def _rou_shifted(lam, om, rng):
    """Mode-shifted ratio of uniforms; efficient for lam > 1 or om > 1."""
    m = _mode(lam, om)
    lg_m = _log_kernel(m, lam, om)

    # Stationary points of (x - m)*sqrt(kernel): cubic with one negative root
    # and two positive roots bracketing the mode.
    a2 = -(m + 2.0 * (lam + 1.0) / om)
    a1 = 2.0 * (lam - 1.0) * m / om - 1.0
    a0 = m
    pp = a1 - a2 * a2 / 3.0
    qq = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    pp = np.minimum(pp, -1e-300)
    rr = np.sqrt(-pp / 3.0)
    arg = np.clip(3.0 * qq / (2.0 * pp * rr), -1.0, 1.0)
    phi = np.arccos(arg)
    shift = -a2 / 3.0
    roots = np.stack(
        [2.0 * rr * np.cos(phi / 3.0 - 2.0 * np.pi * k / 3.0) + shift for k in range(3)], axis=-1
    )
    roots = np.sort(roots, axis=-1)
    x_minus, x_plus = roots[..., 1], roots[..., 2]

    u_lo = (x_minus - m) * np.exp(0.5 * (_log_kernel(x_minus, lam, om) - lg_m))
    u_hi = (x_plus - m) * np.exp(0.5 * (_log_kernel(x_plus, lam, om) - lg_m))

    def propose(idx, rng):
        u = rng.uniform(u_lo[idx], u_hi[idx])
        v = rng.uniform(0.0, 1.0, size=idx.size)
        x = u / v + m[idx]
        ok = x > 0.0
        xs = np.where(ok, x, 1.0)
        ok &= 2.0 * np.log(v) <= _log_kernel(xs, lam[idx], om[idx]) - lg_m[idx]
        return x, ok

    return _rejection_loop(lam.size, propose, rng)


def _rou_plain(lam, om, rng):
    """Ratio of uniforms without shift; covers lam <= 1 with moderate om."""
    m = _mode(lam, om)
    lg_m = _log_kernel(m, lam, om)
    # argmax of x**2 * kernel(x) is the mode of a GIG with lam + 2.
    x_dag = ((lam + 1.0) + np.hypot(lam + 1.0, om)) / om
    u_hi = x_dag * np.exp(0.5 * (_log_kernel(x_dag, lam, om) - lg_m))

    def propose(idx, rng):
        u = rng.uniform(0.0, u_hi[idx])
        v = rng.uniform(0.0, 1.0, size=idx.size)
        x = u / v
        ok = x > 0.0
        xs = np.where(ok, x, 1.0)
        ok &= 2.0 * np.log(v) <= _log_kernel(xs, lam[idx], om[idx]) - lg_m[idx]
        return x, ok

    return _rejection_loop(lam.size, propose, rng)


def _composition(lam, om, rng):
    """Two-piece rejection for 0 < lam < 1 with small om.

    Head envelope x**(lam-1) on (0, 2/om], exponential tail beyond;
    acceptance stays bounded away from zero as om -> 0.
    """
    x_star = 2.0 / om
    a_head = x_star**lam / lam
    a_tail = x_star**lam * np.exp(-1.0)
    total = a_head + a_tail

    def propose(idx, rng):
        k = idx.size
        la, omg = lam[idx], om[idx]
        xs = x_star[idx]
        u = rng.uniform(0.0, 1.0, size=k)

        x = np.empty(k)
        log_acc = np.empty(k)
        head = rng.uniform(0.0, total[idx]) < a_head[idx]
        tail = ~head

        # Head: inverse-power sample, accept with the dropped exp factor.
        x[head] = xs[head] * u[head] ** (1.0 / la[head])
        log_acc[head] = -0.5 * omg[head] * (x[head] + 1.0 / x[head])

        # Tail: envelope x_star**(lam-1) * exp(-om*x/2).
        x[tail] = xs[tail] + rng.exponential(2.0 / omg[tail])
        log_acc[tail] = (la[tail] - 1.0) * (np.log(x[tail]) - np.log(xs[tail])) - (
            0.5 * omg[tail] / x[tail]
        )

        ok = np.log(rng.uniform(0.0, 1.0, size=k)) <= log_acc
        return x, ok

    return _rejection_loop(lam.size, propose, rng)


def sample_gig(p, b, c, size=None, rng=None):
    """Draw from GIG(p, b, c) with density proportional to x**(p-1)*exp(-(b*x+c/x)/2).

    Parameters
    ----------
    p, b, c : float or array_like
        Distribution parameters, broadcast against each other.  Valid domain:
        b > 0 and c > 0 for any real p; c == 0 requires p > 0 (Gamma limit);
        b == 0 requires p < 0 (inverse-Gamma limit).
    size : int or tuple, optional
        Number of draws, compatible with the broadcast parameter shape.
        Omit for one draw per parameter tuple.
    rng : numpy.random.Generator, optional

    Returns
    -------
    float or ndarray
        Scalar when all parameters are scalars and ``size`` is None.
    """
    if rng is None:
        rng = np.random.default_rng()

    p_arr, b_arr, c_arr = np.broadcast_arrays(
        np.asarray(p, dtype=float), np.asarray(b, dtype=float), np.asarray(c, dtype=float)
    )
    scalar_out = p_arr.ndim == 0 and size is None
    shape = p_arr.shape if size is None else size
    p_arr = np.broadcast_to(p_arr, shape).ravel().copy()
    b_arr = np.broadcast_to(b_arr, shape).ravel().copy()
    c_arr = np.broadcast_to(c_arr, shape).ravel().copy()

    if not (
        np.all(np.isfinite(p_arr)) and np.all(np.isfinite(b_arr)) and np.all(np.isfinite(c_arr))
    ):
        raise ValueError("GIG parameters must be finite")
    if np.any(b_arr < 0.0) or np.any(c_arr < 0.0):
        raise ValueError("GIG parameters require b >= 0 and c >= 0")

    out = np.empty(p_arr.shape)

    gamma_lim = c_arr == 0.0
    invgamma_lim = (b_arr == 0.0) & ~gamma_lim
    if np.any(gamma_lim):
        if np.any(p_arr[gamma_lim] <= 0.0) or np.any(b_arr[gamma_lim] == 0.0):
            raise ValueError("GIG with c == 0 requires p > 0 and b > 0")
        out[gamma_lim] = rng.gamma(p_arr[gamma_lim], 2.0 / b_arr[gamma_lim])
    if np.any(invgamma_lim):
        if np.any(p_arr[invgamma_lim] >= 0.0):
            raise ValueError("GIG with b == 0 requires p < 0 and c > 0")
        out[invgamma_lim] = c_arr[invgamma_lim] / (2.0 * rng.gamma(-p_arr[invgamma_lim], 1.0))

    main = ~(gamma_lim | invgamma_lim)
    if np.any(main):
        lam = np.abs(p_arr[main])
        om = np.sqrt(b_arr[main] * c_arr[main])
        alpha = np.sqrt(c_arr[main] / b_arr[main])
        draws = np.empty(lam.shape)

        shifted = (lam > 1.0) | (om > 1.0)
        comp_bound = np.minimum(0.5, (2.0 / 3.0) * np.sqrt(np.maximum(1.0 - lam, 0.0)))
        comp = ~shifted & (lam > 0.0) & (om <= comp_bound)
        plain = ~shifted & ~comp
        if np.any(shifted):
            draws[shifted] = _rou_shifted(lam[shifted], om[shifted], rng)
        if np.any(comp):
            draws[comp] = _composition(lam[comp], om[comp], rng)
        if np.any(plain):
            draws[plain] = _rou_plain(lam[plain], om[plain], rng)

        neg = p_arr[main] < 0.0
        draws[neg] = 1.0 / draws[neg]
        out[main] = alpha * draws

    if scalar_out:
        return float(out[0])
    return out.reshape(shape)
