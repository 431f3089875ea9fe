"""Synthetic data generating processes for calibration and tests."""

import numpy as np


def step_mean_path(T=160):
    """Four-regime step path for the coefficient mean.

    m_t = 3*I(t <= 60) + 1*I(60 < t <= 85) - 3*I(86 < t <= 120) - 1*I(t > 120)
    on t = 1..T.  Note the formula leaves t = 86 uncovered (m_86 = 0); it is
    reproduced verbatim rather than repaired.
    """
    t = np.arange(1, T + 1)
    return (
        3.0 * (t <= 60)
        + 1.0 * ((t > 60) & (t <= 85))
        - 3.0 * ((t > 86) & (t <= 120))
        - 1.0 * (t > 120)
    )


def simulate_step(T=160, seed=0, obs_sd=0.1, state_sd=0.1):
    """Step-mean DGP: y_t = beta_t + eps, beta_t ~ N(m_t, state_sd^2)."""
    rng = np.random.default_rng(seed)
    m = step_mean_path(T)
    states = m + state_sd * rng.standard_normal(T)
    y = states + obs_sd * rng.standard_normal(T)
    return {
        "y": y,
        "X": np.ones((T, 1)),
        "states": states[:, None],
        "mean_path": m,
    }


def simulate_rw(T=160, seed=0, obs_sd=0.1, init=3.0, innovation_sd=1.0):
    """Random-walk DGP: beta_t = beta_{t-1} + N(0, innovation_sd^2), beta_0 = init."""
    rng = np.random.default_rng(seed)
    states = init + np.cumsum(innovation_sd * rng.standard_normal(T))
    y = states + obs_sd * rng.standard_normal(T)
    return {
        "y": y,
        "X": np.ones((T, 1)),
        "states": states[:, None],
        "mean_path": None,
    }


def simulate_macro_panel(T=120, n_exog=5, seed=0):
    """Small synthetic macro panel: a price level plus exogenous indicators.

    Two common factors drive a persistent inflation process and the panel of
    indicators; half the indicators are positive "level" series (transform
    code 5), the rest stationary rates (code 1).  Scaled loosely like
    quarterly data; used by the forecasting smoke tests and the simulate
    command.
    """
    rng = np.random.default_rng(seed)
    n_raw = T + 8  # headroom for transforms and lags
    factors = np.zeros((n_raw, 2))
    for t in range(1, n_raw):
        factors[t] = 0.8 * factors[t - 1] + rng.standard_normal(2) * 0.5

    infl = np.zeros(n_raw)
    for t in range(1, n_raw):
        infl[t] = (
            0.5 * infl[t - 1]
            + 0.3 * factors[t, 0]
            - 0.2 * factors[t, 1]
            + 0.4 * rng.standard_normal()
        )
    price = 100.0 * np.exp(np.cumsum(infl) / 100.0)

    names, codes, cols = [], {}, []
    loadings = rng.uniform(-1.0, 1.0, size=(n_exog, 2))
    for j in range(n_exog):
        base = factors @ loadings[j] + 0.6 * rng.standard_normal(n_raw)
        if j % 2 == 0:
            series = 50.0 * np.exp(np.cumsum(base) / 200.0)
            codes[f"x{j}"] = 5
        else:
            series = base
            codes[f"x{j}"] = 1
        names.append(f"x{j}")
        cols.append(series)

    return {
        "price": price,
        "exog": np.column_stack(cols),
        "names": names,
        "codes": codes,
    }
