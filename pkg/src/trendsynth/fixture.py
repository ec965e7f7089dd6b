"""Synthetic reference market for tests and demos.

Returns follow a two-regime (calm / turbulent) hidden Markov chain driving a
common market factor, a few sector factors and idiosyncratic noise. Regime
persistence produces volatility clustering; the shared factors produce
cross-asset correlation that rises in turbulent periods.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_rng
from .ingest import PricePanel, ReturnPanel

# (calm, turbulent)
_STAY = np.array([0.995, 0.99])
_MKT_DRIFT = np.array([0.001, -0.0015])
_MKT_VOL = np.array([0.004, 0.014])
_IDIO_MULT = np.array([1.0, 2.5])


def regime_path(n_days, rng):
    states = np.empty(n_days, dtype=np.int64)
    u = rng.random(n_days)
    s = 0
    for t in range(n_days):
        states[t] = s
        if u[t] > _STAY[s]:
            s = 1 - s
    return states


def make_fixture_returns(n_assets=50, n_days=2000, seed=0, n_sectors=5):
    """An (n_assets x n_days) ReturnPanel of pseudo-market returns."""
    if n_assets < 1 or n_days < 2:
        raise ValueError("need n_assets >= 1 and n_days >= 2")
    rng = check_rng(seed)
    states = regime_path(n_days, rng)
    market = _MKT_DRIFT[states] + _MKT_VOL[states] * rng.standard_normal(n_days)
    sectors = 0.006 * _IDIO_MULT[states] * rng.standard_normal((n_sectors, n_days))

    beta = rng.uniform(0.6, 1.4, n_assets)
    sector_of = rng.integers(n_sectors, size=n_assets)
    sector_load = rng.uniform(0.5, 1.5, n_assets)
    idio_vol = rng.uniform(0.008, 0.02, n_assets)
    idio = idio_vol[:, None] * _IDIO_MULT[states][None, :] * rng.standard_normal((n_assets, n_days))

    returns = beta[:, None] * market[None, :] + sector_load[:, None] * sectors[sector_of] + idio
    np.clip(returns, -0.5, 0.5, out=returns)
    assets = [f"A{j:04d}" for j in range(1, n_assets + 1)]
    days = [f"d{t:05d}" for t in range(1, n_days + 1)]
    return ReturnPanel(assets, days, returns)


def make_fixture(n_assets=50, n_days=2000, seed=0, closed_days=0):
    """Price panel whose returns, after dropping ``closed_days`` inserted
    all-zero days, form an ``n_assets x n_days`` return panel.

    The price panel has ``n_days + closed_days + 1`` rows.
    """
    r = make_fixture_returns(n_assets, n_days, seed)
    returns = r.returns
    if closed_days:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
        pos = np.sort(rng.choice(n_days + closed_days, size=closed_days, replace=False))
        full = np.zeros((n_assets, n_days + closed_days))
        mask = np.ones(n_days + closed_days, dtype=bool)
        mask[pos] = False
        full[:, mask] = returns
        returns = full
    start = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8,))).uniform(
        10.0, 200.0, n_assets)
    prices = np.empty((n_assets, returns.shape[1] + 1))
    prices[:, 0] = start
    prices[:, 1:] = start[:, None] * np.cumprod(1.0 + returns, axis=1)
    days = [f"d{t:05d}" for t in range(prices.shape[1])]
    return PricePanel(list(r.assets), days, prices)
