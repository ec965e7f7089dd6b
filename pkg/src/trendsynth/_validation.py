"""Input coercion shared by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array

from .ingest import ReturnPanel, check_returns


def check_rng(random_state=None):
    """Turn None, an int seed, or a Generator into a ``numpy.random.Generator``."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    raise ValueError(f"{random_state!r} cannot seed a numpy Generator")


def check_seed(random_state):
    """A 64-bit integer seed for substream derivation; None draws one from OS entropy."""
    if random_state is None:
        return int(np.random.SeedSequence().entropy % 2**64)
    if isinstance(random_state, numbers.Integral) and 0 <= int(random_state) < 2**64:
        return int(random_state)
    raise ValueError("random_state must be None or an integer in [0, 2**64)")


def check_panel(X, min_days=2):
    """Coerce estimator input to a ReturnPanel.

    ``X`` is a ReturnPanel, a DataFrame indexed by day with one column per
    asset, or an array of shape (n_days, n_assets).
    """
    if isinstance(X, ReturnPanel):
        return check_returns(X)
    if isinstance(X, pd.DataFrame):
        assets = [str(c) for c in X.columns]
        days = [str(d) for d in X.index]
    else:
        assets = days = None
    values = check_array(X, dtype=np.float64, ensure_min_samples=min_days)
    n_days, n_assets = values.shape
    assets = assets or [f"asset-{j:04d}" for j in range(1, n_assets + 1)]
    days = days or [str(t) for t in range(n_days)]
    return check_returns(ReturnPanel(assets, days, values.T.copy()))


def check_series(x, min_len=2, name="series"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 2 and 1 in x.shape:
        x = x.ravel()
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if x.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x
