"""PCA projection-recovery: new assets that move coherently with a panel.

Returns ``R`` (S x T) are projected onto the eigenvectors of their covariance,
``Y = W @ R``. Back-projection uses the loading matrix ``W.T``: row ``s`` holds
asset ``s``'s loadings on the components, so ``W.T @ Y`` recovers ``R``.
New assets come from loading rows drawn from a Gaussian fitted to the
original rows, ``R' = W' @ Y``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_rng
from .ingest import PanelError, ReturnPanel, cumulative_prices
from .trends import detect_trends, trend_ratios

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoadingMatrix:
    """Per-asset loading rows; columns follow the components' order."""

    rows: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self):
        return self.rows.shape[0]


@dataclass(frozen=True)
class ComponentPanel:
    components: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class LoadingDistribution:
    mean: np.ndarray
    factor: np.ndarray

    @property
    def covariance(self):
        return self.factor @ self.factor.T


def _fix_signs(vecs):
    # Eigenvector signs are arbitrary: make each column's largest-magnitude entry positive.
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def pca_decompose(r):
    """Full-rank PCA of a return panel.

    Eigenvectors of the covariance of per-asset centered returns, sorted by
    descending eigenvalue, project the *uncentered* returns. Nothing is
    truncated.
    """
    x = getattr(r, "returns", r)
    x = np.asarray(x, dtype=float)
    s, t = x.shape
    if s < 2:
        raise PanelError("PCA needs at least 2 assets")
    if t <= s:
        warnings.warn(f"PCA on {s} assets with only {t} days: covariance is rank-deficient",
                      RuntimeWarning, stacklevel=2)
    cov = np.cov(x)
    try:
        vals, vecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise PanelError(f"covariance eigen-decomposition failed: {exc}") from exc
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], _fix_signs(vecs[:, order])
    components = vecs.T @ x
    return LoadingMatrix(vecs, orthonormal=True), ComponentPanel(components, vals)


def reconstruct(loadings, comps):
    return loadings.rows @ comps.components


def fit_loading_distribution(w):
    """Mean and covariance factor of the loading rows (each row is one observation)."""
    rows = w.rows
    n = rows.shape[0]
    if n < 2:
        raise ValueError("need at least 2 loading rows")
    mean = rows.mean(axis=0)
    factor = (rows - mean).T / math.sqrt(n - 1)
    return LoadingDistribution(mean, factor)


def draw_loadings(dist, count, rng=None):
    """Draw ``count`` loading rows from N(mean, cov); rows are not renormalized."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = check_rng(rng)
    z = rng.standard_normal((dist.factor.shape[1], count))
    return LoadingMatrix((dist.mean[:, None] + dist.factor @ z).T, orthonormal=False)


def max_trend_ratios(returns, theta=0.05):
    """Largest trend ratio of each asset's price path (NaN if a return is <= -1)."""
    returns = np.atleast_2d(np.asarray(returns, dtype=float))
    out = np.full(returns.shape[0], np.nan)
    ok = np.flatnonzero(np.all(returns > -1.0, axis=1))
    if ok.size:
        for j, path in zip(ok, cumulative_prices(returns[ok])):
            out[j] = trend_ratios(detect_trends(path, theta)).max()
    return out


def resolve_ratio_cap(ratio_cap, returns, theta=0.05):
    """A numeric cap, None (no cap), or "auto": the source panel's largest ratio."""
    if ratio_cap is None:
        return None
    if isinstance(ratio_cap, str):
        if ratio_cap != "auto":
            raise ValueError(f"ratio_cap must be a number, None or 'auto', got {ratio_cap!r}")
        return float(np.nanmax(max_trend_ratios(returns, theta)))
    if not ratio_cap > 0:
        raise ValueError("ratio_cap must be > 0")
    return float(ratio_cap)


def _outliers(returns, theta, ratio_cap):
    bad = np.any(returns <= -1.0, axis=1)
    if ratio_cap is None:
        return bad
    ok = np.flatnonzero(~bad)
    if ok.size:
        bad[ok] = max_trend_ratios(returns[ok], theta) > ratio_cap
    return bad


def expand_with_report(r, extra, rng=None, drop_originals=False, ratio_cap=12.0,
                       theta=0.05, max_rounds=10):
    """Append ``extra`` artificial assets to ``r``.

    Artificial assets with a trend ratio above ``ratio_cap`` (or a return
    <= -1) are discarded and redrawn, for at most ``max_rounds`` rounds.
    ``ratio_cap="auto"`` uses the largest ratio found among the original
    assets; None disables the check. Returns the panel and a dict with redraw
    statistics.
    """
    if extra < 0:
        raise ValueError("extra must be >= 0")
    if extra == 0:
        if drop_originals:
            raise ValueError("drop_originals with extra=0 leaves no assets")
        return r, {"extra": 0, "ratio_cap": None, "redraw_rounds": 0, "redrawn": 0,
                   "remaining_outliers": 0}
    loadings, _ = pca_decompose(r)
    return expand_from_loadings(r, loadings, fit_loading_distribution(loadings), extra, rng,
                                drop_originals, ratio_cap, theta, max_rounds)


def expand_from_loadings(r, loadings, dist, extra, rng=None, drop_originals=False,
                         ratio_cap=12.0, theta=0.05, max_rounds=10):
    """Expansion with an already fitted loading matrix and loading distribution."""
    if extra < 1:
        raise ValueError("extra must be >= 1")
    rng = check_rng(rng)
    if loadings.rows.shape[0] != r.returns.shape[0]:
        raise PanelError(f"loadings cover {loadings.rows.shape[0]} assets, "
                         f"panel has {r.returns.shape[0]}")
    ratio_cap = resolve_ratio_cap(ratio_cap, r.returns, theta)
    info = {"extra": int(extra), "ratio_cap": ratio_cap, "redraw_rounds": 0, "redrawn": 0,
            "remaining_outliers": 0}
    components = loadings.rows.T @ r.returns

    new_rows = draw_loadings(dist, extra, rng).rows
    new_returns = new_rows @ components
    bad = _outliers(new_returns, theta, ratio_cap)
    while bad.any() and info["redraw_rounds"] < max_rounds:
        info["redraw_rounds"] += 1
        idx = np.flatnonzero(bad)
        info["redrawn"] += int(idx.size)
        logger.info("redraw round %d: %d artificial assets", info["redraw_rounds"], idx.size)
        new_rows[idx] = draw_loadings(dist, idx.size, rng).rows
        new_returns[idx] = new_rows[idx] @ components
        bad[:] = False
        bad[idx] = _outliers(new_returns[idx], theta, ratio_cap)
    if bad.any():
        info["remaining_outliers"] = int(bad.sum())
        warnings.warn(f"{int(bad.sum())} artificial assets still exceed the trend-ratio cap "
                      f"after {max_rounds} redraw rounds", RuntimeWarning, stacklevel=2)

    names = [f"synth-{i:04d}" for i in range(1, extra + 1)]
    if drop_originals:
        return ReturnPanel(names, list(r.days), new_returns), info
    return ReturnPanel(list(r.assets) + names, list(r.days),
                       np.concatenate([r.returns, new_returns])), info


def expand_assets(r, extra, rng=None, **kwargs):
    return expand_with_report(r, extra, rng, **kwargs)[0]
