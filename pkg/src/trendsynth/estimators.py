"""scikit-learn style wrappers around the functional core.

Estimators take return panels shaped (n_days, n_assets), like any sklearn
feature matrix: a DataFrame indexed by day with one column per asset, a plain
array, or a ReturnPanel. Generated panels come back as DataFrames in the same
orientation.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_panel, check_rng, check_seed, check_series
from .analysis import build_trend_library
from .baselines import fit_garch11, fit_gbm, simulate_garch11, simulate_gbm
from .expand import expand_from_loadings, fit_loading_distribution, pca_decompose
from .synthesis import ScenarioSpec, TrendSequence, synthesize_scenario


class TrendScenarioGenerator(BaseEstimator):
    """Learn a trend library from a return panel and sample virtual scenarios.

    Parameters
    ----------
    theta : float
        Directional-change threshold used to split the market index into trends.
    window_len : int
        Length of the windows whose Gaussian parameters are estimated within a trend.
    first_sign : {"random", "upward", "downward"}
        Sign of the first synthesized trend.
    random_state : int or None
        Seed of the scenario RNG. The same seed always gives the same scenario.
    n_jobs : int
        Threads used to sample trends; the output does not depend on it.
    """

    def __init__(self, theta=0.05, window_len=20, first_sign="random", random_state=None,
                 n_jobs=1):
        self.theta = theta
        self.window_len = window_len
        self.first_sign = first_sign
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        panel = check_panel(X)
        self.library_ = build_trend_library(panel, self.theta, self.window_len)
        self.n_features_in_ = panel.n_assets
        self.feature_names_in_ = np.asarray(panel.assets, dtype=object)
        return self

    def sample(self, n_days, random_state=None, sequence=None):
        """A DataFrame of ``n_days`` synthesized returns, one column per asset.

        ``sequence`` optionally fixes the trend order (library indices).
        """
        check_is_fitted(self, "library_")
        seed = check_seed(self.random_state if random_state is None else random_state)
        spec = ScenarioSpec(int(n_days), seed, self.library_, self.first_sign)
        if sequence is not None and not isinstance(sequence, TrendSequence):
            sequence = TrendSequence.from_indices(self.library_, sequence)
        return synthesize_scenario(spec, sequence, n_jobs=self.n_jobs).to_frame()


class PCAAssetExpander(TransformerMixin, BaseEstimator):
    """Add artificial assets that move coherently with the fitted panel.

    ``fit`` learns the PCA loadings and a Gaussian over the per-asset loading
    rows; ``transform`` projects a panel on the components and back through
    freshly drawn loadings.
    """

    def __init__(self, n_extra=100, drop_originals=False, ratio_cap=12.0, theta=0.05,
                 max_rounds=10, random_state=None):
        self.n_extra = n_extra
        self.drop_originals = drop_originals
        self.ratio_cap = ratio_cap
        self.theta = theta
        self.max_rounds = max_rounds
        self.random_state = random_state

    def fit(self, X, y=None):
        panel = check_panel(X)
        self.loadings_, comps = pca_decompose(panel)
        self.eigenvalues_ = comps.eigenvalues
        self.loading_distribution_ = fit_loading_distribution(self.loadings_)
        self.n_features_in_ = panel.n_assets
        self.feature_names_in_ = np.asarray(panel.assets, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "loadings_")
        panel = check_panel(X)
        if panel.n_assets != self.n_features_in_:
            raise ValueError(f"X has {panel.n_assets} assets, expander was fitted on "
                             f"{self.n_features_in_}")
        if self.n_extra == 0:
            if self.drop_originals:
                raise ValueError("drop_originals with n_extra=0 leaves no assets")
            self.expansion_info_ = {"extra": 0, "ratio_cap": None, "redraw_rounds": 0,
                                    "redrawn": 0, "remaining_outliers": 0}
            return panel.to_frame()
        out, self.expansion_info_ = expand_from_loadings(
            panel, self.loadings_, self.loading_distribution_, self.n_extra,
            check_rng(self.random_state), self.drop_originals, self.ratio_cap, self.theta,
            self.max_rounds)
        return out.to_frame()


class GBM(BaseEstimator):
    """Constant-drift, constant-volatility return model."""

    def fit(self, X, y=None):
        self.params_ = fit_gbm(check_series(X))
        return self

    def sample(self, n_days, random_state=None):
        check_is_fitted(self, "params_")
        return simulate_gbm(self.params_, int(n_days), check_rng(random_state))


class Garch11(BaseEstimator):
    """GARCH(1,1) with a constant mean, fitted by maximum likelihood."""

    def __init__(self, innovation="gaussian", max_iter=500, tol=1e-8):
        self.innovation = innovation
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        res = fit_garch11(check_series(X, min_len=3), self.innovation, self.max_iter, self.tol)
        self.params_ = res.params
        self.loglik_ = res.loglik
        self.n_iter_ = res.n_iter
        return self

    def sample(self, n_days, random_state=None):
        check_is_fitted(self, "params_")
        return simulate_garch11(self.params_, int(n_days), check_rng(random_state))

