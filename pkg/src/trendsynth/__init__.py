"""Trend-based synthesis of long, high-dimensional financial return scenarios."""

from importlib.metadata import PackageNotFoundError, version

from .analysis import LibraryError, TrendLibrary, build_trend_library
from .baselines import (GarchFitError, GarchParams, GbmParams, fit_garch11, fit_gbm,
                        simulate_garch11, simulate_gbm)
from .estimators import GBM, Garch11, PCAAssetExpander, TrendScenarioGenerator
from .expand import expand_assets, expand_with_report, pca_decompose
from .ingest import (PanelError, PanelParseError, PricePanel, ReturnPanel, drop_closed_days,
                     load_price_csv, load_returns_csv, to_returns)
from .metrics import DegenerateSeriesError, MetricsConfig, MetricsReport, panel_report
from .synthesis import ScenarioSpec, TrendSequence, synthesize_scenario
from .trends import TrendSegment, detect_trends, equal_weight_index, trend_ratio

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "DegenerateSeriesError", "GBM", "Garch11", "GarchFitError", "GarchParams", "GbmParams",
    "LibraryError", "MetricsConfig", "MetricsReport", "PCAAssetExpander", "PanelError",
    "PanelParseError", "PricePanel", "ReturnPanel", "ScenarioSpec", "TrendLibrary",
    "TrendScenarioGenerator", "TrendSegment", "TrendSequence", "build_trend_library",
    "detect_trends", "drop_closed_days", "equal_weight_index", "expand_assets",
    "expand_with_report", "fit_garch11", "fit_gbm", "load_price_csv", "load_returns_csv",
    "panel_report", "pca_decompose", "simulate_garch11", "simulate_gbm", "synthesize_scenario",
    "to_returns", "trend_ratio",
]
