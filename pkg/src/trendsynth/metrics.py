"""Stylized-facts battery for real or simulated return panels.

Moments use population (biased) estimators and kurtosis is *not* excess
(Gaussian = 3). Autocorrelations use the global mean and the biased
``1/n`` denominator.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .ingest import cumulative_prices
from .trends import detect_trends, equal_weight_index, index_returns, trend_ratio


class DegenerateSeriesError(ValueError):
    pass


def _central_moments(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0 or np.all(x == x[0]):
        raise DegenerateSeriesError("degenerate series")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if not m2 > 0:
        raise DegenerateSeriesError("degenerate series")
    return d, m2


def kurtosis(series):
    d, m2 = _central_moments(series)
    return float(np.mean(d**4) / m2**2)


def skewness(series):
    d, m2 = _central_moments(series)
    return float(np.mean(d**3) / m2**1.5)


def rolling_moments(series, window=180, step=5):
    """(kurtosis, skewness) for windows starting at 0, step, 2*step, ...

    Returns an (n_windows, 2) array; degenerate windows hold NaN.
    """
    x = np.asarray(series, dtype=float)
    if window < 4 or step < 1:
        raise ValueError("window must be >= 4 and step >= 1")
    if x.size < window:
        raise ValueError(f"series of length {x.size} is shorter than window {window}")
    w = sliding_window_view(x, window)[::step]
    d = w - w.mean(axis=1, keepdims=True)
    d2 = d * d
    m2 = d2.mean(axis=1)
    flat = (w.max(axis=1) == w.min(axis=1)) | ~(m2 > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.einsum("ij,ij->i", d2, d2) / window / m2**2
        skew = np.einsum("ij,ij->i", d2, d) / window / m2**1.5
    out = np.column_stack([kurt, skew])
    out[flat] = np.nan
    return out


def acf_matrix(x, max_lag):
    """Row-wise sample ACF at lags 1..max_lag of an (S, T) array; NaN rows if degenerate."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    if n <= max_lag:
        raise ValueError(f"series length {n} must exceed max_lag {max_lag}")
    d = x - x.mean(axis=1, keepdims=True)
    c0 = np.einsum("ij,ij->i", d, d)
    flat = np.all(x == x[:, :1], axis=1) | ~(c0 > 0)
    out = np.empty((x.shape[0], max_lag))
    for k in range(1, max_lag + 1):
        out[:, k - 1] = np.einsum("ij,ij->i", d[:, :-k], d[:, k:])
    with np.errstate(divide="ignore", invalid="ignore"):
        out /= c0[:, None]
    out[flat] = np.nan
    return out


def acf(series, max_lag):
    """Sample autocorrelation at lags 1..max_lag."""
    x = np.asarray(series, dtype=float)
    _central_moments(x)
    return acf_matrix(x[None, :], max_lag)[0]


def avg_abs_acf(series, max_lag):
    return float(np.mean(np.abs(acf(series, max_lag))))


def acf_bound(n):
    """Approximate 95% band for a white-noise ACF, 2 / sqrt(n)."""
    return 2.0 / math.sqrt(n)


def correlation_map(r, range=None):
    """Pearson correlation matrix over the day interval ``range = (start, stop)``.

    Assets that are constant over the interval get NaN rows and columns.
    """
    x = np.asarray(getattr(r, "returns", r), dtype=float)
    if range is not None:
        x = x[:, range[0]:range[1]]
    if x.shape[1] < 3:
        raise ValueError("correlation interval must span at least 3 days")
    d = x - x.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.einsum("ij,ij->i", d, d))
    flat = np.all(x == x[:, :1], axis=1) | ~(norm > 0)
    norm[flat] = np.nan
    c = (d @ d.T) / np.outer(norm, norm)
    np.clip(c, -1.0, 1.0, out=c)
    good = ~flat
    c[good, good] = 1.0
    return c


def moving_average(x, window):
    """Trailing mean over ``window`` points; the first points average what exists."""
    x = np.asarray(x, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def directional_similarity(r, window=50, step=1):
    """Share of assets whose price moved the same way as the index.

    Index and asset prices are both smoothed by a ``window``-day trailing
    moving average; over each window of ``window`` days the direction is the
    sign of the smoothed change. A zero change never matches.
    """
    returns = np.asarray(getattr(r, "returns", r), dtype=float)
    t = returns.shape[1]
    if t < window + 1:
        raise ValueError(f"need at least {window + 1} days, got {t}")
    index = moving_average(equal_weight_index(returns), window)
    prices = np.array([moving_average(p, window) for p in cumulative_prices(returns)])
    starts = np.arange(0, t - window + 1, step)
    market = np.sign(index[starts + window] - index[starts])
    assets = np.sign(prices[:, starts + window] - prices[:, starts])
    match = (assets == market[None, :]) & (market[None, :] != 0)
    return match.mean(axis=0)


def box_summary(values):
    """Tukey box-plot summary (whiskers at 1.5 IQR) of the finite values."""
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    # A few ulps of slack: interpolated quartiles can land strictly between
    # two neighbouring values and leave no data inside the fences.
    slack = 8 * np.spacing(max(abs(q1), abs(q3)))
    inside = v[(v >= q1 - 1.5 * iqr - slack) & (v <= q3 + 1.5 * iqr + slack)]
    lo, hi = float(inside.min()), float(inside.max())
    outliers = np.sort(v[(v < lo) | (v > hi)])
    return {
        "n": int(v.size), "mean": float(v.mean()), "min": float(v.min()),
        "q1": float(q1), "median": float(med), "q3": float(q3), "max": float(v.max()),
        "whisker_low": lo, "whisker_high": hi, "outliers": outliers.tolist(),
    }


@dataclass
class MetricsConfig:
    theta: float = 0.05
    rolling_window: int = 180
    rolling_step: int = 5
    acf_lags: int = 20
    abs_acf_lags: int = 100
    similarity_window: int = 50
    similarity_step: int = 1


@dataclass
class MetricsReport:
    assets: list
    n_days: int
    config: MetricsConfig
    kurtosis: list
    skewness: list
    rolling_kurtosis: list
    rolling_skewness: list
    acf_returns: list
    acf_abs_returns: list
    avg_abs_acf_returns: list
    avg_abs_acf_abs_returns: list
    trend_count: list
    trend_ratios: list
    correlation: list
    directional_similarity: list
    index: dict
    acf_bound: float
    summaries: dict = field(default_factory=dict)

    def to_dict(self):
        # Shallow on purpose: asdict() would deep-copy millions of floats.
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["config"] = asdict(self.config)
        return _nan_to_none(doc)

    @classmethod
    def from_dict(cls, doc):
        doc = _none_to_nan(dict(doc))
        doc["config"] = MetricsConfig(**doc["config"])
        return cls(**doc)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def write_csvs(self, out_dir):
        """Flat per-family CSVs plus plot-ready (x, y) files."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "per_asset.csv", "w") as fh:
            fh.write("asset,kurtosis,skewness,avg_abs_acf_returns,avg_abs_acf_abs_returns,"
                     "trend_count,max_trend_ratio\n")
            for i, a in enumerate(self.assets):
                ratios = self.trend_ratios[i]
                row = [self.kurtosis[i], self.skewness[i], self.avg_abs_acf_returns[i],
                       self.avg_abs_acf_abs_returns[i], self.trend_count[i],
                       max(ratios) if ratios else float("nan")]
                fh.write(",".join([a, *map(_fmt, row)]) + "\n")
        step = self.config.rolling_step
        _long_frame(self.assets, {"kurtosis": self.rolling_kurtosis,
                                  "skewness": self.rolling_skewness},
                    lambda j: j * step).to_csv(out / "rolling_moments.csv", **_CSV)
        _long_frame(self.assets, {"acf_returns": self.acf_returns,
                                  "acf_abs_returns": self.acf_abs_returns},
                    lambda j: j + 1).to_csv(out / "acf.csv", **_CSV)
        with open(out / "trend_ratios.csv", "w") as fh:
            fh.write("asset,ratio\n")
            for a, ratios in zip(self.assets, self.trend_ratios):
                for v in ratios:
                    fh.write(f"{a},{_fmt(v)}\n")
        with open(out / "directional_similarity.csv", "w") as fh:
            fh.write("x,y\n")
            step = self.config.similarity_step
            for j, v in enumerate(self.directional_similarity):
                fh.write(f"{j * step},{_fmt(v)}\n")
        corr = np.asarray(self.correlation, dtype=float).reshape(len(self.assets), -1)
        i, j = np.indices(corr.shape)
        pd.DataFrame({"i": i.ravel(), "j": j.ravel(), "value": corr.ravel()}).to_csv(
            out / "correlation.csv", **_CSV)
        with open(out / "summaries.csv", "w") as fh:
            fh.write("metric,n,mean,min,q1,median,q3,max,whisker_low,whisker_high,n_outliers\n")
            for name, s in self.summaries.items():
                cols = ["mean", "min", "q1", "median", "q3", "max", "whisker_low", "whisker_high"]
                vals = [s.get(c, float("nan")) for c in cols]
                fh.write(",".join([name, str(s.get("n", 0)), *map(_fmt, vals),
                                   str(len(s.get("outliers", [])))]) + "\n")


_CSV = {"index": False, "na_rep": "", "lineterminator": "\n"}


def _long_frame(assets, families, x_of):
    """Stack per-asset series of unequal length into (asset, x, family...) rows;
    shorter families are padded with NaN."""
    parts = []
    for a, series in zip(assets, zip(*families.values())):
        n = max((len(v) for v in series), default=0)
        cols = {"asset": [a] * n, "x": [x_of(j) for j in range(n)]}
        for name, v in zip(families, series):
            col = np.full(n, np.nan)
            col[:len(v)] = v
            cols[name] = col
        parts.append(pd.DataFrame(cols))
    if not parts:
        return pd.DataFrame(columns=["asset", "x", *families])
    return pd.concat(parts, ignore_index=True)


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v)


def _nan_to_none(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def _none_to_nan(obj):
    if obj is None:
        return float("nan")
    if isinstance(obj, dict):
        return {k: _none_to_nan(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_none_to_nan(v) for v in obj]
    return obj


def _safe(fn, *args):
    try:
        return fn(*args)
    except (DegenerateSeriesError, ValueError):
        return float("nan")


def _rows(a):
    return [[float(v) for v in row] for row in np.asarray(a)]


def panel_report(r, theta=0.05, config=None):
    """Compute every metric for ``r``; failing metrics become NaN (``null`` in JSON)."""
    config = config or MetricsConfig(theta=theta)
    x = np.asarray(r.returns, dtype=float)
    s, t = x.shape

    kurt = [_safe(kurtosis, row) for row in x]
    skew = [_safe(skewness, row) for row in x]
    roll_k, roll_s = [], []
    for row in x:
        if t >= config.rolling_window:
            rm = rolling_moments(row, config.rolling_window, config.rolling_step)
            roll_k.append(rm[:, 0].tolist())
            roll_s.append(rm[:, 1].tolist())
        else:
            roll_k.append([])
            roll_s.append([])

    def acfs(data, lags):
        if t <= lags:
            return np.full((s, 0), np.nan), np.full(s, np.nan)
        a = acf_matrix(data, lags)
        return a, np.mean(np.abs(a), axis=1)

    acf_r, avg_r = acfs(x, config.acf_lags)
    acf_a, avg_a = acfs(np.abs(x), config.abs_acf_lags)

    prices = cumulative_prices(x)
    counts, ratios = [], []
    for path in prices:
        segs = detect_trends(path, config.theta)
        counts.append(len(segs))
        ratios.append([trend_ratio(g) for g in segs])

    corr = correlation_map(x) if t >= 3 else np.full((s, s), np.nan)
    sim = (directional_similarity(x, config.similarity_window, config.similarity_step)
           if t >= config.similarity_window + 1 else np.array([]))

    idx_ret = index_returns(x)
    idx_segs = detect_trends(equal_weight_index(x), config.theta)
    index = {
        "kurtosis": _safe(kurtosis, idx_ret),
        "skewness": _safe(skewness, idx_ret),
        "trend_count": len(idx_segs),
        "avg_abs_acf_returns": _safe(avg_abs_acf, idx_ret, config.acf_lags),
        "avg_abs_acf_abs_returns": _safe(avg_abs_acf, np.abs(idx_ret), config.abs_acf_lags),
        "mean_directional_similarity": float(sim.mean()) if sim.size else float("nan"),
    }

    off = corr[~np.eye(s, dtype=bool)] if s > 1 else np.array([])
    summaries = {
        "kurtosis": box_summary(kurt),
        "skewness": box_summary(skew),
        "rolling_kurtosis": box_summary(np.concatenate([np.asarray(v) for v in roll_k])),
        "rolling_skewness": box_summary(np.concatenate([np.asarray(v) for v in roll_s])),
        "avg_abs_acf_returns": box_summary(avg_r),
        "avg_abs_acf_abs_returns": box_summary(avg_a),
        "trend_count": box_summary(counts),
        "trend_ratios": box_summary(np.concatenate([np.asarray(v, dtype=float) for v in ratios])),
        "directional_similarity": box_summary(sim),
        "correlation": box_summary(off),
    }
    return MetricsReport(
        assets=list(r.assets), n_days=int(t), config=config,
        kurtosis=kurt, skewness=skew, rolling_kurtosis=roll_k, rolling_skewness=roll_s,
        acf_returns=_rows(acf_r), acf_abs_returns=_rows(acf_a),
        avg_abs_acf_returns=[float(v) for v in avg_r],
        avg_abs_acf_abs_returns=[float(v) for v in avg_a],
        trend_count=counts, trend_ratios=ratios, correlation=_rows(corr),
        directional_similarity=[float(v) for v in sim], index=index,
        acf_bound=acf_bound(t), summaries=summaries,
    )


_SUMMARY_KEYS = ("mean", "min", "q1", "median", "q3", "max", "whisker_low", "whisker_high")


def _delta(a, b):
    if a is None or b is None:
        return None
    a, b = float(a), float(b)
    if math.isnan(a) or math.isnan(b):
        return None
    return b - a


def compare_reports(a, b):
    """Side-by-side deltas (``b - a``).

    Panel-level numbers and per-metric distribution summaries are always
    compared; per-asset deltas only when both reports cover the same assets.
    """
    out = {
        "n_assets": [len(a.assets), len(b.assets)],
        "n_days": [a.n_days, b.n_days],
        "index": {k: {"a": a.index.get(k), "b": b.index.get(k),
                      "delta": _delta(a.index.get(k), b.index.get(k))}
                  for k in sorted(set(a.index) | set(b.index))},
        "distributions": {},
    }
    for name in sorted(set(a.summaries) | set(b.summaries)):
        sa, sb = a.summaries.get(name, {}), b.summaries.get(name, {})
        out["distributions"][name] = {
            k: {"a": sa.get(k), "b": sb.get(k), "delta": _delta(sa.get(k), sb.get(k))}
            for k in _SUMMARY_KEYS
        }
    if list(a.assets) == list(b.assets):
        per_asset = {}
        for fam in ("kurtosis", "skewness", "avg_abs_acf_returns", "avg_abs_acf_abs_returns",
                    "trend_count"):
            va, vb = getattr(a, fam), getattr(b, fam)
            per_asset[fam] = [_delta(x, y) for x, y in zip(va, vb)]
        out["per_asset"] = per_asset
        ca, cb = np.asarray(a.correlation, dtype=float), np.asarray(b.correlation, dtype=float)
        if ca.shape == cb.shape and ca.size:
            diff = np.abs(cb - ca)
            out["correlation_mean_abs_delta"] = (float(np.nanmean(diff))
                                                 if np.isfinite(diff).any() else None)
    return _nan_to_none(out)


def correlation_mad(a, b):
    """Mean absolute difference between two correlation matrices (off-diagonal)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    mask = ~np.eye(a.shape[0], dtype=bool)
    return float(np.nanmean(np.abs(a - b)[mask]))


__all__ = [
    "DegenerateSeriesError", "MetricsConfig", "MetricsReport", "acf", "acf_bound",
    "acf_matrix", "avg_abs_acf", "box_summary", "compare_reports", "correlation_map",
    "correlation_mad", "directional_similarity", "kurtosis", "moving_average",
    "panel_report", "rolling_moments", "skewness",
]
