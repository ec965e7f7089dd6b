"""Analysis stage: per-trend, per-window Gaussian parameters of a reference panel.

The panel is segmented by the trends of its equal-weight index. Inside each
trend, consecutive non-overlapping windows of ``L`` days are summarized by a
mean vector and a covariance factor ``A`` with ``Sigma = A @ A.T``. Keeping the
factor instead of ``Sigma`` lets the synthesis stage sample exactly from
rank-deficient covariances (``S`` assets, ``L << S`` days).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import PanelError, ReturnPanel
from .trends import DOWN, UP, detect_trends, equal_weight_index

FORMAT_VERSION = 1


class LibraryError(ValueError):
    pass


@dataclass(frozen=True)
class WindowParams:
    mu: np.ndarray
    factor: np.ndarray
    window_len: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        factor = np.asarray(self.factor, dtype=float)
        if factor.ndim != 2 or factor.shape[0] != mu.shape[0]:
            raise LibraryError(f"factor shape {factor.shape} does not match mu length {mu.shape[0]}")
        if self.window_len < 1:
            raise LibraryError("window_len must be >= 1")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "factor", factor)

    @property
    def covariance(self):
        return self.factor @ self.factor.T


@dataclass(frozen=True)
class AnalyzedTrend:
    sign: str
    windows: tuple
    start: int = 0
    end: int = 0

    def __post_init__(self):
        if self.sign not in (UP, DOWN):
            raise LibraryError(f"bad trend sign {self.sign!r}")
        if not self.windows:
            raise LibraryError("a trend needs at least one window")
        object.__setattr__(self, "windows", tuple(self.windows))

    @property
    def n_days(self):
        return sum(w.window_len for w in self.windows)


@dataclass(frozen=True)
class TrendLibrary:
    assets: list
    window_len_L: int
    theta: float
    trends: list = field(default_factory=list)

    def __post_init__(self):
        signs = {t.sign for t in self.trends}
        if signs != {UP, DOWN}:
            raise LibraryError(
                "trend library needs at least one upward and one downward trend; "
                "try a smaller theta")
        n = len(self.assets)
        for t in self.trends:
            for w in t.windows:
                if w.mu.shape != (n,):
                    raise LibraryError(f"window mean has {w.mu.shape[0]} entries, expected {n}")

    @property
    def n_assets(self):
        return len(self.assets)

    @property
    def n_days(self):
        return sum(t.n_days for t in self.trends)

    def indices_by_sign(self, sign):
        return [i for i, t in enumerate(self.trends) if t.sign == sign]

    def to_dict(self):
        return {
            "format": FORMAT_VERSION,
            "assets": list(self.assets),
            "theta": float(self.theta),
            "L": int(self.window_len_L),
            "trends": [
                {
                    "sign": t.sign,
                    "start": int(t.start),
                    "end": int(t.end),
                    "windows": [
                        {"len": int(w.window_len), "mu": w.mu.tolist(), "factor": w.factor.tolist()}
                        for w in t.windows
                    ],
                }
                for t in self.trends
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            trends = [
                AnalyzedTrend(
                    sign=t["sign"],
                    windows=[WindowParams(np.array(w["mu"], dtype=float),
                                          np.array(w["factor"], dtype=float).reshape(len(w["mu"]), -1),
                                          int(w["len"]))
                             for w in t["windows"]],
                    start=int(t.get("start", 0)),
                    end=int(t.get("end", 0)),
                )
                for t in doc["trends"]
            ]
            return cls(list(doc["assets"]), int(doc["L"]), float(doc["theta"]), trends)
        except (KeyError, TypeError) as exc:
            raise LibraryError(f"malformed trend library: {exc}") from exc

    def save(self, path):
        text = json.dumps(self.to_dict(), separators=(",", ":"))
        Path(path).write_text(text, encoding="utf-8")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"trend library not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise LibraryError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(doc)


def segment_windows(segment_len, L):
    """Split ``segment_len`` days into consecutive blocks of ``L``.

    A remainder shorter than ``L / 2`` is merged into the last block,
    otherwise it becomes its own window.
    """
    if segment_len < 1:
        raise ValueError("segment_len must be >= 1")
    if L < 2:
        raise ValueError("L must be >= 2")
    n_full, rem = divmod(segment_len, L)
    if n_full == 0:
        return [segment_len]
    if rem == 0:
        return [L] * n_full
    if rem < L / 2:
        return [L] * (n_full - 1) + [L + rem]
    return [L] * n_full + [rem]


def estimate_window_params(x):
    """Mean and unbiased covariance factor of an (S, k) slice of returns."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    k = x.shape[1]
    if k < 2:
        raise LibraryError("window too short")
    mu = x.mean(axis=1)
    factor = (x - mu[:, None]) / math.sqrt(k - 1)
    return WindowParams(mu, factor, k)


def _single_day_params(x):
    # A one-day window cannot estimate a covariance; it replays its own returns.
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return WindowParams(x[:, 0].copy(), np.zeros_like(x), 1)


def analyze_segment(returns, seg, L):
    windows = []
    pos = seg.start
    for n in segment_windows(seg.length, L):
        block = returns[:, pos:pos + n]
        windows.append(estimate_window_params(block) if n >= 2 else _single_day_params(block))
        pos += n
    return AnalyzedTrend(seg.sign, windows, seg.start, seg.end)


def build_trend_library(r, theta=0.05, L=20):
    """Segment ``r`` by its index trends and estimate window parameters per trend."""
    if not isinstance(r, ReturnPanel):
        raise TypeError("build_trend_library expects a ReturnPanel")
    if r.n_days < 2:
        raise PanelError("panel too short to analyze")
    segments = detect_trends(equal_weight_index(r), theta)
    signs = {s.sign for s in segments}
    if signs != {UP, DOWN}:
        raise LibraryError(
            f"index shows only {sorted(signs)} trends at theta={theta}; use a smaller theta")
    trends = [analyze_segment(r.returns, seg, L) for seg in segments]
    return TrendLibrary(list(r.assets), int(L), float(theta), trends)

