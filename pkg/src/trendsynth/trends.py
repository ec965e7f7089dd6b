"""Directional-change trend segmentation.

A price path ``p[0..n-1]`` is split at its confirmed extrema. A reversal is
confirmed once the price has moved against the running extremum by at least
``theta`` in relative terms; the finished trend ends at the day of that
extremum, not at the confirmation day.

Segments index the ``n - 1`` price changes: segment ``[start, end)`` covers the
returns ``p[start] -> p[start + 1]`` up to ``p[end - 1] -> p[end]``, so
segmenting an index built from ``T`` returns partitions the ``T`` return days.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ingest import PanelError, cumulative_prices

UP = "upward"
DOWN = "downward"


@dataclass(frozen=True)
class TrendSegment:
    start: int
    end: int
    sign: str
    theta: float
    total_return: float
    confirmed: bool = True

    @property
    def length(self):
        return self.end - self.start


def equal_weight_index(r):
    """Equal-weight market index price path (length ``T + 1``, starting at 1).

    Accepts a ReturnPanel or an (S, T) array.
    """
    returns = getattr(r, "returns", r)
    returns = np.atleast_2d(np.asarray(returns, dtype=float))
    if returns.shape[0] < 1:
        raise PanelError("index needs at least one asset")
    return cumulative_prices(returns.mean(axis=0)[None, :])[0]


def index_returns(r):
    returns = getattr(r, "returns", r)
    return np.atleast_2d(np.asarray(returns, dtype=float)).mean(axis=0)


def _segment(p, start, end, sign, theta, confirmed):
    return TrendSegment(int(start), int(end), sign, float(theta),
                        float(p[end] / p[start] - 1.0), confirmed)


def detect_trends(series, theta=0.05):
    """Segment a positive price path into alternating up/down trends.

    Day 0 anchors the first trend, whose direction is that of the first
    nonzero price change. Starting every threshold from the same state keeps
    coarser segmentations nested in finer ones, so the number of trends never
    grows with ``theta``. The first trend is flagged ``confirmed=False`` when
    its move is smaller than ``theta``; the trailing remnant after the last
    extremum always is.
    """
    if not theta > 0:
        raise ValueError(f"theta must be > 0, got {theta!r}")
    p = np.asarray(series, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("series must be 1-D with at least 2 values")
    if not np.all(p > 0):
        raise PanelError("detect_trends requires a strictly positive series")
    vals = p.tolist()
    n = len(vals)

    moved = np.flatnonzero(p != p[0])
    if moved.size == 0:
        return [TrendSegment(0, n - 1, UP, float(theta), 0.0, False)]
    state = UP if vals[moved[0]] > vals[0] else DOWN

    def confirmed(anchor, ext_i):
        return anchor > 0 or abs(vals[ext_i] / vals[0] - 1.0) >= theta

    segments = []
    anchor, ext, ext_i = 0, vals[0], 0
    # The latest extremum wins ties.
    for t in range(1, n):
        x = vals[t]
        if state == UP:
            if x >= ext:
                ext, ext_i = x, t
            elif x / ext - 1.0 <= -theta:
                segments.append(_segment(p, anchor, ext_i, UP, theta, confirmed(anchor, ext_i)))
                state, anchor, ext, ext_i = DOWN, ext_i, x, t
        else:
            if x <= ext:
                ext, ext_i = x, t
            elif x / ext - 1.0 >= theta:
                segments.append(_segment(p, anchor, ext_i, DOWN, theta, confirmed(anchor, ext_i)))
                state, anchor, ext, ext_i = UP, ext_i, x, t

    segments.append(_segment(p, anchor, ext_i, state, theta, confirmed(anchor, ext_i)))
    if ext_i < n - 1:
        segments.append(_segment(p, ext_i, n - 1, DOWN if state == UP else UP, theta, False))
    return segments


def trend_ratio(seg):
    """Absolute trend return in units of the threshold that defined it."""
    if not seg.theta > 0:
        raise ValueError("segment theta must be > 0")
    return abs(seg.total_return) / seg.theta


def trend_ratios(segments, confirmed_only=False):
    return np.array([trend_ratio(s) for s in segments
                     if s.confirmed or not confirmed_only])


def write_trends_csv(segments, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start", "end", "sign", "theta", "total_return"])
        for s in segments:
            writer.writerow([s.start, s.end, s.sign, repr(s.theta), repr(s.total_return)])
