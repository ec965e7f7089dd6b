"""Price/return panels: CSV loading, cleaning and conversions.

Panels are stored asset-major: ``values[s, t]`` is asset ``s`` on day ``t``.
Files are day-major (one row per trading day, one column per asset).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class PanelError(ValueError):
    """Invalid panel data (bad values, degenerate shapes)."""


class PanelParseError(PanelError):
    """Malformed CSV input, located by 1-based file row and column name."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True)
class PricePanel:
    assets: list
    days: list
    prices: np.ndarray
    rejected: dict = field(default_factory=dict)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2:
            raise PanelError("prices must be a 2-D (assets x days) matrix")
        if prices.shape != (len(self.assets), len(self.days)):
            raise PanelError(
                f"prices shape {prices.shape} does not match "
                f"{len(self.assets)} assets x {len(self.days)} days"
            )
        object.__setattr__(self, "prices", prices)

    @property
    def n_assets(self):
        return self.prices.shape[0]

    @property
    def n_days(self):
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnPanel:
    assets: list
    days: list
    returns: np.ndarray

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2:
            raise PanelError("returns must be a 2-D (assets x days) matrix")
        if returns.shape != (len(self.assets), len(self.days)):
            raise PanelError(
                f"returns shape {returns.shape} does not match "
                f"{len(self.assets)} assets x {len(self.days)} days"
            )
        object.__setattr__(self, "returns", returns)

    @property
    def n_assets(self):
        return self.returns.shape[0]

    @property
    def n_days(self):
        return self.returns.shape[1]

    def to_frame(self):
        """Day-major DataFrame (index = days, columns = assets)."""
        return pd.DataFrame(self.returns.T, index=pd.Index(self.days, name="day"),
                            columns=list(self.assets))

    def select_assets(self, idx):
        idx = np.asarray(idx)
        return ReturnPanel([self.assets[i] for i in idx], list(self.days), self.returns[idx])


@dataclass(frozen=True)
class CsvOptions:
    """Parsing options for :func:`load_price_csv`.

    ``errors="raise"`` aborts on a non-positive price; ``"reject"`` drops the
    asset and records the reason in ``PricePanel.rejected``.
    """

    errors: str = "raise"
    delimiter: str = ","

    def __post_init__(self):
        if self.errors not in ("raise", "reject"):
            raise ValueError(f"errors must be 'raise' or 'reject', got {self.errors!r}")


def _read_day_major(path, delimiter=","):
    """Read ``day,A1,A2,...`` into (assets, days, values[T, S]) with NaN for empty cells."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, sep=delimiter, dtype={0: str}, index_col=0,
                         float_precision="round_trip", skip_blank_lines=True)
        values = df.to_numpy(dtype=float)
    except (ValueError, pd.errors.ParserError):
        # Locate the offending cell for the error message.
        _scan_for_parse_error(path, delimiter)
        raise
    assets = [str(c) for c in df.columns]
    if not assets:
        raise PanelParseError("no asset columns in header", row=1)
    if len(set(assets)) != len(assets):
        raise PanelParseError("duplicate asset names in header", row=1)
    days = [str(d) for d in df.index]
    return assets, days, values


def _scan_for_parse_error(path, delimiter):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if not header:
            raise PanelParseError("empty file", row=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise PanelParseError(
                    f"expected {len(header)} fields, found {len(row)}", row=lineno)
            for name, cell in zip(header[1:], row[1:]):
                cell = cell.strip()
                if cell == "":
                    continue
                try:
                    float(cell)
                except ValueError:
                    raise PanelParseError(f"non-numeric value {cell!r}",
                                          row=lineno, column=name) from None


def load_price_csv(path, config=None):
    """Load a day-major price CSV and clean it.

    Interior and trailing gaps are forward-filled. An asset with a leading
    gap, or with at most one valid observation, is rejected and reported in
    ``PricePanel.rejected``.
    """
    config = config or CsvOptions()
    assets, days, values = _read_day_major(path, config.delimiter)
    if len(days) < 2:
        raise PanelError(f"{path}: need at least 2 days, found {len(days)}")

    keep, rejected = [], {}
    cleaned = np.empty_like(values)
    for j, name in enumerate(assets):
        col = values[:, j]
        valid = ~np.isnan(col)
        if valid.sum() <= 1:
            rejected[name] = "at most one valid observation"
            continue
        if not valid[0]:
            rejected[name] = "leading missing data"
            continue
        filled = pd.Series(col).ffill().to_numpy()
        bad = np.flatnonzero(filled <= 0)
        if bad.size:
            msg = f"non-positive price {filled[bad[0]]!r} for asset {name!r} on day {days[bad[0]]!r}"
            if config.errors == "raise":
                raise PanelError(msg)
            rejected[name] = msg
            continue
        cleaned[:, j] = filled
        keep.append(j)

    for name, why in rejected.items():
        logger.warning("rejected asset %s: %s", name, why)
    if not keep:
        raise PanelError(f"{path}: every asset was rejected")
    return PricePanel([assets[j] for j in keep], days, cleaned[:, keep].T.copy(), rejected)


def load_returns_csv(path, delimiter=","):
    """Load a day-major returns CSV written by :func:`write_returns_csv`."""
    assets, days, values = _read_day_major(path, delimiter)
    if np.isnan(values).any():
        t, s = np.argwhere(np.isnan(values))[0]
        raise PanelParseError("missing return value", row=t + 2, column=assets[s])
    panel = ReturnPanel(assets, days, values.T.copy())
    check_returns(panel)
    return panel


def _write_day_major(path, assets, days, values):
    frame = pd.DataFrame(values.T, index=pd.Index(days, name="day"), columns=list(assets))
    # repr-precision floats round-trip exactly through read_csv(float_precision="round_trip")
    frame.to_csv(path, lineterminator="\n")


def write_price_csv(panel, path):
    _write_day_major(path, panel.assets, panel.days, panel.prices)


def write_returns_csv(panel, path):
    _write_day_major(path, panel.assets, panel.days, panel.returns)


def check_returns(panel):
    r = panel.returns
    if not np.all(np.isfinite(r)):
        raise PanelError("returns must be finite")
    if np.any(r <= -1):
        s, t = np.argwhere(r <= -1)[0]
        raise PanelError(
            f"return {r[s, t]!r} <= -1 for asset {panel.assets[s]!r} on day {panel.days[t]!r}")
    return panel


def to_returns(p):
    """Simple returns ``p[t+1] / p[t] - 1``; the first day label is dropped."""
    if p.n_days < 2:
        raise PanelError("need at least 2 days of prices")
    prices = p.prices
    returns = prices[:, 1:] / prices[:, :-1] - 1.0
    return ReturnPanel(list(p.assets), list(p.days[1:]), returns)


def drop_closed_days(r):
    """Remove days on which every asset's return is exactly zero."""
    open_days = np.any(r.returns != 0.0, axis=0)
    if not open_days.any():
        raise PanelError("all days removed")
    if open_days.all():
        return r
    days = [d for d, keep in zip(r.days, open_days) if keep]
    return ReturnPanel(list(r.assets), days, r.returns[:, open_days])


def normalize_prices(p):
    """Rescale every asset so that its first price is 1."""
    prices = p.prices / p.prices[:, :1]
    return PricePanel(list(p.assets), list(p.days), prices, dict(p.rejected))


def cumulative_prices(returns):
    """Price paths starting at 1 for an (S, T) return matrix; result is (S, T + 1)."""
    returns = np.atleast_2d(np.asarray(returns, dtype=float))
    if np.any(returns <= -1):
        raise PanelError("returns must be > -1 to build prices")
    out = np.ones((returns.shape[0], returns.shape[1] + 1))
    np.cumprod(1.0 + returns, axis=1, out=out[:, 1:])
    return out


def returns_to_prices(r, start_label="t0"):
    """Rebuild normalized prices from returns.

    The price panel has one more day than the return panel; the extra leading
    day is labelled ``start_label``.
    """
    prices = cumulative_prices(r.returns)
    return PricePanel(list(r.assets), [start_label, *r.days], prices)


def sim_day_labels(n):
    return [f"sim-{i:04d}" for i in range(1, n + 1)]
