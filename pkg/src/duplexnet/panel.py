"""Panel ingest and windowing.

Raw CSVs (daily closes or daily bullish-tweet counts) become aligned
date-by-asset matrices: log-returns for prices, zero-filled counts for
opinion. Windowing slices a panel into fixed-width rolling (or expanding)
spans of trading days.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    BadCount,
    BadPrice,
    MissingAsset,
    NoOverlap,
    ParseError,
    TooShort,
)

logger = logging.getLogger(__name__)


class PanelKind(Enum):
    RETURNS = "returns"
    OPINION = "opinion"


class WindowPolicy(Enum):
    ROLLING = "rolling"
    EXPANDING = "expanding"


@dataclass(frozen=True)
class PanelSeries:
    """Aligned daily values, one row per asset, one column per trading day.

    ``values[i, t]`` is asset ``tickers[i]`` on day ``dates[t]``: a log-return
    for RETURNS panels, a non-negative message count for OPINION panels.
    Immutable after construction.
    """

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    values: np.ndarray
    kind: PanelKind

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if values.shape != (len(self.tickers), len(self.dates)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise ValueError("tickers must be unique")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("panel values must be finite")
        if self.kind is PanelKind.OPINION and np.any(values < 0):
            raise ValueError("opinion values must be non-negative")
        values.flags.writeable = False

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    def write_csv(self, path) -> None:
        """Dump as ``date,ticker,value`` rows; values keep full precision."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "ticker", "value"])
            for j, date in enumerate(self.dates):
                for i, ticker in enumerate(self.tickers):
                    writer.writerow([date, ticker, repr(float(self.values[i, j]))])

    @classmethod
    def read_csv(cls, path, kind: PanelKind) -> "PanelSeries":
        """Inverse of :meth:`write_csv`; round-trips bit-exactly."""
        cells, dates, tickers = _read_long_csv(path, "value", float)
        values = np.empty((len(tickers), len(dates)))
        values.fill(np.nan)
        t_index = {t: i for i, t in enumerate(tickers)}
        d_index = {d: j for j, d in enumerate(dates)}
        for (date, ticker), value in cells.items():
            values[t_index[ticker], d_index[date]] = value
        if np.any(np.isnan(values)):
            raise ParseError(path, 0, "panel dump has missing (date, ticker) cells")
        return cls(dates, tickers, values, kind)


@dataclass(frozen=True)
class WindowSpec:
    """Width and step of the correlation windows, in trading days."""

    width: int
    step: int
    policy: WindowPolicy = WindowPolicy.ROLLING

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("window width must be at least 2")
        if self.step < 1:
            raise ValueError("window step must be at least 1")


def _read_long_csv(path, value_column, parse_value):
    """Read a ``date,ticker,<value>`` CSV into {(date, ticker): value}.

    Returns the cell map plus sorted date and ticker lists. Raises ParseError
    with the 1-based line number on malformed rows or duplicate cells.
    """
    cells: dict[tuple[str, str], object] = {}
    dates: set[str] = set()
    tickers: set[str] = set()
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(path, 0, f"cannot open file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file, expected a header row")
        expected = ["date", "ticker", value_column]
        if [h.strip() for h in header] != expected:
            raise ParseError(path, 1, f"expected header {','.join(expected)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(path, line_no, f"expected 3 fields, got {len(row)}")
            date, ticker, raw = (f.strip() for f in row)
            if not date or not ticker:
                raise ParseError(path, line_no, "empty date or ticker field")
            try:
                value = parse_value(raw)
            except ValueError:
                raise ParseError(path, line_no, f"unparseable {value_column}: {raw!r}")
            key = (date, ticker)
            if key in cells:
                raise ParseError(path, line_no, f"duplicate row for {ticker} on {date}")
            cells[key] = value
            dates.add(date)
            tickers.add(ticker)
    return cells, sorted(dates), sorted(tickers)


def load_price_panel(path, tickers: Sequence[str]) -> PanelSeries:
    """Load a ``date,ticker,close`` CSV and convert closes to log-returns.

    The panel calendar is the set of dates on which every requested ticker
    has a close (returns need consecutive observed prices). The first date
    carries no return and is dropped.
    """
    tickers = list(tickers)
    cells, _, present = _read_long_csv(path, "close", float)
    missing = [t for t in tickers if t not in set(present)]
    if missing:
        raise MissingAsset(f"tickers absent from {path}: {', '.join(missing)}")
    per_ticker_dates = {t: set() for t in tickers}
    for (date, ticker), close in cells.items():
        if ticker in per_ticker_dates:
            if not (close > 0):
                raise BadPrice(f"non-positive close {close} for {ticker} on {date}")
            per_ticker_dates[ticker].add(date)
    common = set.intersection(*per_ticker_dates.values())
    if len(common) < 2:
        raise TooShort(f"fewer than 2 common dates across tickers in {path}")
    dates = sorted(common)
    closes = np.array(
        [[cells[(d, t)] for d in dates] for t in tickers], dtype=np.float64
    )
    returns = np.log(closes[:, 1:]) - np.log(closes[:, :-1])
    return PanelSeries(dates[1:], tickers, returns, PanelKind.RETURNS)


def load_opinion_panel(path, tickers: Sequence[str]) -> PanelSeries:
    """Load a ``date,ticker,bullish_count`` CSV into a zero-filled panel.

    The calendar is the union of dates seen for the requested tickers; a
    missing (date, ticker) cell means zero messages that day. Rows for
    unknown tickers are ignored with a single summary warning.
    """
    tickers = list(tickers)
    wanted = set(tickers)

    def parse_count(raw: str) -> int:
        value = int(raw)
        return value

    cells, _, _ = _read_long_csv(path, "bullish_count", parse_count)
    ignored_rows = 0
    ignored_tickers: set[str] = set()
    dates_set: set[str] = set()
    for (date, ticker), count in cells.items():
        if ticker not in wanted:
            ignored_rows += 1
            ignored_tickers.add(ticker)
            continue
        if count < 0:
            raise BadCount(f"negative count {count} for {ticker} on {date}")
        dates_set.add(date)
    if not dates_set:
        raise TooShort(f"no rows for any requested ticker in {path}")
    if ignored_rows:
        logger.warning(
            "ignored %d rows for %d unknown tickers in %s",
            ignored_rows, len(ignored_tickers), path,
        )
    dates = sorted(dates_set)
    d_index = {d: j for j, d in enumerate(dates)}
    t_index = {t: i for i, t in enumerate(tickers)}
    values = np.zeros((len(tickers), len(dates)))
    for (date, ticker), count in cells.items():
        if ticker in wanted:
            values[t_index[ticker], d_index[date]] = count
    return PanelSeries(dates, tickers, values, PanelKind.OPINION)


def align(a: PanelSeries, b: PanelSeries) -> tuple[PanelSeries, PanelSeries]:
    """Restrict both panels to their common dates, preserving order."""
    if set(a.tickers) != set(b.tickers):
        raise MissingAsset("panels do not share the same ticker set")
    common = sorted(set(a.dates) & set(b.dates))
    if not common:
        raise NoOverlap("panels share no dates")

    def restrict(p: PanelSeries) -> PanelSeries:
        col = {d: j for j, d in enumerate(p.dates)}
        cols = [col[d] for d in common]
        order = [p.tickers.index(t) for t in a.tickers]
        return PanelSeries(common, a.tickers, p.values[np.ix_(order, cols)], p.kind)

    return restrict(a), restrict(b)


def windows(spec: WindowSpec, length: int) -> list[tuple[int, int]]:
    """Enumerate (start, end) half-open index pairs covering ``length`` days.

    Rolling: starts advance by ``step`` while the full width fits.
    Expanding: start pinned at 0, end grows by ``step`` from ``width``.
    """
    if length < spec.width:
        raise TooShort(f"series length {length} shorter than window width {spec.width}")
    out: list[tuple[int, int]] = []
    if spec.policy is WindowPolicy.ROLLING:
        start = 0
        while start + spec.width <= length:
            out.append((start, start + spec.width))
            start += spec.step
    else:
        end = spec.width
        while end <= length:
            out.append((0, end))
            end += spec.step
    return out
