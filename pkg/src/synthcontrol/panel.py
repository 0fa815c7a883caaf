"""Monthly panel data model and CSV input/output.

The canonical input is a wide CSV in the Zillow research-data layout: one
row per region, one column per month, plus arbitrary metadata columns that
are ignored. A long-format (unit, period, value) loader and writers for
both layouts are provided behind the same Panel contract.

Missing cells are first class: they are tracked in a boolean mask and never
imputed here. Outcome values are stored as double-precision levels.
"""

from __future__ import annotations

import io
import csv
import math
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import IO, Union

import numpy as np

from .errors import (
    ParameterError,
    PanelFormatError,
    PanelValidationError,
    WindowRangeError,
)

__all__ = [
    "Period",
    "period_range",
    "Panel",
    "PanelLayout",
    "load_panel",
    "load_long_panel",
    "write_wide_csv",
    "write_long_csv",
    "slice_panel",
]

_MONTH_HEADER = re.compile(r"(\d{4})-(\d{2})(?:-\d{2})?")

Source = Union[str, Path, bytes, IO[str], IO[bytes]]


@dataclass(frozen=True, order=True)
class Period:
    """A calendar month. Ordering follows the calendar."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ParameterError(f"month must be in 1..12, got {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Period":
        """Parse 'YYYY-MM' or 'YYYY-MM-DD' (the day is ignored)."""
        m = _MONTH_HEADER.fullmatch(text.strip())
        if m is None or not 1 <= int(m.group(2)) <= 12:
            raise PanelFormatError(
                f"not a valid YYYY-MM or YYYY-MM-DD month: {text!r}"
            )
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @property
    def month_index(self) -> int:
        """Months since 0000-01; consecutive months differ by exactly 1."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_month_index(cls, index: int) -> "Period":
        return cls(index // 12, index % 12 + 1)

    def shift(self, months: int) -> "Period":
        return Period.from_month_index(self.month_index + months)

    def __sub__(self, other: "Period") -> int:
        """Signed number of months from `other` to `self`."""
        return self.month_index - other.month_index


def period_range(start: Period, end: Period) -> tuple[Period, ...]:
    """All months from `start` through `end`, inclusive."""
    if end < start:
        raise ParameterError(f"empty period range: {start} > {end}")
    return tuple(
        Period.from_month_index(i)
        for i in range(start.month_index, end.month_index + 1)
    )


@dataclass(frozen=True)
class Panel:
    """A rectangular unit-by-month matrix of outcome levels.

    `values` is (n_units, n_periods) float64 with NaN at missing cells;
    `missing` is the authoritative boolean mask (True = missing). Both
    arrays are frozen after construction, so a Panel can be shared freely.
    """

    units: tuple[str, ...]
    periods: tuple[Period, ...]
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.units)) != len(self.units):
            dupes = sorted({u for u in self.units if self.units.count(u) > 1})
            raise PanelValidationError(f"duplicate unit labels: {dupes}")
        if not self.periods:
            raise PanelValidationError("panel has no periods")
        for a, b in zip(self.periods, self.periods[1:]):
            if b - a != 1:
                raise PanelValidationError(
                    f"periods must be contiguous and increasing: {a} -> {b}"
                )
        values = np.array(self.values, dtype=np.float64)
        missing = np.array(self.missing, dtype=bool)
        shape = (len(self.units), len(self.periods))
        if values.shape != shape or missing.shape != shape:
            raise PanelValidationError(
                f"matrix shape {values.shape} does not match "
                f"{len(self.units)} units x {len(self.periods)} periods"
            )
        values[missing] = np.nan
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def row(self, unit: str) -> int:
        try:
            return self.units.index(unit)
        except ValueError:
            raise KeyError(unit) from None

    def series(self, unit: str) -> np.ndarray:
        """Read-only value series for one unit (NaN where missing)."""
        return self.values[self.row(unit)]

    def column_range(self, start: Period, end: Period) -> tuple[int, int]:
        """Column indices [i, j) covering [start, end]; validates the window."""
        if end < start:
            raise WindowRangeError(f"empty window: {start} > {end}")
        first, last = self.periods[0], self.periods[-1]
        if start < first or end > last:
            raise WindowRangeError(
                f"window [{start}, {end}] outside panel range [{first}, {last}]"
            )
        return start - first, (end - first) + 1


def slice_panel(panel: Panel, start: Period, end: Period) -> Panel:
    """Sub-panel over [start, end], unit order preserved."""
    i, j = panel.column_range(start, end)
    return Panel(
        units=panel.units,
        periods=panel.periods[i:j],
        values=panel.values[:, i:j],
        missing=panel.missing[:, i:j],
    )


@dataclass(frozen=True)
class PanelLayout:
    """Column mapping for the wide CSV layout.

    region_column names the unit-label column. date_format, when given, is
    a strptime pattern used to recognize month columns; by default headers
    shaped like YYYY-MM or YYYY-MM-DD are months and everything else is
    metadata.
    """

    region_column: str = "RegionName"
    date_format: str | None = None


def _open_text(source: Source) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data)
    raise TypeError(f"unsupported CSV source: {type(source).__name__}")


def _parse_month_header(name: str, layout: PanelLayout, position: int) -> Period | None:
    """Period for a month column, None for a metadata column."""
    text = name.strip()
    if layout.date_format is not None:
        try:
            parsed = datetime.strptime(text, layout.date_format)
        except ValueError:
            return None
        return Period(parsed.year, parsed.month)
    if _MONTH_HEADER.fullmatch(text) is None:
        return None
    try:
        return Period.parse(text)
    except PanelFormatError:
        raise PanelFormatError(
            f"malformed month header {name!r} (column {position})"
        ) from None


def _parse_cell(cell: str, line_no: int, column: str) -> float:
    text = cell.strip()
    try:
        value = float(text)
    except ValueError:
        raise PanelFormatError(
            f"row {line_no}, column {column!r}: non-numeric value {cell!r}"
        ) from None
    if not math.isfinite(value):
        raise PanelFormatError(
            f"row {line_no}, column {column!r}: non-finite value {cell!r}"
        )
    return value


def load_panel(source: Source, layout: PanelLayout | None = None) -> Panel:
    """Load a wide-layout CSV (one row per region, one column per month).

    Empty cells become missing values, never zero. Metadata columns other
    than the region column are ignored. Raises PanelFormatError with the
    offending (row, column) location on parse failures and
    PanelValidationError on duplicate labels or non-contiguous months.
    """
    layout = layout or PanelLayout()
    stream = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty CSV: missing header row") from None
        try:
            region_idx = header.index(layout.region_column)
        except ValueError:
            raise PanelFormatError(
                f"region column {layout.region_column!r} not found in header"
            ) from None

        month_cols: list[tuple[int, Period]] = []
        for i, name in enumerate(header):
            if i == region_idx:
                continue
            period = _parse_month_header(name, layout, i + 1)
            if period is not None:
                month_cols.append((i, period))
        if not month_cols:
            raise PanelFormatError("no month columns found in header")
        periods = [p for _, p in month_cols]
        for (_, a), (ib, b) in zip(month_cols, month_cols[1:]):
            if b - a != 1:
                raise PanelFormatError(
                    f"month columns must be contiguous and increasing: "
                    f"{a} is followed by {b} (column {ib + 1})"
                )

        n_periods = len(periods)
        units: list[str] = []
        seen: set[str] = set()
        value_rows: list[np.ndarray] = []
        missing_rows: list[np.ndarray] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise PanelFormatError(
                    f"row {line_no}: expected {len(header)} fields, found {len(row)}"
                )
            label = row[region_idx]
            if label.strip() == "":
                raise PanelFormatError(f"row {line_no}: empty region label")
            if label in seen:
                raise PanelValidationError(
                    f"duplicate region label {label!r} (row {line_no})"
                )
            seen.add(label)
            units.append(label)
            vals = np.full(n_periods, np.nan)
            miss = np.ones(n_periods, dtype=bool)
            for k, (ci, _) in enumerate(month_cols):
                cell = row[ci]
                if cell.strip() == "":
                    continue
                vals[k] = _parse_cell(cell, line_no, header[ci])
                miss[k] = False
            value_rows.append(vals)
            missing_rows.append(miss)

        values = np.array(value_rows) if value_rows else np.empty((0, n_periods))
        missing = (
            np.array(missing_rows) if missing_rows else np.empty((0, n_periods), bool)
        )
        return Panel(tuple(units), tuple(periods), values, missing)
    finally:
        stream.close()


def load_long_panel(
    source: Source,
    unit_column: str = "unit",
    period_column: str = "period",
    value_column: str = "value",
) -> Panel:
    """Load a long-layout CSV of (unit, period, value) rows.

    The panel covers the contiguous month range spanned by the period
    values; (unit, period) pairs absent from the file, and rows with an
    empty value cell, are missing. Unit order follows first appearance.
    """
    stream = _open_text(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("empty CSV: missing header row") from None
        indices = {}
        for name in (unit_column, period_column, value_column):
            try:
                indices[name] = header.index(name)
            except ValueError:
                raise PanelFormatError(
                    f"column {name!r} not found in header"
                ) from None

        cells: dict[tuple[str, Period], float] = {}
        units: list[str] = []
        seen_units: set[str] = set()
        lo: Period | None = None
        hi: Period | None = None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise PanelFormatError(
                    f"row {line_no}: expected {len(header)} fields, found {len(row)}"
                )
            unit = row[indices[unit_column]]
            if unit.strip() == "":
                raise PanelFormatError(f"row {line_no}: empty unit label")
            try:
                period = Period.parse(row[indices[period_column]])
            except PanelFormatError:
                raise PanelFormatError(
                    f"row {line_no}, column {period_column!r}: "
                    f"bad period {row[indices[period_column]]!r}"
                ) from None
            key = (unit, period)
            if key in cells:
                raise PanelValidationError(
                    f"duplicate (unit, period) pair {unit!r}, {period} (row {line_no})"
                )
            if unit not in seen_units:
                seen_units.add(unit)
                units.append(unit)
            raw = row[indices[value_column]]
            cells[key] = (
                np.nan
                if raw.strip() == ""
                else _parse_cell(raw, line_no, value_column)
            )
            lo = period if lo is None or period < lo else lo
            hi = period if hi is None or hi < period else hi

        if lo is None or hi is None:
            raise PanelFormatError("long CSV has no data rows")
        periods = period_range(lo, hi)
        values = np.full((len(units), len(periods)), np.nan)
        row_of = {u: i for i, u in enumerate(units)}
        col = {p: k for k, p in enumerate(periods)}
        for (unit, period), value in cells.items():
            values[row_of[unit], col[period]] = value
        return Panel(tuple(units), periods, values, np.isnan(values))
    finally:
        stream.close()


def _format_value(value: float, missing: bool) -> str:
    # repr() gives the shortest string that round-trips the double exactly
    return "" if missing else repr(float(value))


def _open_write(dest) -> tuple[IO[str], bool]:
    if isinstance(dest, (str, Path)):
        return open(dest, "w", newline="", encoding="utf-8"), True
    return dest, False


def write_wide_csv(panel: Panel, dest, region_column: str = "RegionName") -> None:
    """Serialize to the wide layout; re-loading yields an identical Panel."""
    stream, should_close = _open_write(dest)
    try:
        writer = csv.writer(stream)
        writer.writerow([region_column, *(str(p) for p in panel.periods)])
        for i, unit in enumerate(panel.units):
            writer.writerow(
                [unit]
                + [
                    _format_value(panel.values[i, k], panel.missing[i, k])
                    for k in range(panel.n_periods)
                ]
            )
    finally:
        if should_close:
            stream.close()


def write_long_csv(
    panel: Panel,
    dest,
    unit_column: str = "unit",
    period_column: str = "period",
    value_column: str = "value",
) -> None:
    """Serialize to the long layout, one row per (unit, period) cell."""
    stream, should_close = _open_write(dest)
    try:
        writer = csv.writer(stream)
        writer.writerow([unit_column, period_column, value_column])
        for i, unit in enumerate(panel.units):
            for k, period in enumerate(panel.periods):
                writer.writerow(
                    [
                        unit,
                        str(period),
                        _format_value(panel.values[i, k], panel.missing[i, k]),
                    ]
                )
    finally:
        if should_close:
            stream.close()
