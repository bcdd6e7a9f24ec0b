"""Quarterly panel ingestion, transforms, and instrument construction.

The CSV dialect is comma-delimited UTF-8 with a header row and ``.`` as the
decimal separator.  The ``date`` column accepts ``YYYYQn`` labels,
ISO dates (mapped to quarters), or plain integers for synthetic samples.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError
from .validation import check_frame

_QUARTER_RE = re.compile(r"^(\d{4})[Qq]([1-4])$")


def packaged_panel_path():
    """Filesystem path of the packaged demo panel CSV."""
    from importlib.resources import files
    from pathlib import Path

    return Path(str(files("behavnk").joinpath("assets/quarterly_panel.csv")))


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Aligned quarterly observables plus any extra named columns.

    Wraps a DataFrame whose index is either a quarterly ``PeriodIndex`` or
    a plain integer index (synthetic samples).  Rows are strictly
    increasing and gap-free; panels are immutable after construction and
    safe to share.
    """

    frame: pd.DataFrame

    def __post_init__(self):
        idx = self.frame.index
        if len(idx) == 0:
            raise DataError("panel has no rows")
        if idx.has_duplicates:
            dup = idx[idx.duplicated()][0]
            raise DataError(f"duplicate date in panel: {dup}")
        if not idx.is_monotonic_increasing:
            raise DataError("panel dates must be strictly increasing")
        _check_gap_free(idx)

    def __len__(self):
        return len(self.frame)

    @property
    def dates(self):
        return self.frame.index

    @property
    def columns(self):
        return tuple(self.frame.columns)

    def column(self, name) -> np.ndarray:
        if name not in self.frame.columns:
            raise DataError(f"panel has no column {name!r}")
        return np.asarray(self.frame[name], dtype=float)

    def window(self, start=None, end=None) -> "TimeSeriesPanel":
        idx = self.frame.index
        if isinstance(idx, pd.PeriodIndex):
            start = pd.Period(start, freq="Q") if start is not None else None
            end = pd.Period(end, freq="Q") if end is not None else None
        mask = np.ones(len(idx), dtype=bool)
        if start is not None:
            mask &= idx >= start
        if end is not None:
            mask &= idx <= end
        if not mask.any():
            raise DataError(f"window [{start}, {end}] selects no rows")
        return TimeSeriesPanel(self.frame.loc[mask])

    def with_column(self, name, values) -> "TimeSeriesPanel":
        frame = self.frame.copy()
        frame[name] = np.asarray(values, dtype=float)
        return TimeSeriesPanel(frame)

    def to_csv(self, path) -> None:
        out = self.frame.copy()
        out.insert(0, "date", [str(d) for d in self.frame.index])
        out.to_csv(path, index=False)


def _check_gap_free(idx):
    if isinstance(idx, pd.PeriodIndex):
        steps = np.diff(idx.asi8)
    else:
        steps = np.diff(np.asarray(idx, dtype=np.int64))
    if len(steps) and np.any(steps != 1):
        pos = int(np.argmax(steps != 1))
        raise DataError(f"panel has a gap after {idx[pos]}")


def _parse_dates(raw):
    values = [str(v).strip() for v in raw]
    if all(_QUARTER_RE.match(v) for v in values):
        return pd.PeriodIndex([pd.Period(v, freq="Q") for v in values], freq="Q")
    try:
        return pd.Index([int(v) for v in values], dtype="int64")
    except ValueError:
        pass
    try:
        stamps = pd.to_datetime(values, format="%Y-%m-%d")
    except ValueError as exc:
        raise DataError(f"unparseable dates in panel: {exc}") from exc
    return pd.PeriodIndex(stamps, freq="Q")


def load_panel(path, columns=None, window=None) -> TimeSeriesPanel:
    """Load a quarterly panel from CSV.

    Parameters
    ----------
    path : str or file-like
        CSV with a header row and a ``date`` column.
    columns : sequence of str, optional
        Columns the caller will use.  Rows with missing values in these
        columns are dropped (with a count reported); other columns are kept
        as-is.
    window : (start, end), optional
        Inclusive sample window, e.g. ``("1962Q2", "2016Q4")``.

    Raises
    ------
    DataError
        On unparseable or duplicate dates, or when no requested column
        exists.
    """
    raw = pd.read_csv(path, float_precision="round_trip")
    if "date" not in raw.columns:
        raise DataError("panel CSV must have a 'date' column")
    idx = _parse_dates(raw["date"])
    frame = raw.drop(columns=["date"])
    frame.index = idx
    if idx.has_duplicates:
        dup = idx[idx.duplicated()][0]
        raise DataError(f"duplicate date in panel: {dup}")
    frame = frame.sort_index()
    frame = frame.astype(float)

    if columns is not None:
        present = [c for c in columns if c in frame.columns]
        if not present:
            raise DataError(
                f"none of the requested columns {list(columns)} exist in the panel"
            )
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise DataError(f"panel is missing requested columns: {missing}")
        keep = ~frame[list(columns)].isna().any(axis=1)
        n_dropped = int((~keep).sum())
        if n_dropped:
            warnings.warn(f"dropped {n_dropped} rows with missing values", stacklevel=2)
            frame = frame.loc[keep]

    panel = TimeSeriesPanel(frame)
    if window is not None:
        panel = panel.window(*window)
    return panel


# ---------------------------------------------------------------------------
# Column transforms


_TRANSFORM_RE = re.compile(r"^(none|demean|linear_detrend|log_diff|lag)(?:\((\d+)\))?$")


@dataclass(frozen=True)
class TransformSpec:
    """Per-column transform pipelines, applied left to right.

    ``pipelines`` maps a column name to a sequence of operation strings
    among ``none``, ``demean``, ``linear_detrend``, ``log_diff`` and
    ``lag(k)``.
    """

    pipelines: dict

    @classmethod
    def parse(cls, mapping) -> "TransformSpec":
        out = {}
        for col, ops in mapping.items():
            if isinstance(ops, str):
                ops = [o.strip() for o in ops.split("|") if o.strip()]
            parsed = []
            for op in ops:
                m = _TRANSFORM_RE.match(op)
                if not m:
                    raise DataError(f"unknown transform {op!r} for column {col!r}")
                name, arg = m.group(1), m.group(2)
                if name == "lag" and arg is None:
                    raise DataError(f"lag transform needs a count, got {op!r}")
                parsed.append((name, int(arg) if arg else None))
            out[col] = tuple(parsed)
        return cls(pipelines=out)


def _apply_op(values, op, arg):
    if op == "none":
        return values
    if op == "demean":
        return values - np.nanmean(values)
    if op == "linear_detrend":
        t = np.arange(len(values), dtype=float)
        ok = np.isfinite(values)
        coef = np.polyfit(t[ok], values[ok], 1)
        return values - np.polyval(coef, t)
    if op == "log_diff":
        if np.nanmin(values) <= 0.0:
            raise DataError("log_diff requires strictly positive values")
        out = np.full_like(values, np.nan)
        out[1:] = np.diff(np.log(values))
        return out
    if op == "lag":
        out = np.full_like(values, np.nan)
        out[arg:] = values[:-arg]
        return out
    raise DataError(f"unknown transform {op!r}")


def apply_transforms(panel: TimeSeriesPanel, spec) -> TimeSeriesPanel:
    """Apply per-column transform pipelines and realign the sample.

    Leading rows made undefined by differencing or lagging are trimmed;
    the shortened usable sample is reflected in the returned panel.
    """
    if not isinstance(spec, TransformSpec):
        spec = TransformSpec.parse(spec)
    frame = panel.frame.copy()
    for col, pipeline in spec.pipelines.items():
        if col not in frame.columns:
            raise DataError(f"transform refers to unknown column {col!r}")
        values = np.asarray(frame[col], dtype=float)
        for op, arg in pipeline:
            values = _apply_op(values, op, arg)
        frame[col] = values
    keep = ~frame.isna().any(axis=1)
    # Only head trimming is expected from lag/diff pipelines.
    first = int(np.argmax(keep.values)) if keep.any() else len(frame)
    if not keep.values[first:].all():
        raise DataError("transforms left interior missing values")
    return TimeSeriesPanel(frame.iloc[first:])


# ---------------------------------------------------------------------------
# Instruments


@dataclass(frozen=True)
class InstrumentSpec:
    """Instrument layout: optional constant plus lagged columns.

    ``terms`` is a sequence of ``(column, lags)`` pairs where ``lags`` is a
    tuple of positive lag counts; ``lag(0)`` of a column is the column
    itself.
    """

    include_constant: bool
    terms: tuple

    @classmethod
    def parse(cls, text) -> "InstrumentSpec":
        """Parse compact specs like ``"const, x:1-3, rr:1-3"``."""
        include_constant = False
        terms = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if part == "const":
                include_constant = True
                continue
            if ":" not in part:
                raise DataError(f"instrument term {part!r} must be 'name:lags'")
            name, _, lagspec = part.partition(":")
            lagspec = lagspec.strip()
            if "-" in lagspec:
                lo, _, hi = lagspec.partition("-")
                lags = tuple(range(int(lo), int(hi) + 1))
            else:
                lags = (int(lagspec),)
            terms.append((name.strip(), lags))
        return cls(include_constant=include_constant, terms=tuple(terms))

    @property
    def max_lag(self) -> int:
        return max((max(lags) for _, lags in self.terms), default=0)

    @property
    def n_columns(self) -> int:
        return int(self.include_constant) + sum(len(lags) for _, lags in self.terms)


def build_instruments(panel: TimeSeriesPanel, spec) -> pd.DataFrame:
    """Build the instrument matrix from lagged panel columns.

    Returns a DataFrame indexed by the usable dates (rows where every
    requested lag exists), with the constant column first when requested.
    Every lagged entry at row ``t`` carries date ``t - lag``.
    """
    if not isinstance(spec, InstrumentSpec):
        spec = InstrumentSpec.parse(spec)
    frame = check_frame(panel, required=[name for name, _ in spec.terms], name="panel")
    T = len(frame)
    max_lag = spec.max_lag
    if T - max_lag <= 0:
        raise DataError(
            f"insufficient sample: {T} rows cannot support lag {max_lag} instruments"
        )
    rows = frame.index[max_lag:]
    data = {}
    if spec.include_constant:
        data["const"] = np.ones(len(rows))
    for name, lags in spec.terms:
        col = np.asarray(frame[name], dtype=float)
        for lag in lags:
            label = f"{name}_lag{lag}" if lag else name
            if lag == 0:
                data[label] = col[max_lag:]
            else:
                data[label] = col[max_lag - lag : T - lag]
    Z = pd.DataFrame(data, index=rows)
    if not np.all(np.isfinite(Z.to_numpy())):
        raise DataError("instrument matrix contains non-finite values")
    return Z
