"""CSV ingestion and the three-step series preprocessing.

Masked sequences are carried as :class:`MaskedSeries`: a float array with NaN
in undefined slots, a boolean validity mask and a boolean ``degenerate`` flag
marking entries that were dropped because a window had zero spread.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "DataError",
    "MissingColumn",
    "UnparsableCell",
    "NonMonotoneDates",
    "DegenerateRegressor",
    "InsufficientHistory",
    "MaskedSeries",
    "PanelData",
    "ProcessedPanel",
    "load_predictor_csv",
    "rolling_standardize",
    "clip",
    "ar1_residuals_expanding",
    "preprocess_panel",
    "write_processed_csv",
    "load_processed_csv",
    "parse_date",
    "format_date",
]

CANONICAL_COLUMNS = (
    "retx", "dp", "dy", "ep", "de", "bm", "ntis", "tbl",
    "lty", "ltr", "tms", "dfy", "dfr", "infl",
)


class DataError(InputError):
    """Base class for input problems (maps to CLI exit code 2)."""


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"MissingColumn: {name!r} not found in header")
        self.name = name


class UnparsableCell(DataError):
    def __init__(self, row: int, col: str, text: str = ""):
        super().__init__(f"UnparsableCell: row {row}, column {col!r}: {text!r}")
        self.row = row
        self.col = col


class NonMonotoneDates(DataError):
    def __init__(self, row: int, prev, cur):
        super().__init__(
            f"NonMonotoneDates: row {row} date {format_date(cur)} "
            f"does not follow {format_date(prev)}"
        )
        self.row = row


class DegenerateRegressor(DataError):
    pass


class InsufficientHistory(DataError):
    pass


# ---------------------------------------------------------------------------
# containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaskedSeries:
    values: np.ndarray
    valid: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        if not (self.values.shape == self.valid.shape == self.degenerate.shape):
            raise ValueError("values, valid and degenerate must share a shape")

    @classmethod
    def from_array(cls, x) -> "MaskedSeries":
        x = np.asarray(x, dtype=float)
        valid = np.isfinite(x)
        return cls(np.where(valid, x, np.nan), valid, np.zeros(x.shape, bool))

    def __len__(self):
        return self.values.shape[0]

    @property
    def defined(self) -> np.ndarray:
        return self.values[self.valid]


def _as_masked(series) -> MaskedSeries:
    if isinstance(series, MaskedSeries):
        return series
    return MaskedSeries.from_array(series)


@dataclass(frozen=True)
class PanelData:
    dates: list
    columns: dict
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dates)
        for k, v in self.columns.items():
            if len(v) != n:
                raise ValueError(f"column {k!r} has {len(v)} rows, expected {n}")
        for i in range(1, n):
            if self.dates[i] <= self.dates[i - 1]:
                raise NonMonotoneDates(i + 1, self.dates[i - 1], self.dates[i])

    @property
    def column_names(self) -> list:
        return list(self.columns)

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class ProcessedPanel:
    dates: list
    columns: dict  # name -> MaskedSeries
    provenance: dict

    @property
    def column_names(self) -> list:
        return list(self.columns)

    def __len__(self):
        return len(self.dates)

    def joint_mask(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.column_names if names is None else list(names)
        mask = np.ones(len(self.dates), bool)
        for n in names:
            mask &= self.columns[n].valid
        return mask

    def aligned(self, names: Sequence[str] | None = None):
        """Rows where every requested column is defined.

        Returns ``(dates, matrix)`` with columns ordered as ``names``.
        """
        names = self.column_names if names is None else list(names)
        mask = self.joint_mask(names)
        idx = np.flatnonzero(mask)
        mat = np.column_stack([self.columns[n].values[idx] for n in names])
        return [self.dates[i] for i in idx], mat


# ---------------------------------------------------------------------------
# dates
# ---------------------------------------------------------------------------

_DATE_RE = re.compile(r"^(\d{4})-?(\d{2})(?:-(\d{2}))?$")


def parse_date(text: str) -> tuple[int, int]:
    """Parse ``YYYY-MM``, ``YYYY-MM-DD`` or ``YYYYMM`` into (year, month)."""
    m = _DATE_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad date {text!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"bad month in {text!r}")
    if m.group(3) is not None and not 1 <= int(m.group(3)) <= 31:
        raise ValueError(f"bad day in {text!r}")
    return (year, month)


def format_date(d) -> str:
    return f"{d[0]:04d}-{d[1]:02d}"


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _data_lines(fh) -> Iterable[str]:
    for line in fh:
        if line.lstrip().startswith("#"):
            continue
        if not line.strip():
            continue
        yield line


def load_predictor_csv(path, schema: Sequence[str] | None = None) -> PanelData:
    """Read a dated predictor panel.

    The first column must be ``date``. Only the ``schema`` columns are kept
    (all of them when ``schema`` is None). Blank cells are allowed only as a
    leading run in each column and become NaN. Lines starting with ``#`` are
    skipped.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(_data_lines(fh))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)

    if not header or header[0].lower() != "date":
        raise MissingColumn("date")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if schema is None:
        schema = header[1:]
    for name in schema:
        if name not in header:
            raise MissingColumn(name)
    pos = {name: header.index(name) for name in schema}

    dates = []
    cols = {name: np.full(len(rows), np.nan) for name in schema}
    started = {name: False for name in schema}
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise UnparsableCell(lineno, "<row>", ",".join(row))
        try:
            d = parse_date(row[0])
        except ValueError:
            raise UnparsableCell(lineno, "date", row[0]) from None
        if dates and d <= dates[-1]:
            raise NonMonotoneDates(lineno, dates[-1], d)
        dates.append(d)
        for name in schema:
            cell = row[pos[name]].strip()
            if cell == "":
                if started[name]:
                    raise UnparsableCell(lineno, name, cell)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise UnparsableCell(lineno, name, cell) from None
            if not np.isfinite(v):
                raise UnparsableCell(lineno, name, cell)
            started[name] = True
            cols[name][i] = v
    return PanelData(dates=dates, columns=cols, names={n: n for n in schema})


# ---------------------------------------------------------------------------
# preprocessing steps
# ---------------------------------------------------------------------------

def rolling_standardize(series, window: int = 36) -> MaskedSeries:
    """Standardize by the mean and sample std of the preceding ``window`` points.

    ``out[t] = (x[t] - mean(x[t-window:t])) / std(x[t-window:t], ddof=1)``.
    Entries whose window touches a masked value are masked; entries whose
    window has zero spread are masked and flagged as degenerate.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    s = _as_masked(series)
    x = s.values
    n = len(x)
    out = np.full(n, np.nan)
    valid = np.zeros(n, bool)
    degen = np.zeros(n, bool)
    if n <= window:
        return MaskedSeries(out, valid, degen)

    # each trailing window is reduced independently so a truncated input
    # reproduces the same numbers bit for bit
    win = np.lib.stride_tricks.sliding_window_view(x, window)[:-1]  # win[j] = x[j:j+window]
    win_ok = np.lib.stride_tricks.sliding_window_view(s.valid, window)[:-1].all(axis=1)
    t = np.arange(window, n)
    ok = win_ok & s.valid[t]
    with np.errstate(invalid="ignore"):
        mu = win.mean(axis=1)
        sd = win.std(axis=1, ddof=1)
        scale = np.abs(win).max(axis=1)
    flat = sd <= 1e-13 * np.maximum(scale, np.finfo(float).tiny)
    good = ok & ~flat
    out[t[good]] = (x[t[good]] - mu[good]) / sd[good]
    valid[t[good]] = True
    degen[t[ok & flat]] = True
    return MaskedSeries(out, valid, degen | s.degenerate)


def clip(series, bound: float = 3.0) -> MaskedSeries:
    if not bound > 0:
        raise ValueError("bound must be positive")
    s = _as_masked(series)
    vals = np.where(s.valid, np.clip(s.values, -bound, bound), np.nan)
    return MaskedSeries(vals, s.valid.copy(), s.degenerate.copy())


def ar1_residuals_expanding(series, min_window: int = 24, strict: bool = True) -> MaskedSeries:
    """Residuals from an AR(1) slope estimated on an expanding window.

    For each t with at least ``min_window`` defined points in ``x[:t+1]``,
    the slope rho_t regresses x[s] on x[s-1] (with intercept) over every
    defined pair with s <= t, and ``resid[t+1] = x[t+1] - rho_t * x[t]``.

    With ``strict`` the preconditions raise; otherwise a short or degenerate
    series comes back fully masked.
    """
    if min_window < 3:
        raise ValueError("min_window must be >= 3")
    s = _as_masked(series)
    x = s.values
    n = len(x)
    out = np.full(n, np.nan)
    valid = np.zeros(n, bool)
    degen = np.zeros(n, bool)
    if s.valid.sum() < min_window + 1:
        if strict:
            raise InsufficientHistory(
                f"need at least {min_window + 1} defined entries, got {int(s.valid.sum())}"
            )
        return MaskedSeries(out, valid, s.degenerate.copy())

    pair = np.zeros(n, bool)
    pair[1:] = s.valid[1:] & s.valid[:-1]
    a = np.zeros(n)  # lagged value x[s-1]
    b = np.zeros(n)  # current value x[s]
    a[1:] = np.where(pair[1:], x[:-1], 0.0)
    b[1:] = np.where(pair[1:], x[1:], 0.0)
    cn = np.cumsum(pair.astype(float))
    ca = np.cumsum(a)
    cb = np.cumsum(b)
    cab = np.cumsum(a * b)
    caa = np.cumsum(a * a)
    count = np.cumsum(s.valid)

    with np.errstate(invalid="ignore", divide="ignore"):
        sxx = caa - ca * ca / cn
        sxy = cab - ca * cb / cn
        rho = sxy / sxx
    ok_var = (cn >= 2) & (sxx > 1e-12 * np.maximum(caa, np.finfo(float).tiny))

    t = np.arange(n - 1)
    use = (count[t] >= min_window) & s.valid[t] & s.valid[t + 1]
    fine = use & ok_var[t]
    out[t[fine] + 1] = x[t[fine] + 1] - rho[t[fine]] * x[t[fine]]
    valid[t[fine] + 1] = True
    degen[t[use & ~ok_var[t]] + 1] = True
    if strict and not valid.any() and degen.any():
        raise DegenerateRegressor("lagged series has zero variance on every window")
    return MaskedSeries(out, valid, degen | s.degenerate)


def preprocess_panel(panel: PanelData, window: int = 36, bound: float = 3.0,
                     min_window: int = 24) -> ProcessedPanel:
    """Standardize, clip and AR(1)-filter every column of ``panel``.

    Columns keep their full length; undefined entries are masked. Use
    :meth:`ProcessedPanel.aligned` for the jointly defined rows.
    """
    out = {}
    for name, col in panel.columns.items():
        s = rolling_standardize(col, window)
        s = clip(s, bound)
        s = ar1_residuals_expanding(s, min_window, strict=False)
        out[name] = s
    prov = {"window": int(window), "clip_bound": float(bound), "min_window": int(min_window),
            "std_ddof": 1}
    return ProcessedPanel(dates=list(panel.dates), columns=out, provenance=prov)


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_processed_csv(panel: ProcessedPanel, path, header_comment: str | None = None) -> None:
    """Write values plus a ``<name>_mask`` column (1 = defined) per series."""
    names = panel.column_names
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + names + [f"{n}_mask" for n in names])
        for i, d in enumerate(panel.dates):
            vals = []
            for n in names:
                s = panel.columns[n]
                vals.append(_fmt(s.values[i]) if s.valid[i] else "")
            masks = ["1" if panel.columns[n].valid[i] else "0" for n in names]
            w.writerow([format_date(d)] + vals + masks)


def load_processed_csv(path) -> ProcessedPanel:
    """Read back a file written by :func:`write_processed_csv`.

    Plain panels without mask columns are accepted too; every parsed value
    then counts as defined.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(_data_lines(fh))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = list(reader)
    if not header or header[0].lower() != "date":
        raise MissingColumn("date")
    mask_cols = {h[:-5] for h in header if h.endswith("_mask")}
    names = [h for h in header[1:] if not (h.endswith("_mask") and h[:-5] in header)]
    pos = {h: i for i, h in enumerate(header)}
    n = len(rows)
    dates = []
    cols = {}
    vals = {name: np.full(n, np.nan) for name in names}
    ok = {name: np.zeros(n, bool) for name in names}
    for i, row in enumerate(rows):
        lineno = i + 2
        if len(row) != len(header):
            raise UnparsableCell(lineno, "<row>", ",".join(row))
        try:
            d = parse_date(row[0])
        except ValueError:
            raise UnparsableCell(lineno, "date", row[0]) from None
        if dates and d <= dates[-1]:
            raise NonMonotoneDates(lineno, dates[-1], d)
        dates.append(d)
        for name in names:
            cell = row[pos[name]].strip()
            flag = True
            if name in mask_cols:
                m = row[pos[name + "_mask"]].strip()
                if m not in ("0", "1"):
                    raise UnparsableCell(lineno, name + "_mask", m)
                flag = m == "1"
            if not flag:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise UnparsableCell(lineno, name, cell) from None
            if not np.isfinite(v):
                raise UnparsableCell(lineno, name, cell)
            vals[name][i] = v
            ok[name][i] = True
    for name in names:
        cols[name] = MaskedSeries(vals[name], ok[name], np.zeros(n, bool))
    return ProcessedPanel(dates=dates, columns=cols, provenance={"source": str(path)})
