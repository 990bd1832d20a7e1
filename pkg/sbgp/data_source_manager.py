"""
Data Source Manager
Reads daily site series from CSV, reduces them to weekly maxima, restricts
them to a season and extracts L-shaped exceedance sets. Also handles the
plain y1,y2 sample files used by every CLI command and records fits in the
history database.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from sbgp.crud import FitRecordService
from sbgp.database import get_database
from sbgp.exceptions import DomainError, IngestionError

logger = logging.getLogger(__name__)

MISSING_MARKERS = {"", "na", "nan", "null", "none"}
MIN_EXCEEDANCE_ROWS = 10
BLOCK_DAYS = 7
# Tolerance for ceil(n * level) when n * level is an integer up to round-off
QUANTILE_EPS = 1e-9

PathLike = Union[str, Path]


@dataclass
class BivariateSeries:
    """Dated observations, one real column per site; dates strictly increasing."""
    dates: pd.DatetimeIndex
    values: np.ndarray
    site_labels: List[str]
    dropped_rows: int = 0
    resorted_rows: int = 0

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, label: str) -> np.ndarray:
        if label not in self.site_labels:
            raise DomainError(f"Unknown site '{label}'; available: {', '.join(self.site_labels)}")
        return self.values[:, self.site_labels.index(label)]

    def select(self, labels: Sequence[str]) -> "BivariateSeries":
        columns = np.column_stack([self.column(label) for label in labels])
        return BivariateSeries(self.dates, columns, list(labels))

    def subset(self, mask: np.ndarray) -> "BivariateSeries":
        return BivariateSeries(self.dates[mask], self.values[mask], list(self.site_labels))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.site_labels)
        frame.insert(0, "date", self.dates.strftime("%Y-%m-%d"))
        return frame


@dataclass
class ExceedanceSet:
    """Rows with value1 > u1 or value2 > u2, on the original scale."""
    threshold_level: float
    thresholds: Tuple[float, float]
    rows: np.ndarray
    total_n: int
    site_labels: List[str] = field(default_factory=lambda: ["y1", "y2"])

    @property
    def excesses(self) -> np.ndarray:
        """Rows minus thresholds; every row has a positive coordinate."""
        return self.rows - np.asarray(self.thresholds)

    def meta(self) -> Dict[str, Any]:
        return {
            "threshold_level": self.threshold_level,
            "thresholds": list(self.thresholds),
            "total_n": self.total_n,
            "retained": int(self.rows.shape[0]),
            "site_labels": list(self.site_labels),
        }


def _line_number(position: int) -> int:
    # header is line 1
    return position + 2


def load_csv(path: PathLike, date_column: str, value_columns: Sequence[str]) -> BivariateSeries:
    """
    Read dated site values from a CSV file.

    Rows with a missing value are dropped and counted; unsorted dates are
    sorted with a warning.

    Args:
        path: CSV file with a header row
        date_column: Column holding ISO-8601 dates
        value_columns: Site columns to read, in output order

    Raises:
        IngestionError: On missing columns, unparseable cells or duplicate dates
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestionError(f"{path}: cannot parse CSV ({e})")

    missing = [c for c in [date_column, *value_columns] if c not in raw.columns]
    if missing:
        raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}; found {', '.join(raw.columns)}")

    dates = pd.to_datetime(raw[date_column].str.strip(), format="ISO8601", errors="coerce")
    bad_dates = np.flatnonzero(dates.isna().to_numpy())
    if bad_dates.size:
        pos = int(bad_dates[0])
        raise IngestionError(
            f"{path}: line {_line_number(pos)}, column '{date_column}': "
            f"cannot parse date '{raw[date_column].iloc[pos]}'"
        )

    values = np.empty((len(raw), len(value_columns)))
    keep = np.ones(len(raw), dtype=bool)
    for j, column in enumerate(value_columns):
        cells = raw[column].str.strip()
        is_missing = cells.str.lower().isin(MISSING_MARKERS).to_numpy()
        parsed = pd.to_numeric(cells.where(~is_missing), errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~is_missing & ~np.isfinite(parsed))
        if bad.size:
            pos = int(bad[0])
            raise IngestionError(
                f"{path}: line {_line_number(pos)}, column '{column}': cannot parse number '{cells.iloc[pos]}'"
            )
        values[:, j] = parsed
        keep &= ~is_missing

    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"{path}: dropped {dropped} row(s) with missing values")
    dates = pd.DatetimeIndex(dates[keep]).normalize()
    values = values[keep]

    duplicated = dates.duplicated()
    if duplicated.any():
        raise IngestionError(f"{path}: duplicate date {dates[duplicated][0].date()}")

    order = np.argsort(dates.to_numpy(), kind="stable")
    resorted = int(np.count_nonzero(order != np.arange(len(order))))
    if resorted:
        logger.warning(f"{path}: dates were not sorted; {resorted} row(s) moved")
        dates, values = dates[order], values[order]

    return BivariateSeries(dates, values, list(value_columns), dropped, resorted)


def weekly_maxima(series: BivariateSeries) -> BivariateSeries:
    """
    Column maxima over consecutive 7-day blocks anchored at the first date.

    A block is kept only when all 7 of its days are present; each block is
    dated by its first day.
    """
    if len(series) == 0 or (series.dates[-1] - series.dates[0]).days + 1 < BLOCK_DAYS:
        logger.warning("Series shorter than 7 days; no weekly maxima")
        return BivariateSeries(pd.DatetimeIndex([]), np.empty((0, series.values.shape[1])),
                               list(series.site_labels))

    start = series.dates[0]
    block = ((series.dates - start).days // BLOCK_DAYS).to_numpy()
    frame = pd.DataFrame(series.values, columns=series.site_labels)
    grouped = frame.groupby(block, sort=True)
    counts = grouped.size()
    maxima = grouped.max()[counts == BLOCK_DAYS]

    incomplete = int((counts < BLOCK_DAYS).sum())
    if incomplete:
        logger.info(f"Dropped {incomplete} incomplete weekly block(s)")
    block_dates = start + pd.to_timedelta(maxima.index.to_numpy() * BLOCK_DAYS, unit="D")
    return BivariateSeries(pd.DatetimeIndex(block_dates), maxima.to_numpy(dtype=float),
                           list(series.site_labels))


def parse_month_day(text: str) -> Tuple[int, int]:
    """
    Parse "MM-DD".

    Raises:
        DomainError: If the text is not a valid month-day
    """
    try:
        month, day = (int(part) for part in text.strip().split("-"))
        date(2000, month, day)
    except ValueError:
        raise DomainError(f"Invalid month-day '{text}', expected MM-DD")
    return month, day


def season_filter(series: BivariateSeries, start_month_day: str, end_month_day: str) -> BivariateSeries:
    """
    Keep rows whose date falls in [start, end] of any year, both ends inclusive.

    A start after the end wraps around the new year (e.g. 12-01 to 02-28).
    """
    start = parse_month_day(start_month_day)
    end = parse_month_day(end_month_day)
    keys = series.dates.month.to_numpy() * 100 + series.dates.day.to_numpy()
    lo, hi = start[0] * 100 + start[1], end[0] * 100 + end[1]
    if lo <= hi:
        mask = (keys >= lo) & (keys <= hi)
    else:
        mask = (keys >= lo) | (keys <= hi)
    return series.subset(mask)


def empirical_quantile(values: np.ndarray, level: float) -> float:
    """Order statistic at position ceil(n * level), 1-based."""
    ordered = np.sort(np.asarray(values, dtype=float))
    k = max(1, math.ceil(len(ordered) * level - QUANTILE_EPS))
    return float(ordered[k - 1])


def exceedance_set(series: BivariateSeries, level: float) -> ExceedanceSet:
    """
    Rows of a two-column series exceeding the empirical level-quantile in either column.

    Raises:
        DomainError: If level is outside (0, 1), the series is not bivariate or n < 10
        IngestionError: If a column is constant
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"Threshold level must lie in (0, 1), got {level}")
    if series.values.ndim != 2 or series.values.shape[1] != 2:
        raise DomainError(f"Exceedance sets need exactly two columns, got {series.values.shape}")
    n = len(series)
    if n < MIN_EXCEEDANCE_ROWS:
        raise DomainError(f"Need at least {MIN_EXCEEDANCE_ROWS} rows for an exceedance set, got {n}")
    for j, label in enumerate(series.site_labels):
        if np.ptp(series.values[:, j]) == 0:
            raise IngestionError(f"Column '{label}' is constant; thresholds are degenerate")

    thresholds = tuple(empirical_quantile(series.values[:, j], level) for j in range(2))
    keep = (series.values[:, 0] > thresholds[0]) | (series.values[:, 1] > thresholds[1])
    logger.info(f"Level {level}: kept {int(keep.sum())} of {n} rows")
    return ExceedanceSet(level, thresholds, series.values[keep], n, list(series.site_labels))


def read_sample(path: PathLike) -> np.ndarray:
    """
    Read an n x 2 sample CSV (columns y1,y2, else the first two columns).

    Raises:
        IngestionError: On non-numeric cells or fewer than two columns
    """
    path = Path(path)
    frame = pd.read_csv(path)
    columns = ["y1", "y2"] if {"y1", "y2"} <= set(frame.columns) else list(frame.columns[:2])
    if len(columns) < 2:
        raise IngestionError(f"{path}: a sample needs two columns")
    data = frame[columns].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        row, col = bad[0]
        raise IngestionError(f"{path}: line {_line_number(int(row))}, column '{columns[col]}': not a finite number")
    return data


def write_sample(data: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    pd.DataFrame(np.asarray(data, dtype=float), columns=["y1", "y2"]).to_csv(path, index=False)
    return path


def meta_path(path: PathLike) -> Path:
    """Sidecar metadata path of an exceedance CSV."""
    return Path(path).with_suffix(".meta.json")


def write_exceedances(es: ExceedanceSet, path: PathLike) -> Tuple[Path, Path]:
    """Write the excesses as y1,y2 and the thresholds to the sidecar JSON."""
    path = write_sample(es.excesses, path)
    sidecar = meta_path(path)
    with open(sidecar, "w") as f:
        json.dump(es.meta(), f, indent=2)
    return path, sidecar


def read_meta(path: PathLike) -> Optional[Dict[str, Any]]:
    """Sidecar metadata of an exceedance CSV, None if there is none."""
    sidecar = meta_path(path)
    if not sidecar.exists():
        return None
    with open(sidecar) as f:
        return json.load(f)


class DataSourceManager:
    """Loads multi-site data and runs pairwise fits, optionally recording them in the database."""

    def __init__(self, db_url: Optional[str] = None, record: bool = False):
        """
        Initialize data source manager.

        Args:
            db_url: SQLAlchemy database URL (default: SBGP_DB_URL)
            record: Store every fit in the history database
        """
        self.record = record
        self.db = get_database(db_url) if record else None

    def load_directory(self, csv_dir: PathLike, date_column: str = "date") -> BivariateSeries:
        """
        Merge every CSV in a directory on the date column.

        Each file contributes all its non-date columns; only dates present in
        every file are kept.

        Raises:
            IngestionError: If the directory holds no CSV or a site label repeats
        """
        csv_dir = Path(csv_dir)
        files = sorted(csv_dir.glob("*.csv"))
        if not files:
            raise IngestionError(f"No CSV files in {csv_dir}")

        merged: Optional[pd.DataFrame] = None
        for path in files:
            header = pd.read_csv(path, nrows=0).columns
            labels = [c for c in header if c != date_column]
            series = load_csv(path, date_column, labels)
            frame = pd.DataFrame(series.values, index=series.dates, columns=labels)
            if merged is None:
                merged = frame
                continue
            clash = set(merged.columns) & set(labels)
            if clash:
                raise IngestionError(f"{path}: site label(s) {', '.join(sorted(clash))} already loaded")
            merged = merged.join(frame, how="inner")

        logger.info(f"Loaded {merged.shape[1]} sites over {merged.shape[0]} common dates from {len(files)} file(s)")
        return BivariateSeries(pd.DatetimeIndex(merged.index), merged.to_numpy(dtype=float), list(merged.columns))

    def pairs_against(self, series: BivariateSeries, ref_label: str) -> Iterator[Tuple[str, BivariateSeries]]:
        """(site, two-column series [ref, site]) for every site other than the reference."""
        series.column(ref_label)
        for label in series.site_labels:
            if label != ref_label:
                yield label, series.select([ref_label, label])

    def batch_fit(self, series: BivariateSeries, ref_label: str, level: float, fit_fn,
                  workers: int = 1, source: Optional[str] = None) -> pd.DataFrame:
        """
        Fit every (reference, site) pair's exceedance set.

        Args:
            series: Multi-site series (already reduced / filtered)
            ref_label: Reference site
            level: Threshold level of each exceedance set
            fit_fn: excess sample -> dict with 'theta' mapping parameter names to values
            workers: Threads used across pairs

        Returns:
            One row per pair: site, then the estimates
        """
        pairs = list(self.pairs_against(series, ref_label))

        def job(pair):
            label, pair_series = pair
            es = exceedance_set(pair_series, level)
            return label, es, fit_fn(es.excesses)

        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(job, pairs))

        rows = []
        for label, es, fitted in results:
            rows.append({"site": label, **fitted["theta"]})
            if self.record:
                self.record_fit(fitted, source=source, site=label, threshold_level=level, n=es.rows.shape[0])
        logger.info(f"Fitted {len(rows)} pair(s) against {ref_label}")
        return pd.DataFrame(rows)

    def record_fit(self, fitted: Dict[str, Any], source: Optional[str] = None, site: Optional[str] = None,
                   threshold_level: Optional[float] = None, n: Optional[int] = None,
                   weights_path: Optional[str] = None) -> int:
        """Store one fit and return its record id."""
        db = self.db or get_database()
        session = db.get_session()
        try:
            record = FitRecordService.create(
                session,
                family=fitted.get("family", "sbgp"),
                params=fitted,
                source=source,
                site=site,
                threshold_level=threshold_level,
                n=n,
                weights_path=weights_path,
            )
            return record.id
        finally:
            session.close()
