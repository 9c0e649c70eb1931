"""Station files -> per-season spell datasets.

Preprocessing rules, in order:

1. records before ``start_date`` (default 1945-01-01) are discarded;
2. interior runs of at most 3 missing days are filled by linear interpolation
   between the bracketing recorded values; longer runs, and any run touching
   either end of the series, split it into separate segments;
3. a day is wet iff its (possibly interpolated) amount is strictly above the
   threshold (default 0.6 mm);
4. each segment is run-length encoded into spells and its first and last spell
   are dropped (they may be truncated by the observation window);
5. a spell belongs to the season and year of its start date;
6. stations with fewer than ``min_years`` (default 30) cumulative recorded years
   are rejected.

Cumulative recorded years are the number of days covered by the retained
segments divided by 365.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import run_lengths
from .errors import BmcdError, ParseError

DRY, WET = 0, 1
KINDS = {DRY: "dry", WET: "wet"}
SEASONS = ("spring", "summer", "autumn", "winter")
_SEASON_OF_MONTH = {
    12: "winter", 1: "winter", 2: "winter",
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "autumn", 10: "autumn", 11: "autumn",
}
DEFAULT_START_DATE = dt.date(1945, 1, 1)
DEFAULT_WET_THRESHOLD = 0.6
DEFAULT_MIN_YEARS = 30
MAX_INTERPOLATED_GAP = 3
INTERPOLATION_DECIMALS = 6
DAYS_PER_YEAR = 365
ECAD_MISSING = -9999
ECAD_FLAG_MISSING = 9


class StationRejected(BmcdError):
    code = "REJECTED"


def season_of(day: dt.date) -> str:
    return _SEASON_OF_MONTH[day.month]


def season_year(day: dt.date) -> int:
    """Year label of the season containing ``day``; December counts towards the next winter."""
    return day.year + 1 if day.month == 12 else day.year


@dataclass(frozen=True)
class DailySeries:
    """One station's consecutive daily precipitation (mm); NaN marks a missing day."""

    station_id: str
    start: dt.date
    precip: np.ndarray

    def __post_init__(self):
        p = self.precip
        if p.ndim != 1:
            raise ValueError("precipitation must be a 1-d array")
        rec = p[~np.isnan(p)]
        if np.any(rec < 0) or np.any(~np.isfinite(rec)):
            raise ValueError("recorded precipitation must be finite and >= 0")

    def __len__(self):
        return self.precip.size

    @property
    def end(self) -> dt.date:
        return self.start + dt.timedelta(days=len(self) - 1)

    def dates(self) -> list[dt.date]:
        return [self.start + dt.timedelta(days=i) for i in range(len(self))]

    def records(self) -> list[tuple[dt.date, float | None]]:
        return [(d, None if math.isnan(v) else float(v)) for d, v in zip(self.dates(), self.precip.tolist())]


@dataclass(frozen=True)
class PrecipRun:
    """A gap-free stretch of daily amounts."""

    start: dt.date
    values: np.ndarray


@dataclass(frozen=True)
class OccurrenceSegment:
    start: dt.date
    states: np.ndarray  # int8, 1 = wet


@dataclass(frozen=True, order=True)
class SpellRecord:
    start_date: dt.date
    kind: str
    duration: int
    season: str
    year: int

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=self.duration)


@dataclass
class SpellDataset:
    station_id: str
    season: str
    dry: list[SpellRecord] = field(default_factory=list)
    wet: list[SpellRecord] = field(default_factory=list)
    cycles_per_year: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    recorded_years: float = 0.0

    def durations(self, kind: str) -> np.ndarray:
        recs = self.dry if kind == "dry" else self.wet
        return np.array([r.duration for r in recs], dtype=np.int64)

    def to_dict(self) -> dict:
        def recs(lst):
            return [{"start_date": r.start_date.isoformat(), "duration": r.duration, "year": r.year} for r in lst]

        return {
            "station_id": self.station_id,
            "season": self.season,
            "recorded_years": round(self.recorded_years, 6),
            "dry": recs(self.dry),
            "wet": recs(self.wet),
            "cycles_per_year": {str(y): [list(c) for c in cyc] for y, cyc in sorted(self.cycles_per_year.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False)


# ----------------------------------------------------------------- parsing


def _finish_series(station_id: str, rows: list[tuple[dt.date, float, int]], path: str) -> DailySeries:
    if not rows:
        raise ParseError("no data rows", path)
    for (prev, _, _), (day, _, lineno) in zip(rows, rows[1:]):
        if day <= prev:
            raise ParseError(f"dates must be strictly increasing ({day} after {prev})", path, lineno)
    first = rows[0][0]
    precip = np.full((rows[-1][0] - first).days + 1, np.nan)
    for day, value, _ in rows:
        precip[(day - first).days] = value
    return DailySeries(station_id, first, precip)


def _parse_ecad(text: str, path: str) -> DailySeries:
    lines = text.splitlines()
    header_idx = None
    for i, line in enumerate(lines):
        cols = [c.strip().upper() for c in line.split(",")]
        if "DATE" in cols and "RR" in cols:
            header_idx = i
            header = cols
            break
    if header_idx is None:
        raise ParseError("no ECA&D header line with DATE and RR columns", path)
    i_date = header.index("DATE")
    i_rr = header.index("RR")
    i_q = header.index("Q_RR") if "Q_RR" in header else None
    i_id = header.index("STAID") if "STAID" in header else (header.index("SOUID") if "SOUID" in header else None)
    station_id = None
    rows = []
    for lineno in range(header_idx + 2, len(lines) + 1):
        line = lines[lineno - 1]
        if not line.strip():
            continue
        cols = [c.strip() for c in line.split(",")]
        if len(cols) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(cols)}", path, lineno)
        try:
            day = dt.datetime.strptime(cols[i_date], "%Y%m%d").date()
            rr = int(cols[i_rr])
            flag = int(cols[i_q]) if i_q is not None else 0
        except ValueError as exc:
            raise ParseError(f"unparsable row: {exc}", path, lineno) from None
        if i_id is not None:
            sid = cols[i_id]
            if station_id is None:
                station_id = sid
            elif sid != station_id:
                raise ParseError(f"mixed station ids {station_id!r} and {sid!r}", path, lineno)
        if rr == ECAD_MISSING or flag == ECAD_FLAG_MISSING or rr < 0:
            value = math.nan
        else:
            value = rr / 10.0
        rows.append((day, value, lineno))
    if station_id is None:
        station_id = Path(path).stem
    return _finish_series(station_id, rows, path)


def _parse_generic(text: str, path: str) -> DailySeries:
    station_id = None
    rows = []
    reader = csv.reader(io.StringIO(text))
    for lineno, cols in enumerate(reader, start=1):
        if not cols or all(not c.strip() for c in cols):
            continue
        cols = [c.strip() for c in cols]
        if lineno == 1 and cols[0].lower() == "station_id":
            continue
        if len(cols) != 3:
            raise ParseError(f"expected 3 columns (station_id,date,precip_mm), got {len(cols)}", path, lineno)
        sid, day_s, val_s = cols
        try:
            day = dt.date.fromisoformat(day_s)
            if val_s.upper() == "NA":
                value = math.nan
            else:
                value = float(val_s)
                if not math.isfinite(value):
                    raise ValueError(f"non-finite amount {val_s!r}")
                if value < 0:
                    value = math.nan
        except ValueError as exc:
            raise ParseError(f"unparsable row: {exc}", path, lineno) from None
        if station_id is None:
            station_id = sid
        elif sid != station_id:
            raise ParseError(f"mixed station ids {station_id!r} and {sid!r}", path, lineno)
        rows.append((day, value, lineno))
    return _finish_series(station_id or Path(path).stem, rows, path)


def parse_station_file(path, format: str = "generic_csv") -> DailySeries:
    """Read one station file.

    ``ecad``: ECA&D text export (free-text preamble, then a ``STAID, SOUID, DATE,
    RR, Q_RR`` header); RR is in 0.1 mm, RR = -9999 or Q_RR = 9 marks a missing day.
    ``generic_csv``: ``station_id,date,precip_mm`` rows with ISO dates and ``NA``
    for missing, optional header. Negative amounts are treated as missing in both.
    Days absent from the file are stored as missing.
    """
    path = str(path)
    with open(path, encoding="utf-8", errors="strict") as fh:
        text = fh.read()
    if format == "ecad":
        return _parse_ecad(text, path)
    if format == "generic_csv":
        return _parse_generic(text, path)
    raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------- pipeline


def clip_series(series: DailySeries, start_date: dt.date | None = DEFAULT_START_DATE) -> DailySeries:
    if start_date is None or series.start >= start_date:
        return series
    skip = (start_date - series.start).days
    return DailySeries(series.station_id, start_date, series.precip[skip:])


def fill_gaps(series: DailySeries, max_gap: int = MAX_INTERPOLATED_GAP) -> list[PrecipRun]:
    """Interpolate short interior gaps, split on long or boundary gaps."""
    x = series.precip.copy()
    n = x.size
    missing = np.isnan(x)
    if not np.any(~missing):
        return []
    vals, lens = run_lengths(missing)
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    runs: list[PrecipRun] = []
    seg_start = None
    for is_missing, start, length in zip(vals.tolist(), starts.tolist(), lens.tolist()):
        stop = start + length
        if not is_missing:
            if seg_start is None:
                seg_start = start
            continue
        interior = start > 0 and stop < n
        if interior and length <= max_gap:
            left, right = x[start - 1], x[stop]
            frac = np.arange(1, length + 1) / (length + 1)
            # rounded to 1e-6 mm so that ties with the threshold resolve as in exact arithmetic
            x[start:stop] = np.round(left + (right - left) * frac, INTERPOLATION_DECIMALS)
            continue
        if seg_start is not None:
            runs.append(PrecipRun(series.start + dt.timedelta(days=seg_start), x[seg_start:start]))
            seg_start = None
    if seg_start is not None:
        runs.append(PrecipRun(series.start + dt.timedelta(days=seg_start), x[seg_start:n]))
    return runs


def threshold_occurrence(run: PrecipRun, wet_threshold_mm: float = DEFAULT_WET_THRESHOLD) -> OccurrenceSegment:
    if run.values.size == 0:
        raise ValueError("empty run")
    return OccurrenceSegment(run.start, (run.values > wet_threshold_mm).astype(np.int8))


def extract_spells(segment: OccurrenceSegment) -> list[SpellRecord]:
    vals, lens = run_lengths(segment.states)
    out = []
    offset = 0
    for i, (v, n) in enumerate(zip(vals.tolist(), lens.tolist())):
        if 0 < i < len(vals) - 1:
            start = segment.start + dt.timedelta(days=offset)
            out.append(SpellRecord(start, KINDS[v], n, season_of(start), start.year))
        offset += n
    return out


def pair_cycles(spells: list[SpellRecord]) -> dict[int, list[tuple[int, int]]]:
    """Dry spells paired with the wet spell that immediately follows them, grouped by season year."""
    ordered = sorted(spells)
    by_start = {s.start_date: s for s in ordered if s.kind == "wet"}
    cycles: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for s in ordered:
        if s.kind != "dry":
            continue
        nxt = by_start.get(s.end_date)
        if nxt is not None:
            cycles[season_year(s.start_date)].append((s.duration, nxt.duration))
    return dict(cycles)


def build_dataset(
    spells: list[SpellRecord],
    season: str,
    recorded_years: float,
    min_years: float = DEFAULT_MIN_YEARS,
    station_id: str = "",
    all_spells: list[SpellRecord] | None = None,
) -> SpellDataset:
    """Season subset of one station's spells; raises StationRejected below ``min_years``.

    ``all_spells`` (defaults to ``spells``) is searched for the wet partner of each
    dry spell, so that a dry spell at the end of a season still forms a cycle.
    """
    if season not in SEASONS:
        raise ValueError(f"unknown season {season!r}")
    if recorded_years < min_years:
        raise StationRejected(f"{recorded_years:.2f} cumulative recorded years < {min_years}")
    mine = sorted(s for s in spells if s.season == season)
    dry = [s for s in mine if s.kind == "dry"]
    wet = [s for s in mine if s.kind == "wet"]
    pool = sorted(set(all_spells or spells) | set(mine))
    wet_pool = [s for s in pool if s.kind == "wet"]
    cycles = pair_cycles(dry + wet_pool)
    return SpellDataset(station_id, season, dry, wet, cycles, recorded_years)


@dataclass
class StationResult:
    station_id: str
    recorded_years: float
    spells: list[SpellRecord]
    datasets: dict[str, SpellDataset]
    rejected: str | None = None


def process_series(
    series: DailySeries,
    wet_threshold_mm: float = DEFAULT_WET_THRESHOLD,
    min_years: float = DEFAULT_MIN_YEARS,
    start_date: dt.date | None = DEFAULT_START_DATE,
    seasons=SEASONS,
) -> StationResult:
    series = clip_series(series, start_date)
    runs = fill_gaps(series)
    spells: list[SpellRecord] = []
    days = 0
    for run in runs:
        days += run.values.size
        spells.extend(extract_spells(threshold_occurrence(run, wet_threshold_mm)))
    spells.sort()
    years = days / DAYS_PER_YEAR
    try:
        datasets = {s: build_dataset(spells, s, years, min_years, series.station_id) for s in seasons}
    except StationRejected as exc:
        return StationResult(series.station_id, years, spells, {}, rejected=str(exc))
    return StationResult(series.station_id, years, spells, datasets)


SPELL_COLUMNS = ["station_id", "kind", "start_date", "duration", "season", "year"]


def write_spells_csv(results: list[StationResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPELL_COLUMNS)
        for res in sorted(results, key=lambda r: r.station_id):
            if res.rejected:
                continue
            for s in res.spells:
                w.writerow([res.station_id, s.kind, s.start_date.isoformat(), s.duration, s.season, s.year])


def read_spells_csv(path) -> dict[str, list[SpellRecord]]:
    out: dict[str, list[SpellRecord]] = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["station_id"]].append(
                SpellRecord(
                    dt.date.fromisoformat(row["start_date"]),
                    row["kind"],
                    int(row["duration"]),
                    row["season"],
                    int(row["year"]),
                )
            )
    return dict(out)


def datasets_from_spells(
    station_id: str, spells: list[SpellRecord], recorded_years: float = math.inf, seasons=SEASONS
) -> dict[str, SpellDataset]:
    return {s: build_dataset(spells, s, recorded_years, 0, station_id) for s in seasons}


def write_datasets_json(results: list[StationResult], path) -> None:
    payload = {
        "schema_version": 1,
        "datasets": [
            ds.to_dict()
            for res in sorted(results, key=lambda r: r.station_id)
            if not res.rejected
            for ds in res.datasets.values()
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
