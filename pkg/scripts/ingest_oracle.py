"""Brute-force reference for the ingest rules, used only to produce golden files.

Deliberately written without the package: day-by-day dictionaries, exact
rational interpolation, explicit loops. Output formats follow SCHEMAS.md.
"""
from __future__ import annotations

import datetime as dt
import json
from fractions import Fraction

SEASON = {12: "winter", 1: "winter", 2: "winter", 3: "spring", 4: "spring", 5: "spring",
          6: "summer", 7: "summer", 8: "summer", 9: "autumn", 10: "autumn", 11: "autumn"}


class OracleError(Exception):
    def __init__(self, line):
        super().__init__(f"line {line}")
        self.line = line


def read_generic(path):
    values = {}
    order = []
    sid = None
    with open(path) as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if n == 1 and parts[0].lower() == "station_id":
                continue
            if len(parts) != 3:
                raise OracleError(n)
            try:
                day = dt.date.fromisoformat(parts[1])
                if parts[2].upper() == "NA":
                    v = None
                else:
                    v = Fraction(parts[2])
                    if v < 0:
                        v = None
            except ValueError:
                raise OracleError(n) from None
            if order and day <= order[-1]:
                raise OracleError(n)
            sid = sid or parts[0]
            order.append(day)
            values[day] = v
    return sid, values


def read_ecad(path, fallback_id):
    values = {}
    order = []
    sid = None
    header = None
    with open(path) as fh:
        lines = fh.read().splitlines()
    for n, line in enumerate(lines, start=1):
        parts = [p.strip() for p in line.split(",")]
        if header is None:
            if "DATE" in [p.upper() for p in parts] and "RR" in [p.upper() for p in parts]:
                header = [p.upper() for p in parts]
            continue
        if not line.strip():
            continue
        rec = dict(zip(header, parts))
        try:
            day = dt.datetime.strptime(rec["DATE"], "%Y%m%d").date()
            rr = int(rec["RR"])
            q = int(rec.get("Q_RR", "0"))
        except (ValueError, KeyError):
            raise OracleError(n) from None
        if order and day <= order[-1]:
            raise OracleError(n)
        sid = sid or rec.get("STAID") or rec.get("SOUID")
        order.append(day)
        values[day] = None if (rr == -9999 or q == 9 or rr < 0) else Fraction(rr, 10)
    return sid or fallback_id, values


def segments(values, start_date, max_gap=3):
    days = sorted(d for d in values if start_date is None or d >= start_date)
    if not days:
        return []
    full = []
    d = days[0]
    while d <= days[-1]:
        full.append((d, values.get(d)))
        d += dt.timedelta(days=1)
    # fill
    i = 0
    n = len(full)
    filled = [v for _, v in full]
    while i < n:
        if filled[i] is not None:
            i += 1
            continue
        j = i
        while j < n and full[j][1] is None:
            j += 1
        gap = j - i
        if i > 0 and j < n and gap <= max_gap:
            left, right = full[i - 1][1], full[j][1]
            for k in range(gap):
                filled[i + k] = left + (right - left) * Fraction(k + 1, gap + 1)
        i = j
    segs = []
    cur = []
    for (day, _), v in zip(full, filled):
        if v is None:
            if cur:
                segs.append(cur)
            cur = []
        else:
            cur.append((day, v))
    if cur:
        segs.append(cur)
    return segs


def spells_of(seg, threshold):
    runs = []
    for day, v in seg:
        state = "wet" if v > threshold else "dry"
        if runs and runs[-1][0] == state:
            runs[-1][2] += 1
        else:
            runs.append([state, day, 1])
    return [(kind, start, dur) for kind, start, dur in runs[1:-1]]


def run(path, fmt, start_date, threshold, min_years):
    import pathlib
    if fmt == "ecad":
        sid, values = read_ecad(path, pathlib.Path(path).stem)
    else:
        sid, values = read_generic(path)
        sid = sid or pathlib.Path(path).stem
    segs = segments(values, start_date)
    spells = []
    days = 0
    for seg in segs:
        days += len(seg)
        spells.extend(spells_of(seg, Fraction(str(threshold))))
    spells.sort(key=lambda s: (s[1], s[0]))
    years = days / 365
    return sid, spells, years, years >= min_years


def spells_csv(sid, spells, accepted):
    lines = ["station_id,kind,start_date,duration,season,year"]
    if accepted:
        for kind, start, dur in spells:
            lines.append(f"{sid},{kind},{start.isoformat()},{dur},{SEASON[start.month]},{start.year}")
    return "\n".join(lines) + "\n"


def datasets_json(sid, spells, years, accepted, seasons=("spring", "summer", "autumn", "winter")):
    out = []
    if accepted:
        wet_by_start = {s[1]: s for s in spells if s[0] == "wet"}
        for season in seasons:
            mine = [s for s in spells if SEASON[s[1].month] == season]
            rec = lambda s: {"start_date": s[1].isoformat(), "duration": s[2], "year": s[1].year}  # noqa: E731
            cycles = {}
            for kind, start, dur in mine:
                if kind != "dry":
                    continue
                partner = wet_by_start.get(start + dt.timedelta(days=dur))
                if partner is None:
                    continue
                sy = start.year + 1 if start.month == 12 else start.year
                cycles.setdefault(sy, []).append([dur, partner[2]])
            out.append({
                "station_id": sid,
                "season": season,
                "recorded_years": round(years, 6),
                "dry": [rec(s) for s in mine if s[0] == "dry"],
                "wet": [rec(s) for s in mine if s[0] == "wet"],
                "cycles_per_year": {str(y): cycles[y] for y in sorted(cycles)},
            })
    return json.dumps({"schema_version": 1, "datasets": out}, indent=1) + "\n"
