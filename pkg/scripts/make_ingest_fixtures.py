"""Write the crafted ingest fixtures and their golden outputs.

    python scripts/make_ingest_fixtures.py

Fixtures go to tests/fixtures/ingest/, goldens (from ingest_oracle.py, not
from the package) to tests/fixtures/ingest/golden/. Rerun only when a
fixture changes, then review the diff by hand.
"""
from __future__ import annotations

import datetime as dt
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
import ingest_oracle as oracle  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "ingest"
GOLDEN = ROOT / "golden"

ECAD_PREAMBLE = """EUROPEAN CLIMATE ASSESSMENT & DATASET (ECA&D), file created on: 01-01-2000
THESE DATA CAN BE USED FOR NON-COMMERCIAL RESEARCH AND EDUCATION PROVIDED THAT THE FOLLOWING SOURCE IS ACKNOWLEDGED:

FILE FORMAT (MISSING VALUE CODE = -9999):

01-06 SOUID: Source identifier
08-15 DATE : Date YYYYMMDD
17-21 RR   : Precipitation amount in 0.1 mm
23-27 Q_RR : quality code for RR (0='valid'; 1='suspect'; 9='missing')

"""


def days(start: str, n: int):
    d0 = dt.date.fromisoformat(start)
    return [d0 + dt.timedelta(days=i) for i in range(n)]


def generic(sid, start, values, header=True):
    lines = ["station_id,date,precip_mm"] if header else []
    for d, v in zip(days(start, len(values)), values):
        lines.append(f"{sid},{d.isoformat()},{v}")
    return "\n".join(lines) + "\n"


def pattern(n, seed):
    # deterministic wet/dry amounts with spells of varied length
    out = []
    x = seed
    for _ in range(n):
        x = (x * 1103515245 + 12345) % 2**31
        out.append("3.2" if (x >> 16) % 7 < 2 else "0.0")
    return out


W, D, M = "2.0", "0.0", "NA"

CASES: dict[str, dict] = {}


def case(name, text, fmt="generic_csv", min_years=0, start_date="1945-01-01", threshold=0.6):
    CASES[name] = {"text": text, "format": fmt, "min_years": min_years, "start_date": start_date,
                   "threshold": threshold}


def build():
    # ECA&D export with preamble, unit conversion, sentinel, flag 9 and suspect flag 1
    rows = [
        (20000101, 0, 0), (20000102, 64, 0), (20000103, 70, 0), (20000104, 0, 0), (20000105, 6, 0),
        (20000106, -9999, 9), (20000107, 12, 0), (20000108, 0, 0), (20000109, 0, 0), (20000110, 7, 1),
        (20000111, 33, 9), (20000112, 0, 0), (20000113, 0, 0), (20000114, 0, 0), (20000115, 50, 0),
        (20000116, 0, 0),
    ]
    body = "STAID, SOUID,    DATE,   RR, Q_RR\n" + "".join(
        f"{229:>6},{100865:>7},{d:>9},{rr:>5},{q:>5}\n" for d, rr, q in rows
    )
    case("01_ecad_basic.txt", ECAD_PREAMBLE + body, fmt="ecad")

    # ECA&D with SOUID only and a long missing run
    rows = [(19991120 + i, v, 0) for i, v in enumerate([0, 0, 80, 90, 0, 0, 0, 11, 0])]
    rows += [(19991129, -9999, 9), (19991130, -9999, 9)]
    rows += [(19991201 + i, -9999, 9) for i in range(3)]
    rows += [(19991204 + i, v, 0) for i, v in enumerate([0, 40, 40, 0, 0, 13, 0, 2])]
    body = "SOUID,DATE,RR,Q_RR\n" + "".join(f"{777},{d},{rr},{q}\n" for d, rr, q in rows)
    case("02_ecad_souid_split.txt", ECAD_PREAMBLE + body, fmt="ecad")

    case("03_generic_header.csv", generic("P001", "1995-03-01", [D, W, W, D, D, D, W, D, D, W, W, W, D]))
    case("04_generic_noheader.csv", generic("P002", "1995-03-01", [W, D, W, W, D, D, W, D], header=False))

    # interior gaps of 1, 2 and 3 days are interpolated
    vals = [D, W, M, W, D, D, M, M, D, W, W, M, M, M, W, D, D, W, D]
    case("05_gap_interpolate.csv", generic("G1", "2001-05-01", vals))

    # gaps of 4 and 6 days split the series, each piece trimmed separately
    vals = [D, W, W, D, D, W, D, M, M, M, M, W, D, D, W, W, D, W, M, M, M, M, M, M, D, W, D, D, W]
    case("06_gap_split.csv", generic("G2", "2001-05-01", vals))

    # leading and trailing missing runs cannot be interpolated
    vals = [M, M, D, W, W, D, D, D, W, D, M, M, M]
    case("07_boundary_missing.csv", generic("G3", "2001-05-01", vals))

    # amounts at and around the threshold
    vals = ["0.0", "0.6", "0.61", "0.6", "0.59", "0.7", "0.60", "1.0", "0.0", "0.61", "0.0"]
    case("08_threshold_edges.csv", generic("T1", "2003-07-01", vals))

    # interpolated amounts landing on, above and below the threshold
    vals = ["1.0", "0.4", M, M, "1.0", "0.0", M, "1.0", "0.0", "0.9", M, M, M, "0.5", "2.0", "0.0"]
    case("09_interpolated_threshold.csv", generic("T2", "2003-07-01", vals))

    # same file with a non-default threshold of 0.0
    vals = ["0.0", "0.1", "0.0", "0.0", "0.5", "0.0", "0.0", "0.2", "0.0"]
    case("10_threshold_zero.csv", generic("T3", "2003-07-01", vals), threshold=0.0)

    # spells across season and year boundaries; December dry spells count towards next winter
    start = dt.date(2004, 11, 20)
    seq = [W] * 2 + [D] * 5 + [W] * 3 + [D] * 4 + [W] * 1 + [D] * 9 + [W] * 2 + [D] * 6 + [W] * 4
    seq += [D] * 30 + [W] * 2 + [D] * 3 + [W] * 1 + [D] * 2 + [W] * 4 + [D] * 2
    case("11_season_year_boundary.csv", generic("B1", start.isoformat(), seq))

    # absent dates act as missing days
    text = "station_id,date,precip_mm\n" + "".join(
        f"K1,{d},{v}\n" for d, v in [
            ("2002-02-25", D), ("2002-02-26", W), ("2002-02-27", W), ("2002-03-01", D), ("2002-03-02", D),
            ("2002-03-03", W), ("2002-03-08", D), ("2002-03-09", W), ("2002-03-10", D), ("2002-03-11", D),
            ("2002-03-12", W), ("2002-03-13", D),
        ]
    )
    case("12_skipped_dates.csv", text)

    # records before 1945 are dropped before anything else
    vals = [W, D, D, W, W, D, W, W, D, D, D, W, D, W]
    case("13_pre1945_cutoff.csv", generic("C1", "1944-12-25", vals))

    # negative amounts are treated as missing
    vals = [D, W, "-1.0", W, D, D, "-3", "-3", "-3", "-3", W, D, W, D]
    case("14_negative_values.csv", generic("N1", "2010-01-01", vals))

    # exactly 30 years of recorded days is accepted; one day fewer is not
    n30 = 30 * 365
    case("15_thirty_years.csv", generic("Y30", "1960-01-01", pattern(n30, 1)), min_years=30)
    case("16_under_thirty_years.csv", generic("Y29", "1960-01-01", pattern(n30 - 1, 1)), min_years=30)
    # 31 calendar years of which more than one is missing: rejected by recorded, not calendar, years
    vals = pattern(31 * 365, 2)
    vals[5000:5400] = [M] * 400
    case("17_gappy_long_record.csv", generic("Y31", "1960-01-01", vals), min_years=30)

    # too short for any spell to survive trimming
    case("18_two_spells_only.csv", generic("S2", "2010-06-01", [D, D, W, W, W]))
    case("19_all_missing.csv", generic("AM", "2010-06-01", [M] * 6))

    # malformed inputs
    case("20_nonmonotone_dates.csv",
         "station_id,date,precip_mm\nE1,2000-01-01,0.0\nE1,2000-01-03,1.0\nE1,2000-01-02,0.0\n")
    case("21_duplicate_date.csv",
         "station_id,date,precip_mm\nE2,2000-01-01,0.0\nE2,2000-01-02,1.0\nE2,2000-01-02,0.0\n")
    case("22_bad_value.csv", "station_id,date,precip_mm\nE3,2000-01-01,0.0\nE3,2000-01-02,lots\n")


def main():
    build()
    ROOT.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    meta = {}
    for name, c in CASES.items():
        path = ROOT / name
        path.write_text(c["text"])
        meta[name] = {k: c[k] for k in ("format", "min_years", "start_date", "threshold")}
        stem = path.stem
        start = dt.date.fromisoformat(c["start_date"]) if c["start_date"] else None
        try:
            sid, spells, years, accepted = oracle.run(path, c["format"], start, c["threshold"], c["min_years"])
        except oracle.OracleError as exc:
            (GOLDEN / f"{stem}.status").write_text(f"error line {exc.line}\n")
            continue
        (GOLDEN / f"{stem}.status").write_text(("accepted" if accepted else "rejected") + f" {years:.6f}\n")
        (GOLDEN / f"{stem}.spells.csv").write_text(oracle.spells_csv(sid, spells, accepted))
        (GOLDEN / f"{stem}.datasets.json").write_text(oracle.datasets_json(sid, spells, years, accepted))
    (ROOT / "cases.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(CASES)} fixtures")


if __name__ == "__main__":
    main()
