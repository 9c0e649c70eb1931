"""Command-line pipeline: ingest -> fit -> diagnose -> simulate -> risk.

Every subcommand reads and writes tables in the output directory, so steps can
be rerun independently. Exit codes: 0 success, 1 internal error, 2 input
errors (partial results are still written).
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .core import exit_probs_from_distribution, simulate_chain, tabulate_for_simulation
from .diagnostics import acf_bivariate, exit_curve, gof_test, qq_envelope
from .distributions import GeometricParams, GeomMixParams, HdeGpdParams
from .errors import BmcdError, NonConvergedError, ParseError
from .estimation import em_fit_geommix, fit_geometric, fit_hdegpd
from .ingest import SPELL_COLUMNS, datasets_from_spells, parse_station_file, process_series, SpellRecord
from .risk import mean_residual_geometric, mean_residual_hdegpd, proportion_time_long_dry
from .rng import derive_seed

log = logging.getLogger("bmcd")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
SCHEMA_VERSION = 1

FIT_COLUMNS = [
    "station", "season", "regime", "family", "status", "converged", "n_obs",
    "f1", "kappa", "sigma", "xi", "pi", "p1", "p2", "p", "iterations", "objective", "restart",
]
EXIT_COLUMNS = ["station", "season", "regime", "model", "d", "q_model", "q_emp", "band_sd", "count"]
GOF_COLUMNS = ["station", "season", "regime", "model", "d_max", "dof", "statistic", "p_value", "n_spells", "status"]
ACF_COLUMNS = ["station", "season", "lag", "count", "bound", "r_dd", "r_dw", "r_wd", "r_ww", "status"]
QQ_COLUMNS = ["station", "season", "regime", "model", "rank", "recorded", "simulated", "lower", "upper", "multiplicity"]
RISK_COLUMNS = ["station", "season", "model", "metric", "d", "lower", "upper", "width", "u_used", "status"]
OCC_COLUMNS = ["step", "state", "d"]

DRY_MODELS = ("hdegpd", "geometric")
WET_MODELS = ("geommix", "geometric")


class InputError(Exception):
    """Problem with user input; maps to exit code 2."""


# ------------------------------------------------------------- table I/O


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _json_cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(out: Path, name: str, columns: list[str], rows, fmt: str = "csv") -> Path:
    rows = list(rows)
    if fmt == "json":
        path = out / f"{name}.json"
        payload = {"schema_version": SCHEMA_VERSION, "columns": columns,
                   "rows": [{c: _json_cell(r.get(c)) for c in columns} for r in rows]}
        path.write_text(json.dumps(payload, indent=1) + "\n")
        return path
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
    return path


def read_table(out: Path, name: str) -> list[dict[str, str]]:
    csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
    # when both exist, the most recent write wins
    if csv_path.exists() and not (json_path.exists() and json_path.stat().st_mtime_ns > csv_path.stat().st_mtime_ns):
        with open(csv_path, newline="") as fh:
            return list(csv.DictReader(fh))
    if json_path.exists():
        rows = json.loads(json_path.read_text())["rows"]
        return [{k: _cell(v) for k, v in r.items()} for r in rows]
    raise InputError(f"missing {csv_path} (run the earlier pipeline step first)")


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json"


def load_manifest(out: Path) -> dict:
    p = _manifest_path(out)
    if p.exists():
        return json.loads(p.read_text())
    return {"schema_version": SCHEMA_VERSION, "stations": {}, "errors": [], "steps": []}


def save_manifest(out: Path, manifest: dict, step: str, cfg: RunConfig) -> None:
    manifest["steps"].append({
        "step": step,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "config": cfg.to_dict(),
        "overrides": cfg.overrides(),
    })
    _manifest_path(out).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _map(func, items, workers: int):
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ---------------------------------------------------------------- ingest


def _input_files(cfg: RunConfig) -> list[Path]:
    files: list[Path] = []
    for item in cfg.inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(x for x in p.iterdir() if x.is_file() and not x.name.startswith(".")))
        elif p.exists():
            files.append(p)
        else:
            raise InputError(f"input {p} does not exist")
    return files


def _ingest_one(args):
    path, cfg = args
    try:
        series = parse_station_file(path, cfg.format)
    except (ParseError, OSError, UnicodeDecodeError) as exc:
        return str(path), None, str(exc)
    return str(path), process_series(series, cfg.wet_threshold_mm, cfg.min_years, cfg.start, tuple(cfg.seasons)), None


def cmd_ingest(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema_version": SCHEMA_VERSION, "stations": {}, "errors": [], "steps": []}
    files = _input_files(cfg)
    results = _map(_ingest_one, [(f, cfg) for f in files], cfg.workers)
    accepted = []
    status = EXIT_OK
    for path, res, err in results:
        if err is not None:
            manifest["errors"].append({"file": path, "error": err})
            status = EXIT_INPUT
            continue
        if res.station_id in manifest["stations"]:
            manifest["errors"].append({"file": path, "error": f"duplicate station id {res.station_id!r}"})
            status = EXIT_INPUT
            continue
        entry = {"file": path, "recorded_years": round(res.recorded_years, 6), "n_spells": len(res.spells)}
        if res.rejected:
            entry.update(status="rejected", reason=res.rejected)
        else:
            entry.update(status="accepted")
            accepted.append(res)
        manifest["stations"][res.station_id] = entry
    rows = (
        {"station_id": r.station_id, "kind": s.kind, "start_date": s.start_date.isoformat(),
         "duration": s.duration, "season": s.season, "year": s.year}
        for r in sorted(accepted, key=lambda r: r.station_id) for s in r.spells
    )
    write_table(out, "spells", SPELL_COLUMNS, rows, cfg.output_format)
    save_manifest(out, manifest, "ingest", cfg)
    log.info("ingested %d files: %d accepted, %d errors", len(files), len(accepted), len(manifest["errors"]))
    return status


def _load_spells(out: Path) -> dict[str, list[SpellRecord]]:
    by_station: dict[str, list[SpellRecord]] = {}
    for row in read_table(out, "spells"):
        try:
            rec = SpellRecord(dt.date.fromisoformat(row["start_date"]), row["kind"], int(row["duration"]),
                              row["season"], int(row["year"]))
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad spells row {row}: {exc}") from None
        by_station.setdefault(row["station_id"], []).append(rec)
    return {k: sorted(v) for k, v in sorted(by_station.items())}


# ------------------------------------------------------------------- fit


def _fit_row(station, season, regime, family, n, fit=None, status="OK", params=None):
    row = {"station": station, "season": season, "regime": regime, "family": family,
           "status": status, "n_obs": n, "converged": False}
    if fit is not None:
        params = fit.params
        row.update(converged=fit.converged, iterations=fit.iterations, objective=fit.objective, restart=fit.restart)
    if params is not None:
        row.update(params.to_dict())
    return row


def _fit_unit(args):
    station, season, dry, wet, cfg = args
    rows = []
    if dry.size:
        try:
            rows.append(_fit_row(station, season, "dry", "hdegpd", dry.size, fit_hdegpd(dry, cfg.pwm_min_tail_count)))
        except NonConvergedError as exc:
            rows.append(_fit_row(station, season, "dry", "hdegpd", dry.size, exc.best, status="NON_CONVERGED"))
        except BmcdError as exc:
            rows.append(_fit_row(station, season, "dry", "hdegpd", dry.size, status=exc.code))
        rows.append(_fit_row(station, season, "dry", "geometric", dry.size, params=fit_geometric(dry)))
        rows[-1]["converged"] = True
    else:
        rows += [_fit_row(station, season, "dry", f, 0, status="EMPTY") for f in DRY_MODELS]
    if wet.size:
        seed = derive_seed(cfg.seed, station, season, "wet")
        rows.append(_fit_row(station, season, "wet", "geommix", wet.size,
                             em_fit_geommix(wet, n_restarts=cfg.em_restarts, seed=seed)))
        rows.append(_fit_row(station, season, "wet", "geometric", wet.size, params=fit_geometric(wet)))
        rows[-1]["converged"] = True
    else:
        rows += [_fit_row(station, season, "wet", f, 0, status="EMPTY") for f in WET_MODELS]
    return rows


def _units(spells, cfg):
    for station, recs in spells.items():
        datasets = datasets_from_spells(station, recs, seasons=tuple(cfg.seasons))
        for season in cfg.seasons:
            yield station, season, datasets[season]


def cmd_fit(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    spells = _load_spells(out)
    units = [(st, se, ds.durations("dry"), ds.durations("wet"), cfg) for st, se, ds in _units(spells, cfg)]
    rows = [r for unit_rows in _map(_fit_unit, units, cfg.workers) for r in unit_rows]
    write_table(out, "fits", FIT_COLUMNS, rows, cfg.output_format)
    manifest = load_manifest(out)
    for station in spells:
        manifest["stations"].setdefault(station, {})["status"] = "fitted"
    save_manifest(out, manifest, "fit", cfg)
    flagged = sum(r["status"] != "OK" for r in rows)
    log.info("fitted %d station-seasons (%d rows flagged)", len(units), flagged)
    return EXIT_OK


def _params_from_row(row):
    f = lambda k: float(row[k])  # noqa: E731
    fam = row["family"]
    if fam == "hdegpd":
        return HdeGpdParams(f("f1"), f("kappa"), f("sigma"), f("xi"))
    if fam == "geommix":
        return GeomMixParams(f("pi"), f("p1"), f("p2"))
    if fam == "geometric":
        return GeometricParams(f("p"))
    raise InputError(f"unknown family {fam!r}")


def _load_fits(out: Path) -> dict[tuple[str, str, str, str], object]:
    """(station, season, regime, family) -> params, for rows with status OK."""
    fits = {}
    for row in read_table(out, "fits"):
        if row.get("status") != "OK":
            continue
        try:
            fits[(row["station"], row["season"], row["regime"], row["family"])] = _params_from_row(row)
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad fits row {row}: {exc}") from None
    return fits


# -------------------------------------------------------------- diagnose


def _diag_unit(args):
    station, season, ds, models, cfg = args
    tables = {"exitcurves": [], "gof": [], "acf": [], "qq": []}
    key = {"station": station, "season": season}
    for regime, names in (("dry", DRY_MODELS), ("wet", WET_MODELS)):
        x = ds.durations(regime)
        for model in names:
            dist = models.get((regime, model))
            base = {**key, "regime": regime, "model": model}
            if dist is None or x.size == 0:
                tables["gof"].append({**base, "n_spells": int(x.size), "status": "NO_FIT"})
                continue
            try:
                g = gof_test(x, dist, min_tail_count=cfg.min_tail_count)
                tables["gof"].append({**base, "d_max": g.d_max, "dof": g.dof, "statistic": g.statistic,
                                      "p_value": g.p_value, "n_spells": g.n_spells, "status": g.status})
                d_max = g.d_max
            except BmcdError as exc:
                tables["gof"].append({**base, "n_spells": int(x.size), "status": exc.code})
                d_max = max(int(x.max()), 1)
            curve = exit_curve(x, dist, d_max)
            for d, qm, qe, sd, n in curve.rows():
                tables["exitcurves"].append({**base, "d": d, "q_model": qm, "q_emp": qe, "band_sd": sd, "count": n})
            seed = derive_seed(cfg.seed, station, season, regime, model, "qq")
            env = qq_envelope(x, dist, B=cfg.bootstrap_B, alpha=cfg.alpha, seed=seed)
            for k in range(env.recorded.size):
                tables["qq"].append({**base, "rank": k + 1, "recorded": int(env.recorded[k]),
                                     "simulated": float(env.simulated[k]), "lower": float(env.lower[k]),
                                     "upper": float(env.upper[k]), "multiplicity": int(env.multiplicity[k])})
    try:
        acf = acf_bivariate(ds.cycles_per_year, cfg.acf_max_lag)
        for i, lag in enumerate(acf.lags):
            r = acf.R[i]
            tables["acf"].append({**key, "lag": int(lag), "count": int(acf.counts[i]), "bound": float(acf.bound[i]),
                                  "r_dd": r[0, 0], "r_dw": r[0, 1], "r_wd": r[1, 0], "r_ww": r[1, 1],
                                  "status": acf.status})
    except BmcdError as exc:
        tables["acf"].append({**key, "status": exc.code})
    return tables


def _unit_models(fits, station, season):
    return {(reg, fam): p for (st, se, reg, fam), p in fits.items() if st == station and se == season}


def cmd_diagnose(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    spells = _load_spells(out)
    fits = _load_fits(out)
    units = [(st, se, ds, _unit_models(fits, st, se), cfg) for st, se, ds in _units(spells, cfg)]
    results = _map(_diag_unit, units, cfg.workers)
    for name, cols in (("exitcurves", EXIT_COLUMNS), ("gof", GOF_COLUMNS), ("acf", ACF_COLUMNS), ("qq", QQ_COLUMNS)):
        write_table(out, name, cols, (row for res in results for row in res[name]), cfg.output_format)
    save_manifest(out, load_manifest(out), "diagnose", cfg)
    return EXIT_OK


# -------------------------------------------------------------- simulate


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    station, season = cfg.simulate_station, cfg.simulate_season
    if not station or not season:
        raise InputError("simulate needs --station and --season")
    n_days = int(cfg.simulate_years) * 365
    rows = []
    if n_days > 0:
        fits = _load_fits(out)
        dry = fits.get((station, season, "dry", "hdegpd")) or fits.get((station, season, "dry", "geometric"))
        wet = fits.get((station, season, "wet", "geommix")) or fits.get((station, season, "wet", "geometric"))
        if dry is None or wet is None:
            raise InputError(f"no usable fits for {station}/{season}")
        q0 = tabulate_for_simulation(exit_probs_from_distribution(dry))
        q1 = tabulate_for_simulation(exit_probs_from_distribution(wet))
        path = simulate_chain(q0, q1, n_days, derive_seed(cfg.seed, station, season, "simulate"))
        rows = ({"step": k, "state": int(r), "d": int(d)} for k, (r, d) in enumerate(zip(path.r.tolist(), path.d.tolist())))
    write_table(out, "occurrence", OCC_COLUMNS, rows, cfg.output_format)
    save_manifest(out, load_manifest(out), "simulate", cfg)
    return EXIT_OK


# ------------------------------------------------------------------ risk


def _bound_row(base, metric, d, b):
    return {**base, "metric": metric, "d": d, "lower": b.lower, "upper": b.upper, "width": b.width,
            "u_used": b.u_used, "status": b.status.value}


def _risk_unit(args):
    station, season, models, cfg = args
    rows = []
    key = {"station": station, "season": season}
    pairs = (("hdegpd", models.get(("dry", "hdegpd")), models.get(("wet", "geommix"))),
             ("geometric", models.get(("dry", "geometric")), models.get(("wet", "geometric"))))
    for name, dry, wet in pairs:
        base = {**key, "model": name}
        for d in cfg.risk_d:
            if dry is None:
                rows.append({**base, "metric": "mean_residual", "d": d, "status": "NO_FIT"})
            else:
                try:
                    if name == "geometric":
                        v = mean_residual_geometric(dry, d)
                        rows.append({**base, "metric": "mean_residual", "d": d, "lower": v, "upper": v,
                                     "width": 0.0, "u_used": 0, "status": "EXACT"})
                    else:
                        rows.append(_bound_row(base, "mean_residual", d, mean_residual_hdegpd(dry, d, cfg.precision)))
                except BmcdError as exc:
                    rows.append({**base, "metric": "mean_residual", "d": d, "status": exc.code})
            if dry is None or wet is None:
                rows.append({**base, "metric": "proportion_long_dry", "d": d, "status": "NO_FIT"})
                continue
            try:
                rows.append(_bound_row(base, "proportion_long_dry", d,
                                       proportion_time_long_dry(dry, wet, d, cfg.precision)))
            except BmcdError as exc:
                rows.append({**base, "metric": "proportion_long_dry", "d": d, "status": exc.code})
    return rows


def cmd_risk(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    fits = _load_fits(out)
    units = sorted({(st, se) for st, se, _, _ in fits})
    work = [(st, se, _unit_models(fits, st, se), cfg) for st, se in units if se in cfg.seasons]
    rows = [r for res in _map(_risk_unit, work, cfg.workers) for r in res]
    write_table(out, "risk", RISK_COLUMNS, rows, cfg.output_format)
    save_manifest(out, load_manifest(out), "risk", cfg)
    return EXIT_OK


def cmd_all(cfg: RunConfig) -> int:
    status = cmd_ingest(cfg)
    for step in (cmd_fit, cmd_diagnose, cmd_risk):
        status = max(status, step(cfg))
    if cfg.simulate_station and cfg.simulate_season:
        status = max(status, cmd_simulate(cfg))
    return status


COMMANDS = {
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
    "risk": cmd_risk,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmcd", description="Duration-dependent binary chain toolkit for dry/wet spells.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", dest="output_format", choices=["csv", "json"], help="table format")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("ingest", "all"):
            p.add_argument("inputs", nargs="*", help="station files or directories")
            p.add_argument("--input-format", dest="format", choices=["ecad", "generic_csv"])
        if name in ("simulate", "all"):
            p.add_argument("--station", dest="simulate_station")
            p.add_argument("--season", dest="simulate_season")
            p.add_argument("--n-years", dest="simulate_years", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    if not overrides.get("inputs"):
        overrides.pop("inputs", None)
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, InputError) as exc:
        print(f"bmcd: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
