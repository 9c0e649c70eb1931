"""Shared bits for the test modules (golden ingest runner, small oracles)."""
from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

from bmcd.errors import ParseError
from bmcd.ingest import parse_station_file, process_series, write_datasets_json, write_spells_csv

FIXTURES = Path(__file__).parent / "fixtures" / "ingest"
GOLDEN = FIXTURES / "golden"


def ingest_cases() -> dict[str, dict]:
    return json.loads((FIXTURES / "cases.json").read_text())


def run_golden_case(name: str, meta: dict, out: Path) -> list[str]:
    """Run one fixture through the package; return a list of mismatch descriptions."""
    stem = Path(name).stem
    expected_status = (GOLDEN / f"{stem}.status").read_text().split()
    start = dt.date.fromisoformat(meta["start_date"]) if meta["start_date"] else None
    try:
        series = parse_station_file(FIXTURES / name, meta["format"])
        res = process_series(series, meta["threshold"], meta["min_years"], start)
    except ParseError as exc:
        got = ["error", "line", str(exc.line)]
        return [] if got == expected_status else [f"{name}: status {got} != {expected_status}"]
    problems = []
    got = ["rejected" if res.rejected else "accepted", f"{res.recorded_years:.6f}"]
    if got != expected_status:
        problems.append(f"{name}: status {got} != {expected_status}")
    spells_path = out / f"{stem}.spells.csv"
    json_path = out / f"{stem}.datasets.json"
    write_spells_csv([res], spells_path)
    write_datasets_json([res], json_path)
    for produced, golden in ((spells_path, GOLDEN / f"{stem}.spells.csv"), (json_path, GOLDEN / f"{stem}.datasets.json")):
        if produced.read_bytes() != golden.read_bytes():
            problems.append(f"{name}: {golden.name} differs")
    return problems


# ---------------------------------------------------------------- risk oracle
# Independent of the package: plain survival formula, direct summation, and an
# Euler-Maclaurin remainder whose integral comes from scipy's adaptive quadrature.

import math  # noqa: E402

import numpy as np  # noqa: E402
from scipy import integrate  # noqa: E402

ORACLE_DIRECT = 200_000


def egpd_survival(kappa, sigma, xi, z):
    z = np.asarray(z, dtype=float)
    if xi == 0:
        log_t = -z / sigma
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            log_t = -np.log1p(xi * z / sigma) / xi
        if xi < 0:
            log_t = np.where(z >= -sigma / xi, -np.inf, log_t)
    with np.errstate(divide="ignore"):
        return -np.expm1(kappa * np.log1p(-np.exp(log_t)))


def _egpd_survival_deriv(kappa, sigma, xi, z):
    t = (1 + xi * z / sigma) ** (-1 / xi) if xi else math.exp(-z / sigma)
    return -kappa * (1 - t) ** (kappa - 1) * t ** (1 + xi) / sigma


def oracle_tail_sum(kappa, sigma, xi, start):
    """sum_{m >= start} S_X(m) over integers m."""
    if xi < 0:
        top = math.ceil(-sigma / xi)
        m = np.arange(start, max(start, top + 1), dtype=float)
        return math.fsum(egpd_survival(kappa, sigma, xi, m))
    big = start + ORACLE_DIRECT
    head = math.fsum(egpd_survival(kappa, sigma, xi, np.arange(start, big, dtype=float)))
    f = lambda z: float(egpd_survival(kappa, sigma, xi, z))  # noqa: E731
    integral = 0.0
    lo = float(big)
    while True:
        hi = lo * 8
        piece, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-13, limit=400)
        integral += piece
        if f(hi) * hi < 1e-15 * max(integral, 1e-300) or hi > 1e300:
            break
        lo = hi
    return head + integral + f(big) / 2 - _egpd_survival_deriv(kappa, sigma, xi, big) / 12


def oracle_mean_residual(f1, kappa, sigma, xi, d):
    c = 1 - f1
    if d == 0:
        return 1 + c * oracle_tail_sum(kappa, sigma, xi, 0)
    return oracle_tail_sum(kappa, sigma, xi, d - 1) / float(egpd_survival(kappa, sigma, xi, d - 1))


def oracle_proportion(f1, kappa, sigma, xi, wet_mean, d):
    c = 1 - f1
    total = 1 + c * oracle_tail_sum(kappa, sigma, xi, 0)
    excess = total if d == 0 else c * oracle_tail_sum(kappa, sigma, xi, d - 1)
    return excess / (total + wet_mean)


def random_hdegpd_draws(seed, n=20):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield (float(rng.uniform(0, 0.6)), float(rng.uniform(0.3, 3.0)), float(rng.uniform(2.0, 30.0)),
               float(rng.uniform(-0.4, 0.6)))


# ------------------------------------------------------------ CLI fixtures


def write_simulated_station(path, station_id, dry, wet, years, seed, start="1950-01-01", wet_mm=2.0):
    """Daily generic-CSV station whose occurrence follows the chain with the given spell laws."""
    import datetime as _dt

    from bmcd.core import exit_probs_from_distribution, simulate_chain, tabulate_for_simulation

    n = int(years * 365)
    q0 = tabulate_for_simulation(exit_probs_from_distribution(dry))
    q1 = tabulate_for_simulation(exit_probs_from_distribution(wet))
    path_ = simulate_chain(q0, q1, n, seed)
    day0 = _dt.date.fromisoformat(start)
    lines = ["station_id,date,precip_mm"]
    for k, r in enumerate(path_.r.tolist()):
        lines.append(f"{station_id},{(day0 + _dt.timedelta(days=k)).isoformat()},{wet_mm if r else 0.0}")
    Path(path).write_text("\n".join(lines) + "\n")
