"""Run configuration: defaults, file loading (JSON or TOML) and overrides."""
from __future__ import annotations

import dataclasses
import datetime as dt
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .ingest import DEFAULT_MIN_YEARS, DEFAULT_WET_THRESHOLD, SEASONS


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    inputs: list[str] = field(default_factory=list)
    format: str = "generic_csv"
    wet_threshold_mm: float = DEFAULT_WET_THRESHOLD
    min_years: float = DEFAULT_MIN_YEARS
    start_date: str | None = "1945-01-01"
    seasons: list[str] = field(default_factory=lambda: list(SEASONS))
    min_tail_count: int = 20
    pwm_min_tail_count: int = 10
    em_restarts: int = 10
    bootstrap_B: int = 1000
    alpha: float = 0.05
    acf_max_lag: int = 10
    risk_d: list[int] = field(default_factory=lambda: [20, 40, 60])
    precision: float = 1e-5
    seed: int = 0
    out: str = "bmcd_out"
    output_format: str = "csv"
    workers: int = 1
    simulate_station: str | None = None
    simulate_season: str | None = None
    simulate_years: int = 100

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.format not in ("ecad", "generic_csv"):
            raise ConfigError(f"format must be ecad or generic_csv, got {self.format!r}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.output_format!r}")
        bad = [s for s in self.seasons if s not in SEASONS]
        if bad:
            raise ConfigError(f"unknown seasons {bad}")
        if self.start_date is not None:
            try:
                dt.date.fromisoformat(self.start_date)
            except ValueError as exc:
                raise ConfigError(f"start_date: {exc}") from None
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.precision <= 0:
            raise ConfigError("precision must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.bootstrap_B < 1:
            raise ConfigError("bootstrap_B must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if any(d < 0 for d in self.risk_d):
            raise ConfigError("risk thresholds must be >= 0")

    @property
    def start(self) -> dt.date | None:
        return dt.date.fromisoformat(self.start_date) if self.start_date else None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def overrides(self) -> dict:
        """Fields that differ from the defaults."""
        base = RunConfig()
        return {k: v for k, v in self.to_dict().items() if getattr(base, k) != v}


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        p = Path(path)
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        try:
            data = tomllib.loads(raw.decode()) if p.suffix == ".toml" else json.loads(raw)
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse config {p}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a table/object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if isinstance(data.get("inputs"), str):
        data["inputs"] = [data["inputs"]]
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
