"""Run configuration: typed keys, presets, and the key=value file format.

A run is fully described by a flat set of namespaced keys (clean.*,
intangible.*, estimation.*, measures.*, aggregation.*, io.*, run.*).
Values resolve in layers: package defaults, then a named preset, then
the configuration file, then command-line overrides. Every layer that
changes a key is recorded in an override log so the manifest can show
exactly where each value came from; presets never touch keys outside
their published list.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .errors import ConfigError


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"cannot read '{text}' as a boolean")


@dataclass
class RunConfig:
    """Resolved settings for one pipeline run."""

    firm_csv: str = ""
    macro_csv: str = ""
    out_dir: str = "out"
    proxy_column: str = "icapt"

    trim_low: float = 0.01
    trim_high: float = 0.99
    clean_per_year: bool = False
    allow_missing_rd: bool = False

    build_intangibles: bool = True
    intangible_delta: float = 0.15
    intangible_sga_share: float = 0.30

    est_variable: str = "opex"       # opex | cogs
    est_capital: str = "total"       # total | physical
    est_min_obs: int = 50
    est_window_half: int = 4
    winsor_low: float = 0.05
    winsor_high: float = 0.95

    user_cost_method: str = "foc"    # foc | accounting | external
    depreciation: float = 0.12
    fixed_cost_def: str = "rd"       # rd | sga_rd
    include_capital_in_tc: bool = True

    markup_mean: str = "harmonic"    # harmonic | sales_weighted
    chi_source: str = "macro"        # macro | sample
    agg_mode: str = "full"           # full | cor1 | cor2 | cor3

    seed: int = 0
    year_low: int | None = None
    year_high: int | None = None
    figures: bool = True

    def validate(self) -> None:
        checks = {
            "estimation.variable": (self.est_variable, ("opex", "cogs")),
            "estimation.capital": (self.est_capital, ("total", "physical")),
            "measures.user_cost": (self.user_cost_method, ("foc", "accounting", "external")),
            "measures.fixed_cost": (self.fixed_cost_def, ("rd", "sga_rd")),
            "aggregation.markup_mean": (self.markup_mean, ("harmonic", "sales_weighted")),
            "aggregation.chi": (self.chi_source, ("macro", "sample")),
            "aggregation.mode": (self.agg_mode, ("full", "cor1", "cor2", "cor3")),
        }
        for key, (value, allowed) in checks.items():
            if value not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got '{value}'")
        if not 0.0 <= self.trim_low < self.trim_high <= 1.0:
            raise ConfigError("clean.trim_low/high must satisfy 0 <= low < high <= 1")
        if not 0.0 <= self.winsor_low < self.winsor_high <= 1.0:
            raise ConfigError("estimation.winsor_low/high must satisfy 0 <= low < high <= 1")
        if not 0.0 < self.intangible_delta <= 1.0:
            raise ConfigError("intangible.delta must lie in (0, 1]")
        if self.year_low is not None and self.year_high is not None:
            if self.year_low > self.year_high:
                raise ConfigError(f"empty year range {self.year_low}:{self.year_high}")


#: config-file key -> (attribute, parser)
KEYMAP: dict[str, tuple[str, type | object]] = {
    "io.firm_csv": ("firm_csv", str),
    "io.macro_csv": ("macro_csv", str),
    "io.out_dir": ("out_dir", str),
    "io.proxy_column": ("proxy_column", str),
    "clean.trim_low": ("trim_low", float),
    "clean.trim_high": ("trim_high", float),
    "clean.per_year": ("clean_per_year", _bool),
    "clean.allow_missing_rd": ("allow_missing_rd", _bool),
    "intangible.build": ("build_intangibles", _bool),
    "intangible.delta": ("intangible_delta", float),
    "intangible.sga_share": ("intangible_sga_share", float),
    "estimation.variable": ("est_variable", str),
    "estimation.capital": ("est_capital", str),
    "estimation.min_obs": ("est_min_obs", int),
    "estimation.window_half": ("est_window_half", int),
    "estimation.winsor_low": ("winsor_low", float),
    "estimation.winsor_high": ("winsor_high", float),
    "measures.user_cost": ("user_cost_method", str),
    "measures.depreciation": ("depreciation", float),
    "measures.fixed_cost": ("fixed_cost_def", str),
    "measures.include_capital_in_tc": ("include_capital_in_tc", _bool),
    "aggregation.markup_mean": ("markup_mean", str),
    "aggregation.chi": ("chi_source", str),
    "aggregation.mode": ("agg_mode", str),
    "run.seed": ("seed", int),
    "run.year_low": ("year_low", int),
    "run.year_high": ("year_high", int),
    "run.figures": ("figures", _bool),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYMAP.items()}

#: named presets: only the keys they publish, nothing else
PRESETS: dict[str, dict[str, str]] = {
    "baseline": {},
    "deu_replication": {
        "estimation.variable": "cogs",
        "estimation.capital": "physical",
        "intangible.build": "false",
        "measures.fixed_cost": "sga_rd",
        "measures.user_cost": "accounting",
        "aggregation.markup_mean": "sales_weighted",
    },
    "no_intangibles": {
        "estimation.capital": "physical",
        "intangible.build": "false",
    },
    "cogs_only": {
        "estimation.variable": "cogs",
    },
}


def parse_config_file(path) -> dict[str, str]:
    """Read a key = value file; # starts a comment, blank lines skipped."""
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got '{line}'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
            pairs[key] = value
    return pairs


def build_config(
    preset: str | None = None,
    config_file: str | None = None,
    overrides: dict[str, str] | None = None,
) -> tuple[RunConfig, list[str]]:
    """Resolve layered settings into a RunConfig plus an override log."""
    cfg = RunConfig()
    log: list[str] = []

    def apply(pairs: dict[str, str], source: str) -> None:
        for key, raw in pairs.items():
            if key not in KEYMAP:
                raise ConfigError(f"unknown configuration key '{key}' (from {source})")
            attr, parser = KEYMAP[key]
            try:
                value = parser(raw) if not isinstance(raw, bool) else raw
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
            setattr(cfg, attr, value)
            log.append(f"{key}={value} ({source})")

    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset '{preset}'; available: {sorted(PRESETS)}"
            )
        apply(PRESETS[preset], f"preset:{preset}")
    if config_file is not None:
        apply(parse_config_file(config_file), "file")
    if overrides:
        apply({k: str(v) for k, v in overrides.items()}, "flag")

    cfg.validate()
    return cfg, log


def config_hash(cfg: RunConfig) -> str:
    """Stable digest of the fully resolved configuration."""
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        key = _ATTR_TO_KEY.get(f.name, f.name)
        lines.append(f"{key}={getattr(cfg, f.name)}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def config_as_items(cfg: RunConfig) -> dict[str, str]:
    """Resolved configuration as config-file keys, for the manifest."""
    return {
        _ATTR_TO_KEY[f.name]: str(getattr(cfg, f.name))
        for f in fields(cfg)
        if f.name in _ATTR_TO_KEY
    }
