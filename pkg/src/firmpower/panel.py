"""Firm-year panel construction: ingestion, deflation, cleaning, and weights.

This module owns the tabular data model used everywhere else in the
package. A PanelDataset couples a firm-year observation table with a
macro series table (deflator, GDP, aggregate sales, labor compensation,
interest and inflation rates) and a small provenance record. Operations
never mutate their input: each returns a new PanelDataset.

Pipeline order matters and is enforced through provenance flags:

1. load_firm_panel / load_macro_series  read delimited files, rename
   Compustat-style columns to canonical names, and validate integrity
   (unique firm-year keys, required columns, industry codes from the
   closed two-digit sector list with 31-33, 44-45, 48-49 merged).
2. apply_deflators  converts every nominal column to real terms using
   the macro deflator. A flag blocks accidental double deflation.
3. clean_sample  applies the sample filters in a fixed order (firm
   spells with missing fiscal years, missing or multiple industry
   codes, negative or missing flow variables, and a pooled sales/COGS
   ratio trim at configurable percentiles) and reports per-rule drop
   counts that sum exactly to the total.
4. build_intangible_stock  fills missing intangible capital by the
   perpetual-inventory method from R&D plus a share of SG&A.
5. with_lagged_capital  adds prior-period capital columns so the
   estimation layer never has to re-lag stocks.
6. compute_weights  produces within-sample sales shares and sales/GDP
   weights for a year, plus the sample and macro sales-to-GDP ratios.

All percentile computations here use the nearest-rank convention: the
p-th percentile of n sorted values is the ceil(p*n)-th smallest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, IntegrityError, SchemaError, StateError

#: Closed set of two-digit sector codes; manufacturing, retail and
#: transportation pairs are merged into single sectors.
INDUSTRY_CODES = (
    "11", "21", "22", "23", "31-33", "42", "44-45", "48-49", "51",
    "52", "53", "54", "55", "56", "61", "62", "71", "72", "81",
)

_MERGED = {"31": "31-33", "32": "31-33", "33": "31-33",
           "44": "44-45", "45": "44-45", "48": "48-49", "49": "48-49"}

#: Canonical column -> default input column (Compustat mnemonics).
DEFAULT_SCHEMA = {
    "firm_id": "gvkey",
    "year": "fyear",
    "industry": "naics2",
    "sale": "sale",
    "cogs": "cogs",
    "sga": "xsga",
    "rd": "xrd",
    "ppegt": "ppegt",
    "k_int": "k_int",
    "capx": "capx",
    "proxy": "icapt",
}

#: Columns that may be absent from the input file without a schema error.
_OPTIONAL_COLUMNS = ("k_int",)

#: Firm columns holding nominal dollar amounts.
NOMINAL_FIRM_COLUMNS = ("sale", "cogs", "sga", "rd", "ppegt", "k_int", "capx", "proxy")

MACRO_COLUMNS = ("year", "gdp", "total_sales", "deflator", "labor_comp", "ffr", "inflation")

#: Macro columns holding nominal dollar amounts.
NOMINAL_MACRO_COLUMNS = ("gdp", "total_sales", "labor_comp")


def nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile: the ceil(p*n)-th smallest of the values."""
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise DataError("percentile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"percentile level {p} outside [0, 1]")
    idx = max(int(np.ceil(p * arr.size)), 1) - 1
    return float(arr[min(idx, arr.size - 1)])


@dataclass
class CleaningRules:
    """Sample-filter settings for clean_sample."""

    trim_low: float = 0.01
    trim_high: float = 0.99
    per_year: bool = False
    allow_missing_rd: bool = False

    def validate(self) -> None:
        if not (0.0 <= self.trim_low < self.trim_high <= 1.0):
            raise ConfigError(
                f"trim percentiles ({self.trim_low}, {self.trim_high}) must satisfy "
                "0 <= low < high <= 1"
            )


@dataclass
class CleaningReport:
    """Per-rule drop counts and the ratio cut values actually used."""

    rows_in: int
    rows_out: int
    dropped: dict[str, int] = field(default_factory=dict)
    ratio_cuts: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def total_dropped(self) -> int:
        return sum(self.dropped.values())


@dataclass
class PanelDataset:
    """Immutable bundle of firm-year observations, macro series, provenance."""

    observations: pd.DataFrame
    macro: pd.DataFrame | None = None
    deflated: bool = False
    cleaned: bool = False
    warnings: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def years(self) -> list[int]:
        return sorted(self.observations["year"].unique().tolist())

    def macro_row(self, year: int) -> pd.Series:
        if self.macro is None:
            raise DataError("macro series required but not loaded")
        rows = self.macro[self.macro["year"] == year]
        if rows.empty:
            raise DataError(f"macro series has no entry for year {year}")
        return rows.iloc[0]

    def with_warnings(self, *msgs: str) -> "PanelDataset":
        return replace(self, warnings=self.warnings + tuple(msgs))


def _canonical_industry(raw) -> str | float:
    """Map a raw sector code onto the closed list, NaN when unmappable."""
    if pd.isna(raw):
        return np.nan
    text = str(raw).strip()
    if text.endswith(".0"):
        text = text[:-2]
    text = _MERGED.get(text, text)
    return text if text in INDUSTRY_CODES else np.nan


def load_firm_panel(
    path,
    schema_map: Mapping[str, str] | None = None,
    macro: pd.DataFrame | None = None,
) -> PanelDataset:
    """Read a firm-year CSV into a PanelDataset.

    Parameters
    ----------
    path : str or Path
        Delimited file with one row per firm-year.
    schema_map : mapping, optional
        Overrides for canonical -> input column names, e.g.
        ``{"proxy": "capx"}`` to proxy investment with capital
        expenditure when icapt is unavailable.
    macro : DataFrame, optional
        Macro series to attach (see load_macro_series).
    """
    columns = dict(DEFAULT_SCHEMA)
    if schema_map:
        unknown = set(schema_map) - set(columns)
        if unknown:
            raise SchemaError(f"schema_map refers to unknown fields: {sorted(unknown)}")
        columns.update(schema_map)

    if isinstance(path, (str, Path)) and not Path(path).exists():
        raise DataError(f"firm panel file not found: {path}")
    raw = pd.read_csv(path)
    frame = pd.DataFrame(index=raw.index)
    for canonical, source in columns.items():
        if source not in raw.columns:
            if canonical in _OPTIONAL_COLUMNS:
                frame[canonical] = np.nan
                continue
            raise SchemaError(f"input file {path} is missing required column '{source}'")
        frame[canonical] = raw[source]

    frame["firm_id"] = frame["firm_id"].astype(str).str.strip()
    years = pd.to_numeric(frame["year"], errors="coerce")
    if years.isna().any():
        bad = frame.loc[years.isna(), "firm_id"].iloc[0]
        raise IntegrityError(f"non-numeric fiscal year for firm {bad}")
    frame["year"] = years.astype(int)
    frame["industry"] = frame["industry"].map(_canonical_industry)
    for col in NOMINAL_FIRM_COLUMNS:
        frame[col] = pd.to_numeric(frame[col], errors="coerce").astype(float)

    dup = frame.duplicated(subset=["firm_id", "year"])
    if dup.any():
        offender = frame.loc[dup, ["firm_id", "year"]].iloc[0]
        raise IntegrityError(
            f"duplicate firm-year key: firm {offender['firm_id']} year {int(offender['year'])}"
        )

    frame = frame.sort_values(["firm_id", "year"]).reset_index(drop=True)
    return PanelDataset(observations=frame, macro=macro)


def load_macro_series(path) -> pd.DataFrame:
    """Read the macro CSV: year, gdp, total_sales, deflator, labor_comp, ffr, inflation.

    An optional r_ext column (external user-cost series) is kept when present.
    """
    if isinstance(path, (str, Path)) and not Path(path).exists():
        raise DataError(f"macro series file not found: {path}")
    raw = pd.read_csv(path)
    missing = [c for c in MACRO_COLUMNS if c not in raw.columns]
    if missing:
        raise SchemaError(f"macro file {path} is missing columns {missing}")
    keep = list(MACRO_COLUMNS) + (["r_ext"] if "r_ext" in raw.columns else [])
    macro = raw[keep].copy()
    macro["year"] = pd.to_numeric(macro["year"], errors="coerce").astype(int)
    for col in keep[1:]:
        macro[col] = pd.to_numeric(macro[col], errors="coerce").astype(float)
    if macro["year"].duplicated().any():
        year = int(macro.loc[macro["year"].duplicated(), "year"].iloc[0])
        raise IntegrityError(f"duplicate macro entry for year {year}")
    if (macro["deflator"] <= 0).any():
        year = int(macro.loc[macro["deflator"] <= 0, "year"].iloc[0])
        raise DataError(f"non-positive deflator for year {year}")
    return macro.sort_values("year").reset_index(drop=True)


def restrict_years(data: PanelDataset, low: int, high: int) -> PanelDataset:
    """Keep firm-years with low <= year <= high."""
    if low > high:
        raise ConfigError(f"year range {low}:{high} is empty")
    obs = data.observations[data.observations["year"].between(low, high)]
    if obs.empty:
        raise DataError(f"no observations in year range {low}:{high}")
    macro = data.macro
    if macro is not None:
        macro = macro[macro["year"].between(low, high)].reset_index(drop=True)
    return replace(data, observations=obs.reset_index(drop=True), macro=macro)


def _deflator_map(data: PanelDataset) -> pd.Series:
    if data.macro is None:
        raise DataError("deflation requires a macro series with a deflator column")
    deflators = data.macro.set_index("year")["deflator"]
    missing = sorted(set(data.observations["year"].unique()) - set(deflators.index))
    if missing:
        raise DataError(f"no deflator for years {missing}")
    return deflators


def apply_deflators(data: PanelDataset) -> PanelDataset:
    """Divide every nominal column by its year's deflator.

    Double application is a state error; the returned dataset carries a
    deflated flag checked by downstream operations.
    """
    if data.deflated:
        raise StateError("dataset is already deflated")
    deflators = _deflator_map(data)
    obs = data.observations.copy()
    factor = obs["year"].map(deflators).to_numpy(dtype=float)
    for col in NOMINAL_FIRM_COLUMNS:
        obs[col] = obs[col].to_numpy(dtype=float) / factor
    macro = data.macro.copy()
    for col in NOMINAL_MACRO_COLUMNS:
        macro[col] = macro[col] / macro["deflator"]
    return replace(data, observations=obs, macro=macro, deflated=True)


def remove_deflators(data: PanelDataset) -> PanelDataset:
    """Inverse of apply_deflators, restoring nominal values."""
    if not data.deflated:
        raise StateError("dataset is not deflated")
    deflators = data.macro.set_index("year")["deflator"]
    obs = data.observations.copy()
    factor = obs["year"].map(deflators).to_numpy(dtype=float)
    for col in NOMINAL_FIRM_COLUMNS:
        obs[col] = obs[col].to_numpy(dtype=float) * factor
    macro = data.macro.copy()
    for col in NOMINAL_MACRO_COLUMNS:
        macro[col] = macro[col] * macro["deflator"]
    return replace(data, observations=obs, macro=macro, deflated=False)


def _trim_bounds(ratio: pd.Series, rules: CleaningRules) -> tuple[float, float]:
    finite = ratio[np.isfinite(ratio)]
    if finite.empty:
        raise DataError("sales/COGS ratio has no finite values to trim on")
    return nearest_rank(finite, rules.trim_low), nearest_rank(finite, rules.trim_high)


def clean_sample(
    data: PanelDataset, rules: CleaningRules | None = None
) -> tuple[PanelDataset, CleaningReport]:
    """Apply the sample filters and report per-rule drop counts.

    Rules run in a fixed order on the survivors of the previous rule:

    1. fiscal_gap: firms whose year sequence has holes are dropped whole.
    2. industry_missing / industry_multiple: rows without a valid sector
       code, then firms reporting more than one sector.
    3. negative_or_missing: rows where sale, cogs, sga, rd, or capx is
       negative or absent (rd may be exempted via allow_missing_rd).
    4. ratio_trim: rows whose sales/COGS ratio falls outside the
       [trim_low, trim_high] nearest-rank percentiles of the surviving
       sample (pooled by default, per-year optional).

    Cleaning an already-cleaned dataset is a no-op with a zero report:
    re-trimming a trimmed sample would bite into fresh percentile tails
    on every pass, so the cleaned flag makes the operation idempotent.
    """
    if not data.deflated:
        raise StateError("clean_sample requires a deflated dataset")
    rules = rules or CleaningRules()
    rules.validate()

    if data.cleaned:
        report = CleaningReport(rows_in=len(data), rows_out=len(data))
        return data, report

    obs = data.observations
    report = CleaningReport(rows_in=len(obs), rows_out=0)

    # 1. firm spells must cover consecutive fiscal years
    spans = obs.groupby("firm_id")["year"].agg(["min", "max", "size"])
    gapped = spans.index[(spans["max"] - spans["min"] + 1) != spans["size"]]
    keep = ~obs["firm_id"].isin(gapped)
    report.dropped["fiscal_gap"] = int((~keep).sum())
    obs = obs[keep]

    # 2a. rows with no usable sector code
    keep = obs["industry"].notna()
    report.dropped["industry_missing"] = int((~keep).sum())
    obs = obs[keep]

    # 2b. firms reporting more than one sector
    counts = obs.groupby("firm_id")["industry"].nunique()
    multi = counts.index[counts > 1]
    keep = ~obs["firm_id"].isin(multi)
    report.dropped["industry_multiple"] = int((~keep).sum())
    obs = obs[keep]

    # 3. negative or missing flows
    flows = ["sale", "cogs", "sga", "rd", "capx"]
    bad = pd.Series(False, index=obs.index)
    for col in flows:
        values = obs[col]
        bad |= values < 0
        if col == "rd" and rules.allow_missing_rd:
            continue
        bad |= values.isna()
    report.dropped["negative_or_missing"] = int(bad.sum())
    obs = obs[~bad]

    if obs.empty:
        raise DataError("cleaning removed every observation before the ratio trim")

    # 4. sales/COGS ratio trim at nearest-rank percentiles
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = obs["sale"] / obs["cogs"]
    if rules.per_year:
        keep = pd.Series(False, index=obs.index)
        for year, chunk in ratio.groupby(obs["year"]):
            lo, hi = _trim_bounds(chunk, rules)
            report.ratio_cuts[str(int(year))] = (lo, hi)
            keep.loc[chunk.index] = chunk.between(lo, hi)
    else:
        lo, hi = _trim_bounds(ratio, rules)
        report.ratio_cuts["pooled"] = (lo, hi)
        keep = ratio.between(lo, hi)
    report.dropped["ratio_trim"] = int((~keep).sum())
    obs = obs[keep]

    if obs.empty:
        raise DataError("cleaning removed every observation")

    report.rows_out = len(obs)
    cleaned = replace(
        data, observations=obs.reset_index(drop=True), cleaned=True
    )
    return cleaned, report


def build_intangible_stock(
    data: PanelDataset, delta_int: float = 0.15, sga_share: float = 0.30
) -> PanelDataset:
    """Fill missing intangible capital by perpetual inventory.

    The investment flow is R&D spending plus sga_share of SG&A. For a
    firm whose k_int is entirely absent, the first-year stock is
    flow / (delta_int + g) with g the firm's mean flow growth floored
    at zero, and later years follow
    K_t = (1 - delta_int) * K_{t-1} + flow_t.
    Firms with any reported k_int are left untouched.
    """
    if not 0.0 < delta_int <= 1.0:
        raise ConfigError(f"delta_int {delta_int} outside (0, 1]")
    if not 0.0 <= sga_share <= 1.0:
        raise ConfigError(f"sga_share {sga_share} outside [0, 1]")

    obs = data.observations.copy()
    warnings: list[str] = []
    if obs["rd"].isna().any():
        warnings.append(
            f"intangible stock: {int(obs['rd'].isna().sum())} missing R&D values treated as 0"
        )
    rd = obs["rd"].fillna(0.0)
    sga = obs["sga"].fillna(0.0)
    obs["_flow"] = rd + sga_share * sga

    partially = []
    for firm, chunk in obs.groupby("firm_id", sort=False):
        status = chunk["k_int"].isna()
        if not status.any():
            continue
        if not status.all():
            partially.append(firm)
            continue
        chunk = chunk.sort_values("year")
        years = chunk["year"].to_numpy()
        if years.size > 1 and (np.diff(years) != 1).any():
            raise StateError(f"firm {firm} has a fiscal-year gap; clean the sample first")
        flow = chunk["_flow"].to_numpy(dtype=float)
        growth = []
        for prev, curr in zip(flow[:-1], flow[1:]):
            if prev > 0:
                growth.append(curr / prev - 1.0)
        g = max(float(np.mean(growth)) if growth else 0.0, 0.0)
        stock = np.empty_like(flow)
        stock[0] = flow[0] / (delta_int + g)
        for t in range(1, flow.size):
            stock[t] = (1.0 - delta_int) * stock[t - 1] + flow[t]
        obs.loc[chunk.index, "k_int"] = stock
    if partially:
        warnings.append(
            f"intangible stock: {len(partially)} firms with partial k_int left untouched"
        )

    obs = obs.drop(columns="_flow")
    out = replace(data, observations=obs)
    return out.with_warnings(*warnings) if warnings else out


def with_lagged_capital(data: PanelDataset) -> PanelDataset:
    """Add prior-period capital columns ppegt_lag and k_int_lag.

    Reported stocks are end-of-period, so production in year t uses the
    stock reported for t-1. Downstream modules consume the lagged
    columns and never re-lag.
    """
    obs = data.observations.sort_values(["firm_id", "year"]).reset_index(drop=True)
    grouped = obs.groupby("firm_id", sort=False)
    for col in ("ppegt", "k_int"):
        lagged = grouped[col].shift(1)
        contiguous = grouped["year"].diff() == 1
        obs[f"{col}_lag"] = lagged.where(contiguous)
    return replace(data, observations=obs)


@dataclass
class WeightTable:
    """Sales shares and sales/GDP weights for one year."""

    year: int
    table: pd.DataFrame  # firm_id, sale, omega, domar
    chi_sample: float
    chi_macro: float


def compute_weights(data: PanelDataset, year: int) -> WeightTable:
    """Sales shares within the year's sample and sales/GDP weights.

    omega sums to one over the sample; the domar column divides firm
    sales by GDP instead, so its sum is the sample sales-to-GDP ratio.
    chi_macro is economy-wide sales over GDP from the macro series.
    """
    rows = data.observations[data.observations["year"] == year]
    rows = rows[rows["sale"].notna()]
    if rows.empty:
        raise DataError(f"no observations with sales in year {year}")
    total = float(rows["sale"].sum())
    if total <= 0:
        raise DataError(f"total sales in year {year} are not positive")
    macro = data.macro_row(year)
    gdp = float(macro["gdp"])
    if gdp <= 0:
        raise DataError(f"non-positive GDP for year {year}")
    table = pd.DataFrame(
        {
            "firm_id": rows["firm_id"].to_numpy(),
            "sale": rows["sale"].to_numpy(dtype=float),
        }
    )
    table["omega"] = table["sale"] / total
    table["domar"] = table["sale"] / gdp
    return WeightTable(
        year=year,
        table=table,
        chi_sample=total / gdp,
        chi_macro=float(macro["total_sales"]) / gdp,
    )
