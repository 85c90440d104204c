"""End-to-end run: ingest, clean, estimate, measure, aggregate, write.

The pipeline stitches the library modules together in a fixed stage
order and writes a deterministic set of delimited outputs plus a run
manifest. Given identical inputs and configuration, reruns produce
byte-identical files: no timestamps, no unseeded randomness, stable
row ordering, and default float formatting (shortest round-trip).

Outputs in the run directory:

    elasticities.csv         industry-year output elasticities
    firm_measures.csv        firm-year markups, scale, profit rates, weights
    aggregates.csv           per-year aggregate markups, profit shares, splits
    markup_decomposition.csv year-pair within/between/net-entry terms
    hhi.csv                  sales concentration, national and by industry
    income_shares.csv        labor/capital/profit split of GDP
    fig*.csv                 figure-ready series
    figures/*.png            rendered figures (optional)
    manifest.json            configuration, hashes, counts, warnings

verify_run re-reads the outputs and re-checks every identity that must
hold among them, returning one (name, passed, detail) row per check.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import aggregation, dynamics, estimation, measures, panel
from .config import RunConfig, config_as_items, config_hash
from .errors import DataError, EstimationError, FirmpowerError, VerificationError

_IDENTITY_TOL = 1e-8


@dataclass
class PipelineResult:
    out_dir: Path
    manifest: dict
    aggregates: pd.DataFrame


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_and_prepare(cfg: RunConfig) -> tuple[panel.PanelDataset, panel.CleaningReport]:
    if not cfg.firm_csv or not cfg.macro_csv:
        raise DataError("pipeline needs io.firm_csv and io.macro_csv")
    macro = panel.load_macro_series(cfg.macro_csv)
    schema_map = {"proxy": cfg.proxy_column} if cfg.proxy_column != "icapt" else None
    data = panel.load_firm_panel(cfg.firm_csv, schema_map=schema_map, macro=macro)
    if cfg.year_low is not None or cfg.year_high is not None:
        low = cfg.year_low if cfg.year_low is not None else min(data.years)
        high = cfg.year_high if cfg.year_high is not None else max(data.years)
        data = panel.restrict_years(data, low, high)
    data = panel.apply_deflators(data)
    rules = panel.CleaningRules(
        trim_low=cfg.trim_low,
        trim_high=cfg.trim_high,
        per_year=cfg.clean_per_year,
        allow_missing_rd=cfg.allow_missing_rd,
    )
    data, report = panel.clean_sample(data, rules)
    if cfg.build_intangibles:
        data = panel.build_intangible_stock(
            data, delta_int=cfg.intangible_delta, sga_share=cfg.intangible_sga_share
        )
    data = panel.with_lagged_capital(data)
    return data, report


def _firm_measures(
    cfg: RunConfig,
    data: panel.PanelDataset,
    elastic: pd.DataFrame,
) -> tuple[pd.DataFrame, int]:
    """Join elasticities onto firm-years and evaluate all measures."""
    obs = data.observations.copy()
    obs["opex"] = obs["cogs"] + obs["sga"]
    obs["variable_cost"] = obs["opex"] if cfg.est_variable == "opex" else obs["cogs"]
    if cfg.est_capital == "total":
        obs["capital"] = obs["ppegt_lag"] + obs["k_int_lag"].fillna(0.0)
    else:
        obs["capital"] = obs["ppegt_lag"]

    merged = obs.merge(
        elastic[["industry", "year", "theta_v", "theta_k"]],
        on=["industry", "year"],
        how="left",
    )
    usable = (
        merged["theta_v"].gt(0)
        & np.isfinite(merged["theta_v"])
        & np.isfinite(merged["theta_k"])
        & merged["sale"].gt(0)
        & merged["variable_cost"].gt(0)
    )
    excluded = int((~usable).sum())
    rows = merged[usable].copy()
    if rows.empty:
        raise DataError("no firm-years left after joining elasticities")

    rows["markup"] = measures.markup(rows["theta_v"], rows["sale"], rows["variable_cost"])
    rows["rs"] = rows["theta_v"] + rows["theta_k"]

    if cfg.fixed_cost_def == "rd":
        fixed = rows["rd"].fillna(0.0)
    else:
        fixed = rows["rd"].fillna(0.0) + rows["sga"]
    rows["fixed_cost"] = fixed

    # user cost of capital
    macro_by_year = data.macro.set_index("year")
    if cfg.user_cost_method == "foc":
        with np.errstate(divide="ignore", invalid="ignore"):
            rows["user_cost"] = np.where(
                rows["capital"].gt(0),
                rows["theta_k"] / rows["markup"] * rows["sale"] / rows["capital"],
                np.nan,
            )
    elif cfg.user_cost_method == "accounting":
        rates = measures.user_cost_accounting(
            macro_by_year.loc[rows["year"], "ffr"].to_numpy(),
            macro_by_year.loc[rows["year"], "inflation"].to_numpy(),
            cfg.depreciation,
        )
        rows["user_cost"] = rates
    else:
        if "r_ext" not in macro_by_year.columns:
            raise DataError("measures.user_cost=external needs an r_ext macro column")
        rows["user_cost"] = macro_by_year.loc[rows["year"], "r_ext"].to_numpy()

    # total cost for the fixed-cost adjustment; capital services priced
    # by the first-order condition cancel the stock: r*k = theta_k*sale/mu
    tc = rows["opex"] + rows["rd"].fillna(0.0)
    if cfg.include_capital_in_tc:
        if cfg.user_cost_method == "foc":
            tc = tc + rows["theta_k"] / rows["markup"] * rows["sale"]
        else:
            tc = tc + (rows["user_cost"] * rows["capital"]).fillna(0.0)
    rows["total_cost"] = tc

    ok_fc = rows["fixed_cost"].lt(rows["total_cost"]) & rows["fixed_cost"].ge(0)
    excluded += int((~ok_fc).sum())
    rows = rows[ok_fc].copy()
    rows["fc_adj"] = rows["total_cost"] / (rows["total_cost"] - rows["fixed_cost"])
    rows["rs_adj"] = rows["rs"] * rows["fc_adj"]
    rows["monopsony"] = 0.0

    if cfg.user_cost_method == "foc":
        rows["profit_rate"] = measures.profit_rate(
            rows["markup"], rows["rs_adj"], rows["monopsony"]
        )
    else:
        rate_capital = (rows["user_cost"] * rows["capital"]) / rows["sale"]
        rows["profit_rate"] = (
            1.0
            - rows["theta_v"] / rows["markup"]
            - rate_capital
            - rows["fixed_cost"] / rows["sale"]
        )
        missing_k = ~np.isfinite(rate_capital.to_numpy(dtype=float))
        excluded += int(missing_k.sum())
        rows = rows[~missing_k].copy()

    # weights within the measured sample, year by year
    rows = rows.sort_values(["year", "firm_id"]).reset_index(drop=True)
    gdp_by_year = macro_by_year["gdp"]
    rows["omega"] = rows["sale"] / rows.groupby("year")["sale"].transform("sum")
    rows["domar_weight"] = rows["sale"] / rows["year"].map(gdp_by_year).to_numpy()

    keep = [
        "firm_id", "year", "industry", "sale", "capital", "markup", "rs",
        "fc_adj", "rs_adj", "monopsony", "profit_rate", "user_cost",
        "omega", "domar_weight",
    ]
    return rows[keep], excluded


def _aggregates(
    cfg: RunConfig, data: panel.PanelDataset, fm: pd.DataFrame
) -> pd.DataFrame:
    macro_by_year = data.macro.set_index("year")
    out = []
    for year, rows in fm.groupby("year"):
        macro = macro_by_year.loc[year]
        gdp = float(macro["gdp"])
        chi_sample = float(rows["sale"].sum()) / gdp
        chi_macro = float(macro["total_sales"]) / gdp
        chi = chi_macro if cfg.chi_source == "macro" else chi_sample

        thm = aggregation.profit_share_theorem(
            chi,
            rows["markup"],
            rows["rs_adj"],
            rows["monopsony"],
            rows["omega"],
            mode=cfg.agg_mode,
        )
        domar = aggregation.profit_share_domar(rows["sale"], rows["profit_rate"], gdp)
        mu_sw = aggregation.weighted_mean(rows["markup"], rows["omega"])
        rs_bar = aggregation.weighted_mean(rows["rs"], rows["omega"])
        zero_cov = chi * (
            1.0 - thm.rs_adj_bar / thm.mu_hsw + thm.m_bar / thm.mu_hsw
        )
        crs = chi * (1.0 - 1.0 / thm.mu_hsw)
        rents = aggregation.rents_decomposition(
            chi, thm.mu_hsw, thm.rs_adj_bar, thm.cov_rs_adj_inv_mu
        )
        shares = aggregation.income_shares(float(macro["labor_comp"]), gdp, domar)

        capital_stock = float(rows["capital"].sum())
        r_macro = np.nan
        if capital_stock > 0:
            r_macro = gdp / capital_stock * (1.0 - shares.labor - domar)
        with_k = rows[rows["capital"].gt(0) & np.isfinite(rows["user_cost"])]
        r_firm = np.nan
        if not with_k.empty and cfg.user_cost_method == "foc":
            r_firm = float(
                (with_k["capital"] * with_k["user_cost"]).sum() / with_k["capital"].sum()
            )
        r_acct = float(
            measures.user_cost_accounting(
                macro["ffr"], macro["inflation"], cfg.depreciation
            )
        )

        out.append(
            {
                "year": int(year),
                "n_firms": int(len(rows)),
                "gdp": gdp,
                "chi": chi,
                "chi_sample": chi_sample,
                "mu_hsw": thm.mu_hsw,
                "mu_sales_weighted": mu_sw,
                "rs_bar": rs_bar,
                "rs_adj_bar": thm.rs_adj_bar,
                "m_bar": thm.m_bar,
                "cov_rs_adj_inv_mu": thm.cov_rs_adj_inv_mu,
                "cov_m_inv_mu": thm.cov_m_inv_mu,
                "profit_share_domar": domar,
                "profit_share_thm": thm.value,
                "profit_share_zero_cov": zero_cov,
                "profit_share_crs": crs,
                "rate_sales_weighted": aggregation.weighted_mean(
                    rows["profit_rate"], rows["omega"]
                ),
                "rents": rents.rents,
                "fixed_costs_term": rents.fixed_costs,
                "nonlinearities": rents.nonlinearities,
                "labor_share": shares.labor,
                "capital_share": shares.capital,
                "capital_share_implausible": shares.implausible,
                "r_macro": r_macro,
                "r_firm_weighted": r_firm,
                "r_accounting": r_acct,
            }
        )
    return pd.DataFrame(out).sort_values("year").reset_index(drop=True)


def _decomposition(fm: pd.DataFrame) -> pd.DataFrame:
    years = sorted(fm["year"].unique())
    out = []
    cumulative = 0.0
    for prev_year, curr_year in zip(years[:-1], years[1:]):
        if curr_year != prev_year + 1:
            continue
        change = dynamics.markup_change_decomposition(
            fm[fm["year"] == prev_year],
            fm[fm["year"] == curr_year],
            year=curr_year,
        )
        cumulative += change.delta
        out.append(
            {
                "year": curr_year,
                "mu_prev": change.mu_prev,
                "mu_curr": change.mu_curr,
                "delta_mu": change.delta,
                "within": change.within,
                "between": change.between,
                "net_entry": change.net_entry,
                "reference": change.reference,
                "cumulative": cumulative,
            }
        )
    return pd.DataFrame(out)


def _hhi_table(fm: pd.DataFrame) -> pd.DataFrame:
    out = []
    for year, rows in fm.groupby("year"):
        out.append(
            {"year": int(year), "scope": "national", "hhi": dynamics.hhi(rows, year)}
        )
        for industry in sorted(rows["industry"].dropna().unique()):
            out.append(
                {
                    "year": int(year),
                    "scope": industry,
                    "hhi": dynamics.hhi(rows, year, scope=industry),
                }
            )
    return pd.DataFrame(out)


def _figure_frames(agg: pd.DataFrame, decomp: pd.DataFrame) -> dict[str, pd.DataFrame]:
    frames = {
        "fig2_markup_rs": agg[
            ["year", "mu_hsw", "mu_sales_weighted", "rs_bar", "rs_adj_bar", "cov_rs_adj_inv_mu"]
        ],
        "fig3_profit_share": agg[
            ["year", "profit_share_thm", "profit_share_zero_cov", "profit_share_crs",
             "profit_share_domar"]
        ],
        "fig4_decomposition": agg[
            ["year", "rents", "fixed_costs_term", "nonlinearities", "profit_share_thm"]
        ],
        "fig8_user_costs": agg[["year", "r_firm_weighted", "r_macro", "r_accounting"]],
        "fig9_profit_shares_by_r": agg[
            ["year", "profit_share_domar", "profit_share_thm", "rate_sales_weighted"]
        ],
    }
    if not decomp.empty:
        frames["fig7_markup_change"] = decomp[
            ["year", "delta_mu", "within", "between", "net_entry", "cumulative"]
        ]
    return frames


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    """Execute every stage and write the output directory."""
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    stage = "setup"

    def emit(name: str, frame: pd.DataFrame) -> Path:
        path = out_dir / name
        _write_csv(frame, path)
        written.append(path)
        return path

    try:
        stage = "ingest"
        data, clean_report = _load_and_prepare(cfg)

        stage = "estimate"
        settings = estimation.EstimationSettings(
            variable=cfg.est_variable,
            capital=cfg.est_capital,
            min_obs=cfg.est_min_obs,
            window_half=cfg.est_window_half,
        )
        raw_estimates = None
        try:
            raw_estimates = estimation.estimate_rolling(data, settings)
            final_estimates = estimation.postprocess_elasticities(
                raw_estimates, cfg.winsor_low, cfg.winsor_high
            )
        except EstimationError:
            if raw_estimates:
                emit("elasticities.csv", estimation.estimates_to_frame(raw_estimates))
            raise
        elastic = estimation.estimates_to_frame(final_estimates)
        emit("elasticities.csv", elastic)

        stage = "measures"
        fm, excluded = _firm_measures(cfg, data, elastic)
        emit("firm_measures.csv", fm)

        stage = "aggregate"
        agg = _aggregates(cfg, data, fm)
        emit("aggregates.csv", agg)
        income = agg[
            ["year", "labor_share", "capital_share", "profit_share_domar",
             "capital_share_implausible"]
        ].rename(columns={"profit_share_domar": "profit_share"})
        emit("income_shares.csv", income)

        stage = "dynamics"
        decomp = _decomposition(fm)
        emit("markup_decomposition.csv", decomp)
        emit("hhi.csv", _hhi_table(fm))

        stage = "figures"
        fig_frames = _figure_frames(agg, decomp)
        for name, frame in fig_frames.items():
            emit(f"{name}.csv", frame)
        if cfg.figures:
            from . import figures as figmod

            fig_dir = out_dir / "figures"
            fig_dir.mkdir(exist_ok=True)
            written.extend(figmod.render_figures(out_dir, fig_dir))

        stage = "manifest"
        manifest = {
            "config": config_as_items(cfg),
            "config_hash": config_hash(cfg),
            "row_counts": {
                "loaded": clean_report.rows_in,
                "cleaned": clean_report.rows_out,
                "dropped": clean_report.dropped,
                "firm_measures": int(len(fm)),
                "excluded_measures": excluded,
                "elasticity_records": int(len(elastic)),
            },
            "ratio_cuts": {k: list(v) for k, v in clean_report.ratio_cuts.items()},
            "warnings": list(data.warnings),
            "outputs": {},
        }
        for path in sorted(written):
            manifest["outputs"][path.name] = _sha256(path)
        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return PipelineResult(out_dir=out_dir, manifest=manifest, aggregates=agg)
    except FirmpowerError as exc:
        keep = {out_dir / "elasticities.csv"} if isinstance(exc, EstimationError) else set()
        for path in written:
            if path not in keep and path.exists():
                path.unlink()
        raise type(exc)(f"stage {stage}: {exc}") from exc


# ---------------------------------------------------------------------------
# post-run verification
# ---------------------------------------------------------------------------

def verify_run(out_dir, tol: float = _IDENTITY_TOL) -> list[tuple[str, bool, str]]:
    """Re-check the identities that must hold among the written outputs."""
    out_dir = Path(out_dir)
    needed = ["firm_measures.csv", "aggregates.csv", "markup_decomposition.csv",
              "income_shares.csv", "manifest.json"]
    for name in needed:
        if not (out_dir / name).exists():
            raise DataError(f"verify: {out_dir / name} is missing")
    fm = pd.read_csv(out_dir / "firm_measures.csv")
    agg = pd.read_csv(out_dir / "aggregates.csv")
    decomp = pd.read_csv(out_dir / "markup_decomposition.csv")
    income = pd.read_csv(out_dir / "income_shares.csv")
    manifest = json.loads((out_dir / "manifest.json").read_text())
    mode = manifest["config"].get("aggregation.mode", "full")

    checks: list[tuple[str, bool, str]] = []

    def add(name: str, err: float) -> None:
        checks.append((name, bool(err <= tol), f"max deviation {err:.3e}"))

    omega_err = float((fm.groupby("year")["omega"].sum() - 1.0).abs().max())
    add("weights_sum_to_one", omega_err)

    agg_by_year = agg.set_index("year")
    domar_err = thm_err = 0.0
    for year, rows in fm.groupby("year"):
        a = agg_by_year.loc[year]
        gdp = float(a["gdp"])
        domar = aggregation.profit_share_domar(rows["sale"], rows["profit_rate"], gdp)
        domar_err = max(domar_err, abs(domar - float(a["profit_share_domar"])))
        thm = aggregation.profit_share_theorem(
            float(a["chi"]), rows["markup"], rows["rs_adj"], rows["monopsony"],
            rows["omega"], mode=mode,
        )
        thm_err = max(thm_err, abs(thm.value - float(a["profit_share_thm"])))
    add("domar_share_recomputed", domar_err)
    add("theorem_share_recomputed", thm_err)

    # Domar and theorem shares agree when the sample is the economy
    comparable = (agg["chi"] - agg["chi_sample"]).abs().le(tol)
    if comparable.any():
        gap = float(
            (agg.loc[comparable, "profit_share_domar"]
             - agg.loc[comparable, "profit_share_thm"]).abs().max()
        )
        add("domar_equals_theorem", gap)
    else:
        checks.append(("domar_equals_theorem", True, "skipped: sample is not the economy"))

    rents_sum = agg["rents"] + agg["fixed_costs_term"] + agg["nonlinearities"]
    cor1 = agg["chi"] * (
        1.0 - agg["rs_adj_bar"] / agg["mu_hsw"] - agg["cov_rs_adj_inv_mu"]
    )
    add("rents_decomposition_sums", float((rents_sum - cor1).abs().max()))

    backout = agg.apply(
        lambda row: aggregation.markup_backout(row["chi"], row["profit_share_crs"]),
        axis=1,
    )
    add("markup_backout_roundtrip", float((backout - agg["mu_hsw"]).abs().max()))

    if not decomp.empty:
        gap = (
            decomp["within"] + decomp["between"] + decomp["net_entry"] - decomp["delta_mu"]
        )
        add("decomposition_additivity", float(gap.abs().max()))

    share_sum = income["labor_share"] + income["capital_share"] + income["profit_share"]
    add("income_shares_sum_to_one", float((share_sum - 1.0).abs().max()))

    return checks


def raise_on_failure(checks: list[tuple[str, bool, str]]) -> None:
    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        raise VerificationError(f"identity checks failed: {failed}")
