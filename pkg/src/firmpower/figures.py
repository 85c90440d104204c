"""Render the figure-ready CSV outputs to PNG files.

Every panel reads one of the fig*.csv files the pipeline wrote, so the
plots can be regenerated (or restyled) without rerunning estimation.
The Agg backend keeps rendering deterministic and headless-safe.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd

_DPI = 150


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def _plot_markup_rs(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(frame["year"], frame["mu_hsw"], marker="o", ms=3, label="markup, harmonic sales-weighted")
    ax.plot(frame["year"], frame["mu_sales_weighted"], ls="--", label="markup, sales-weighted")
    ax.plot(frame["year"], frame["rs_adj_bar"], marker="s", ms=3, label="returns to scale, fixed-cost adjusted")
    ax.plot(frame["year"], frame["rs_bar"], ls=":", label="returns to scale, raw")
    ax.set_xlabel("year")
    ax.set_ylabel("ratio")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("Aggregate markup and returns to scale")
    _save(fig, path)


def _plot_profit_share(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(frame["year"], frame["profit_share_thm"], marker="o", ms=3, label="formula, full")
    ax.plot(frame["year"], frame["profit_share_zero_cov"], ls="--", label="zero covariance")
    ax.plot(frame["year"], frame["profit_share_crs"], ls=":", label="constant returns, no fixed costs")
    ax.plot(frame["year"], frame["profit_share_domar"], lw=1, alpha=0.7, label="Domar-weighted rates")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("year")
    ax.set_ylabel("share of GDP")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("Aggregate profit share")
    _save(fig, path)


def _plot_decomposition(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(frame["year"], frame["rents"], marker="o", ms=3, label="rents")
    ax.plot(frame["year"], frame["fixed_costs_term"], marker="s", ms=3, label="fixed costs")
    ax.plot(frame["year"], frame["nonlinearities"], ls="--", label="nonlinearities")
    ax.plot(frame["year"], frame["profit_share_thm"], color="black", lw=1.5, label="profit share")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("year")
    ax.set_ylabel("share of GDP")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("Profit share split into rents, fixed costs, nonlinearities")
    _save(fig, path)


def _plot_markup_change(frame: pd.DataFrame, path: Path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0))
    width = 0.27
    years = frame["year"]
    axes[0].bar(years - width, frame["within"], width=width, label="within")
    axes[0].bar(years, frame["between"], width=width, label="between")
    axes[0].bar(years + width, frame["net_entry"], width=width, label="net entry")
    axes[0].axhline(0.0, color="gray", lw=0.5)
    axes[0].set_xlabel("year")
    axes[0].set_ylabel("markup change")
    axes[0].legend(frameon=False, fontsize=8)
    axes[0].set_title("Year-over-year decomposition")
    axes[1].plot(years, frame["cumulative"], marker="o", ms=3)
    axes[1].axhline(0.0, color="gray", lw=0.5)
    axes[1].set_xlabel("year")
    axes[1].set_ylabel("cumulative markup change")
    axes[1].set_title("Cumulative change")
    _save(fig, path)


def _plot_user_costs(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(frame["year"], frame["r_firm_weighted"], marker="o", ms=3, label="firm-level, capital-weighted")
    ax.plot(frame["year"], frame["r_macro"], ls="--", label="aggregate residual")
    ax.plot(frame["year"], frame["r_accounting"], ls=":", label="accounting rule")
    ax.set_xlabel("year")
    ax.set_ylabel("user cost of capital")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("User cost of capital, three measurements")
    _save(fig, path)


def _plot_share_variants(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(frame["year"], frame["profit_share_domar"], marker="o", ms=3, label="Domar-weighted rates")
    ax.plot(frame["year"], frame["profit_share_thm"], ls="--", label="aggregation formula")
    ax.plot(frame["year"], frame["rate_sales_weighted"], ls=":", label="sales-weighted mean rate")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("year")
    ax.set_ylabel("share of GDP")
    ax.legend(frameon=False, fontsize=8)
    ax.set_title("Profit share, alternative constructions")
    _save(fig, path)


def _plot_hhi(frame: pd.DataFrame, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    national = frame[frame["scope"] == "national"]
    ax.plot(national["year"], national["hhi"], color="black", lw=1.8, label="national")
    for scope in sorted(frame.loc[frame["scope"] != "national", "scope"].unique()):
        sub = frame[frame["scope"] == scope]
        ax.plot(sub["year"], sub["hhi"], lw=0.9, alpha=0.7, label=f"industry {scope}")
    ax.set_xlabel("year")
    ax.set_ylabel("HHI")
    ax.legend(frameon=False, fontsize=7, ncol=2)
    ax.set_title("Sales concentration")
    _save(fig, path)


_RENDERERS = {
    "fig2_markup_rs.csv": ("fig2_markup_rs.png", _plot_markup_rs),
    "fig3_profit_share.csv": ("fig3_profit_share.png", _plot_profit_share),
    "fig4_decomposition.csv": ("fig4_decomposition.png", _plot_decomposition),
    "fig7_markup_change.csv": ("fig7_markup_change.png", _plot_markup_change),
    "fig8_user_costs.csv": ("fig8_user_costs.png", _plot_user_costs),
    "fig9_profit_shares_by_r.csv": ("fig9_profit_shares_by_r.png", _plot_share_variants),
    "hhi.csv": ("hhi.png", _plot_hhi),
}


def render_figures(csv_dir, fig_dir) -> list[Path]:
    """Render every known figure CSV present in csv_dir into fig_dir."""
    csv_dir = Path(csv_dir)
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    rendered: list[Path] = []
    for csv_name, (png_name, renderer) in _RENDERERS.items():
        src = csv_dir / csv_name
        if not src.exists():
            continue
        frame = pd.read_csv(src)
        if frame.empty:
            continue
        dest = fig_dir / png_name
        renderer(frame, dest)
        rendered.append(dest)
    return rendered
