"""Markup dynamics: churn accounting, concentration, and distributions.

The centerpiece decomposes the change in the harmonic sales-weighted
aggregate markup between two adjacent years into incumbent, share-
reallocation, and net-entry contributions. Writing h_s for the sales-
weighted mean INVERSE markup in year s (so the aggregate markup is
1/h_s), the change satisfies, for any reference point c,

    delta = -mu_t * mu_{t-1} * [ sum_C omega_bar_i * d(1/mu_i)
                                + sum_C d(omega_i) * (m_bar_i - c)
                                + sum_E omega_it * (1/mu_it - c)
                                - sum_X omega_it-1 * (1/mu_it-1 - c) ]

with C incumbents, E entrants, X exiters, bars denoting two-period
means, and weights renormalized within each year's sample. The three
bracketed groups scaled by -mu_t*mu_{t-1} are the within, between, and
net-entry terms; they add up to the markup change exactly because the
midpoint identity x_t y_t - x_s y_s = x_bar dy + dx y_bar is exact and
the entry/exit recentering around c cancels against the between term.
The default c is the midpoint of h_t and h_{t-1} in inverse-markup
space. A "literal" variant that divides by the markup product instead
of multiplying (and recenters entrants at the average markup level) is
kept for comparison; it does not add up, and its residual is reported.

Also here: the sales Herfindahl-Hirschman index at national or industry
scope, and unweighted nearest-rank markup percentiles with a count of
sub-unity markups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError
from .panel import nearest_rank

PERCENTILE_LEVELS = (0.10, 0.25, 0.50, 0.75, 0.90, 0.95)


@dataclass(frozen=True)
class FirmSets:
    """Firms present in both years, only the current, or only the prior."""

    incumbents: frozenset
    entrants: frozenset
    exiters: frozenset


def classify_firms(observations: pd.DataFrame, year: int) -> FirmSets:
    """Split firms into incumbents, entrants, and exiters at a year."""
    years = observations["year"]
    if year - 1 not in set(years.unique()):
        raise DataError(f"no prior year in the sample for {year}")
    curr = set(observations.loc[years == year, "firm_id"])
    prev = set(observations.loc[years == year - 1, "firm_id"])
    if not curr:
        raise DataError(f"no observations in year {year}")
    return FirmSets(
        incumbents=frozenset(curr & prev),
        entrants=frozenset(curr - prev),
        exiters=frozenset(prev - curr),
    )


@dataclass
class MarkupChange:
    """Additive split of the aggregate markup change between two years."""

    year: int
    mu_prev: float
    mu_curr: float
    delta: float
    within: float
    between: float
    net_entry: float
    reference: float
    residual: float  # zero by construction except in literal mode

    @property
    def total(self) -> float:
        return self.within + self.between + self.net_entry


def _prepare(frame: pd.DataFrame) -> pd.DataFrame:
    out = frame[["firm_id", "sale", "markup"]].copy()
    if out["firm_id"].duplicated().any():
        raise DataError("duplicate firm in a decomposition year")
    if np.any(out["markup"].to_numpy(dtype=float) <= 0):
        raise DataError("markups must be strictly positive")
    total = float(out["sale"].sum())
    if total <= 0:
        raise DataError("sales must sum to a positive value")
    out["omega"] = out["sale"].to_numpy(dtype=float) / total
    out["inv_mu"] = 1.0 / out["markup"].to_numpy(dtype=float)
    return out.set_index("firm_id")


def markup_change_decomposition(
    prev: pd.DataFrame,
    curr: pd.DataFrame,
    year: int | None = None,
    reference: float | str = "midpoint",
    literal: bool = False,
) -> MarkupChange:
    """Within/between/net-entry split of the harmonic markup change.

    prev and curr are per-firm tables with firm_id, sale, markup for
    the earlier and later year. reference is the entry recentering
    point in inverse-markup space: "midpoint" (default) or a float.
    With literal=True the printed-form variant is computed instead and
    its additivity residual filled in.
    """
    p = _prepare(prev)
    c = _prepare(curr)
    h_prev = float(np.sum(p["omega"] * p["inv_mu"]))
    h_curr = float(np.sum(c["omega"] * c["inv_mu"]))
    mu_prev, mu_curr = 1.0 / h_prev, 1.0 / h_curr
    delta = mu_curr - mu_prev

    if reference == "midpoint":
        ref = 0.5 * (h_curr + h_prev)
    else:
        ref = float(reference)

    incumbents = p.index.intersection(c.index)
    entrants = c.index.difference(p.index)
    exiters = p.index.difference(c.index)

    om_p = p.loc[incumbents, "omega"].to_numpy(dtype=float)
    om_c = c.loc[incumbents, "omega"].to_numpy(dtype=float)
    m_p = p.loc[incumbents, "inv_mu"].to_numpy(dtype=float)
    m_c = c.loc[incumbents, "inv_mu"].to_numpy(dtype=float)

    within_core = float(np.sum(0.5 * (om_p + om_c) * (m_c - m_p)))
    between_core = float(np.sum((om_c - om_p) * (0.5 * (m_p + m_c) - ref)))
    entry_core = float(
        np.sum(
            c.loc[entrants, "omega"].to_numpy(dtype=float)
            * (c.loc[entrants, "inv_mu"].to_numpy(dtype=float) - ref)
        )
    )
    exit_core = float(
        np.sum(
            p.loc[exiters, "omega"].to_numpy(dtype=float)
            * (p.loc[exiters, "inv_mu"].to_numpy(dtype=float) - ref)
        )
    )

    if literal:
        scale = -1.0 / (mu_curr * mu_prev)
        ref_literal = 0.5 * (mu_curr + mu_prev)
        entry_lit = float(
            np.sum(
                c.loc[entrants, "omega"].to_numpy(dtype=float)
                * (c.loc[entrants, "inv_mu"].to_numpy(dtype=float) - ref_literal)
            )
        )
        exit_lit = float(
            np.sum(
                p.loc[exiters, "omega"].to_numpy(dtype=float)
                * (p.loc[exiters, "inv_mu"].to_numpy(dtype=float) - ref_literal)
            )
        )
        within = scale * within_core
        between = scale * float(np.sum((om_c - om_p) * (0.5 * (m_p + m_c) - ref_literal)))
        net_entry = scale * (entry_lit - exit_lit)
        residual = delta - (within + between + net_entry)
        ref_out = ref_literal
    else:
        scale = -(mu_curr * mu_prev)
        within = scale * within_core
        between = scale * between_core
        net_entry = scale * (entry_core - exit_core)
        residual = 0.0
        ref_out = ref

    return MarkupChange(
        year=int(year) if year is not None else -1,
        mu_prev=mu_prev,
        mu_curr=mu_curr,
        delta=delta,
        within=within,
        between=between,
        net_entry=net_entry,
        reference=ref_out,
        residual=residual,
    )


def hhi(observations: pd.DataFrame, year: int, scope: str = "national") -> float:
    """Sales Herfindahl-Hirschman index for a year.

    scope "national" uses shares of the whole sample's sales; an
    industry code restricts both the shares and the denominator to
    that industry.
    """
    rows = observations[observations["year"] == year]
    if scope != "national":
        rows = rows[rows["industry"] == scope]
    sales = rows["sale"].to_numpy(dtype=float)
    sales = sales[np.isfinite(sales)]
    if sales.size == 0 or sales.sum() <= 0:
        raise DataError(f"no positive sales for scope {scope} in year {year}")
    shares = sales / sales.sum()
    return float(np.sum(shares**2))


def distribution_stats(markups, weights=None) -> dict:
    """Nearest-rank markup percentiles and the sub-unity count.

    Percentiles are unweighted by convention; passing weights switches
    to weighted nearest-rank (smallest value whose cumulative weight
    reaches the level).
    """
    values = np.asarray(markups, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DataError("no finite markups to summarize")
    stats: dict[str, float] = {}
    if weights is None:
        for level in PERCENTILE_LEVELS:
            stats[f"p{int(level * 100)}"] = nearest_rank(values, level)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != np.asarray(markups, dtype=float).shape:
            raise DataError("weights must match markups in length")
        w = w[np.isfinite(np.asarray(markups, dtype=float))]
        order = np.argsort(values)
        sorted_v, cum = values[order], np.cumsum(w[order]) / w.sum()
        for level in PERCENTILE_LEVELS:
            idx = int(np.searchsorted(cum, level, side="left"))
            stats[f"p{int(level * 100)}"] = float(sorted_v[min(idx, sorted_v.size - 1)])
    stats["n"] = int(values.size)
    stats["below_unity"] = int(np.sum(values < 1.0))
    stats["below_unity_share"] = float(np.mean(values < 1.0))
    return stats
