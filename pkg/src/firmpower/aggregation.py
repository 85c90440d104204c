"""Economy-level aggregation of firm profit rates and markups.

The aggregate profit share of GDP admits several equivalent accountings
on internally consistent data:

* Domar weighting: sum over firms of (sales/GDP) * profit rate.
* Value-added weighting: sum of (VA/GDP) * (profits/VA).
* The sales-to-GDP ratio chi times the sales-share-weighted mean of
  firm profit rates, expanded into aggregate markup, scale, and wedge
  terms plus two covariances.

The third form is the workhorse: with sales shares omega and inverse
markups 1/mu,

    share = chi * (1 - E[rs_adj/mu] + E[monopsony/mu])
          = chi * (1 - rs_adj_bar/mu_hsw + m_bar/mu_hsw
                   - Cov[rs_adj, 1/mu] + Cov[m, 1/mu])

with mu_hsw the harmonic sales-weighted markup 1/E[1/mu]. Nested
restricted modes drop the monopsony terms (cor1), use raw returns to
scale (cor2), and impose constant returns (cor3, the textbook
chi * (1 - 1/mu_hsw)).

Also here: the inversion of the cor3 formula back to the implied
markup, the wedge showing how ignoring intermediate inputs (chi = 1)
overstates the markup implied by a given profit share, the split of
the profit share into monopoly rents, a fixed-cost drag, and a
nonlinearity remainder, and factor income shares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_MODES = ("full", "cor1", "cor2", "cor3")


def weighted_mean(values, weights) -> float:
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise DataError("weights must sum to a positive value")
    return float(np.sum(w * v) / total)


def weighted_harmonic_mean(values, weights) -> float:
    """Inverse of the weighted mean of inverses; never above the mean."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        raise DataError("harmonic mean requires strictly positive values")
    return 1.0 / weighted_mean(1.0 / v, weights)


def weighted_cov(x, y, weights) -> float:
    """Weighted covariance sum_i w_i (x_i - x_bar)(y_i - y_bar) / sum_i w_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    xbar = weighted_mean(x, w)
    ybar = weighted_mean(y, w)
    return float(np.sum(w * (x - xbar) * (y - ybar)) / w.sum())


def profit_share_domar(sales, profit_rates, gdp: float) -> float:
    """Sum of (firm sales / GDP) times firm profit rates."""
    if gdp <= 0:
        raise DataError("GDP must be positive")
    s = np.asarray(sales, dtype=float)
    r = np.asarray(profit_rates, dtype=float)
    return float(np.sum(s / gdp * r))


def profit_share_va(value_added, profits, gdp: float) -> float:
    """Sum of (firm VA / GDP) times firm profit-to-VA ratios."""
    if gdp <= 0:
        raise DataError("GDP must be positive")
    va = np.asarray(value_added, dtype=float)
    pi = np.asarray(profits, dtype=float)
    if np.any(va == 0):
        raise DataError("value added of zero makes the VA profit rate undefined")
    return float(np.sum(va / gdp * (pi / va)))


@dataclass
class TheoremComponents:
    """Aggregate ingredients of the profit-share formula."""

    chi: float
    mu_hsw: float
    rs_adj_bar: float
    m_bar: float
    cov_rs_adj_inv_mu: float
    cov_m_inv_mu: float
    mode: str
    value: float


def profit_share_theorem(
    chi: float,
    mu,
    rs_adj,
    monopsony,
    weights,
    mode: str = "full",
) -> TheoremComponents:
    """Aggregate profit share from sales-weighted firm measures.

    Modes impose nested restrictions and check them: cor1 requires a
    zero monopsony term for every firm, cor2 additionally a unit
    fixed-cost adjustment (pass raw returns to scale as rs_adj), cor3
    additionally unit returns to scale. A violated restriction raises
    with the offending firm positions.
    """
    if mode not in _MODES:
        raise DataError(f"unknown aggregation mode '{mode}'")
    mu = np.asarray(mu, dtype=float)
    rs_adj = np.asarray(rs_adj, dtype=float)
    m = np.asarray(monopsony, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(mu <= 0):
        raise DataError("markups must be strictly positive")

    if mode in ("cor1", "cor2", "cor3"):
        bad = np.nonzero(m != 0.0)[0]
        if bad.size:
            raise DataError(
                f"mode {mode} assumes no monopsony wedges; violated at positions {bad[:5].tolist()}"
            )
    if mode == "cor3":
        bad = np.nonzero(rs_adj != 1.0)[0]
        if bad.size:
            raise DataError(
                f"mode cor3 assumes unit returns to scale; violated at positions {bad[:5].tolist()}"
            )

    inv_mu = 1.0 / mu
    mu_hsw = 1.0 / weighted_mean(inv_mu, w)
    rs_adj_bar = weighted_mean(rs_adj, w)
    m_bar = weighted_mean(m, w)
    cov_rs = weighted_cov(rs_adj, inv_mu, w)
    cov_m = weighted_cov(m, inv_mu, w)

    if mode == "cor3":
        value = chi * (1.0 - 1.0 / mu_hsw)
    else:
        # under cor1/cor2 the monopsony terms are exact zeros, so this
        # expression reduces to chi * (1 - rs_adj_bar/mu_hsw - cov_rs)
        value = chi * (
            1.0 - rs_adj_bar / mu_hsw + m_bar / mu_hsw - cov_rs + cov_m
        )
    return TheoremComponents(
        chi=chi,
        mu_hsw=mu_hsw,
        rs_adj_bar=rs_adj_bar,
        m_bar=m_bar,
        cov_rs_adj_inv_mu=cov_rs,
        cov_m_inv_mu=cov_m,
        mode=mode,
        value=float(value),
    )


def markup_backout(chi: float, profit_share: float) -> float:
    """Invert share = chi * (1 - 1/mu) for the implied aggregate markup."""
    if chi <= 0:
        raise DataError("chi must be positive")
    if profit_share >= chi:
        raise DataError(
            f"profit share {profit_share} must be below the sales/GDP ratio {chi}"
        )
    return 1.0 / (1.0 - profit_share / chi)


@dataclass
class BiasReport:
    """How a chi = 1 reading overstates the markup implied by a profit share."""

    chi: float
    profit_share: float
    naive_markup: float     # backed out ignoring intermediates (chi = 1)
    true_markup: float      # backed out at the actual chi
    bias_factor: float      # naive - true, in markup points (closed form)
    overstatement_gross: float  # naive/true - 1, relative to the gross markup
    overstatement_net: float    # (naive-1)/(true-1) - 1, relative to the net markup


def network_bias_factor(chi: float, profit_share: float) -> BiasReport:
    """Markup overstatement from ignoring the sales/GDP multiplier.

    The closed form (chi - 1) * share / ((1 - share) * (chi - share))
    equals the level gap naive - true between the backed-out markups.
    The same gap read relative to the gross markup (naive/true - 1) or
    to the net markup ((naive-1)/(true-1) - 1) gives larger headline
    percentages, so all three readings are reported side by side.
    """
    naive = markup_backout(1.0, profit_share)
    true = markup_backout(chi, profit_share)
    factor = (
        (chi - 1.0) * profit_share
        / ((1.0 - profit_share) * (chi - profit_share))
    )
    net = np.nan
    if true != 1.0:
        net = (naive - 1.0) / (true - 1.0) - 1.0
    return BiasReport(
        chi=chi,
        profit_share=profit_share,
        naive_markup=naive,
        true_markup=true,
        bias_factor=float(factor),
        overstatement_gross=naive / true - 1.0,
        overstatement_net=float(net),
    )


@dataclass
class RentsDecomposition:
    """Profit share split into rents, fixed-cost drag, and remainder."""

    rents: float
    fixed_costs: float
    nonlinearities: float

    @property
    def total(self) -> float:
        return self.rents + self.fixed_costs + self.nonlinearities


def rents_decomposition(
    chi: float, mu_hsw: float, rs_adj_bar: float, cov_rs_adj_inv_mu: float
) -> RentsDecomposition:
    """Split chi*(1 - rs_adj_bar/mu_hsw - cov) into three named pieces.

    rents          = chi * (1 - 1/mu_hsw)         (pure markup power)
    fixed_costs    = chi * (1 - rs_adj_bar)        (scale/fixed-cost drag)
    nonlinearities = chi * ((1/mu_hsw - 1) * (1 - rs_adj_bar) - cov)

    The three sum to the no-monopsony aggregate profit share exactly.
    """
    if mu_hsw <= 0:
        raise DataError("aggregate markup must be positive")
    rents = chi * (1.0 - 1.0 / mu_hsw)
    fixed = chi * (1.0 - rs_adj_bar)
    nonlin = chi * (
        (1.0 / mu_hsw - 1.0) * (1.0 - rs_adj_bar) - cov_rs_adj_inv_mu
    )
    return RentsDecomposition(
        rents=float(rents), fixed_costs=float(fixed), nonlinearities=float(nonlin)
    )


@dataclass
class IncomeShares:
    """GDP split into labor, capital, and profit income."""

    labor: float
    capital: float
    profit: float
    implausible: bool  # capital share materially negative

    @property
    def total(self) -> float:
        return self.labor + self.capital + self.profit


def income_shares(labor_comp: float, gdp: float, profit_share: float) -> IncomeShares:
    """Labor share from compensation/GDP; capital share as the remainder."""
    if gdp <= 0:
        raise DataError("GDP must be positive")
    labor = labor_comp / gdp
    capital = 1.0 - labor - profit_share
    return IncomeShares(
        labor=float(labor),
        capital=float(capital),
        profit=float(profit_share),
        implausible=bool(capital < -0.05),
    )
