"""Firm-level market power measures built from elasticities and accounts.

Everything here is closed-form. The markup is the output elasticity of
the variable input times the sales-to-variable-cost ratio. The profit
rate follows from cost minimization: with returns to scale RS, total
costs TC, fixed costs FC, and input wedges, the share of sales kept as
profit is

    s_pi = 1 - rs_adj / markup + monopsony / markup

where rs_adj = RS * TC / (TC - FC) grosses scale up for fixed costs and
the monopsony term collects elasticity-weighted input wedges 1 - nu
(nu = 1 means the input is paid its marginal revenue product; nu < 1
means it is paid less). Setting every nu to one, FC to zero, and RS to
one collapses the expression to the familiar 1 - 1/markup.

User costs of capital come in three flavors: the first-order condition
(capital elasticity over markup times sales per unit of capital), the
accounting convention nominal rate minus inflation plus depreciation,
or an externally supplied series. The aggregate user cost divides
non-labor non-profit income by the capital stock.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

ArrayLike = "float | np.ndarray"


def _positive(name: str, value) -> None:
    if np.any(np.asarray(value) <= 0):
        raise DataError(f"{name} must be strictly positive")


def markup(theta_v, sale, variable_cost):
    """Output elasticity of the variable input times sales over its cost."""
    _positive("variable cost", variable_cost)
    return theta_v * np.asarray(sale, dtype=float) / np.asarray(variable_cost, dtype=float)


def fixed_cost_adjustment(total_cost, fixed_cost):
    """TC / (TC - FC); equals one when there are no fixed costs."""
    tc = np.asarray(total_cost, dtype=float)
    fc = np.asarray(fixed_cost, dtype=float)
    if np.any(fc < 0):
        raise DataError("fixed costs must be non-negative")
    if np.any(fc >= tc):
        raise DataError("fixed costs must be strictly below total costs")
    return tc / (tc - fc)


def monopsony_term(fc_adj, inputs: Iterable[tuple[float, float]]):
    """fc_adj times the sum of theta_j * (1 - nu_j) over inputs.

    Each element of inputs is an (elasticity, wedge) pair; wedges must
    lie in (0, 1], one meaning competitive input purchase.
    """
    total = 0.0
    for theta_j, nu_j in inputs:
        if not 0.0 < nu_j <= 1.0:
            raise DataError(f"input wedge {nu_j} outside (0, 1]")
        total += theta_j * (1.0 - nu_j)
    return fc_adj * total


def profit_rate(mu, rs_adj, monopsony=0.0):
    """Profit share of sales: 1 - rs_adj/mu + monopsony/mu."""
    mu = np.asarray(mu, dtype=float)
    _positive("markup", mu)
    return 1.0 - np.asarray(rs_adj, dtype=float) / mu + np.asarray(monopsony, dtype=float) / mu


def profit_rate_exogenous_r(theta_v, mu, r, capital, sale, fixed_cost):
    """Profit share of sales with capital priced at an outside rate r.

    1 - theta_v/mu - r*k/sale - FC/sale. Used when capital costs are
    imputed from an interest-rate rule instead of the first-order
    condition.
    """
    mu = np.asarray(mu, dtype=float)
    sale = np.asarray(sale, dtype=float)
    _positive("markup", mu)
    _positive("sale", sale)
    return (
        1.0
        - np.asarray(theta_v, dtype=float) / mu
        - np.asarray(r, dtype=float) * np.asarray(capital, dtype=float) / sale
        - np.asarray(fixed_cost, dtype=float) / sale
    )


def user_cost_foc(theta_k, mu, sale, capital):
    """Capital's first-order condition: theta_k/mu * sale/k."""
    _positive("capital", capital)
    _positive("markup", mu)
    return (
        np.asarray(theta_k, dtype=float)
        / np.asarray(mu, dtype=float)
        * np.asarray(sale, dtype=float)
        / np.asarray(capital, dtype=float)
    )


def user_cost_accounting(nominal_rate, inflation, depreciation: float = 0.12):
    """Accounting user cost: nominal rate minus inflation plus depreciation."""
    return (
        np.asarray(nominal_rate, dtype=float)
        - np.asarray(inflation, dtype=float)
        + depreciation
    )


def user_cost(method: str, **inputs):
    """Dispatch on the user-cost convention.

    method "foc" needs theta_k, mu, sale, capital; "accounting" needs
    nominal_rate, inflation and optionally depreciation; "external"
    needs series (the value itself).
    """
    if method == "foc":
        return user_cost_foc(
            inputs["theta_k"], inputs["mu"], inputs["sale"], inputs["capital"]
        )
    if method == "accounting":
        return user_cost_accounting(
            inputs["nominal_rate"],
            inputs["inflation"],
            inputs.get("depreciation", 0.12),
        )
    if method == "external":
        series = inputs.get("series")
        if series is None or np.any(~np.isfinite(np.asarray(series, dtype=float))):
            raise DataError("external user-cost series is absent or not finite")
        return np.asarray(series, dtype=float)
    raise DataError(f"unknown user-cost method '{method}'")


@dataclass
class AggregateUserCost:
    """Economy-wide capital return measures for one year."""

    r_macro: float          # (GDP/K) * (1 - labor share - profit share)
    r_firm_weighted: float  # capital-weighted mean of firm-level FOC user costs


def aggregate_user_cost(
    gdp: float,
    capital: float,
    labor_share: float,
    profit_share: float,
    firm_user_costs: Sequence[float] | None = None,
    firm_capital: Sequence[float] | None = None,
) -> AggregateUserCost:
    """Aggregate return on capital from the income-side identity.

    Capital income is GDP times 1 - labor share - profit share; dividing
    by the capital stock gives the implied rental rate. When firm-level
    user costs and stocks are supplied, their capital-weighted mean is
    returned alongside for comparison.
    """
    if capital <= 0:
        raise DataError("aggregate capital stock must be positive")
    r_macro = gdp / capital * (1.0 - labor_share - profit_share)
    r_firm = np.nan
    if firm_user_costs is not None and firm_capital is not None:
        weights = np.asarray(firm_capital, dtype=float)
        costs = np.asarray(firm_user_costs, dtype=float)
        if weights.sum() <= 0:
            raise DataError("firm capital weights must sum to a positive value")
        r_firm = float(np.sum(weights * costs) / weights.sum())
    return AggregateUserCost(r_macro=float(r_macro), r_firm_weighted=r_firm)
