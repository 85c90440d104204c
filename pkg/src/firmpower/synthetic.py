"""Synthetic economies with known ground truth.

Every generator here produces both the observable tables (firm panel
and macro series, or production-network accounts) and a truth record
carrying the primitives that produced them: elasticities, markups,
input wedges, fixed costs, profits, value added. Tests treat the truth
record as the oracle and the observable tables as what the estimators
are allowed to see.

gen_cobb_douglas_panel simulates firms with Cobb-Douglas technology,
AR(1) log productivity, a quasi-fixed capital stock that responds to
lagged productivity, and a variable input chosen as the cost-minimizing
response to current productivity (this is what makes naive OLS biased
and gives the control-function estimator something to do). A proxy
variable moves monotonically with productivity conditional on capital,
so the stage-one inversion is exact. With exact_moments=True (default)
each period's productivity innovations are orthogonalized within
industry against the estimator's instruments, making the identifying
moment conditions hold exactly in the simulated sample rather than
only in expectation; simultaneity is untouched, and a correctly coded
estimator recovers the elasticities to optimizer precision.

gen_vertical_economy builds the textbook supply chain in which every
producer keeps the same margin, so sales-weighted firm profit rates
understate the macro profit share (double marginalization stacks
margins along the chain). gen_network_economy draws random acyclic
production networks with heterogeneous markups, input wedges, and
fixed costs, solving flows downstream-to-upstream so the accounts
close exactly. gen_firm_accounts draws standalone firm accounts from
primitives for identity tests, and gen_fixed_cost_firm tabulates a
technology with a subsistence input level whose measured log-log slope
exceeds the curvature parameter.

All randomness flows from numpy SeedSequence streams: one child stream
per firm or node, so identical seeds reproduce identical tables byte
for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError

_CLOSURE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Cobb-Douglas firm panel
# ---------------------------------------------------------------------------

@dataclass
class PanelSpec:
    """Settings for the Cobb-Douglas panel generator."""

    n_firms: int = 200
    n_years: int = 20
    start_year: int = 2000
    industries: tuple[str, ...] = ("31-33", "51")
    theta: tuple[tuple[float, float], ...] = ((0.7, 0.3), (0.65, 0.25))
    rho: float = 0.8
    innovation_sd: float = 0.2
    noise_sd: float = 0.0            # measurement noise on log sales
    input_noise_sd: float = 0.05     # deviation of the variable input from cost minimization
    mu_log_mean: float = float(np.log(1.2))
    mu_log_sd: float = 0.10
    mu_bounds: tuple[float, float] = (1.02, 2.0)
    fc_share_range: tuple[float, float] = (0.01, 0.05)
    capital_scale_log_mean: float = float(np.log(3.0))
    capital_scale_log_sd: float = 0.30
    capital_persistence: float = 0.75
    capital_response: float = 0.4    # loading of log capital on lagged productivity
    capital_noise_sd: float = 0.10
    capital_depreciation: float = 0.10
    proxy_coeffs: tuple[float, float, float] = (0.5, 0.8, 0.5)  # const, omega, log k
    physical_share: float = 0.7
    cogs_share: float = 0.8
    deflator_growth: float = 0.02
    ffr: float = 0.05
    inflation: float = 0.02
    exact_moments: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.n_firms < len(self.industries):
            raise DataError("need at least one firm per industry")
        if not 0.0 <= self.rho < 1.0:
            raise DataError("productivity persistence must lie in [0, 1)")
        for theta_v, theta_k in self.theta:
            if not (0.0 < theta_v < 1.0 and 0.0 <= theta_k):
                raise DataError("elasticities must satisfy 0 < theta_v < 1 and theta_k >= 0")
        if len(self.theta) != len(self.industries):
            raise DataError("theta must list one (theta_v, theta_k) pair per industry")


@dataclass
class SyntheticPanel:
    """Observable tables plus the truth record of a simulated panel."""

    firms: pd.DataFrame          # Compustat-style columns, nominal values
    macro: pd.DataFrame          # year, gdp, total_sales, deflator, ...
    firm_truth: pd.DataFrame     # real-terms primitives per firm-year
    aggregate_truth: pd.DataFrame
    spec: PanelSpec


def _orthogonalize(raw: np.ndarray, columns: list[np.ndarray]) -> np.ndarray:
    """Residual of raw on the span of the columns (with intercept)."""
    design = np.column_stack([np.ones_like(raw)] + columns)
    if raw.size <= design.shape[1] + 1:
        return raw
    coef, _, _, _ = np.linalg.lstsq(design, raw, rcond=None)
    return raw - design @ coef


def gen_cobb_douglas_panel(spec: PanelSpec | None = None) -> SyntheticPanel:
    """Simulate the firm panel described in PanelSpec."""
    spec = spec or PanelSpec()
    spec.validate()
    n, T = spec.n_firms, spec.n_years
    streams = np.random.SeedSequence(spec.seed).spawn(n)

    industry_of = np.array(
        [spec.industries[i % len(spec.industries)] for i in range(n)], dtype=object
    )
    theta_of = {ind: spec.theta[j] for j, ind in enumerate(spec.industries)}

    # per-firm constants and raw innovation streams
    mu_target = np.empty(n)
    cap_scale = np.empty(n)
    fc_share = np.empty(n)
    omega0 = np.empty(n)
    k0_noise = np.empty(n)
    xi_raw = np.empty((n, T))
    eta = np.empty((n, T + 1))
    dev = np.empty((n, T))
    eps = np.empty((n, T))
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        mu_target[i] = float(
            np.clip(np.exp(rng.normal(spec.mu_log_mean, spec.mu_log_sd)), *spec.mu_bounds)
        )
        cap_scale[i] = rng.normal(spec.capital_scale_log_mean, spec.capital_scale_log_sd)
        fc_share[i] = rng.uniform(*spec.fc_share_range)
        stationary_sd = spec.innovation_sd / np.sqrt(1.0 - spec.rho**2)
        omega0[i] = rng.normal(0.0, stationary_sd)
        k0_noise[i] = rng.normal(0.0, 0.2)
        xi_raw[i] = rng.normal(0.0, spec.innovation_sd, size=T)
        eta[i] = rng.normal(0.0, spec.capital_noise_sd, size=T + 1)
        dev[i] = rng.normal(0.0, spec.input_noise_sd, size=T) if spec.input_noise_sd else 0.0
        eps[i] = rng.normal(0.0, spec.noise_sd, size=T) if spec.noise_sd else 0.0

    omega = np.empty((n, T))
    log_k = np.empty((n, T + 1))  # one extra period for end-of-year stocks
    log_l = np.empty((n, T))

    theta_v_arr = np.array([theta_of[ind][0] for ind in industry_of])
    theta_k_arr = np.array([theta_of[ind][1] for ind in industry_of])
    log_mu = np.log(mu_target)

    def variable_response(t: int) -> np.ndarray:
        # cost-minimizing variable input given omega_t and capital_t
        return (
            np.log(theta_v_arr) - log_mu + omega[:, t] + theta_k_arr * log_k[:, t]
        ) / (1.0 - theta_v_arr) + dev[:, t]

    omega[:, 0] = omega0
    log_k[:, 0] = cap_scale + k0_noise
    log_l[:, 0] = variable_response(0)
    for t in range(1, T + 1):
        log_k[:, t] = (
            cap_scale
            + spec.capital_persistence * (log_k[:, t - 1] - cap_scale)
            + spec.capital_response * omega[:, t - 1]
            + eta[:, t]
        )
        if t == T:
            break
        xi_t = xi_raw[:, t].copy()
        if spec.exact_moments:
            for ind in spec.industries:
                sel = industry_of == ind
                xi_t[sel] = _orthogonalize(
                    xi_t[sel],
                    [omega[sel, t - 1], log_l[sel, t - 1], log_k[sel, t]],
                )
        omega[:, t] = spec.rho * omega[:, t - 1] + xi_t
        log_l[:, t] = variable_response(t)

    c0, c1, c2 = spec.proxy_coeffs
    log_y = (
        theta_v_arr[:, None] * log_l
        + theta_k_arr[:, None] * log_k[:, :T]
        + omega
    )
    sale = np.exp(log_y + eps)
    opex = np.exp(log_l)
    k_prod = np.exp(log_k)
    proxy = np.exp(c0 + c1 * omega + c2 * log_k[:, :T])

    years = np.arange(spec.start_year, spec.start_year + T)
    deflator = (1.0 + spec.deflator_growth) ** np.arange(T)

    # truth in real terms
    mu_true = theta_v_arr[:, None] * sale / opex
    rs_true = (theta_v_arr + theta_k_arr)[:, None] * np.ones(T)
    rd = fc_share[:, None] * sale
    capital_cost = theta_k_arr[:, None] * sale / mu_true
    user_cost_true = capital_cost / k_prod[:, :T]
    profit = sale - opex - capital_cost - rd
    total_cost = opex + capital_cost + rd
    profit_rate_true = profit / sale

    firm_ids = np.array([f"F{i:04d}" for i in range(n)])
    idx_firm = np.repeat(np.arange(n), T)
    idx_year = np.tile(np.arange(T), n)

    capx = np.maximum(
        k_prod[:, 1 : T + 1] - (1.0 - spec.capital_depreciation) * k_prod[:, :T],
        1e-6 * k_prod[:, :T],
    )

    defl_row = deflator[idx_year]
    firms = pd.DataFrame(
        {
            "gvkey": firm_ids[idx_firm],
            "fyear": years[idx_year],
            "naics2": industry_of[idx_firm],
            "sale": sale[idx_firm, idx_year] * defl_row,
            "cogs": (spec.cogs_share * opex)[idx_firm, idx_year] * defl_row,
            "xsga": ((1.0 - spec.cogs_share) * opex)[idx_firm, idx_year] * defl_row,
            "xrd": rd[idx_firm, idx_year] * defl_row,
            "ppegt": (spec.physical_share * k_prod[:, 1 : T + 1])[idx_firm, idx_year] * defl_row,
            "k_int": ((1.0 - spec.physical_share) * k_prod[:, 1 : T + 1])[idx_firm, idx_year] * defl_row,
            "capx": capx[idx_firm, idx_year] * defl_row,
            "icapt": proxy[idx_firm, idx_year] * defl_row,
        }
    )

    firm_truth = pd.DataFrame(
        {
            "firm_id": firm_ids[idx_firm],
            "year": years[idx_year],
            "industry": industry_of[idx_firm],
            "theta_v": theta_v_arr[idx_firm],
            "theta_k": theta_k_arr[idx_firm],
            "rho": spec.rho,
            "omega": omega[idx_firm, idx_year],
            "capital": k_prod[idx_firm, idx_year],
            "markup": mu_true[idx_firm, idx_year],
            "rs": rs_true[idx_firm, idx_year],
            "fixed_cost": rd[idx_firm, idx_year],
            "total_cost": total_cost[idx_firm, idx_year],
            "user_cost": user_cost_true[idx_firm, idx_year],
            "profit": profit[idx_firm, idx_year],
            "profit_rate": profit_rate_true[idx_firm, idx_year],
            "va": sale[idx_firm, idx_year],
        }
    )

    # macro series: no intermediates, so GDP is total sales and labor
    # income is the variable input plus overhead (fixed-cost) payments
    gdp_real = sale.sum(axis=0)
    labor_real = (opex + rd).sum(axis=0)
    macro = pd.DataFrame(
        {
            "year": years,
            "gdp": gdp_real * deflator,
            "total_sales": gdp_real * deflator,
            "deflator": deflator,
            "labor_comp": labor_real * deflator,
            "ffr": spec.ffr,
            "inflation": spec.inflation,
        }
    )

    agg_rows = []
    for t in range(T):
        w = sale[:, t] / gdp_real[t]
        inv_mu = 1.0 / mu_true[:, t]
        agg_rows.append(
            {
                "year": int(years[t]),
                "gdp": gdp_real[t],
                "total_sales": gdp_real[t],
                "chi": 1.0,
                "profit_share": profit[:, t].sum() / gdp_real[t],
                "mu_hsw": 1.0 / np.sum(w * inv_mu),
                "labor_share": labor_real[t] / gdp_real[t],
                "capital_share": capital_cost[:, t].sum() / gdp_real[t],
            }
        )
    aggregate_truth = pd.DataFrame(agg_rows)

    return SyntheticPanel(
        firms=firms,
        macro=macro,
        firm_truth=firm_truth,
        aggregate_truth=aggregate_truth,
        spec=spec,
    )


# ---------------------------------------------------------------------------
# Production-network economies
# ---------------------------------------------------------------------------

@dataclass
class NetworkSpec:
    """Settings for the acyclic production-network generator."""

    n_nodes: int = 8
    topology: str = "random"     # "random", "vertical", "horizontal"
    edge_prob: float = 0.5
    markup_range: tuple[float, float] = (1.05, 1.5)
    rs_range: tuple[float, float] = (0.85, 1.15)
    wedge_range: tuple[float, float] = (1.0, 1.0)   # input wedges nu; (0.7, 1.0) for monopsony
    fc_share_range: tuple[float, float] = (0.0, 0.08)
    final_demand_range: tuple[float, float] = (50.0, 150.0)
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.n_nodes <= 64:
            raise DataError("n_nodes must lie in [1, 64]")
        if self.topology not in ("random", "vertical", "horizontal"):
            raise DataError(f"unknown topology '{self.topology}'")
        lo, hi = self.wedge_range
        if not 0.0 < lo <= hi <= 1.0:
            raise DataError("input wedges must lie in (0, 1]")
        if self.markup_range[0] <= 0:
            raise DataError("markups must be positive")


@dataclass
class NetworkEconomy:
    """Closed single-period economy with full producer accounts."""

    producers: pd.DataFrame
    gdp: float
    total_sales: float
    chi: float
    labor_comp: float
    capital_comp: float
    profit_total: float
    edges: list[tuple[int, int]] = field(default_factory=list)  # (buyer, supplier)


def gen_network_economy(spec: NetworkSpec | None = None) -> NetworkEconomy:
    """Draw a random acyclic network economy with exact accounting closure.

    Nodes are processed downstream to upstream: each node's sales are
    its final demand plus what downstream buyers spend on it, spending
    being the buyer's marginal cost share theta*nu/mu of its own sales.
    Fixed costs are overhead labor, so GDP closes from the income side
    as labor + capital + profits; the generator refuses to emit an
    economy whose accounts do not close.
    """
    spec = spec or NetworkSpec()
    spec.validate()
    n = spec.n_nodes
    streams = np.random.SeedSequence(spec.seed).spawn(n)
    rngs = [np.random.default_rng(s) for s in streams]

    suppliers: list[list[int]] = [[] for _ in range(n)]
    if spec.topology == "vertical":
        for i in range(n - 1):
            suppliers[i] = [i + 1]
    elif spec.topology == "random":
        for i in range(n):
            for j in range(i + 1, n):
                if rngs[i].random() < spec.edge_prob:
                    suppliers[i].append(j)

    mu = np.empty(n)
    rs = np.empty(n)
    fc_share = np.empty(n)
    fdemand = np.empty(n)
    theta: list[np.ndarray] = []
    nu: list[np.ndarray] = []
    for i in range(n):
        rng = rngs[i]
        mu[i] = rng.uniform(*spec.markup_range)
        rs[i] = rng.uniform(*spec.rs_range)
        fc_share[i] = rng.uniform(*spec.fc_share_range)
        fdemand[i] = rng.uniform(*spec.final_demand_range)
        n_inputs = len(suppliers[i]) + 2  # intermediates + labor + capital
        split = rng.dirichlet(np.ones(n_inputs))
        theta.append(rs[i] * split)
        nu.append(rng.uniform(spec.wedge_range[0], spec.wedge_range[1], size=n_inputs))

    # downstream-to-upstream flow solution: buyers precede suppliers
    sales = np.zeros(n)
    for j in range(n):
        inflow = fdemand[j]
        for i in range(j):
            if j in suppliers[i]:
                pos = suppliers[i].index(j)
                inflow += sales[i] / mu[i] * theta[i][pos] * nu[i][pos]
        sales[j] = inflow

    rows = []
    edges = []
    labor_total = capital_total = profit_total = 0.0
    for i in range(n):
        mc_sales = sales[i] / mu[i]
        k = len(suppliers[i])
        inter_cost = float(np.sum(mc_sales * theta[i][:k] * nu[i][:k]))
        labor_cost = float(mc_sales * theta[i][k] * nu[i][k])
        capital_cost = float(mc_sales * theta[i][k + 1] * nu[i][k + 1])
        fixed = fc_share[i] * sales[i]
        total_cost = inter_cost + labor_cost + capital_cost + fixed
        profit = sales[i] - total_cost
        va = sales[i] - inter_cost
        fc_adj = total_cost / (total_cost - fixed)
        monopsony = fc_adj * float(np.sum(theta[i] * (1.0 - nu[i])))
        rows.append(
            {
                "node": i,
                "final_demand": fdemand[i],
                "sale": sales[i],
                "intermediate_cost": inter_cost,
                "labor_cost": labor_cost + fixed,
                "capital_cost": capital_cost,
                "fixed_cost": fixed,
                "total_cost": total_cost,
                "profit": profit,
                "va": va,
                "markup": mu[i],
                "rs": rs[i],
                "fc_adj": fc_adj,
                "rs_adj": rs[i] * fc_adj,
                "monopsony": monopsony,
                "profit_rate": profit / sales[i],
            }
        )
        labor_total += labor_cost + fixed
        capital_total += capital_cost
        profit_total += profit
        edges.extend((i, j) for j in suppliers[i])

    producers = pd.DataFrame(rows)
    gdp = float(fdemand.sum())
    total_sales = float(sales.sum())
    producers["omega"] = producers["sale"] / total_sales
    producers["domar"] = producers["sale"] / gdp

    income_side = labor_total + capital_total + profit_total
    if abs(income_side - gdp) > _CLOSURE_TOL * max(gdp, 1.0):
        raise DataError(
            f"network accounts do not close: income {income_side} vs final demand {gdp}"
        )
    if abs(float(producers["va"].sum()) - gdp) > _CLOSURE_TOL * max(gdp, 1.0):
        raise DataError("value added does not sum to final demand")

    return NetworkEconomy(
        producers=producers,
        gdp=gdp,
        total_sales=total_sales,
        chi=total_sales / gdp,
        labor_comp=labor_total,
        capital_comp=capital_total,
        profit_total=profit_total,
        edges=edges,
    )


def gen_vertical_economy(
    consumption: float = 100.0, margin: float = 0.1, n_nodes: int = 2
) -> NetworkEconomy:
    """Supply chain where every producer keeps the same profit margin.

    Node 0 sells `consumption` to households and spends (1 - margin) of
    its sales on node 1, and so on down the chain; the last node spends
    on labor. With two nodes and a 10 percent margin this is the
    classic example: sales (100, 90), profits (10, 9), a macro profit
    share of 0.19 but a sales-weighted firm profit rate of 0.10.
    """
    if not 0.0 < margin < 1.0:
        raise DataError("margin must lie in (0, 1)")
    sales = consumption * (1.0 - margin) ** np.arange(n_nodes)
    rows = []
    for i in range(n_nodes):
        spend = sales[i] * (1.0 - margin)
        last = i == n_nodes - 1
        inter = 0.0 if last else spend
        labor = spend if last else 0.0
        profit = sales[i] - spend
        rows.append(
            {
                "node": i,
                "final_demand": consumption if i == 0 else 0.0,
                "sale": sales[i],
                "intermediate_cost": inter,
                "labor_cost": labor,
                "capital_cost": 0.0,
                "fixed_cost": 0.0,
                "total_cost": spend,
                "profit": profit,
                "va": sales[i] - inter,
                "markup": 1.0 / (1.0 - margin),
                "rs": 1.0,
                "fc_adj": 1.0,
                "rs_adj": 1.0,
                "monopsony": 0.0,
                "profit_rate": profit / sales[i],
            }
        )
    producers = pd.DataFrame(rows)
    gdp = consumption
    total_sales = float(sales.sum())
    producers["omega"] = producers["sale"] / total_sales
    producers["domar"] = producers["sale"] / gdp
    return NetworkEconomy(
        producers=producers,
        gdp=gdp,
        total_sales=total_sales,
        chi=total_sales / gdp,
        labor_comp=float(producers["labor_cost"].sum()),
        capital_comp=0.0,
        profit_total=float(producers["profit"].sum()),
        edges=[(i, i + 1) for i in range(n_nodes - 1)],
    )


# ---------------------------------------------------------------------------
# Standalone firm accounts and the fixed-cost technology example
# ---------------------------------------------------------------------------

def gen_firm_accounts(
    n: int,
    seed: int = 0,
    n_inputs: int = 3,
    markup_range: tuple[float, float] = (1.02, 1.8),
    rs_range: tuple[float, float] = (0.8, 1.2),
    wedge_range: tuple[float, float] = (0.6, 1.0),
    fc_share_range: tuple[float, float] = (0.0, 0.15),
) -> pd.DataFrame:
    """Standalone firm accounts drawn from primitives.

    Input 0 is the clean variable input (wedge one) used for markup
    identification; later inputs may be paid below their marginal
    product. Spending on input j is (sale/mu) * theta_j * nu_j, fixed
    costs are a share of sales, and profit is the residual, so the
    accounting profit rate is an exact function of the primitives.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mu = rng.uniform(*markup_range, size=n)
    rs = rng.uniform(*rs_range, size=n)
    theta = rs[:, None] * rng.dirichlet(np.ones(n_inputs), size=n)
    nu = np.column_stack(
        [np.ones(n), rng.uniform(*wedge_range, size=(n, n_inputs - 1))]
    )
    sale = rng.uniform(50.0, 500.0, size=n)
    fc = rng.uniform(*fc_share_range, size=n) * sale

    spend = sale[:, None] / mu[:, None] * theta * nu
    total_cost = spend.sum(axis=1) + fc
    profit = sale - total_cost
    frame = pd.DataFrame(
        {
            "firm_id": [f"A{i:05d}" for i in range(n)],
            "sale": sale,
            "markup": mu,
            "rs": rs,
            "theta_v": theta[:, 0],
            "variable_cost": spend[:, 0],
            "fixed_cost": fc,
            "total_cost": total_cost,
            "profit": profit,
            "profit_rate": profit / sale,
            "monopsony_sum": (theta * (1.0 - nu)).sum(axis=1),
        }
    )
    for j in range(n_inputs):
        frame[f"theta_{j}"] = theta[:, j]
        frame[f"nu_{j}"] = nu[:, j]
    return frame


@dataclass
class FixedCostFirm:
    """Technology y = scale * (l - l_bar)^alpha tabulated on a grid."""

    table: pd.DataFrame
    alpha: float
    l_bar: float
    scale: float

    def predicted_elasticity(self, l) -> np.ndarray:
        """Local log-log slope alpha * l / (l - l_bar)."""
        l = np.asarray(l, dtype=float)
        return self.alpha * l / (l - self.l_bar)


def gen_fixed_cost_firm(
    alpha: float = 0.8,
    l_bar: float = 1.0,
    scale: float = 1.0,
    grid: np.ndarray | None = None,
) -> FixedCostFirm:
    """Tabulate output of a technology with a subsistence input level.

    The measured log-log slope around any point l exceeds alpha by the
    factor l / (l - l_bar); with l_bar = 0 it is exactly alpha.
    """
    if grid is None:
        grid = np.linspace(l_bar + 0.5, l_bar + 10.0, 200)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= l_bar):
        raise DataError("input grid must stay above the subsistence level")
    y = scale * (grid - l_bar) ** alpha
    return FixedCostFirm(
        table=pd.DataFrame({"l": grid, "y": y}),
        alpha=alpha,
        l_bar=l_bar,
        scale=scale,
    )
