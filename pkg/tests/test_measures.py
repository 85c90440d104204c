"""Markups, fixed-cost adjustments, profit rates, user costs."""

import numpy as np
import pytest

from firmpower import measures, synthetic
from firmpower.errors import DataError


def test_markup_basic_numbers():
    assert measures.markup(0.8, 120.0, 80.0) == pytest.approx(1.2)
    arr = measures.markup(0.7, np.array([100.0, 200.0]), np.array([50.0, 70.0]))
    assert arr == pytest.approx([1.4, 2.0])
    with pytest.raises(DataError):
        measures.markup(0.8, 120.0, 0.0)


def test_fixed_cost_adjustment():
    assert measures.fixed_cost_adjustment(100.0, 20.0) == pytest.approx(1.25)
    assert measures.fixed_cost_adjustment(100.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(DataError):
        measures.fixed_cost_adjustment(100.0, 100.0)
    with pytest.raises(DataError):
        measures.fixed_cost_adjustment(100.0, -1.0)


def test_monopsony_term():
    # one competitively paid input contributes nothing; a wedged input
    # contributes its elasticity times the unpaid share
    value = measures.monopsony_term(1.0, [(0.6, 1.0), (0.5, 0.8)])
    assert value == pytest.approx(0.1)
    assert measures.monopsony_term(2.0, [(0.5, 0.9)]) == pytest.approx(0.1)
    with pytest.raises(DataError):
        measures.monopsony_term(1.0, [(0.5, 1.2)])
    with pytest.raises(DataError):
        measures.monopsony_term(1.0, [(0.5, 0.0)])


def test_profit_rate_closes_the_accounts():
    # firm with sale 100, markup 1.25, elasticities 0.6 and 0.5, the
    # second input paid only 80 cents on the marginal dollar, fixed
    # costs 5: payments are (sale/mu)*theta*nu, profits are what's left
    sale, mu, fc = 100.0, 1.25, 5.0
    inputs = [(0.6, 1.0), (0.5, 0.8)]
    payments = sum(sale / mu * th * nu for th, nu in inputs)
    profit_direct = sale - payments - fc

    rs = sum(th for th, _ in inputs)
    total_cost = payments + fc  # costs actually paid, wedges included
    fc_adj = measures.fixed_cost_adjustment(total_cost, fc)
    mono = measures.monopsony_term(fc_adj, inputs)
    rate = measures.profit_rate(mu, rs * fc_adj, mono)

    assert rate * sale == pytest.approx(profit_direct, abs=1e-12)
    assert rate == pytest.approx(0.15, abs=1e-12)


def test_profit_rate_input_relabeling_invariance():
    # splitting one input into several with the same wedge changes
    # nothing: only the elasticity-weighted wedge total matters
    rng = np.random.default_rng(12)
    for _ in range(50):
        sale = float(rng.uniform(50, 500))
        mu = float(rng.uniform(1.05, 1.8))
        theta = float(rng.uniform(0.4, 0.9))
        nu = float(rng.uniform(0.6, 1.0))
        fc = float(rng.uniform(0.0, 0.1) * sale)
        pieces = rng.dirichlet(np.ones(3)) * theta
        joined = [(theta, nu)]
        split = [(float(p), nu) for p in pieces]

        def rate(inputs):
            rs = sum(th for th, _ in inputs)
            tc = sale / mu * sum(th * n for th, n in inputs) + fc
            adj = measures.fixed_cost_adjustment(tc, fc)
            mono = measures.monopsony_term(adj, inputs)
            return measures.profit_rate(mu, rs * adj, mono)

        assert rate(joined) == pytest.approx(rate(split), abs=1e-10)


def test_profit_rate_exogenous_r_matches_foc_route():
    # pricing capital at exactly the first-order-condition rate must
    # reproduce the elasticity-based profit rate
    rng = np.random.default_rng(5)
    for _ in range(50):
        sale = float(rng.uniform(50, 500))
        mu = float(rng.uniform(1.05, 1.8))
        theta_v = float(rng.uniform(0.4, 0.8))
        theta_k = float(rng.uniform(0.1, 0.4))
        capital = float(rng.uniform(20, 300))
        fc = float(rng.uniform(0.0, 0.08) * sale)

        r = measures.user_cost_foc(theta_k, mu, sale, capital)
        via_r = measures.profit_rate_exogenous_r(theta_v, mu, r, capital, sale, fc)

        rs = theta_v + theta_k
        tc = sale / mu * rs + fc
        adj = measures.fixed_cost_adjustment(tc, fc)
        via_foc = measures.profit_rate(mu, rs * adj)

        assert via_r == pytest.approx(via_foc, abs=1e-10)


def test_user_cost_conventions():
    assert measures.user_cost_accounting(0.05, 0.02) == pytest.approx(0.15)
    assert measures.user_cost_accounting(0.05, 0.02, 0.10) == pytest.approx(0.13)
    assert measures.user_cost_foc(0.3, 1.2, 120.0, 100.0) == pytest.approx(0.3)

    assert measures.user_cost("foc", theta_k=0.3, mu=1.2, sale=120.0, capital=100.0) == pytest.approx(0.3)
    assert measures.user_cost("accounting", nominal_rate=0.05, inflation=0.02) == pytest.approx(0.15)
    assert measures.user_cost("external", series=0.07) == pytest.approx(0.07)
    with pytest.raises(DataError):
        measures.user_cost("external", series=np.nan)
    with pytest.raises(DataError):
        measures.user_cost("guess")


def test_aggregate_user_cost_identity():
    agg = measures.aggregate_user_cost(
        gdp=100.0, capital=250.0, labor_share=0.60, profit_share=0.15
    )
    assert agg.r_macro == pytest.approx(0.1)
    assert np.isnan(agg.r_firm_weighted)

    both = measures.aggregate_user_cost(
        gdp=100.0, capital=250.0, labor_share=0.60, profit_share=0.15,
        firm_user_costs=[0.1, 0.2], firm_capital=[150.0, 50.0],
    )
    assert both.r_firm_weighted == pytest.approx(0.125)
    with pytest.raises(DataError):
        measures.aggregate_user_cost(100.0, 0.0, 0.6, 0.15)


def test_generator_truth_satisfies_measure_identities():
    # the synthetic panel's stored user cost and profit rate must match
    # what the measure functions produce from its own accounts
    spec = synthetic.PanelSpec(n_firms=40, n_years=6, seed=17)
    truth = synthetic.gen_cobb_douglas_panel(spec).firm_truth
    r = measures.user_cost_foc(
        truth["theta_k"], truth["markup"], truth["va"], truth["capital"]
    )
    assert np.allclose(r, truth["user_cost"], atol=1e-12)
    adj = truth["total_cost"] / (truth["total_cost"] - truth["fixed_cost"])
    rate = measures.profit_rate(truth["markup"], truth["rs"] * adj)
    assert np.allclose(rate, truth["profit_rate"], atol=1e-12)
