"""Release gate: the ten checks this build must pass.

Every check prints one PASS/FAIL line with the measured numbers, then
asserts. The checks are self-contained (they generate their own data),
so the module also runs standalone:

    python3 tests/test_acceptance.py

Covered: the two-node supply chain shares, aggregation-scheme
equivalence on random networks, the profit-rate formula against raw
accounts, the nested special cases of the aggregate share formula and
the markup backout, the multiplier bias readings, elasticity recovery
by the two-stage estimator, the markup change split, the subsistence-
input elasticity slope, the rents split, and byte-identical pipeline
reruns.
"""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from firmpower import aggregation, dynamics, estimation, synthetic
from firmpower.config import build_config
from firmpower.pipeline import raise_on_failure, run_pipeline, verify_run
from firmpower.synthetic import NetworkSpec, PanelSpec

sys.path.insert(0, str(Path(__file__).parent))
from conftest import prepared  # noqa: E402


@pytest.fixture
def report(capsys):
    """Print one live PASS/FAIL line per check, then assert."""

    def _report(num: int, name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {num:2d} {name}: {detail}"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return _report


# ---------------------------------------------------------------------------
# 1. two-node supply chain: macro share 0.19, firm-weighted rate 0.10
# ---------------------------------------------------------------------------

def check_vertical_chain():
    t0 = time.perf_counter()
    econ = synthetic.gen_vertical_economy(consumption=100.0, margin=0.1, n_nodes=2)
    p = econ.producers
    domar_share = float((p["domar"] * p["profit_rate"]).sum())
    weighted_rate = float((p["omega"] * p["profit_rate"]).sum())
    elapsed = time.perf_counter() - t0
    err = max(abs(domar_share - 0.19), abs(weighted_rate - 0.10))
    ok = err <= 1e-12 and elapsed < 1.0
    return ok, (
        f"macro share {domar_share:.4f}, firm rate {weighted_rate:.4f}, "
        f"max deviation {err:.1e}, {elapsed:.3f}s"
    )


def test_01_vertical_chain_shares(report):
    ok, detail = check_vertical_chain()
    report(1, "vertical chain shares", ok, detail)


# ---------------------------------------------------------------------------
# 2. Domar = VA = profits/GDP = formula on 100 random networks
# ---------------------------------------------------------------------------

def check_network_aggregation_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        spec = NetworkSpec(
            n_nodes=3 + seed % 10,
            wedge_range=(0.7, 1.0) if seed % 2 else (1.0, 1.0),
            seed=seed,
        )
        econ = synthetic.gen_network_economy(spec)
        p = econ.producers
        direct = econ.profit_total / econ.gdp
        domar = float((p["domar"] * p["profit_rate"]).sum())
        va = float((p["va"] / econ.gdp * (p["profit"] / p["va"])).sum())
        thm = aggregation.profit_share_theorem(
            econ.chi, p["markup"], p["rs_adj"], p["monopsony"], p["omega"]
        ).value
        worst = max(
            worst, abs(domar - direct), abs(va - direct), abs(thm - direct)
        )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10.0
    return ok, f"100 economies, max residual {worst:.1e}, {elapsed:.2f}s"


def test_02_network_aggregation_equivalence(report):
    ok, detail = check_network_aggregation_equivalence()
    report(2, "aggregation equivalence", ok, detail)


# ---------------------------------------------------------------------------
# 3. profit-rate formula from primitives vs raw accounts, 10,000 firms
# ---------------------------------------------------------------------------

def check_profit_rate_formula():
    table = synthetic.gen_firm_accounts(10_000, seed=1, wedge_range=(0.6, 1.0))
    fc_adj = table["total_cost"] / (table["total_cost"] - table["fixed_cost"])
    formula = (
        1.0
        - table["rs"] * fc_adj / table["markup"]
        + table["monopsony_sum"] * fc_adj / table["markup"]
    )
    err = float(np.max(np.abs(formula - table["profit_rate"])))
    ok = err <= 1e-12
    return ok, f"10,000 firm-years, max |formula - accounts| {err:.1e}"


def test_03_profit_rate_formula_matches_accounts(report):
    ok, detail = check_profit_rate_formula()
    report(3, "profit rate from primitives", ok, detail)


# ---------------------------------------------------------------------------
# 4. nested special cases of the aggregate share and the markup backout
# ---------------------------------------------------------------------------

def check_special_case_chain():
    rng = np.random.default_rng(3)
    n, chi = 400, 1.5
    mu = rng.uniform(1.05, 2.0, n)
    rs = rng.uniform(0.85, 1.2, n)
    fc_adj = rng.uniform(1.0, 1.3, n)
    w = rng.dirichlet(np.ones(n))
    zero = np.zeros(n)
    errs = []

    # no input wedges: the full formula collapses to the first special case
    full = aggregation.profit_share_theorem(chi, mu, rs * fc_adj, zero, w)
    cor1 = aggregation.profit_share_theorem(chi, mu, rs * fc_adj, zero, w, mode="cor1")
    errs.append(abs(full.value - cor1.value))

    # additionally no fixed costs: raw returns to scale enter directly
    cor2 = aggregation.profit_share_theorem(chi, mu, rs, zero, w, mode="cor2")
    errs.append(abs(aggregation.profit_share_theorem(chi, mu, rs, zero, w).value
                    - cor2.value))

    # additionally unit returns to scale: only the markup term survives
    ones = np.ones(n)
    cor3 = aggregation.profit_share_theorem(chi, mu, ones, zero, w, mode="cor3")
    mu_hsw = aggregation.weighted_harmonic_mean(mu, w)
    errs.append(abs(cor3.value - chi * (1.0 - 1.0 / mu_hsw)))
    errs.append(abs(aggregation.profit_share_theorem(chi, mu, ones, zero, w).value
                    - cor3.value))

    # the backout inverts the final form
    errs.append(abs(aggregation.markup_backout(chi, cor3.value) - mu_hsw))

    err = max(errs)
    ok = err <= 1e-12
    return ok, f"chain of 3 restrictions + backout, max deviation {err:.1e}"


def test_04_special_case_chain_and_backout(report):
    ok, detail = check_special_case_chain()
    report(4, "nested special cases", ok, detail)


# ---------------------------------------------------------------------------
# 5. multiplier bias at chi = 2, share = 0.2
# ---------------------------------------------------------------------------

def check_multiplier_bias():
    rep = aggregation.network_bias_factor(2.0, 0.2)
    # the exact factor is 0.2/1.44, which prints as 0.13889; the rounded
    # literal itself sits 1.1e-6 away, so compare against the expression
    ok = (
        abs(rep.bias_factor - 0.2 / 1.44) <= 1e-6
        and f"{rep.bias_factor:.5f}" == "0.13889"
        and abs(rep.naive_markup - 1.25) <= 1e-12
        and abs(rep.true_markup - 1.0 / 0.9) <= 1e-12
        and f"{rep.true_markup:.4f}" == "1.1111"
    )
    # three readings of the same gap, reported without choosing one
    return ok, (
        f"factor {rep.bias_factor:.5f}, naive {rep.naive_markup:.4f} vs true "
        f"{rep.true_markup:.4f}; gross +{rep.overstatement_gross:.1%}, "
        f"net +{rep.overstatement_net:.0%}"
    )


def test_05_multiplier_bias_readings(report):
    ok, detail = check_multiplier_bias()
    report(5, "multiplier bias", ok, detail)


# ---------------------------------------------------------------------------
# 6. elasticity recovery, noiseless and under measurement noise
# ---------------------------------------------------------------------------

def _estimate_panel(noise_sd: float, seed: int):
    spec = PanelSpec(
        n_firms=200, n_years=20, industries=("31-33",), theta=((0.7, 0.3),),
        rho=0.8, noise_sd=noise_sd, seed=seed,
    )
    data = prepared(synthetic.gen_cobb_douglas_panel(spec))
    frame = estimation.build_estimation_frame(data, estimation.EstimationSettings())
    fit = estimation.first_stage(frame, degree=3)
    out = estimation.second_stage_gmm(frame, fit.phi)
    return max(abs(out["theta_v"] - 0.7), abs(out["theta_k"] - 0.3))


def check_estimator_recovery():
    t0 = time.perf_counter()
    clean_err = _estimate_panel(0.0, seed=0)
    clean_time = time.perf_counter() - t0
    noisy_err, worst_time = 0.0, clean_time
    for seed in range(1, 11):
        t1 = time.perf_counter()
        noisy_err = max(noisy_err, _estimate_panel(0.1, seed=seed))
        worst_time = max(worst_time, time.perf_counter() - t1)
    ok = clean_err <= 1e-3 and noisy_err <= 0.05 and worst_time < 60.0
    return ok, (
        f"noiseless error {clean_err:.1e}, noisy max error {noisy_err:.4f} "
        f"over 10 seeds, worst panel {worst_time:.1f}s"
    )


def test_06_estimator_recovery(report):
    ok, detail = check_estimator_recovery()
    report(6, "elasticity recovery", ok, detail)


# ---------------------------------------------------------------------------
# 7. markup change split: worked example and additivity under churn
# ---------------------------------------------------------------------------

def check_markup_change_split():
    import pandas as pd

    prev = pd.DataFrame({"firm_id": ["a"], "sale": [1.0], "markup": [1.0]})
    curr = pd.DataFrame(
        {"firm_id": ["a", "b"], "sale": [1.0, 1.0], "markup": [1.0, 2.0]}
    )
    out = dynamics.markup_change_decomposition(prev, curr)
    example_err = max(
        abs(out.delta - 1.0 / 3.0),
        abs(out.within),
        abs(out.between - 1.0 / 12.0),
        abs(out.net_entry - 0.25),
    )

    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(1000):
        n_stay = int(rng.integers(2, 15))
        ids_prev = [f"s{i}" for i in range(n_stay)]
        ids_prev += [f"x{i}" for i in range(int(rng.integers(1, 5)))]
        ids_curr = [f"s{i}" for i in range(n_stay)]
        ids_curr += [f"e{i}" for i in range(int(rng.integers(1, 5)))]

        def draw(ids):
            return pd.DataFrame(
                {
                    "firm_id": ids,
                    "sale": rng.uniform(1.0, 40.0, len(ids)),
                    "markup": rng.uniform(0.8, 2.5, len(ids)),
                }
            )

        res = dynamics.markup_change_decomposition(draw(ids_prev), draw(ids_curr))
        worst = max(worst, abs(res.total - res.delta))
    ok = example_err <= 1e-12 and worst <= 1e-12
    return ok, (
        f"worked example deviation {example_err:.1e}, additivity residual "
        f"{worst:.1e} over 1,000 churn panels"
    )


def test_07_markup_change_split(report):
    ok, detail = check_markup_change_split()
    report(7, "markup change split", ok, detail)


# ---------------------------------------------------------------------------
# 8. subsistence-input technology slope
# ---------------------------------------------------------------------------

def check_subsistence_slope():
    grid = np.linspace(1.5, 11.0, 2000)
    firm = synthetic.gen_fixed_cost_firm(alpha=0.8, l_bar=1.0, grid=grid)
    log_l = np.log(firm.table["l"].to_numpy())
    log_y = np.log(firm.table["y"].to_numpy())
    slope = np.diff(log_y) / np.diff(log_l)
    mid = np.exp(0.5 * (log_l[:-1] + log_l[1:]))
    rel = float(np.max(np.abs(slope / firm.predicted_elasticity(mid) - 1.0)))

    plain = synthetic.gen_fixed_cost_firm(alpha=0.8, l_bar=0.0, grid=grid)
    log_y0 = np.log(plain.table["y"].to_numpy())
    slope0 = np.diff(log_y0) / np.diff(log_l)
    alpha_err = float(np.max(np.abs(slope0 - 0.8)))

    ok = rel <= 0.02 and alpha_err <= 1e-6
    return ok, (
        f"slope vs prediction within {rel:.2%}, zero-subsistence alpha error "
        f"{alpha_err:.1e}"
    )


def test_08_subsistence_slope(report):
    ok, detail = check_subsistence_slope()
    report(8, "subsistence-input slope", ok, detail)


# ---------------------------------------------------------------------------
# 9. rents split identity and the headline magnitudes
# ---------------------------------------------------------------------------

def check_rents_split():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        chi = float(rng.uniform(1.0, 2.5))
        mu = rng.uniform(1.05, 1.9, 40)
        rs_adj = rng.uniform(0.9, 1.3, 40)
        w = rng.dirichlet(np.ones(40))
        thm = aggregation.profit_share_theorem(
            chi, mu, rs_adj, np.zeros(40), w, mode="cor1"
        )
        split = aggregation.rents_decomposition(
            chi, thm.mu_hsw, thm.rs_adj_bar, thm.cov_rs_adj_inv_mu
        )
        worst = max(worst, abs(split.total - thm.value))

    # rents of 0.41 against a profit share of 0.18 at a sales/GDP ratio
    # of 1.62: fixed costs and the remainder must absorb about -0.23
    chi = 1.62
    mu_hsw = 1.0 / (1.0 - 0.41 / chi)
    rs_adj_bar = (1.0 - 0.18 / chi) * mu_hsw
    split = aggregation.rents_decomposition(chi, mu_hsw, rs_adj_bar, 0.0)
    gap = split.fixed_costs + split.nonlinearities
    ok = worst <= 1e-12 and abs(gap + 0.23) <= 0.005
    return ok, (
        f"identity residual {worst:.1e} over 200 draws; rents {split.rents:.2f} "
        f"vs share 0.18 leaves {gap:.3f}"
    )


def test_09_rents_split(report):
    ok, detail = check_rents_split()
    report(9, "rents split", ok, detail)


# ---------------------------------------------------------------------------
# 10. byte-identical pipeline reruns plus identity verification
# ---------------------------------------------------------------------------

def check_pipeline_determinism():
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        fixture = synthetic.gen_cobb_douglas_panel(
            PanelSpec(n_firms=70, n_years=11, seed=33)
        )
        fixture.firms.to_csv(root / "firms.csv", index=False)
        fixture.macro.to_csv(root / "macro.csv", index=False)
        out_dir = root / "run"
        cfg, _ = build_config(
            overrides={
                "io.firm_csv": str(root / "firms.csv"),
                "io.macro_csv": str(root / "macro.csv"),
                "io.out_dir": str(out_dir),
            }
        )
        run_pipeline(cfg)
        first = {
            p.relative_to(out_dir): p.read_bytes()
            for p in sorted(out_dir.rglob("*"))
            if p.is_file()
        }
        run_pipeline(cfg)
        second = {
            p.relative_to(out_dir): p.read_bytes()
            for p in sorted(out_dir.rglob("*"))
            if p.is_file()
        }
        identical = first == second
        checks = verify_run(out_dir)
        raise_on_failure(checks)
    elapsed = time.perf_counter() - t0
    ok = identical and elapsed < 120.0
    return ok, (
        f"{len(first)} files byte-identical across reruns, "
        f"{len(checks)} identities verified, {elapsed:.1f}s"
    )


def test_10_pipeline_determinism_and_verify(report):
    ok, detail = check_pipeline_determinism()
    report(10, "pipeline determinism", ok, detail)


if __name__ == "__main__":
    failures = 0
    for num, name, fn in [
        (1, "vertical chain shares", check_vertical_chain),
        (2, "aggregation equivalence", check_network_aggregation_equivalence),
        (3, "profit rate from primitives", check_profit_rate_formula),
        (4, "nested special cases", check_special_case_chain),
        (5, "multiplier bias", check_multiplier_bias),
        (6, "elasticity recovery", check_estimator_recovery),
        (7, "markup change split", check_markup_change_split),
        (8, "subsistence-input slope", check_subsistence_slope),
        (9, "rents split", check_rents_split),
        (10, "pipeline determinism", check_pipeline_determinism),
    ]:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not a skip
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        print(f"[{'PASS' if ok else 'FAIL'}] {num:2d} {name}: {detail}")
        failures += 0 if ok else 1
    sys.exit(1 if failures else 0)
