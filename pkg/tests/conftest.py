"""Shared fixtures: synthetic panels staged through the loading path."""

import io

import pytest

from firmpower import panel, synthetic


def load_generated(result):
    """Round-trip a generated panel through the CSV loaders."""
    macro = panel.load_macro_series(io.StringIO(result.macro.to_csv(index=False)))
    data = panel.load_firm_panel(
        io.StringIO(result.firms.to_csv(index=False)), macro=macro
    )
    return data


def prepared(result):
    """Loaded, deflated, lag-joined panel ready for estimation."""
    data = load_generated(result)
    data = panel.apply_deflators(data)
    return panel.with_lagged_capital(data)


@pytest.fixture(scope="session")
def small_panel():
    """Noiseless two-industry panel, small enough for quick tests."""
    spec = synthetic.PanelSpec(n_firms=80, n_years=12, seed=21)
    return synthetic.gen_cobb_douglas_panel(spec)


@pytest.fixture(scope="session")
def small_panel_prepared(small_panel):
    return prepared(small_panel)


@pytest.fixture(scope="session")
def synth_csv_dir(tmp_path_factory):
    """Synthetic firm/macro CSV files on disk for CLI and pipeline tests."""
    out = tmp_path_factory.mktemp("synthdata")
    spec = synthetic.PanelSpec(n_firms=70, n_years=11, seed=33)
    result = synthetic.gen_cobb_douglas_panel(spec)
    result.firms.to_csv(out / "firms.csv", index=False)
    result.macro.to_csv(out / "macro.csv", index=False)
    result.firm_truth.to_csv(out / "firm_truth.csv", index=False)
    result.aggregate_truth.to_csv(out / "aggregate_truth.csv", index=False)
    return out
