"""End-to-end tests of the command line interface.

One real pipeline run is shared across the read-only checks (outputs,
manifest hashes, verify, stats); destructive checks work on a copy.
"""

import contextlib
import hashlib
import io
import json
import shutil

import pandas as pd
import pytest

from firmpower import synthetic
from firmpower.cli import main


def run_cli(argv):
    """Invoke the CLI in-process, capturing stdout and stderr."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def pipeline_run(synth_csv_dir, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("cli_run") / "run"
    code, stdout, stderr = run_cli(
        [
            "pipeline",
            "--firm", str(synth_csv_dir / "firms.csv"),
            "--macro", str(synth_csv_dir / "macro.csv"),
            "--out", str(out_dir),
            "--set", "clean.trim_low=0.012",
        ]
    )
    assert code == 0, stderr
    return out_dir, stdout


def test_pipeline_writes_expected_outputs(pipeline_run):
    out_dir, stdout = pipeline_run
    for name in [
        "elasticities.csv", "firm_measures.csv", "aggregates.csv",
        "income_shares.csv", "markup_decomposition.csv", "hhi.csv",
        "manifest.json",
    ]:
        assert (out_dir / name).exists(), name
    pngs = sorted((out_dir / "figures").glob("*.png"))
    assert len(pngs) >= 5
    assert "wrote" in stdout and "final year" in stdout
    # the --set override is acknowledged and lands in the manifest
    assert "config: clean.trim_low=0.012 (flag)" in stdout
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["config"]["clean.trim_low"] == "0.012"


def test_manifest_hashes_match_files(pipeline_run):
    out_dir, _ = pipeline_run
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["outputs"], "manifest lists no outputs"
    for name, recorded in manifest["outputs"].items():
        path = out_dir / name
        if not path.exists():
            path = out_dir / "figures" / name
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        assert digest == recorded, name
    counts = manifest["row_counts"]
    assert counts["cleaned"] == counts["loaded"] - sum(counts["dropped"].values())
    fm = pd.read_csv(out_dir / "firm_measures.csv")
    assert counts["firm_measures"] == len(fm)


def test_verify_passes_on_fresh_run(pipeline_run):
    out_dir, _ = pipeline_run
    code, stdout, stderr = run_cli(["verify", "--out", str(out_dir)])
    assert code == 0, stderr
    lines = [ln for ln in stdout.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) >= 7
    assert all(ln.startswith("PASS") for ln in lines)
    assert "checks passed" in stdout


def test_verify_catches_tampering(pipeline_run, tmp_path):
    out_dir, _ = pipeline_run
    copy = tmp_path / "tampered"
    shutil.copytree(out_dir, copy)
    agg = pd.read_csv(copy / "aggregates.csv")
    agg["profit_share_domar"] *= 1.5
    agg.to_csv(copy / "aggregates.csv", index=False)
    code, stdout, stderr = run_cli(["verify", "--out", str(copy)])
    assert code == 5
    assert "FAIL" in stdout
    assert stderr.startswith("error:")


def test_stats_prints_percentiles(pipeline_run):
    out_dir, _ = pipeline_run
    code, stdout, _ = run_cli(["stats", "--out", str(out_dir)])
    assert code == 0
    header = stdout.splitlines()[0].split("\t")
    assert "p50" in header and "below_unity_share" in header
    fm = pd.read_csv(out_dir / "firm_measures.csv")
    assert len(stdout.splitlines()) == 1 + fm["year"].nunique()
    code_w, stdout_w, _ = run_cli(["stats", "--out", str(out_dir), "--weighted"])
    assert code_w == 0
    assert stdout_w.splitlines()[0] == stdout.splitlines()[0]


def test_stats_needs_finished_run(tmp_path):
    code, _, stderr = run_cli(["stats", "--out", str(tmp_path)])
    assert code == 3
    assert "run the pipeline first" in stderr


def test_bad_arguments_exit_2(tmp_path):
    code, _, stderr = run_cli(
        ["pipeline", "--firm", "x.csv", "--macro", "y.csv",
         "--out", str(tmp_path), "--year-range", "2010:2001"]
    )
    assert code == 2 and "reversed" in stderr
    code, _, stderr = run_cli(
        ["pipeline", "--firm", "x.csv", "--macro", "y.csv",
         "--out", str(tmp_path), "--year-range", "everything"]
    )
    assert code == 2 and "year range" in stderr
    code, _, stderr = run_cli(
        ["pipeline", "--firm", "x.csv", "--macro", "y.csv",
         "--out", str(tmp_path), "--set", "clean.trim=0.1"]
    )
    assert code == 2 and "unknown configuration key" in stderr


def test_missing_inputs_exit_3(tmp_path):
    code, _, stderr = run_cli(
        ["pipeline", "--firm", str(tmp_path / "none.csv"),
         "--macro", str(tmp_path / "none2.csv"), "--out", str(tmp_path / "o")]
    )
    assert code == 3
    assert "not found" in stderr


def test_estimation_failure_exits_4_with_partial_output(tmp_path):
    # a panel with too few observations per window estimates nothing,
    # so post-processing fails; the raw elasticity records survive
    spec = synthetic.PanelSpec(n_firms=10, n_years=3, seed=2)
    result = synthetic.gen_cobb_douglas_panel(spec)
    result.firms.to_csv(tmp_path / "firms.csv", index=False)
    result.macro.to_csv(tmp_path / "macro.csv", index=False)
    out_dir = tmp_path / "run"
    code, stdout, stderr = run_cli(
        ["pipeline", "--firm", str(tmp_path / "firms.csv"),
         "--macro", str(tmp_path / "macro.csv"),
         "--out", str(out_dir), "--no-figures"]
    )
    assert code == 4
    assert "config: run.figures=False (flag)" in stdout
    assert stderr.startswith("error: stage estimate")
    assert (out_dir / "elasticities.csv").exists()
    assert not (out_dir / "aggregates.csv").exists()


def test_synth_panel_writes_tables(tmp_path):
    code, stdout, _ = run_cli(
        ["synth", "panel", "--out", str(tmp_path), "--firms", "12",
         "--years", "5", "--seed", "2"]
    )
    assert code == 0
    assert "wrote panel: 60 firm-years" in stdout
    for name in ["firms.csv", "macro.csv", "firm_truth.csv", "aggregate_truth.csv"]:
        assert (tmp_path / name).exists()


def test_synth_vertical_prints_textbook_numbers(tmp_path):
    code, stdout, _ = run_cli(["synth", "vertical", "--out", str(tmp_path)])
    assert code == 0
    assert "chi 1.9000" in stdout
    assert "profit share 0.1900" in stdout
    assert (tmp_path / "producers.csv").exists()


def test_synth_network_and_fixedcost(tmp_path):
    code, stdout, _ = run_cli(
        ["synth", "network", "--out", str(tmp_path), "--nodes", "5", "--seed", "1"]
    )
    assert code == 0
    producers = pd.read_csv(tmp_path / "producers.csv")
    assert len(producers) == 5
    code, stdout, _ = run_cli(
        ["synth", "fixedcost", "--out", str(tmp_path), "--alpha", "0.7"]
    )
    assert code == 0
    table = pd.read_csv(tmp_path / "fixed_cost_firm.csv")
    assert list(table.columns) == ["l", "y"]
