"""Command line front end.

Subcommands:

    pipeline    run the full estimation pipeline on a firm panel
    synth       generate synthetic datasets with known answers
    verify      re-check the identities a finished run must satisfy
    stats       print markup distribution summaries from a finished run

Exit codes: 0 success, 2 configuration problems, 3 input data problems,
4 estimation failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import PRESETS, build_config
from .errors import (
    ConfigError,
    DataError,
    EstimationError,
    FirmpowerError,
    IntegrityError,
    SchemaError,
    StateError,
    VerificationError,
)

_EXIT_CODES = (
    (ConfigError, 2),
    (SchemaError, 3),
    (IntegrityError, 3),
    (StateError, 3),
    (DataError, 3),
    (EstimationError, 4),
    (VerificationError, 5),
)


def _exit_code(exc: FirmpowerError) -> int:
    for kind, code in _EXIT_CODES:
        if isinstance(exc, kind):
            return code
    return 1


def _parse_year_range(text: str) -> tuple[int, int]:
    try:
        low_s, high_s = text.split(":")
        low, high = int(low_s), int(high_s)
    except ValueError:
        raise ConfigError(f"year range must look like 1990:2015, got {text!r}")
    if low > high:
        raise ConfigError(f"year range is reversed: {text}")
    return low, high


def _cmd_pipeline(args: argparse.Namespace) -> int:
    overrides = dict(kv.split("=", 1) for kv in args.set)
    if args.firm:
        overrides["io.firm_csv"] = args.firm
    if args.macro:
        overrides["io.macro_csv"] = args.macro
    if args.out:
        overrides["io.out_dir"] = args.out
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.year_range:
        low, high = _parse_year_range(args.year_range)
        overrides["run.year_low"] = str(low)
        overrides["run.year_high"] = str(high)
    if args.no_figures:
        overrides["run.figures"] = "false"
    cfg, log = build_config(args.preset, args.config, overrides)
    for line in log:
        print(f"config: {line}")

    from .pipeline import run_pipeline

    result = run_pipeline(cfg)
    agg = result.aggregates
    print(f"wrote {result.out_dir} ({len(result.manifest['outputs'])} files)")
    last = agg.iloc[-1]
    print(
        "final year {year}: markup {mu:.4f}, profit share {ps:.4f}".format(
            year=int(last["year"]), mu=last["mu_hsw"], ps=last["profit_share_domar"]
        )
    )
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    from . import synthetic

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "panel":
        spec = synthetic.PanelSpec(
            n_firms=args.firms,
            n_years=args.years,
            noise_sd=args.noise_sd,
            seed=args.seed,
        )
        result = synthetic.gen_cobb_douglas_panel(spec)
        result.firms.to_csv(out / "firms.csv", index=False)
        result.macro.to_csv(out / "macro.csv", index=False)
        result.firm_truth.to_csv(out / "firm_truth.csv", index=False)
        result.aggregate_truth.to_csv(out / "aggregate_truth.csv", index=False)
        print(f"wrote panel: {len(result.firms)} firm-years to {out}")
    elif args.kind == "network":
        nodes = args.nodes if args.nodes is not None else 8
        spec = synthetic.NetworkSpec(
            n_nodes=nodes, topology=args.topology, seed=args.seed
        )
        economy = synthetic.gen_network_economy(spec)
        economy.producers.to_csv(out / "producers.csv", index=False)
        print(
            f"wrote network: {nodes} producers, chi {economy.chi:.4f}, "
            f"profit share {economy.profit_total / economy.gdp:.4f}"
        )
    elif args.kind == "vertical":
        nodes = args.nodes if args.nodes is not None else 2
        economy = synthetic.gen_vertical_economy(margin=args.margin, n_nodes=nodes)
        economy.producers.to_csv(out / "producers.csv", index=False)
        print(
            f"wrote vertical chain: chi {economy.chi:.4f}, "
            f"profit share {economy.profit_total / economy.gdp:.4f}"
        )
    else:
        firm = synthetic.gen_fixed_cost_firm(alpha=args.alpha, l_bar=args.l_bar)
        firm.table.to_csv(out / "fixed_cost_firm.csv", index=False)
        print(f"wrote fixed-cost firm grid: {len(firm.table)} points to {out}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .pipeline import raise_on_failure, verify_run

    checks = verify_run(args.out, tol=args.tol)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    raise_on_failure(checks)
    print(f"all {len(checks)} checks passed")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    import pandas as pd

    from . import dynamics

    path = Path(args.out) / "firm_measures.csv"
    if not path.exists():
        raise DataError(f"{path} is missing; run the pipeline first")
    fm = pd.read_csv(path)
    header = ["year", "n"] + [f"p{int(100 * p)}" for p in dynamics.PERCENTILE_LEVELS]
    header += ["below_unity_share"]
    print("\t".join(header))
    for year, rows in fm.groupby("year"):
        stats = dynamics.distribution_stats(
            rows["markup"], rows["sale"] if args.weighted else None
        )
        cells = [str(int(year)), str(stats["n"])]
        cells += [f"{stats[f'p{int(100 * p)}']:.4f}" for p in dynamics.PERCENTILE_LEVELS]
        cells += [f"{stats['below_unity_share']:.4f}"]
        print("\t".join(cells))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firmpower",
        description="Estimate firm-level market power and aggregate profit shares.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("pipeline", help="run the full pipeline on a firm panel")
    run.add_argument("--config", default=None, help="key = value configuration file")
    run.add_argument("--preset", default="baseline", choices=sorted(PRESETS))
    run.add_argument("--firm", default=None, help="firm panel CSV")
    run.add_argument("--macro", default=None, help="macro series CSV")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--year-range", default=None, metavar="LOW:HIGH")
    run.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    run.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a single configuration key (repeatable)",
    )
    run.set_defaults(func=_cmd_pipeline)

    synth = sub.add_parser("synth", help="generate synthetic data with known answers")
    synth.add_argument("kind", choices=["panel", "network", "vertical", "fixedcost"])
    synth.add_argument("--out", default="synth")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--firms", type=int, default=200)
    synth.add_argument("--years", type=int, default=20)
    synth.add_argument("--noise-sd", type=float, default=0.0)
    synth.add_argument(
        "--nodes", type=int, default=None,
        help="producer count (default 8 for network, 2 for vertical)",
    )
    synth.add_argument(
        "--topology", default="random", choices=["random", "vertical", "horizontal"]
    )
    synth.add_argument("--margin", type=float, default=0.1)
    synth.add_argument("--alpha", type=float, default=0.8)
    synth.add_argument("--l-bar", type=float, default=1.0)
    synth.set_defaults(func=_cmd_synth)

    verify = sub.add_parser("verify", help="re-check identities on a finished run")
    verify.add_argument("--out", required=True, help="pipeline output directory")
    verify.add_argument("--tol", type=float, default=1e-8)
    verify.set_defaults(func=_cmd_verify)

    stats = sub.add_parser("stats", help="markup distribution by year")
    stats.add_argument("--out", required=True, help="pipeline output directory")
    stats.add_argument("--weighted", action="store_true", help="sales-weighted percentiles")
    stats.set_defaults(func=_cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FirmpowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
