"""Firm-level market power measurement from panel data.

The package estimates output elasticities industry by industry with a
two-stage control-function estimator, turns them into firm-level
markups, returns to scale, and profit rates, and aggregates those to
economy-level profit shares with Domar weighting. Synthetic economies
with known answers back every step.
"""

from .aggregation import (
    BiasReport,
    IncomeShares,
    RentsDecomposition,
    TheoremComponents,
    income_shares,
    markup_backout,
    network_bias_factor,
    profit_share_domar,
    profit_share_theorem,
    profit_share_va,
    rents_decomposition,
    weighted_cov,
    weighted_harmonic_mean,
    weighted_mean,
)
from .config import PRESETS, RunConfig, build_config
from .dynamics import (
    FirmSets,
    MarkupChange,
    classify_firms,
    distribution_stats,
    hhi,
    markup_change_decomposition,
)
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
from .estimation import (
    ElasticityEstimate,
    EstimationSettings,
    build_estimation_frame,
    estimate_rolling,
    estimates_to_frame,
    first_stage,
    postprocess_elasticities,
    second_stage_gmm,
)
from .measures import (
    aggregate_user_cost,
    fixed_cost_adjustment,
    markup,
    monopsony_term,
    profit_rate,
    profit_rate_exogenous_r,
    user_cost,
    user_cost_accounting,
    user_cost_foc,
)
from .panel import (
    CleaningReport,
    CleaningRules,
    PanelDataset,
    apply_deflators,
    build_intangible_stock,
    clean_sample,
    compute_weights,
    load_firm_panel,
    load_macro_series,
    remove_deflators,
    restrict_years,
    with_lagged_capital,
)
from .pipeline import PipelineResult, run_pipeline, verify_run
from .synthetic import (
    NetworkSpec,
    PanelSpec,
    gen_cobb_douglas_panel,
    gen_firm_accounts,
    gen_fixed_cost_firm,
    gen_network_economy,
    gen_vertical_economy,
)

__version__ = "0.1.0"
