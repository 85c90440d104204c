"""Two-stage control-function estimation of output elasticities.

Stage one regresses log output on a polynomial in the logs of the
variable input, capital, and an investment-style proxy, purging
measurement error from the composite term that mixes inputs with
unobserved productivity. Stage two recovers the elasticities from the
timing of productivity: for candidate elasticities (theta_v, theta_k),
implied productivity is the stage-one fit minus the input contributions,
its AR(1) coefficient comes from a no-intercept regression on its own
lag, and the innovations must be orthogonal to the lagged variable input
and current capital. The squared norm of those two sample moments is
minimized by a Nelder-Mead simplex, multi-started on a 3x3 grid around
ordinary-least-squares initial values.

Estimation runs per industry on nine-year rolling windows centered on
each sample year. Center years whose window would run past either end
of the sample reuse the nearest fully estimable year's estimate and are
flagged carried_forward; an industry spell too short for any full
window gets a single clipped-window estimate reused everywhere.

Post-processing mirrors common practice for noisy rolling estimates:
within-industry outliers beyond one standard deviation from the mean
are dropped and linearly interpolated over years (endpoint gaps take
the nearest value), and both elasticity series are winsorized at the
pooled 5th/95th nearest-rank percentiles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import product
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .errors import DataError, EstimationError
from .panel import PanelDataset, nearest_rank

_CRITERION_TOL = 1e-8
_DIAMETER_TOL = 1e-6


@dataclass
class EstimationSettings:
    """Knobs for the two-stage estimator."""

    variable: str = "opex"        # "opex" = cogs + sga, "cogs" = cogs only
    capital: str = "total"        # "total" = ppegt + k_int, "physical" = ppegt only
    min_obs: int = 50
    window_half: int = 4
    degree: int = 3
    start_step: float = 0.3
    max_iter: int = 4000

    def validate(self) -> None:
        if self.variable not in ("opex", "cogs"):
            raise DataError(f"unknown variable-input mode '{self.variable}'")
        if self.capital not in ("total", "physical"):
            raise DataError(f"unknown capital mode '{self.capital}'")
        if self.window_half < 0 or self.min_obs < 4:
            raise DataError("window_half must be >= 0 and min_obs >= 4")


@dataclass
class FirstStageResult:
    phi: np.ndarray
    residuals: np.ndarray
    degree_used: int
    n_params: int


@dataclass
class ElasticityEstimate:
    """One industry-year elasticity record."""

    industry: str
    year: int
    theta_v: float
    theta_k: float
    rho: float
    n_obs: int
    n_pairs: int
    criterion: float
    criterion_at_start: float
    converged: bool
    carried_forward: bool
    window: tuple[int, int]
    degree_used: int
    postprocessed: bool = False

    @property
    def rs(self) -> float:
        return self.theta_v + self.theta_k


def build_estimation_frame(data: PanelDataset, settings: EstimationSettings) -> pd.DataFrame:
    """Assemble the log-level frame the estimator consumes.

    Output is log sales; the variable input is operating expense (COGS
    plus SG&A) or COGS alone; capital is the lagged total or physical
    stock (lag columns must already exist, see with_lagged_capital).
    Rows with non-positive or missing values in any used series are
    excluded.
    """
    settings.validate()
    obs = data.observations
    if "ppegt_lag" not in obs.columns:
        raise DataError("estimation frame needs lagged capital; call with_lagged_capital first")

    if settings.variable == "opex":
        variable = obs["cogs"] + obs["sga"]
    else:
        variable = obs["cogs"]
    if settings.capital == "total":
        capital = obs["ppegt_lag"] + obs["k_int_lag"].fillna(0.0)
    else:
        capital = obs["ppegt_lag"]

    frame = pd.DataFrame(
        {
            "firm_id": obs["firm_id"],
            "year": obs["year"],
            "industry": obs["industry"],
            "y": obs["sale"],
            "l": variable,
            "k": capital,
            "x": obs["proxy"],
        }
    )
    ok = np.ones(len(frame), dtype=bool)
    for col in ("y", "l", "k", "x"):
        values = frame[col].to_numpy(dtype=float)
        ok &= np.isfinite(values) & (values > 0)
    frame = frame[ok].copy()
    for col in ("y", "l", "k", "x"):
        frame[f"log_{col}"] = np.log(frame[col].to_numpy(dtype=float))
    return frame.drop(columns=["y", "l", "k", "x"]).reset_index(drop=True)


def _poly_design(logs: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree in the three log inputs."""
    columns = []
    for powers in product(range(degree + 1), repeat=3):
        if sum(powers) <= degree:
            col = np.ones(logs.shape[0])
            for var, power in enumerate(powers):
                if power:
                    col = col * logs[:, var] ** power
            columns.append(col)
    return np.column_stack(columns)


def first_stage(slice_frame: pd.DataFrame, degree: int = 3) -> FirstStageResult:
    """Project log output on a polynomial in (log l, log k, log x).

    Falls back one polynomial degree at a time when the design matrix is
    rank deficient; a deficient linear design is an estimation error.
    """
    logs = slice_frame[["log_l", "log_k", "log_x"]].to_numpy(dtype=float)
    y = slice_frame["log_y"].to_numpy(dtype=float)
    for used in range(degree, 0, -1):
        design = _poly_design(logs, used)
        if len(y) < design.shape[1]:
            continue
        coerced, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < design.shape[1]:
            continue
        phi = design @ coerced
        return FirstStageResult(
            phi=phi, residuals=y - phi, degree_used=used, n_params=design.shape[1]
        )
    raise EstimationError(
        "first-stage design matrix is rank deficient at every polynomial degree"
    )


def _lag_pairs(slice_frame: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
    """Positions of (current, previous-year) rows within firms."""
    firms = slice_frame["firm_id"].to_numpy()
    years = slice_frame["year"].to_numpy()
    order = np.lexsort((years, firms))
    sorted_firms, sorted_years = firms[order], years[order]
    linked = (sorted_firms[1:] == sorted_firms[:-1]) & (sorted_years[1:] == sorted_years[:-1] + 1)
    return order[1:][linked], order[:-1][linked]


def _ar1_no_intercept(curr: np.ndarray, prev: np.ndarray) -> float:
    denom = float(prev @ prev)
    if denom < 1e-300:
        return 0.0
    return float(curr @ prev) / denom


def second_stage_gmm(
    slice_frame: pd.DataFrame,
    phi: np.ndarray,
    settings: EstimationSettings | None = None,
) -> dict:
    """Recover (theta_v, theta_k) from productivity-timing moments.

    Returns a dict with the point estimate, the AR(1) coefficient, the
    criterion at the solution and at the OLS start, the final simplex
    diameter, and the convergence flag.
    """
    settings = settings or EstimationSettings()
    log_l = slice_frame["log_l"].to_numpy(dtype=float)
    log_k = slice_frame["log_k"].to_numpy(dtype=float)
    log_y = slice_frame["log_y"].to_numpy(dtype=float)
    curr, prev = _lag_pairs(slice_frame)
    if curr.size < 2:
        raise EstimationError("panel too short for dynamic moments")

    z_l = log_l[prev]
    z_k = log_k[curr]

    def criterion(theta: np.ndarray) -> float:
        omega = phi - theta[0] * log_l - theta[1] * log_k
        rho = _ar1_no_intercept(omega[curr], omega[prev])
        xi = omega[curr] - rho * omega[prev]
        m1 = float(np.mean(xi * z_l))
        m2 = float(np.mean(xi * z_k))
        return m1 * m1 + m2 * m2

    design = np.column_stack([np.ones_like(log_l), log_l, log_k])
    ols, _, _, _ = np.linalg.lstsq(design, log_y, rcond=None)
    start = np.array([ols[1], ols[2]])
    crit_start = criterion(start)

    def rho_at(theta: np.ndarray) -> float:
        omega = phi - theta[0] * log_l - theta[1] * log_k
        return _ar1_no_intercept(omega[curr], omega[prev])

    candidates = []
    step = settings.start_step
    for dv, dk in product((-step, 0.0, step), repeat=2):
        result = minimize(
            criterion,
            start + np.array([dv, dk]),
            method="Nelder-Mead",
            options={
                "xatol": 1e-9,
                "fatol": 1e-16,
                "maxiter": settings.max_iter,
                "maxfev": settings.max_iter,
            },
        )
        candidates.append(result)

    # The two moments admit a spurious root: theta_v near 1 collapses
    # omega-hat to a firm fixed effect whose AR(1) coefficient tends to
    # one. Prefer stationary candidates; fall back to the plain argmin
    # when none exist or the screen would worsen on the OLS start.
    stationary = [r for r in candidates if abs(rho_at(r.x)) < 0.99]
    pool = stationary if stationary else candidates
    best = min(pool, key=lambda r: r.fun)
    if best.fun > crit_start:
        best = min(candidates, key=lambda r: r.fun)

    simplex = best.final_simplex[0]
    diameter = float(
        max(np.linalg.norm(a - b) for a in simplex for b in simplex)
    )
    theta = np.asarray(best.x, dtype=float)
    omega = phi - theta[0] * log_l - theta[1] * log_k
    rho = _ar1_no_intercept(omega[curr], omega[prev])
    return {
        "theta_v": float(theta[0]),
        "theta_k": float(theta[1]),
        "rho": rho,
        "criterion": float(best.fun),
        "criterion_at_start": crit_start,
        "converged": bool(best.fun < _CRITERION_TOL and diameter < _DIAMETER_TOL),
        "diameter": diameter,
        "n_pairs": int(curr.size),
    }


def _estimate_window(
    frame: pd.DataFrame,
    industry: str,
    window: tuple[int, int],
    settings: EstimationSettings,
) -> dict | None:
    rows = frame[
        (frame["industry"] == industry)
        & frame["year"].between(window[0], window[1])
    ]
    if len(rows) < settings.min_obs:
        return None
    try:
        stage_one = first_stage(rows, degree=settings.degree)
        result = second_stage_gmm(rows, stage_one.phi, settings)
    except EstimationError:
        return None
    result["n_obs"] = int(len(rows))
    result["degree_used"] = stage_one.degree_used
    return result


def estimate_rolling(
    data: PanelDataset, settings: EstimationSettings | None = None
) -> list[ElasticityEstimate]:
    """Rolling-window elasticities for every industry-year in the panel.

    Windows span window_half years on each side of the center year.
    Center years too close to either sample edge reuse the nearest
    estimable center (carried_forward=True); an industry spell shorter
    than a full window is estimated once on the whole spell. Windows
    below min_obs usable rows yield missing estimates for later
    interpolation.
    """
    settings = settings or EstimationSettings()
    settings.validate()
    frame = build_estimation_frame(data, settings)
    if frame.empty:
        raise EstimationError("no usable observations for estimation")

    estimates: list[ElasticityEstimate] = []
    half = settings.window_half
    for industry in sorted(frame["industry"].dropna().unique()):
        ind_years = sorted(frame.loc[frame["industry"] == industry, "year"].unique())
        first, last = ind_years[0], ind_years[-1]
        if last - first >= 2 * half:
            anchor_of = {y: int(np.clip(y, first + half, last - half)) for y in ind_years}
            window_of = {a: (a - half, a + half) for a in set(anchor_of.values())}
        else:
            mid = (first + last + 1) // 2
            anchor_of = {y: mid for y in ind_years}
            window_of = {mid: (first, last)}

        cache: dict[int, dict | None] = {}
        for anchor, window in window_of.items():
            cache[anchor] = _estimate_window(frame, industry, window, settings)

        for year in ind_years:
            anchor = anchor_of[year]
            result = cache[anchor]
            window = window_of[anchor]
            if result is None:
                estimates.append(
                    ElasticityEstimate(
                        industry=industry, year=int(year),
                        theta_v=np.nan, theta_k=np.nan, rho=np.nan,
                        n_obs=0, n_pairs=0, criterion=np.nan,
                        criterion_at_start=np.nan, converged=False,
                        carried_forward=(year != anchor), window=window,
                        degree_used=0,
                    )
                )
                continue
            estimates.append(
                ElasticityEstimate(
                    industry=industry, year=int(year),
                    theta_v=result["theta_v"], theta_k=result["theta_k"],
                    rho=result["rho"], n_obs=result["n_obs"],
                    n_pairs=result["n_pairs"], criterion=result["criterion"],
                    criterion_at_start=result["criterion_at_start"],
                    converged=result["converged"],
                    carried_forward=(year != anchor), window=window,
                    degree_used=result["degree_used"],
                )
            )
    if not estimates:
        raise EstimationError("estimation produced no industry-year records")
    return estimates


def postprocess_elasticities(
    estimates: Sequence[ElasticityEstimate],
    winsor_low: float = 0.05,
    winsor_high: float = 0.95,
) -> list[ElasticityEstimate]:
    """Outlier removal, within-industry interpolation, pooled winsorization.

    Elasticities more than one standard deviation from their industry
    mean become missing; missing values are linearly interpolated over
    years within the industry with nearest-value endpoint extension;
    both series are then clamped at the pooled winsor_low/winsor_high
    nearest-rank percentiles. Re-running on already post-processed
    estimates is a no-op: the outlier rule re-applied to interpolated
    and clamped series would flag fresh points on every pass.
    """
    records = list(estimates)
    if not records:
        return []
    if all(e.postprocessed for e in records):
        return records

    table = pd.DataFrame(
        {
            "industry": [e.industry for e in records],
            "year": [e.year for e in records],
            "theta_v": [e.theta_v for e in records],
            "theta_k": [e.theta_k for e in records],
        }
    )
    for col in ("theta_v", "theta_k"):
        for industry, chunk in table.groupby("industry"):
            values = chunk[col].to_numpy(dtype=float)
            finite = np.isfinite(values)
            if finite.sum() == 0:
                raise EstimationError(
                    f"industry {industry} has no usable {col} estimates"
                )
            mean = float(values[finite].mean())
            sd = float(values[finite].std())
            if sd > 0:
                outlier = finite & (np.abs(values - mean) > sd)
                table.loc[chunk.index[outlier], col] = np.nan

    filled = []
    for industry, chunk in table.groupby("industry"):
        chunk = chunk.sort_values("year").set_index("year")
        for col in ("theta_v", "theta_k"):
            series = chunk[col].astype(float)
            if series.notna().sum() == 0:
                raise EstimationError(
                    f"industry {industry} lost every {col} estimate to the outlier rule"
                )
            chunk[col] = series.interpolate(method="index").ffill().bfill()
        filled.append(chunk.reset_index())
    table = pd.concat(filled, ignore_index=True)

    for col in ("theta_v", "theta_k"):
        lo = nearest_rank(table[col], winsor_low)
        hi = nearest_rank(table[col], winsor_high)
        table[col] = table[col].clip(lo, hi)

    lookup = {
        (row["industry"], int(row["year"])): (float(row["theta_v"]), float(row["theta_k"]))
        for _, row in table.iterrows()
    }
    out = []
    for record in records:
        theta_v, theta_k = lookup[(record.industry, record.year)]
        out.append(replace(record, theta_v=theta_v, theta_k=theta_k, postprocessed=True))
    return out


def estimates_to_frame(estimates: Sequence[ElasticityEstimate]) -> pd.DataFrame:
    """Flatten estimates into the delimited elasticity-table layout."""
    return pd.DataFrame(
        {
            "industry": [e.industry for e in estimates],
            "year": [e.year for e in estimates],
            "theta_v": [e.theta_v for e in estimates],
            "theta_k": [e.theta_k for e in estimates],
            "rs": [e.theta_v + e.theta_k for e in estimates],
            "n_obs": [e.n_obs for e in estimates],
            "converged": [e.converged for e in estimates],
            "carried_forward": [e.carried_forward for e in estimates],
            "rho": [e.rho for e in estimates],
        }
    ).sort_values(["industry", "year"]).reset_index(drop=True)
