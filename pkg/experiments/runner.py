"""
Trial execution for experiments.

Each (budget, trial) pair is a self-contained task carrying everything a
worker needs, including its own seed; workers never read Django settings.
Tasks run in a process pool and results come back in task order.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from cdf.estimates import CdfEstimate, empirical_cdf
from cdf.grids import EvalGrid, build_grid
from core.artifacts import ensure_dir, read_json, write_csv, write_json, write_jsonl
from core.exceptions import DegenerateSubsetError, ImproperCdfError, InsufficientBudgetError
from core.seeding import SeedStreams
from cvmdl.driver import CvmdlOptions, ecdf_baseline_output, minimum_budget, run_cvmdl, run_fixed_allocation
from ensemble.pool import PoolState
from ensemble.sampling import SampleStream, analytic_cdf, sample_high_fidelity
from ensemble.specs import KIND_LINEAR_GAUSSIAN, KIND_POOL, EnsembleHandle, format_subset
from estimators.evaluation import max_exploration
from estimators.loss import optimal_exploration
from estimators.oracle import OracleStats, oracle_stats
from estimators.weights import WeightSpec
from metrics.errors import sup_error, weighted_l2_error
from metrics.risk import RiskReport, relative_error, risk_report
from .forms import (
    ESTIMATOR_CVMDL,
    ESTIMATOR_CVMDL_SORTED,
    ESTIMATOR_ECDF,
    ESTIMATOR_STAR,
    ESTIMATOR_STAR_SORTED,
    ExperimentConfig,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StarAllocation:
    """Oracle-optimal subset and exploration size at one budget."""

    subset: tuple
    m: int


@dataclass(eq=False)
class TrialTask:
    handle: EnsembleHandle
    budget: float
    budget_index: int
    trial: int
    estimators: tuple
    weight: WeightSpec
    options: CvmdlOptions
    seed: int
    oracle: CdfEstimate
    resolution: int
    oracle_risk: Optional[RiskReport] = None
    star: Optional[StarAllocation] = None
    levels: tuple = (0.99,)
    keep_outputs: bool = False


@dataclass(eq=False)
class TrialOutcome:
    rows: list
    outputs: dict = field(default_factory=dict)


def estimate_grid(handle: EnsembleHandle, weight: WeightSpec, resolution: int) -> Optional[EvalGrid]:
    """Grid for d >= 2 estimates; d=1 estimates carry their own breakpoints."""
    if handle.d == 1:
        return None
    return build_grid(domain=weight.bounds, resolution=resolution)


def build_oracle(config: ExperimentConfig) -> CdfEstimate:
    """
    Reference CDF for error metrics.

    Order of preference: an oracle file, the closed form (linear-Gaussian
    ensembles with ``analytic`` set), the full pool table, a large
    high-fidelity ECDF.
    """
    handle = config.handle
    if config.oracle_file is not None:
        logger.info(f"Loading oracle CDF from {config.oracle_file}")
        return CdfEstimate.from_dict(read_json(config.oracle_file))
    if config.oracle_analytic:
        if handle.kind != KIND_LINEAR_GAUSSIAN:
            raise ValueError("analytic oracles need a linear-gaussian ensemble")
        params = handle.linear_gaussian
        if handle.d == 1:
            points = np.linspace(params.mean - 8 * params.std, params.mean + 8 * params.std, config.oracle_samples)
            values = analytic_cdf(handle, points[:, None])
            # the last breakpoint carries the remaining tail mass
            values[-1] = 1.0
            return CdfEstimate(grid=EvalGrid.from_arrays(points), values=values, monotone=True)
        grid, _ = config.weight.quadrature()
        values = analytic_cdf(handle, grid.points())
        return CdfEstimate(grid=grid, values=values, monotone=True)

    grid = config.weight.quadrature()[0] if handle.d > 1 else None
    if handle.kind == KIND_POOL:
        logger.info(f"Oracle CDF from all {handle.pool.rows} pool rows")
        return empirical_cdf(handle.pool.table[:, : handle.d], grid)
    logger.info(f"Oracle CDF from {config.oracle_samples} high-fidelity samples")
    stream = SampleStream(SeedStreams(config.seed).spawn("oracle-cdf"), gbm_chunk=config.gbm_chunk)
    y, _ = sample_high_fidelity(handle, config.oracle_samples, stream)
    return empirical_cdf(y, grid)


def oracle_risk_report(oracle: CdfEstimate, levels) -> Optional[RiskReport]:
    if oracle.d != 1:
        return None
    return risk_report(oracle, levels)


def compute_oracle_stats(config: ExperimentConfig, budget: Optional[float] = None) -> OracleStats:
    handle = config.handle
    pool = PoolState.for_run(handle, SeedStreams(config.seed).spawn("oracle-pool")) if handle.kind == KIND_POOL else None
    stream = SampleStream(SeedStreams(config.seed).spawn("oracle-stats"), pool, config.gbm_chunk)
    samples = min(config.stats_samples, handle.pool.rows) if handle.kind == KIND_POOL else config.stats_samples
    return oracle_stats(handle, config.weight, samples, stream, budget=budget)


def star_allocations(config: ExperimentConfig, stats: OracleStats) -> dict:
    """Oracle subset with m* rounded and clamped to the feasible range, per budget."""
    handle = config.handle
    best = stats.best
    allocations = {}
    for budget in config.budgets:
        upper = max_exploration(budget, handle.c_epr, best.c_subset)
        try:
            m_star = optimal_exploration(best.k1, best.k2, budget, handle.c_epr)
        except DegenerateSubsetError:
            m_star = handle.min_exploration
        allocations[budget] = StarAllocation(best.subset, int(min(max(round(m_star), handle.min_exploration), upper)))
    return allocations


def check_budgets(config: ExperimentConfig) -> None:
    """
    Raises:
        InsufficientBudgetError: a budget cannot run one of the requested estimators
    """
    handle = config.handle
    smallest = min(config.budgets)
    if ESTIMATOR_ECDF in config.estimators and smallest < handle.specs[0].cost:
        raise InsufficientBudgetError(f"budget {smallest:g} does not cover one high-fidelity draw")
    if any(name != ESTIMATOR_ECDF for name in config.estimators):
        floor = minimum_budget(handle)
        if smallest < floor:
            raise InsufficientBudgetError(f"budget {smallest:g} is below the cvMDL minimum {floor:g}")


def build_tasks(config: ExperimentConfig, oracle: CdfEstimate, star=None, keep_outputs=False, trials=None) -> list:
    options = CvmdlOptions(
        alpha_mode=config.alpha_mode,
        tau=config.tau,
        resolution=config.resolution,
        rtol=config.rtol,
        gbm_chunk=config.gbm_chunk,
    )
    oracle_risk = oracle_risk_report(oracle, config.levels)
    tasks = []
    for budget_index, budget in enumerate(config.budgets):
        for trial in trials if trials is not None else range(config.trials):
            tasks.append(
                TrialTask(
                    handle=config.handle,
                    budget=budget,
                    budget_index=budget_index,
                    trial=trial,
                    estimators=tuple(config.estimators),
                    weight=config.weight,
                    options=options,
                    seed=config.seed,
                    oracle=oracle,
                    resolution=config.resolution,
                    oracle_risk=oracle_risk,
                    star=(star or {}).get(budget),
                    levels=tuple(config.levels),
                    keep_outputs=keep_outputs,
                )
            )
    return tasks


def _risk_columns(estimate: CdfEstimate, task: TrialTask) -> dict:
    if estimate.d != 1 or not estimate.is_monotone():
        return {}
    try:
        report = risk_report(estimate, task.levels)
    except ImproperCdfError:
        return {}
    columns = {"mean": report.mean, "std": report.std}
    for level, value in report.cvar.items():
        columns[f"cvar_{level:g}"] = value
    if task.oracle_risk is not None:
        columns["rel_mean"] = relative_error(report.mean, task.oracle_risk.mean)
        columns["rel_std"] = relative_error(report.std, task.oracle_risk.std)
        for level, value in report.cvar.items():
            columns[f"rel_cvar_{level:g}"] = relative_error(value, task.oracle_risk.cvar[level])
    return columns


def _row(task: TrialTask, name: str, estimate: CdfEstimate, spent: float, subset=None, m=None, n_exploit=None) -> dict:
    row = {
        "estimator": name,
        "budget": task.budget,
        "trial": task.trial,
        "error": weighted_l2_error(estimate, task.oracle, task.weight),
        "sup_error": sup_error(estimate, task.oracle),
        "subset": format_subset(subset) if subset else "",
        "m": m,
        "n_exploit": n_exploit,
        "spent": spent,
    }
    row.update(_risk_columns(estimate, task))
    return row


def run_trial(task: TrialTask) -> TrialOutcome:
    """Every requested estimator once, on substreams of this (budget, trial) pair."""
    seeds = SeedStreams(task.seed).child("trial", task.budget_index, task.trial)
    outcome = TrialOutcome(rows=[])
    names = set(task.estimators)

    if ESTIMATOR_ECDF in names:
        baseline = ecdf_baseline_output(
            task.handle, task.budget, estimate_grid(task.handle, task.weight, task.resolution), seeds, gbm_chunk=task.options.gbm_chunk
        )
        outcome.rows.append(_row(task, ESTIMATOR_ECDF, baseline.estimate, baseline.spent, n_exploit=baseline.count))
        if task.keep_outputs:
            outcome.outputs[ESTIMATOR_ECDF] = baseline

    groups = [
        (ESTIMATOR_CVMDL, ESTIMATOR_CVMDL_SORTED, False),
        (ESTIMATOR_STAR, ESTIMATOR_STAR_SORTED, True),
    ]
    for raw_name, sorted_name, oracle_driven in groups:
        if raw_name not in names and sorted_name not in names:
            continue
        options = CvmdlOptions(
            alpha_mode=task.options.alpha_mode,
            tau=task.options.tau,
            sort=sorted_name in names,
            resolution=task.options.resolution,
            rtol=task.options.rtol,
            gbm_chunk=task.options.gbm_chunk,
        )
        if oracle_driven:
            if task.star is None:
                raise ValueError("oracle-driven estimators need a star allocation")
            output = run_fixed_allocation(task.handle, task.budget, task.star.subset, task.star.m, task.weight, options, seeds)
        else:
            output = run_cvmdl(task.handle, task.budget, task.weight, options, seeds)
        spent = output.ledger.spent
        if raw_name in names:
            outcome.rows.append(_row(task, raw_name, output.raw_estimate, spent, output.subset, output.m, output.n_exploit))
        if sorted_name in names:
            outcome.rows.append(_row(task, sorted_name, output.sorted_estimate, spent, output.subset, output.m, output.n_exploit))
        if task.keep_outputs:
            outcome.outputs[raw_name] = output
    return outcome


def run_trials(tasks, workers: int = 1) -> list:
    """Outcomes in task order, whatever the number of workers."""
    if workers <= 1 or len(tasks) <= 1:
        return [run_trial(task) for task in tasks]
    logger.info(f"Running {len(tasks)} trials on {workers} workers")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run_trial, tasks, chunksize=1))


def write_run_directory(directory, task: TrialTask, outcome: TrialOutcome) -> Path:
    """
    Files of a single run: one CDF JSON per estimator, the loop trace,
    risk reports, a summary and ``error.csv``.
    """
    directory = ensure_dir(directory)
    summaries = {}
    risk = {}
    for name, output in outcome.outputs.items():
        summaries[name] = output.summary()
        if name == ESTIMATOR_ECDF:
            estimates = {name: output.estimate}
        else:
            write_jsonl(directory / f"{name}-trace.jsonl", output.trace)
            estimates = {name: output.raw_estimate}
            if output.sorted_estimate is not None:
                estimates[f"{name}-sorted"] = output.sorted_estimate
        for label, estimate in estimates.items():
            if label not in task.estimators:
                continue
            write_json(directory / f"{label}.json", estimate.to_dict())
            write_csv(directory / f"{label}.csv", estimate.to_frame())
            columns = _risk_columns(estimate, task)
            if columns:
                risk[label] = columns
    write_json(directory / "summary.json", {"budget": task.budget, "trial": task.trial, "estimators": summaries})
    if risk:
        write_json(directory / "risk.json", risk)
    write_csv(directory / "error.csv", outcome.rows)
    logger.info(f"Wrote run outputs to {directory}")
    return directory


def spent_within_budget(rows) -> bool:
    return all(row["spent"] <= row["budget"] * (1 + 1e-9) for row in rows)


def finite_or_none(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return value
