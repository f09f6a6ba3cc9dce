"""
The multifidelity CDF driver.

A run explores all models jointly, starting at the minimum exploration size,
scores every nonempty subset of low-fidelity models on the accumulated
exploration rows, grows the exploration set toward the estimated optimum of
the currently best subset, and finally spends what is left of the budget on
the selected subset alone.

Functions:
- q_growth: next exploration target
- select_subset: model selection over a table of subset evaluations
- run_cvmdl: full adaptive run
- run_fixed_allocation: fixed subset and exploration size
- run_ecdf_baseline: whole budget on the high-fidelity model
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from cdf.estimates import CdfEstimate, empirical_cdf
from cdf.grids import EvalGrid, build_grid
from cdf.sorting import alternating_sort
from core.exceptions import DegenerateSubsetError, InsufficientBudgetError, SampleSizeError
from core.seeding import SeedStreams
from ensemble.pool import PoolState
from ensemble.sampling import SampleStream, sample_high_fidelity, sample_joint, sample_subset
from ensemble.specs import KIND_POOL, EnsembleHandle, JointBatch, format_subset, nonempty_subsets
from estimators.evaluation import SubsetEvaluation, evaluate_subset, max_exploration
from estimators.exploitation import ALPHA_PLAIN, ALPHA_TAIL, exploitation_cdf
from estimators.indicators import DEFAULT_TAU
from estimators.weights import WeightSpec
from surrogate.regression import SurrogateCoefficients, fit_surrogate
from .ledger import PHASE_EXPLOITATION, PHASE_EXPLORATION, BudgetLedger

logger = logging.getLogger(__name__)

ALPHA_MODES = [
    (ALPHA_PLAIN, "Zero outside the surrogate support"),
    (ALPHA_TAIL, "Tail quantile extension (d=1)"),
]


@dataclass(frozen=True)
class CvmdlOptions:
    alpha_mode: str = ALPHA_PLAIN
    tau: float = DEFAULT_TAU
    sort: bool = True
    axis_order: Optional[tuple] = None
    resolution: Optional[int] = None
    rtol: Optional[float] = None
    gbm_chunk: int = 256

    def __post_init__(self):
        if self.alpha_mode not in (ALPHA_PLAIN, ALPHA_TAIL):
            raise ValueError(f"unknown alpha mode {self.alpha_mode!r}")


@dataclass(eq=False)
class ExplorationState:
    """Exploration rows collected so far and the subset table scored on them."""

    batch: JointBatch
    table: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    selected: Optional[SubsetEvaluation] = None
    iteration: int = 0

    @property
    def m(self) -> int:
        return self.batch.count

    def extend(self, extra: JointBatch) -> None:
        self.batch = self.batch.concat(extra)


@dataclass(eq=False)
class CvmdlOutput:
    subset: tuple
    m: int
    n_exploit: int
    coeffs: SurrogateCoefficients
    raw_estimate: CdfEstimate
    ledger: BudgetLedger
    sorted_estimate: Optional[CdfEstimate] = None
    trace: list = field(default_factory=list)
    evaluation: Optional[SubsetEvaluation] = None

    @property
    def estimate(self) -> CdfEstimate:
        """Sorted estimate when sorting ran, the raw one otherwise."""
        return self.sorted_estimate if self.sorted_estimate is not None else self.raw_estimate

    @property
    def m_star_hat(self) -> Optional[float]:
        return self.evaluation.m_star_hat if self.evaluation is not None else None

    def summary(self) -> dict:
        return {
            "subset": format_subset(self.subset),
            "m": self.m,
            "n_exploit": self.n_exploit,
            "m_star_hat": self.m_star_hat,
            "iterations": len(self.trace),
            "sorted": self.sorted_estimate is not None,
            "sort_sweeps": self.sorted_estimate.sweeps if self.sorted_estimate is not None else 0,
            "coefficients": self.coeffs.to_dict(),
            "ledger": self.ledger.to_dict(),
        }


def q_growth(m: int, m_star_hat: float) -> int:
    """Double while far below m*, otherwise move halfway to it (rounded up)."""
    if m < 1:
        raise ValueError("exploration size must be positive")
    if m < m_star_hat / 2:
        return 2 * m
    return int(math.ceil((m + m_star_hat) / 2))


def _selection_key(evaluation: SubsetEvaluation):
    return evaluation.min_loss, evaluation.c_subset, evaluation.subset


def select_subset(table) -> SubsetEvaluation:
    """
    Entry with the smallest loss L(max(m, m*)).

    Ties go to the smaller subset cost, then to the lexicographically first subset.
    """
    if not table:
        raise ValueError("cannot select from an empty subset table")
    return min(table, key=_selection_key)


def minimum_budget(handle: EnsembleHandle) -> float:
    """Minimum exploration plus one draw of the cheapest subset."""
    cheapest = min(handle.subset_cost(subset) for subset in nonempty_subsets(handle.n))
    return handle.min_exploration * handle.c_epr + cheapest


class _RunStreams:
    """Per-run sample streams; pools share one row permutation across phases."""

    def __init__(self, handle: EnsembleHandle, seeds: SeedStreams, trial: int, gbm_chunk: int):
        self.seeds = seeds
        self.trial = trial
        self.gbm_chunk = gbm_chunk
        self.pool = None
        if handle.kind == KIND_POOL:
            self.pool = PoolState.for_run(handle, seeds.spawn("pool", trial))

    def explore(self, batch_index: int) -> SampleStream:
        return SampleStream(self.seeds.spawn("explore", self.trial, batch_index), self.pool, self.gbm_chunk)

    def exploit(self) -> SampleStream:
        return SampleStream(self.seeds.spawn("exploit", self.trial), self.pool, self.gbm_chunk)


def _estimate_grid(handle: EnsembleHandle, weight: WeightSpec, options: CvmdlOptions) -> Optional[EvalGrid]:
    if handle.d == 1:
        return None
    return build_grid(domain=weight.bounds, resolution=options.resolution or weight.resolution)


def _exploit(handle, batch, evaluation, weight, options, ledger, streams):
    """Spend the remaining budget on the selected subset and build the estimate."""
    n_exploit = int(math.floor((ledger.total - ledger.c_epr * batch.count) / evaluation.c_subset + 1e-9))
    if n_exploit < 1:
        raise InsufficientBudgetError(
            f"no exploitation draw of subset {format_subset(evaluation.subset)} fits after {batch.count} exploration samples"
        )
    exploitation = sample_subset(handle, evaluation.subset, n_exploit, streams.exploit())
    ledger.charge(PHASE_EXPLOITATION, exploitation.charged_cost)

    alpha_mode = options.alpha_mode
    if alpha_mode == ALPHA_TAIL and options.tau * batch.count < 1:
        logger.warning(
            f"{batch.count} exploration rows are too few for the {options.tau} tail quantile; using plain alpha"
        )
        alpha_mode = ALPHA_PLAIN
    raw = exploitation_cdf(
        batch,
        evaluation.coeffs,
        exploitation,
        grid=_estimate_grid(handle, weight, options),
        alpha_mode=alpha_mode,
        tau=options.tau,
        weight=weight,
    )
    repaired = alternating_sort(raw, axis_order=options.axis_order) if options.sort else None
    return n_exploit, raw, repaired


def _trace_record(iteration, m, table, degenerate, selected, previous):
    return {
        "iteration": iteration,
        "m": m,
        "subsets": [evaluation.to_dict() for evaluation in table],
        "degenerate": [format_subset(subset) for subset in degenerate],
        "selected": format_subset(selected.subset) if selected is not None else None,
        "m_star_hat": selected.m_star_hat if selected is not None else None,
        "oscillation": previous is not None and selected is not None and previous != selected.subset,
    }


def run_cvmdl(
    handle: EnsembleHandle,
    budget: float,
    weight: WeightSpec,
    options: Optional[CvmdlOptions] = None,
    seeds: Optional[SeedStreams] = None,
    trial: int = 0,
) -> CvmdlOutput:
    """
    Adaptive exploration, model selection and exploitation under budget B.

    Args:
        handle: Validated ensemble
        budget: Total budget B
        weight: Loss weight, also fixing the grid for d >= 2
        options: Estimator options
        seeds: Seed streams, default from the ensemble's base seed
        trial: Trial counter mixed into every stream

    Returns:
        CvmdlOutput with the raw and (optionally) sorted estimate and the loop trace

    Raises:
        InsufficientBudgetError: B below minimum exploration plus one exploitation draw
    """
    options = options or CvmdlOptions()
    seeds = seeds or SeedStreams(handle.base_seed)
    weight.check(handle.d)
    floor = minimum_budget(handle)
    if budget < floor * (1 - 1e-12):
        raise InsufficientBudgetError(f"budget {budget:g} is below the minimum {floor:g} for this ensemble")

    c_epr = handle.c_epr
    m_min = handle.min_exploration
    subsets = nonempty_subsets(handle.n)
    ledger = BudgetLedger(total=float(budget), c_epr=c_epr)
    streams = _RunStreams(handle, seeds, trial, options.gbm_chunk)

    state = ExplorationState(batch=sample_joint(handle, m_min, streams.explore(0)))
    ledger.charge(PHASE_EXPLORATION, state.batch.charged_cost)
    trace = []
    previous = None

    while True:
        m = state.m
        state.table, state.degenerate = [], []
        for subset in subsets:
            c_subset = handle.subset_cost(subset)
            if max_exploration(budget, c_epr, c_subset) < m:
                continue
            try:
                state.table.append(
                    evaluate_subset(state.batch, subset, weight, budget, c_epr, c_subset, m, m_min=m_min, rtol=options.rtol)
                )
            except DegenerateSubsetError:
                state.degenerate.append(subset)

        if not state.table:
            logger.warning(f"Every subset is degenerate at m={m}; exploiting the cheapest subset")
            feasible = [s for s in subsets if max_exploration(budget, c_epr, handle.subset_cost(s)) >= m]
            cheapest = min(feasible, key=lambda s: (handle.subset_cost(s), s))
            state.selected = evaluate_degenerate(state.batch, cheapest, handle, m, options)
            trace.append(_trace_record(state.iteration, m, state.table, state.degenerate, state.selected, previous))
            break

        selected = state.selected = select_subset(state.table)
        record = _trace_record(state.iteration, m, state.table, state.degenerate, selected, previous)
        trace.append(record)
        if record["oscillation"]:
            logger.warning(
                f"Selected subset moved from {format_subset(previous)} to {format_subset(selected.subset)} at m={m}"
            )
        logger.info(
            f"Iteration {state.iteration}: m={m}, selected {format_subset(selected.subset)} "
            f"with m*={selected.m_star_hat:.6g}, loss={selected.min_loss:.6g}"
        )
        previous = selected.subset
        if m >= selected.m_star_hat:
            break
        target = min(q_growth(m, selected.m_star_hat), max_exploration(budget, c_epr, selected.c_subset))
        if target <= m:
            break
        state.iteration += 1
        extra = sample_joint(handle, target - m, streams.explore(state.iteration))
        ledger.charge(PHASE_EXPLORATION, extra.charged_cost)
        state.extend(extra)

    batch, selected = state.batch, state.selected
    n_exploit, raw, repaired = _exploit(handle, batch, selected, weight, options, ledger, streams)
    logger.info(
        f"cvMDL run finished: subset {format_subset(selected.subset)}, m={batch.count}, N={n_exploit}, "
        f"spent {ledger.spent:g} of {ledger.total:g}"
    )
    return CvmdlOutput(
        subset=selected.subset,
        m=batch.count,
        n_exploit=n_exploit,
        coeffs=selected.coeffs,
        raw_estimate=raw,
        ledger=ledger,
        sorted_estimate=repaired,
        trace=trace,
        evaluation=selected,
    )


def evaluate_degenerate(batch, subset, handle: EnsembleHandle, m: int, options: CvmdlOptions) -> SubsetEvaluation:
    """Evaluation record for a subset whose loss coefficients both vanish."""
    coeffs = fit_surrogate(batch, subset, rtol=options.rtol)
    return SubsetEvaluation(
        subset=tuple(subset),
        c_subset=handle.subset_cost(subset),
        k1_hat=0.0,
        k2_hat=0.0,
        m_star_hat=float(m),
        min_loss=0.0,
        rank=coeffs.rank,
        coeffs=coeffs,
    )


def run_fixed_allocation(
    handle: EnsembleHandle,
    budget: float,
    subset,
    m: int,
    weight: WeightSpec,
    options: Optional[CvmdlOptions] = None,
    seeds: Optional[SeedStreams] = None,
    trial: int = 0,
) -> CvmdlOutput:
    """
    Explore exactly m samples and exploit ``subset`` with the rest of the budget.

    Raises:
        SampleSizeError: m below the minimum exploration size
        InsufficientBudgetError: m leaves no room for one exploitation draw
    """
    options = options or CvmdlOptions()
    seeds = seeds or SeedStreams(handle.base_seed)
    weight.check(handle.d)
    subset = handle.check_subset(subset)
    c_subset = handle.subset_cost(subset)
    if m < handle.min_exploration:
        raise SampleSizeError(f"m={m} is below the minimum exploration size {handle.min_exploration}")
    if m > max_exploration(budget, handle.c_epr, c_subset):
        raise InsufficientBudgetError(f"m={m} leaves no budget for a draw of subset {format_subset(subset)}")

    ledger = BudgetLedger(total=float(budget), c_epr=handle.c_epr)
    streams = _RunStreams(handle, seeds, trial, options.gbm_chunk)
    batch = sample_joint(handle, m, streams.explore(0))
    ledger.charge(PHASE_EXPLORATION, batch.charged_cost)
    try:
        evaluation = evaluate_subset(
            batch, subset, weight, budget, handle.c_epr, c_subset, m, m_min=handle.min_exploration, rtol=options.rtol
        )
        table = [evaluation]
    except DegenerateSubsetError:
        evaluation = evaluate_degenerate(batch, subset, handle, m, options)
        table = []
    trace = [_trace_record(0, m, table, [] if table else [subset], evaluation, None)]
    n_exploit, raw, repaired = _exploit(handle, batch, evaluation, weight, options, ledger, streams)
    return CvmdlOutput(
        subset=subset,
        m=m,
        n_exploit=n_exploit,
        coeffs=evaluation.coeffs,
        raw_estimate=raw,
        ledger=ledger,
        sorted_estimate=repaired,
        trace=trace,
        evaluation=evaluation,
    )


@dataclass(eq=False)
class BaselineOutput:
    estimate: CdfEstimate
    count: int
    spent: float

    def summary(self) -> dict:
        return {"subset": None, "n_high_fidelity": self.count, "spent": self.spent}


def run_ecdf_baseline(
    handle: EnsembleHandle,
    budget: float,
    grid: Optional[EvalGrid] = None,
    seeds: Optional[SeedStreams] = None,
    trial: int = 0,
) -> CdfEstimate:
    """ECDF of floor(B / c_0) high-fidelity draws."""
    return ecdf_baseline_output(handle, budget, grid, seeds, trial).estimate


def ecdf_baseline_output(
    handle: EnsembleHandle,
    budget: float,
    grid: Optional[EvalGrid] = None,
    seeds: Optional[SeedStreams] = None,
    trial: int = 0,
    gbm_chunk: int = 256,
) -> BaselineOutput:
    """
    Raises:
        InsufficientBudgetError: B < c_0
    """
    seeds = seeds or SeedStreams(handle.base_seed)
    c_0 = handle.specs[0].cost
    count = int(math.floor(budget / c_0 + 1e-9))
    if count < 1:
        raise InsufficientBudgetError(f"budget {budget:g} does not cover one high-fidelity draw of cost {c_0:g}")
    pool = PoolState.for_run(handle, seeds.spawn("pool", trial)) if handle.kind == KIND_POOL else None
    stream = SampleStream(seeds.spawn("ecdf", trial), pool, gbm_chunk)
    y, spent = sample_high_fidelity(handle, count, stream)
    if grid is None and handle.d != 1:
        raise ValueError("d >= 2 baselines need an explicit grid")
    logger.info(f"ECDF baseline with {count} high-fidelity draws")
    return BaselineOutput(estimate=empirical_cdf(y, grid), count=count, spent=spent)
