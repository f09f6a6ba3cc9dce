"""
Per-subset analysis during exploration: fit, loss coefficients, optimal
exploration size and the loss used for model selection.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from ensemble.specs import format_subset
from surrogate.regression import SurrogateCoefficients, fit_surrogate, fitted_values
from .kfields import k_hats_from_values
from .loss import loss_and_mstar
from .weights import WeightSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SubsetEvaluation:
    subset: tuple
    c_subset: float
    k1_hat: float
    k2_hat: float
    m_star_hat: float
    min_loss: float
    rank: int = 0
    coeffs: Optional[SurrogateCoefficients] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "subset": format_subset(self.subset),
            "c_S": self.c_subset,
            "k1_hat": self.k1_hat,
            "k2_hat": self.k2_hat,
            "m_star_hat": self.m_star_hat,
            "loss": self.min_loss,
            "rank": self.rank,
        }


def max_exploration(budget: float, c_epr: float, c_subset: float) -> int:
    """Largest m that still leaves one exploitation draw of cost c_S."""
    return int(math.floor((budget - c_subset) / c_epr))


def evaluate_subset(
    batch,
    subset,
    weight: WeightSpec,
    budget: float,
    c_epr: float,
    c_subset: float,
    m: int,
    m_min: Optional[int] = None,
    rtol: Optional[float] = None,
) -> SubsetEvaluation:
    """
    Fit H_S on the current exploration rows and score the subset.

    The selection loss is L(max(m, m*)): a subset whose optimal exploration
    size is already exceeded is charged at the current m.

    Raises:
        DegenerateSubsetError: both k-hats vanish
    """
    subset = tuple(subset)
    coeffs = fit_surrogate(batch, subset, rtol=rtol)
    integrals = k_hats_from_values(batch.y, fitted_values(batch, coeffs), weight, c_subset)
    m_cap = max_exploration(budget, c_epr, c_subset)
    loss, m_star = loss_and_mstar(
        integrals.k1_hat,
        integrals.k2_hat,
        budget,
        c_epr,
        m_min=m_min,
        m_max=m_cap,
    )
    evaluation = SubsetEvaluation(
        subset=subset,
        c_subset=c_subset,
        k1_hat=integrals.k1_hat,
        k2_hat=integrals.k2_hat,
        m_star_hat=m_star,
        min_loss=loss(max(m, m_star)),
        rank=coeffs.rank,
        coeffs=coeffs,
    )
    logger.debug(
        f"Subset {format_subset(subset)} at m={m}: k1={evaluation.k1_hat:.6g}, k2={evaluation.k2_hat:.6g}, "
        f"m*={evaluation.m_star_hat:.6g}, loss={evaluation.min_loss:.6g}"
    )
    return evaluation
