"""
Estimated loss curve L(z) = k1/z + k2/(B - c_epr z) and its minimizer.
"""
import math

from core.exceptions import DegenerateSubsetError


def estimated_loss(k1: float, k2: float, budget: float, c_epr: float):
    """L(z) on the open interval (0, B / c_epr); inf outside it."""

    def loss(z: float) -> float:
        if z <= 0 or c_epr * z >= budget:
            return math.inf
        return k1 / z + k2 / (budget - c_epr * z)

    return loss


def optimal_exploration(k1: float, k2: float, budget: float, c_epr: float) -> float:
    """Unclamped minimizer B / (c_epr + sqrt(c_epr k2 / k1))."""
    if k1 == 0 and k2 == 0:
        raise DegenerateSubsetError("both loss coefficients vanish")
    if k1 == 0:
        return 0.0
    return budget / (c_epr + math.sqrt(c_epr * k2 / k1))


def loss_and_mstar(k1: float, k2: float, budget: float, c_epr: float, m_min=None, m_max=None):
    """
    Loss curve and optimal exploration size.

    Args:
        k1, k2: Nonnegative loss coefficients
        budget: Total budget B
        c_epr: Cost of one exploration sample
        m_min: Lower clamp for m* (minimum exploration size), used when k1 = 0
        m_max: Upper clamp for m* (largest m leaving one exploitation draw), used when k2 = 0

    Returns:
        Tuple (loss callable, m_star)

    Raises:
        DegenerateSubsetError: k1 = k2 = 0
    """
    if budget <= 0 or c_epr <= 0:
        raise ValueError("budget and exploration cost must be positive")
    if k1 < 0 or k2 < 0:
        raise ValueError("loss coefficients must be nonnegative")
    m_star = optimal_exploration(k1, k2, budget, c_epr)
    if m_min is not None:
        m_star = max(m_star, m_min)
    if m_max is not None:
        m_star = min(m_star, m_max)
    return estimated_loss(k1, k2, budget, c_epr), m_star


def scaled_loss(k1: float, k2: float, c_epr: float) -> float:
    """gamma = (sqrt(c_epr k1) + sqrt(k2))^2, so the optimal loss is gamma / B."""
    return (math.sqrt(c_epr * k1) + math.sqrt(k2)) ** 2


def relative_efficiency(k1: float, k2: float, c_epr: float, c_subset: float) -> float:
    """
    Loss of the all-high-fidelity ECDF over the optimal control-variate loss:
    c_epr (k1 + k2 / c_S) / gamma. Bounded below by 1/4 when c_S <= c_epr.
    """
    gamma = scaled_loss(k1, k2, c_epr)
    if gamma == 0:
        raise DegenerateSubsetError("scaled loss is zero")
    return c_epr * (k1 + k2 / c_subset) / gamma
