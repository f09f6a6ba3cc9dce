from dataclasses import dataclass, field

from core.exceptions import InsufficientBudgetError

PHASE_EXPLORATION = "exploration"
PHASE_EXPLOITATION = "exploitation"

# relative slack for float cost sums
BUDGET_RTOL = 1e-9


@dataclass
class BudgetLedger:
    """Running account of one run's spending, split by phase."""

    total: float
    c_epr: float
    phases: dict = field(default_factory=dict)

    @property
    def spent(self) -> float:
        return float(sum(self.phases.values()))

    @property
    def remaining(self) -> float:
        return self.total - self.spent

    def can_afford(self, amount: float) -> bool:
        return self.spent + amount <= self.total * (1 + BUDGET_RTOL)

    def charge(self, phase: str, amount: float) -> None:
        """
        Record a charge.

        Raises:
            InsufficientBudgetError: the charge would overspend the budget
        """
        if amount < 0:
            raise ValueError("charges must be nonnegative")
        if not self.can_afford(amount):
            raise InsufficientBudgetError(
                f"charging {amount:g} to {phase} would exceed the budget ({self.spent:g} of {self.total:g} spent)"
            )
        self.phases[phase] = self.phases.get(phase, 0.0) + amount

    def to_dict(self) -> dict:
        return {"total": self.total, "spent": self.spent, "c_epr": self.c_epr, "phases": dict(self.phases)}
