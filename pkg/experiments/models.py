"""
Run ledger for experiments.

Models:
- SweepRun: one invocation of ``run`` or ``sweep``
- TrialResult: one estimator on one (budget, trial) pair

Files in the output directory remain the primary artifacts; the ledger
makes past runs queryable.
"""

from django.db import models


class SweepRun(models.Model):
    """A single run or budget sweep."""

    STATUS_CHOICES = [
        ("running", "Running"),
        ("completed", "Completed"),
        ("failed", "Failed"),
    ]

    name = models.CharField(max_length=200)
    command = models.CharField(max_length=20, default="sweep")
    ensemble_kind = models.CharField(max_length=30)
    config = models.JSONField(default=dict, help_text="Experiment config as given")
    output_dir = models.CharField(max_length=500)
    seed = models.BigIntegerField(default=0)
    trials = models.PositiveIntegerField(default=1)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default="running")
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ["-created_at"]
        verbose_name = "Sweep Run"
        verbose_name_plural = "Sweep Runs"

    def __str__(self):
        return f"{self.name} ({self.command}, {self.status})"


class TrialResult(models.Model):
    """Outcome of one estimator for one budget and trial."""

    sweep = models.ForeignKey(SweepRun, on_delete=models.CASCADE, related_name="results")
    estimator = models.CharField(max_length=30)
    budget = models.FloatField()
    trial = models.PositiveIntegerField()
    error = models.FloatField(null=True, blank=True, help_text="Weighted L2 error against the oracle")
    sup_error = models.FloatField(null=True, blank=True)
    subset = models.CharField(max_length=100, blank=True)
    m = models.PositiveIntegerField(null=True, blank=True)
    n_exploit = models.PositiveIntegerField(null=True, blank=True)
    spent = models.FloatField()

    class Meta:
        ordering = ["estimator", "budget", "trial"]
        unique_together = [["sweep", "estimator", "budget", "trial"]]
        verbose_name = "Trial Result"
        verbose_name_plural = "Trial Results"

    def __str__(self):
        return f"{self.estimator} B={self.budget:g} trial {self.trial}"
