"""
Shared plumbing for the experiment management commands.
"""
import logging
from contextlib import contextmanager

from django.conf import settings
from django.core.management.base import CommandError
from django.utils import timezone

from core.exceptions import ConfigurationError, InsufficientBudgetError, PoolExhaustedError
from .forms import ESTIMATOR_NAMES, load_experiment
from .models import SweepRun, TrialResult
from .runner import finite_or_none

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_BUDGET = 3


def add_config_arguments(parser, budget=False, trials=False, estimators=False, workers=False):
    parser.add_argument("--config", required=True, help="Experiment file (JSON or TOML)")
    parser.add_argument("--seed", type=int, help="Master seed, overrides the config")
    parser.add_argument("--out", help="Output directory, overrides the config")
    if budget:
        parser.add_argument("--budget", type=float, help="Total budget B (default: the first configured budget)")
    if trials:
        parser.add_argument("--trials", type=int, help="Trials per budget, overrides the config")
    if estimators:
        parser.add_argument(
            "--estimators",
            help=f"Comma-separated subset of {', '.join(ESTIMATOR_NAMES)}",
        )
    if workers:
        parser.add_argument(
            "--workers",
            type=int,
            default=settings.CVMDL_DEFAULT_WORKERS,
            help="Worker processes for trials (default: available CPUs)",
        )


def parse_list(value, cast=str):
    if value is None:
        return None
    return [cast(item.strip()) for item in value.split(",") if item.strip()]


def overrides_from(options) -> dict:
    overrides = {
        "seed": options.get("seed"),
        "output": options.get("out"),
        "trials": options.get("trials"),
        "estimators": parse_list(options.get("estimators")),
    }
    if options.get("budget") is not None:
        overrides["budgets"] = [options["budget"]]
    return overrides


@contextmanager
def command_errors():
    """Translate domain errors into CommandError with the CLI exit codes."""
    try:
        yield
    except ConfigurationError as exc:
        raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
    except (InsufficientBudgetError, PoolExhaustedError) as exc:
        raise CommandError(str(exc), returncode=EXIT_BUDGET) from exc


def load_config(options):
    with command_errors():
        return load_experiment(options["config"], overrides_from(options))


def open_sweep(config, command: str) -> SweepRun:
    return SweepRun.objects.create(
        name=config.name,
        command=command,
        ensemble_kind=config.handle.kind,
        config=config.snapshot,
        output_dir=str(config.output_dir),
        seed=config.seed,
        trials=config.trials,
    )


def close_sweep(sweep: SweepRun, rows=None, error: str = "") -> None:
    """Record per-trial rows and the final status."""
    if rows:
        TrialResult.objects.bulk_create(
            [
                TrialResult(
                    sweep=sweep,
                    estimator=row["estimator"],
                    budget=row["budget"],
                    trial=row["trial"],
                    error=finite_or_none(row["error"]),
                    sup_error=finite_or_none(row["sup_error"]),
                    subset=row["subset"] or "",
                    m=row["m"],
                    n_exploit=row["n_exploit"],
                    spent=row["spent"],
                )
                for row in rows
            ]
        )
    sweep.status = "failed" if error else "completed"
    sweep.error = error
    sweep.finished_at = timezone.now()
    sweep.save(update_fields=["status", "error", "finished_at"])
