"""
Budget sweep with repeated trials.

    python manage.py sweep --config configs/gbm.toml --trials 100 --workers 8
"""
from django.core.management.base import BaseCommand

from core.artifacts import write_csv, write_json
from experiments.aggregation import selection_frequencies, summarize
from experiments.cli import add_config_arguments, close_sweep, command_errors, load_config, open_sweep
from experiments.runner import (
    build_oracle,
    build_tasks,
    check_budgets,
    compute_oracle_stats,
    run_trials,
    spent_within_budget,
    star_allocations,
)


class Command(BaseCommand):
    help = "Run every estimator for every budget and trial and aggregate the errors"

    def add_arguments(self, parser):
        add_config_arguments(parser, trials=True, estimators=True, workers=True)

    def handle(self, *args, **options):
        config = load_config(options)
        directory = config.output_dir
        with command_errors():
            check_budgets(config)
            oracle = build_oracle(config)
            write_json(directory / "oracle_cdf.json", oracle.to_dict())
            star = None
            if config.needs_star:
                stats = compute_oracle_stats(config)
                write_json(directory / "oracle_stats.json", stats.to_dict())
                star = star_allocations(config, stats)
            tasks = build_tasks(config, oracle, star)

            sweep = open_sweep(config, "sweep")
            self.stdout.write(
                f"Sweeping {len(config.budgets)} budget(s) x {config.trials} trial(s) "
                f"with {options['workers']} worker(s)"
            )
            try:
                outcomes = run_trials(tasks, options["workers"])
            except Exception as exc:
                close_sweep(sweep, error=str(exc))
                raise

        rows = [row for outcome in outcomes for row in outcome.rows]
        if not spent_within_budget(rows):
            self.stdout.write(self.style.WARNING("Some trials report spending above their budget"))
        summary = summarize(rows)
        write_csv(directory / "trials.csv", rows)
        write_csv(directory / "summary.csv", summary)
        write_csv(directory / "selection.csv", selection_frequencies(rows))
        write_json(
            directory / "sweep.json",
            {
                "name": config.name,
                "budgets": config.budgets,
                "trials": config.trials,
                "estimators": config.estimators,
                "seed": config.seed,
                "weight": config.weight.to_dict(),
            },
        )
        close_sweep(sweep, rows)

        for record in summary.to_dict("records"):
            self.stdout.write(
                f"  {record['estimator']} B={record['budget']:g}: mean error {record['mean_error']:.6g} "
                f"[{record['q05_error']:.3g}, {record['q95_error']:.3g}]"
            )
        self.stdout.write(self.style.SUCCESS(f"Wrote sweep to {directory}"))
