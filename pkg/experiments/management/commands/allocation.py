"""
Error as a function of the exploration size for one fixed subset.

    python manage.py allocation --config configs/gbm.toml --budget 1e5 --subset 1 --m 20,50,100,200 --trials 50
"""
from dataclasses import replace

from django.core.management.base import BaseCommand, CommandError

from core.artifacts import write_csv
from estimators.evaluation import max_exploration
from experiments.aggregation import allocation_curve
from experiments.cli import EXIT_BUDGET, EXIT_CONFIG, add_config_arguments, command_errors, load_config, parse_list
from experiments.forms import ESTIMATOR_STAR_SORTED
from experiments.runner import StarAllocation, build_oracle, build_tasks, run_trials


class Command(BaseCommand):
    help = "Mean weighted L2 error per exploration size m for a fixed subset"

    def add_arguments(self, parser):
        add_config_arguments(parser, budget=True, trials=True, workers=True)
        parser.add_argument("--subset", required=True, help="Comma-separated low-fidelity model ids, e.g. 1,3")
        parser.add_argument("--m", required=True, help="Comma-separated exploration sizes")

    def handle(self, *args, **options):
        config = load_config(options)
        config.budgets = config.budgets[:1]
        config.estimators = [ESTIMATOR_STAR_SORTED]
        budget = config.budgets[0]
        handle = config.handle
        try:
            subset = handle.check_subset(parse_list(options["subset"], int))
            sizes = sorted(set(parse_list(options["m"], int)))
        except ValueError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc
        upper = max_exploration(budget, handle.c_epr, handle.subset_cost(subset))
        bad = [m for m in sizes if m < handle.min_exploration or m > upper]
        if bad:
            raise CommandError(
                f"m values {bad} fall outside [{handle.min_exploration}, {upper}] at B={budget:g}",
                returncode=EXIT_BUDGET,
            )

        with command_errors():
            oracle = build_oracle(config)
            template = build_tasks(config, oracle)
            tasks = [
                replace(task, budget_index=index, star=StarAllocation(subset, m))
                for index, m in enumerate(sizes)
                for task in template
            ]
            outcomes = run_trials(tasks, options["workers"])

        rows = [row for outcome in outcomes for row in outcome.rows]
        curve = allocation_curve(rows)
        directory = config.output_dir
        write_csv(directory / "allocation_trials.csv", rows)
        write_csv(directory / "allocation.csv", curve)
        for record in curve.to_dict("records"):
            self.stdout.write(f"  m={record['m']}: mean error {record['mean_error']:.6g}")
        self.stdout.write(self.style.SUCCESS(f"Wrote allocation curve to {directory}"))
