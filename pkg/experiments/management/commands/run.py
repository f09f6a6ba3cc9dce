"""
Run every requested estimator once at one budget.

    python manage.py run --config configs/gbm.toml --budget 1e5 --seed 7
"""
from django.core.management.base import BaseCommand

from core.artifacts import write_json
from experiments.cli import add_config_arguments, close_sweep, command_errors, load_config, open_sweep
from experiments.runner import (
    build_oracle,
    build_tasks,
    check_budgets,
    compute_oracle_stats,
    run_trial,
    star_allocations,
    write_run_directory,
)


class Command(BaseCommand):
    help = "Run the configured estimators once and write CDFs, trace, risk report and error"

    def add_arguments(self, parser):
        add_config_arguments(parser, budget=True, estimators=True)
        parser.add_argument("--trial", type=int, default=0, help="Trial counter mixed into the seed streams")

    def handle(self, *args, **options):
        config = load_config(options)
        config.budgets = config.budgets[:1]
        budget = config.budgets[0]
        with command_errors():
            check_budgets(config)
            oracle = build_oracle(config)
            star = None
            if config.needs_star:
                star = star_allocations(config, compute_oracle_stats(config))
            task = build_tasks(config, oracle, star, keep_outputs=True, trials=[options["trial"]])[0]

            sweep = open_sweep(config, "run")
            self.stdout.write(f"Running {', '.join(config.estimators)} at B={budget:g}")
            try:
                outcome = run_trial(task)
            except Exception as exc:
                close_sweep(sweep, error=str(exc))
                raise
        directory = write_run_directory(config.output_dir, task, outcome)
        write_json(directory / "oracle_cdf.json", oracle.to_dict())
        close_sweep(sweep, outcome.rows)

        for row in outcome.rows:
            subset = f", subset {row['subset']}" if row["subset"] else ""
            self.stdout.write(f"  {row['estimator']}: error={row['error']:.6g}{subset}")
        self.stdout.write(self.style.SUCCESS(f"Wrote run to {directory}"))
