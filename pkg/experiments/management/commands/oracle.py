"""
Oracle statistics from one large joint sample.

    python manage.py oracle --config configs/gbm.toml --samples 50000 --budget 1e6
"""
from django.core.management.base import BaseCommand

from core.artifacts import write_csv, write_json
from experiments.cli import add_config_arguments, command_errors, load_config
from experiments.runner import build_oracle, compute_oracle_stats


class Command(BaseCommand):
    help = "Compute k1, k2, gamma and m* per subset and the cross-model correlations"

    def add_arguments(self, parser):
        add_config_arguments(parser, budget=True)
        parser.add_argument("--samples", type=int, help="Oracle sample count (default: the config's stats_samples)")
        parser.add_argument("--cdf", action="store_true", help="Also write the oracle CDF")

    def handle(self, *args, **options):
        config = load_config(options)
        if options["samples"]:
            config.stats_samples = options["samples"]
        budget = options["budget"]
        with command_errors():
            stats = compute_oracle_stats(config, budget=budget)
            oracle = build_oracle(config) if options["cdf"] else None

        directory = config.output_dir
        write_json(directory / "oracle_stats.json", stats.to_dict())
        write_csv(directory / "oracle_subsets.csv", stats.rows())
        correlation = [
            dict({"model": label}, **{other: value for other, value in zip(stats.labels, row)})
            for label, row in zip(stats.labels, stats.correlation.tolist())
        ]
        write_csv(directory / "correlation.csv", correlation)
        if oracle is not None:
            write_json(directory / "oracle_cdf.json", oracle.to_dict())

        for entry in sorted(stats.subsets, key=lambda entry: entry.gamma):
            m_star = f", m*={entry.m_star:.1f}" if entry.m_star is not None else ""
            self.stdout.write(f"  {entry.to_dict()['subset']}: gamma={entry.gamma:.6g}{m_star}")
        self.stdout.write(self.style.SUCCESS(f"Best subset {stats.to_dict()['best_subset']}; wrote {directory}"))
