"""
Sample a pool table from a simulated ensemble.

    python manage.py make_pool --config configs/ensembles/pool_source.toml --rows 6000 --out pools/synthetic.csv
"""
import numpy as np
from django.core.management.base import BaseCommand, CommandError

from core.seeding import SeedStreams
from ensemble.config import load_ensemble
from ensemble.pool import write_pool_table
from ensemble.sampling import SampleStream, sample_joint
from ensemble.specs import KIND_POOL
from experiments.cli import EXIT_CONFIG, command_errors


class Command(BaseCommand):
    help = "Write joint samples of a GBM or linear-gaussian ensemble as a pool table"

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Ensemble or experiment file")
        parser.add_argument("--rows", type=int, default=6000, help="Number of joint samples")
        parser.add_argument("--out", required=True, help="Output path (.csv or .npy)")
        parser.add_argument("--seed", type=int, help="Seed (default: the ensemble's seed)")

    def handle(self, *args, **options):
        with command_errors():
            handle = load_ensemble(options["config"])
        if handle.kind == KIND_POOL:
            raise CommandError("the ensemble is already a pool", returncode=EXIT_CONFIG)
        if options["rows"] < 1:
            raise CommandError("--rows must be positive", returncode=EXIT_CONFIG)

        seed = options["seed"] if options["seed"] is not None else handle.base_seed
        batch = sample_joint(handle, options["rows"], SampleStream(SeedStreams(seed).spawn("pool-table")))
        table = np.hstack([batch.y, *batch.x])
        path = write_pool_table(options["out"], table, handle.dims)
        self.stdout.write(self.style.SUCCESS(f"Wrote {options['rows']} rows of {handle.kind} samples to {path}"))
