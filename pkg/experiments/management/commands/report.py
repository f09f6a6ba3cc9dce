"""
Risk metrics of a stored 1-d CDF estimate.

    python manage.py report runs/gbm --levels 0.95,0.99
"""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from cdf.estimates import CdfEstimate
from core.artifacts import read_json, write_json
from core.exceptions import ImproperCdfError
from experiments.cli import EXIT_CONFIG, parse_list
from metrics.risk import MODE_ATOMS, MODE_INTERPOLATED, risk_report

# first match wins when no estimate is named
PREFERRED_ESTIMATES = ["cvmdl-sorted", "cvmdl-star-sorted", "ecdf", "oracle_cdf"]


class Command(BaseCommand):
    help = "Mean, standard deviation, CVaR and quantiles of a CDF estimate in a run directory"

    def add_arguments(self, parser):
        parser.add_argument("run_dir", help="Run directory")
        parser.add_argument("--estimate", help="Estimate name, e.g. cvmdl-sorted (file <name>.json)")
        parser.add_argument("--levels", default="0.99", help="Comma-separated CVaR levels")
        parser.add_argument("--quantiles", default="", help="Comma-separated quantile levels")
        parser.add_argument("--mode", choices=[MODE_INTERPOLATED, MODE_ATOMS], default=MODE_INTERPOLATED)

    def find_estimate(self, directory: Path, name):
        candidates = [name] if name else PREFERRED_ESTIMATES
        for candidate in candidates:
            path = directory / f"{candidate}.json"
            if path.exists():
                return candidate, path
        raise CommandError(f"no CDF estimate ({', '.join(candidates)}) in {directory}", returncode=EXIT_CONFIG)

    def handle(self, *args, **options):
        directory = Path(options["run_dir"])
        name, path = self.find_estimate(directory, options["estimate"])
        estimate = CdfEstimate.from_dict(read_json(path))
        if estimate.d != 1:
            raise CommandError(f"risk metrics need a 1-d estimate, {name} has d={estimate.d}", returncode=EXIT_CONFIG)
        try:
            levels = parse_list(options["levels"], float)
            quantiles = parse_list(options["quantiles"], float)
            report = risk_report(estimate, levels, quantiles, options["mode"])
        except (ValueError, ImproperCdfError) as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG) from exc

        payload = dict(report.to_dict(), estimate=name, mode=options["mode"])
        write_json(directory / f"report-{name}.json", payload)
        self.stdout.write(f"{name}: mean={report.mean:.6g}, std={report.std:.6g}")
        for level, value in report.cvar.items():
            self.stdout.write(f"  CVaR_{level:g} = {value:.6g}")
        for level, value in report.quantiles.items():
            self.stdout.write(f"  q_{level:g} = {value:.6g}")
        self.stdout.write(self.style.SUCCESS(f"Wrote {directory / f'report-{name}.json'}"))
