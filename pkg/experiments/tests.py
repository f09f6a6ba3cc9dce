import io
import json
import shutil
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings, tag

from core.artifacts import read_csv, read_json
from core.exceptions import ConfigurationError
from cvmdl.driver import minimum_budget
from ensemble.config import load_ensemble
from ensemble.pool import load_pool_table
from ensemble.specs import KIND_LINEAR_GAUSSIAN, nonempty_subsets
from .aggregation import allocation_curve, selection_frequencies, summarize
from .cli import EXIT_BUDGET, EXIT_CONFIG
from .forms import ESTIMATOR_CVMDL_SORTED, ESTIMATOR_ECDF, ExperimentConfigForm, load_experiment
from .models import SweepRun, TrialResult
from .runner import build_oracle, build_tasks, compute_oracle_stats, run_trials

ENSEMBLE = {
    "kind": "linear-gaussian",
    "costs": [10.0, 1.0],
    "dims": [1, 1],
    "linear_gaussian": {"noise_stds": [0.5]},
}


def experiment_data(**changes):
    data = {
        "name": "smoke",
        "ensemble": dict(ENSEMBLE),
        "budgets": [200.0],
        "trials": 2,
        "estimators": [ESTIMATOR_ECDF, ESTIMATOR_CVMDL_SORTED],
        "weight": {"kind": "rectangle", "bounds": [[-4.0, 4.0]]},
        "oracle": {"analytic": True, "samples": 2001},
    }
    data.update(changes)
    return data


def write_experiment(directory, **changes) -> Path:
    path = Path(directory) / "experiment.json"
    path.write_text(json.dumps(experiment_data(**changes)), encoding="utf-8")
    return path


def row(estimator="cvmdl-sorted", budget=100.0, trial=0, error=1.0, subset="1", m=5):
    return {
        "estimator": estimator,
        "budget": budget,
        "trial": trial,
        "error": error,
        "sup_error": error,
        "subset": subset,
        "m": m,
        "n_exploit": 10,
        "spent": budget,
    }


class ExperimentConfigFormTests(SimpleTestCase):
    def test_defaults(self):
        data = experiment_data()
        for key in ("trials", "estimators", "oracle", "weight", "name"):
            data.pop(key)
        config = ExperimentConfigForm(data).build()
        self.assertEqual(config.trials, 1)
        self.assertEqual(config.estimators, [ESTIMATOR_ECDF, ESTIMATOR_CVMDL_SORTED])
        self.assertEqual(config.name, "experiment")
        self.assertEqual(config.tau, 0.05)
        self.assertEqual(config.levels, [0.99])
        self.assertFalse(config.needs_star)

    def test_budgets_must_ascend(self):
        form = ExperimentConfigForm(experiment_data(budgets=[200.0, 100.0]))
        self.assertFalse(form.is_valid())
        self.assertIn("budgets", form.errors)

    def test_unknown_estimator(self):
        form = ExperimentConfigForm(experiment_data(estimators=["mlmc"]))
        self.assertFalse(form.is_valid())
        self.assertIn("estimators", form.errors)

    def test_estimators_keep_canonical_order(self):
        config = ExperimentConfigForm(experiment_data(estimators=["cvmdl-star", ESTIMATOR_ECDF])).build()
        self.assertEqual(config.estimators, [ESTIMATOR_ECDF, "cvmdl-star"])
        self.assertTrue(config.needs_star)

    def test_rectangle_weight_needs_bounds(self):
        form = ExperimentConfigForm(experiment_data(weight={"kind": "rectangle"}))
        self.assertFalse(form.is_valid())
        self.assertIn("weight", form.errors)

    def test_tau_range(self):
        with self.assertRaises(ConfigurationError) as ctx:
            ExperimentConfigForm(experiment_data(tau=0.7)).build()
        self.assertIn("tau", ctx.exception.errors)

    def test_weight_dimension_must_match(self):
        with self.assertRaises(ConfigurationError):
            ExperimentConfigForm(experiment_data(weight={"kind": "rectangle", "bounds": [[0, 1], [0, 1]]})).build()

    @override_settings(CVMDL_OUTPUT_ROOT=Path("/tmp/cvmdl-runs"))
    def test_output_defaults_to_named_directory(self):
        config = ExperimentConfigForm(experiment_data()).build()
        self.assertEqual(config.output_dir, Path("/tmp/cvmdl-runs") / "smoke")

    def test_file_with_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_experiment(tmp)
            config = load_experiment(path, {"seed": 11, "budgets": [500.0], "trials": None})
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.budgets, [500.0])
        self.assertEqual(config.trials, 2)

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_experiment("/nonexistent/experiment.toml")


class ShippedConfigTests(SimpleTestCase):
    """The experiment files under configs/ load as shipped."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.configs = Path(self.tmp.name) / "configs"
        shutil.copytree(Path(settings.BASE_DIR) / "configs", self.configs)
        call_command(
            "make_pool",
            config=str(self.configs / "ensembles" / "pool_source.toml"),
            rows=6000,
            out=str(self.configs / "pools" / "synthetic.csv"),
            stdout=io.StringIO(),
        )

    def tearDown(self):
        self.tmp.cleanup()

    def test_every_experiment_file_loads(self):
        paths = sorted(self.configs.glob("*.toml"))
        self.assertEqual([path.stem for path in paths], ["gbm", "linear_gaussian", "pool"])
        for path in paths:
            config = load_experiment(path)
            self.assertTrue(config.budgets)
            config.weight.check(config.handle.d)

    def test_pool_source_is_a_simulated_ensemble(self):
        handle = load_ensemble(self.configs / "ensembles" / "pool_source.toml")
        self.assertEqual(handle.kind, KIND_LINEAR_GAUSSIAN)
        self.assertEqual(handle.base_seed, 6000)

    def test_pool_covers_every_budget(self):
        config = load_experiment(self.configs / "pool.toml")
        handle = config.handle
        self.assertEqual(handle.pool.rows, 6000)
        self.assertFalse(handle.pool.replacement)
        cheapest = min(handle.subset_cost(subset) for subset in nonempty_subsets(handle.n))
        for budget in config.budgets:
            m = handle.min_exploration
            # fewest exploration rows leave the most budget for the cheapest subset
            self.assertLessEqual(m + (budget - handle.c_epr * m) / cheapest, handle.pool.rows)
            self.assertGreaterEqual(budget, minimum_budget(handle))


@tag("slow")
class GbmSweepTests(SimpleTestCase):
    """100 trials per budget of the GBM extrema ensemble."""

    budgets = [1e4, 1e5, 1e6]

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        data = {
            "name": "gbm",
            "ensemble": {"kind": "gbm-extrema", "costs": [1024, 16, 4, 1]},
            "budgets": cls.budgets,
            "trials": 100,
            "estimators": [ESTIMATOR_ECDF, ESTIMATOR_CVMDL_SORTED],
            "seed": 2024,
            "weight": {"kind": "rectangle", "bounds": [[0.5, 1.0], [1.0, 3.0]], "resolution": 32},
            "grid": {"resolution": 32},
            "oracle": {"samples": 20000, "stats_samples": 50000},
        }
        cls.config = ExperimentConfigForm(data).build()
        oracle = build_oracle(cls.config)
        outcomes = run_trials(build_tasks(cls.config, oracle), workers=1)
        cls.rows = [row for outcome in outcomes for row in outcome.rows]
        cls.summary = summarize(cls.rows).set_index(["estimator", "budget"])

    def test_finest_model_is_selected_at_the_largest_budget(self):
        frequencies = selection_frequencies(self.rows)
        chosen = frequencies[
            (frequencies["estimator"] == ESTIMATOR_CVMDL_SORTED)
            & (frequencies["budget"] == 1e6)
            & (frequencies["subset"] == "1")
        ]
        self.assertGreaterEqual(float(chosen["frequency"].sum()), 0.8)

        m_star = compute_oracle_stats(self.config, budget=1e6).by_subset((1,)).m_star
        mean_m = self.summary.loc[(ESTIMATOR_CVMDL_SORTED, 1e6), "mean_m"]
        self.assertGreaterEqual(mean_m / m_star, 0.7)
        self.assertLessEqual(mean_m / m_star, 1.3)

    def test_cvmdl_beats_ecdf_at_every_budget(self):
        for budget in self.budgets:
            cvmdl = self.summary.loc[(ESTIMATOR_CVMDL_SORTED, budget), "mean_error"]
            ecdf = self.summary.loc[(ESTIMATOR_ECDF, budget), "mean_error"]
            self.assertLess(cvmdl, ecdf, f"budget {budget:g}")

    def test_error_decreases_with_budget(self):
        errors = [self.summary.loc[(ESTIMATOR_CVMDL_SORTED, budget), "mean_error"] for budget in self.budgets]
        for larger, smaller in zip(errors, errors[1:]):
            self.assertLess(smaller, larger)

    def test_budget_is_never_exceeded(self):
        for row in self.rows:
            self.assertLessEqual(row["spent"], row["budget"] * (1 + 1e-9))


class AggregationTests(SimpleTestCase):
    def test_single_trial_quantiles_equal_error(self):
        summary = summarize([row(error=0.25)])
        record = summary.to_dict("records")[0]
        for column in ("mean_error", "q05_error", "q50_error", "q95_error"):
            self.assertEqual(record[column], 0.25)

    def test_order_invariant(self):
        rows = [row(trial=t, error=float(t), budget=b) for b in (100.0, 200.0) for t in range(5)]
        forward = summarize(rows)
        backward = summarize(list(reversed(rows)))
        self.assertTrue(forward.equals(backward))
        self.assertEqual(list(forward["budget"]), [100.0, 200.0])

    def test_mean_error(self):
        summary = summarize([row(trial=t, error=e) for t, e in enumerate([1.0, 2.0, 6.0])])
        self.assertAlmostEqual(summary["mean_error"].iloc[0], 3.0)

    def test_relative_error_columns(self):
        rows = [dict(row(trial=t), rel_mean=0.1 * (t + 1)) for t in range(2)]
        summary = summarize(rows)
        self.assertAlmostEqual(summary["mean_rel_mean"].iloc[0], 0.15)

    def test_empty(self):
        self.assertTrue(summarize([]).empty)
        self.assertTrue(selection_frequencies([]).empty)

    def test_selection_frequencies(self):
        rows = [row(trial=0, subset="1"), row(trial=1, subset="1"), row(trial=2, subset="1,2"), row(estimator="ecdf", subset="")]
        frame = selection_frequencies(rows)
        self.assertEqual(list(frame["subset"]), ["1", "1,2"])
        self.assertEqual(list(frame["count"]), [2, 1])
        self.assertAlmostEqual(frame["frequency"].sum(), 1.0)

    def test_allocation_curve(self):
        rows = [row(trial=t, m=m, error=float(m + t)) for m in (20, 5) for t in range(3)]
        curve = allocation_curve(rows)
        self.assertEqual(list(curve["m"]), [5, 20])
        self.assertEqual(list(curve["trials"]), [3, 3])
        self.assertAlmostEqual(curve["mean_error"].iloc[0], 6.0)


@tag("slow")
class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.config = write_experiment(self.root)
        self.out = self.root / "out"

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, *args, **options):
        call_command(*args, stdout=io.StringIO(), **options)

    def test_run_writes_outputs_and_ledger(self):
        self.call("run", config=str(self.config), out=str(self.out), seed=3)
        for name in ("ecdf.json", "cvmdl-sorted.json", "cvmdl-trace.jsonl", "summary.json", "error.csv", "oracle_cdf.json"):
            self.assertTrue((self.out / name).exists(), name)
        errors = read_csv(self.out / "error.csv")
        self.assertEqual(sorted(errors["estimator"]), [ESTIMATOR_CVMDL_SORTED, ESTIMATOR_ECDF])
        self.assertTrue((errors["spent"] <= 200.0 * (1 + 1e-9)).all())
        sweep = SweepRun.objects.get()
        self.assertEqual(sweep.status, "completed")
        self.assertEqual(sweep.results.count(), 2)

    def test_run_is_reproducible(self):
        first, second = self.root / "first", self.root / "second"
        self.call("run", config=str(self.config), out=str(first), seed=5)
        self.call("run", config=str(self.config), out=str(second), seed=5)
        self.assertEqual((first / "error.csv").read_text(), (second / "error.csv").read_text())
        self.assertEqual((first / "cvmdl-sorted.json").read_text(), (second / "cvmdl-sorted.json").read_text())

    def test_sweep_aggregates_all_trials(self):
        self.call("sweep", config=str(self.config), out=str(self.out), workers=1)
        summary = read_csv(self.out / "summary.csv")
        self.assertEqual(sorted(summary["estimator"]), [ESTIMATOR_CVMDL_SORTED, ESTIMATOR_ECDF])
        self.assertTrue((summary["trials"] == 2).all())
        self.assertEqual(len(read_csv(self.out / "trials.csv")), 4)
        self.assertEqual(TrialResult.objects.count(), 4)
        self.assertEqual(read_json(self.out / "sweep.json")["trials"], 2)

    def test_budget_below_floor(self):
        config = write_experiment(self.root, budgets=[5.0, 200.0])
        with self.assertRaises(CommandError) as ctx:
            self.call("sweep", config=str(config), out=str(self.out), workers=1)
        self.assertEqual(ctx.exception.returncode, EXIT_BUDGET)
        self.assertFalse(SweepRun.objects.exists())

    def test_invalid_config(self):
        config = write_experiment(self.root, budgets=[-1.0])
        with self.assertRaises(CommandError) as ctx:
            self.call("run", config=str(config), out=str(self.out))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_report_on_run_directory(self):
        self.call("run", config=str(self.config), out=str(self.out), estimators="ecdf")
        self.call("report", str(self.out), levels="0.9,0.99", quantiles="0.5")
        report = read_json(self.out / "report-ecdf.json")
        self.assertEqual(report["estimate"], "ecdf")
        self.assertGreaterEqual(report["cvar"]["0.99"], report["cvar"]["0.9"])

    def test_report_without_estimate(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("report", str(self.root))
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_oracle_statistics(self):
        self.call("oracle", config=str(self.config), out=str(self.out), samples=2000, budget=1000.0)
        stats = read_json(self.out / "oracle_stats.json")
        self.assertEqual(stats["best_subset"], "1")
        self.assertTrue((self.out / "correlation.csv").exists())

    def test_allocation_curve(self):
        self.call("allocation", config=str(self.config), out=str(self.out), subset="1", m="3,10", trials=2, workers=1)
        curve = read_csv(self.out / "allocation.csv")
        self.assertEqual(list(curve["m"]), [3, 10])
        self.assertEqual(list(curve["trials"]), [2, 2])

    def test_allocation_outside_feasible_range(self):
        with self.assertRaises(CommandError) as ctx:
            self.call("allocation", config=str(self.config), out=str(self.out), subset="1", m="2", workers=1)
        self.assertEqual(ctx.exception.returncode, EXIT_BUDGET)

    def test_make_pool(self):
        path = self.root / "pool.csv"
        self.call("make_pool", config=str(self.config), rows=50, out=str(path), seed=1)
        table = load_pool_table(path, (1, 1))
        self.assertEqual(table.shape, (50, 2))
        self.assertGreater(np.corrcoef(table[:, 0], table[:, 1])[0, 1], 0.5)
