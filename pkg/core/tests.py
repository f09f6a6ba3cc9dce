import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.apps import apps
from django.conf import settings
from django.test import SimpleTestCase

from .artifacts import read_csv, read_json, read_jsonl, write_csv, write_json, write_jsonl
from .exceptions import ConfigurationError, CvmdlError, InsufficientBudgetError
from .seeding import SeedStreams, stable_hash_int


class SeedStreamsTests(SimpleTestCase):
    def test_same_arguments_same_stream(self):
        first = SeedStreams(7).spawn("explore", 0, 1).random(5)
        second = SeedStreams(7).spawn("explore", 0, 1).random(5)
        np.testing.assert_array_equal(first, second)

    def test_purpose_and_counters_separate_streams(self):
        seeds = SeedStreams(7)
        base = seeds.spawn("explore", 0, 1).random(5)
        self.assertFalse(np.array_equal(base, seeds.spawn("exploit", 0, 1).random(5)))
        self.assertFalse(np.array_equal(base, seeds.spawn("explore", 0, 2).random(5)))
        self.assertFalse(np.array_equal(base, SeedStreams(8).spawn("explore", 0, 1).random(5)))

    def test_child_is_deterministic(self):
        self.assertEqual(
            SeedStreams(3).child("trial", 1, 4).master_seed,
            SeedStreams(3).child("trial", 1, 4).master_seed,
        )
        self.assertNotEqual(
            SeedStreams(3).child("trial", 1, 4).master_seed,
            SeedStreams(3).child("trial", 1, 5).master_seed,
        )

    def test_stable_hash(self):
        self.assertEqual(stable_hash_int("explore"), stable_hash_int("explore"))
        self.assertLess(stable_hash_int("explore"), 2 ** 64)

    def test_negative_seed(self):
        with self.assertRaises(ValueError):
            SeedStreams(-1)


class ArtifactTests(SimpleTestCase):
    def test_json_converts_numpy(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_json(Path(tmp) / "nested" / "out.json", {"a": np.arange(3), "b": np.float64(0.5), 2: (1, 2)})
            self.assertEqual(read_json(path), {"a": [0, 1, 2], "b": 0.5, "2": [1, 2]})

    def test_json_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            first = write_json(Path(tmp) / "a.json", {"z": 1, "a": 2}).read_text()
            second = write_json(Path(tmp) / "b.json", {"a": 2, "z": 1}).read_text()
        self.assertEqual(first, second)

    def test_jsonl_records(self):
        records = [{"m": 5, "selected": "1"}, {"m": 10, "selected": "1,2"}]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_jsonl(Path(tmp) / "trace.jsonl", records)
            self.assertEqual(read_jsonl(path), records)

    def test_csv_from_rows_and_frames(self):
        rows = [{"budget": 100.0, "error": 0.1}, {"budget": 200.0, "error": 0.05}]
        with tempfile.TemporaryDirectory() as tmp:
            from_rows = read_csv(write_csv(Path(tmp) / "rows.csv", rows))
            from_frame = read_csv(write_csv(Path(tmp) / "frame.csv", pd.DataFrame(rows)))
        self.assertEqual(list(from_rows.columns), ["budget", "error"])
        self.assertTrue(from_rows.equals(from_frame))
        self.assertEqual(from_rows["error"].iloc[1], 0.05)


class ExceptionTests(SimpleTestCase):
    def test_hierarchy(self):
        self.assertTrue(issubclass(InsufficientBudgetError, CvmdlError))
        self.assertTrue(issubclass(InsufficientBudgetError, ValueError))

    def test_configuration_error_lists_fields(self):
        error = ConfigurationError("invalid", {"budgets": ["must be positive"]})
        self.assertIn("budgets: must be positive", str(error))
        self.assertEqual(str(ConfigurationError("plain")), "plain")


class LoggingSettingsTests(SimpleTestCase):
    def test_every_project_app_has_a_logger(self):
        project_apps = [config.name for config in apps.get_app_configs() if not config.name.startswith("django.")]
        configured = settings.LOGGING["loggers"]
        for name in project_apps:
            self.assertIn(name, configured)
            self.assertFalse(configured[name]["propagate"])
            self.assertEqual(configured[name]["handlers"], ["console"])
