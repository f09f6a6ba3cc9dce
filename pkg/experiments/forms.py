from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from django import forms
from django.conf import settings

from core.exceptions import ConfigurationError
from ensemble.config import load_config_file, resolve_ensemble
from ensemble.forms import DefaultsForm, _real_list, form_errors
from ensemble.specs import EnsembleHandle
from estimators.exploitation import ALPHA_PLAIN
from estimators.weights import KIND_CONSTANT, KIND_RECTANGLE, WEIGHT_KINDS, WeightSpec
from cvmdl.driver import ALPHA_MODES

ESTIMATOR_ECDF = "ecdf"
ESTIMATOR_CVMDL = "cvmdl"
ESTIMATOR_CVMDL_SORTED = "cvmdl-sorted"
ESTIMATOR_STAR = "cvmdl-star"
ESTIMATOR_STAR_SORTED = "cvmdl-star-sorted"

ESTIMATORS = [
    (ESTIMATOR_ECDF, "Empirical CDF of the high-fidelity model"),
    (ESTIMATOR_CVMDL, "Adaptive control-variate estimate, unsorted"),
    (ESTIMATOR_CVMDL_SORTED, "Adaptive control-variate estimate after alternating sort"),
    (ESTIMATOR_STAR, "Oracle subset and exploration size, unsorted"),
    (ESTIMATOR_STAR_SORTED, "Oracle subset and exploration size after alternating sort"),
]
ESTIMATOR_NAMES = [name for name, _ in ESTIMATORS]


@dataclass
class ExperimentConfig:
    name: str
    handle: EnsembleHandle
    budgets: list
    trials: int
    estimators: list
    weight: WeightSpec
    resolution: int
    seed: int
    output_dir: Path
    oracle_samples: int = 100000
    oracle_file: Optional[Path] = None
    oracle_analytic: bool = False
    stats_samples: int = 50000
    alpha_mode: str = ALPHA_PLAIN
    tau: float = 0.05
    levels: list = field(default_factory=lambda: [0.99])
    rtol: Optional[float] = None
    gbm_chunk: int = 256
    snapshot: dict = field(default_factory=dict)

    @property
    def needs_star(self) -> bool:
        return any(name.startswith(ESTIMATOR_STAR) for name in self.estimators)


class WeightForm(DefaultsForm):
    defaults = {"kind": KIND_CONSTANT, "resolution": 128}

    kind = forms.ChoiceField(choices=WEIGHT_KINDS)
    bounds = forms.JSONField(required=False)
    resolution = forms.IntegerField(min_value=1)

    def clean(self):
        cleaned = super().clean()
        if cleaned.get("kind") != KIND_RECTANGLE:
            return cleaned
        bounds = cleaned.get("bounds")
        if not isinstance(bounds, list) or not bounds:
            self.add_error("bounds", "a rectangle weight needs a list of [lo, hi] pairs")
            return cleaned
        pairs = []
        for pair in bounds:
            try:
                lo, hi = _real_list(pair, "bounds")
            except (forms.ValidationError, ValueError):
                self.add_error("bounds", "every side must be a [lo, hi] pair of numbers")
                return cleaned
            if not lo < hi:
                self.add_error("bounds", f"side [{lo}, {hi}] is empty")
            pairs.append((lo, hi))
        cleaned["bounds"] = tuple(pairs)
        return cleaned

    def to_weight(self) -> WeightSpec:
        data = self.cleaned_data
        return WeightSpec(kind=data["kind"], bounds=data.get("bounds") or (), resolution=data["resolution"])


class OracleForm(DefaultsForm):
    defaults = {"samples": 100000, "stats_samples": 50000, "analytic": False}

    samples = forms.IntegerField(min_value=1)
    stats_samples = forms.IntegerField(min_value=2)
    file = forms.CharField(required=False)
    analytic = forms.BooleanField(required=False)


class ExperimentConfigForm(forms.Form):
    """
    Validates an experiment file.

    ``ensemble`` is an inline table or a path to an ensemble file, relative
    to the experiment file's directory.
    """

    name = forms.CharField(required=False)
    ensemble = forms.Field()
    budgets = forms.JSONField()
    trials = forms.IntegerField(required=False, min_value=1)
    estimators = forms.JSONField(required=False)
    weight = forms.JSONField(required=False)
    grid = forms.JSONField(required=False)
    oracle = forms.JSONField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    output = forms.CharField(required=False)
    alpha_mode = forms.ChoiceField(choices=ALPHA_MODES, required=False)
    tau = forms.FloatField(required=False)
    levels = forms.JSONField(required=False)

    def __init__(self, data=None, *args, base_dir=None, **kwargs):
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.weight_form = None
        self.oracle_form = None
        super().__init__(data, *args, **kwargs)

    def clean_ensemble(self):
        entry = self.cleaned_data["ensemble"]
        if not isinstance(entry, (dict, str)):
            raise forms.ValidationError("ensemble must be a table or a path to an ensemble file")
        return entry

    def clean_budgets(self):
        budgets = _real_list(self.cleaned_data["budgets"], "budgets", positive=True)
        if any(b >= a for a, b in zip(budgets[1:], budgets)):
            raise forms.ValidationError("budgets must be strictly ascending")
        return budgets

    def clean_estimators(self):
        estimators = self.cleaned_data.get("estimators")
        if estimators in (None, ""):
            return [ESTIMATOR_ECDF, ESTIMATOR_CVMDL_SORTED]
        if not isinstance(estimators, list) or not estimators:
            raise forms.ValidationError("estimators must be a nonempty list")
        unknown = [name for name in estimators if name not in ESTIMATOR_NAMES]
        if unknown:
            raise forms.ValidationError(f"unknown estimators {unknown}; choose from {ESTIMATOR_NAMES}")
        return [name for name in ESTIMATOR_NAMES if name in estimators]

    def clean_tau(self):
        tau = self.cleaned_data.get("tau")
        if tau is None:
            return settings.CVMDL_TAIL_TAU
        if not 0 < tau < 0.5:
            raise forms.ValidationError("tau must lie in (0, 1/2)")
        return tau

    def clean_levels(self):
        levels = self.cleaned_data.get("levels")
        if levels in (None, ""):
            return [0.99]
        levels = _real_list(levels, "levels")
        if any(not 0 < a < 1 for a in levels):
            raise forms.ValidationError("CVaR levels must lie in (0, 1)")
        return levels

    def clean_grid(self):
        grid = self.cleaned_data.get("grid") or {}
        if not isinstance(grid, dict):
            raise forms.ValidationError("grid must be a table")
        resolution = grid.get("resolution", settings.CVMDL_GRID_RESOLUTION)
        if not isinstance(resolution, int) or isinstance(resolution, bool) or resolution < 2:
            raise forms.ValidationError("grid resolution must be an integer >= 2")
        return {"resolution": resolution}

    def _sub_form(self, key, form_class):
        payload = self.cleaned_data.get(key)
        if payload is not None and not isinstance(payload, dict):
            self.add_error(key, "must be a table")
            return None
        sub_form = form_class(payload or {})
        if not sub_form.is_valid():
            for name, messages in sub_form.errors.items():
                for message in messages:
                    self.add_error(key, f"{name}: {message}")
        return sub_form

    def clean(self):
        cleaned = super().clean()
        if cleaned.get("trials") is None:
            cleaned["trials"] = 1
        if cleaned.get("seed") is None:
            cleaned["seed"] = 0
        if not cleaned.get("alpha_mode"):
            cleaned["alpha_mode"] = ALPHA_PLAIN
        cleaned["name"] = cleaned.get("name") or "experiment"
        self.weight_form = self._sub_form("weight", WeightForm)
        self.oracle_form = self._sub_form("oracle", OracleForm)
        return cleaned

    def build(self, max_low_fidelity: Optional[int] = None) -> ExperimentConfig:
        """
        Resolve the ensemble and return the validated experiment.

        Raises:
            ConfigurationError: form errors, ensemble errors or a weight unusable in the ensemble's dimension
        """
        if not self.is_valid():
            raise ConfigurationError("invalid experiment configuration", form_errors(self))
        data = self.cleaned_data
        handle = resolve_ensemble(data["ensemble"], self.base_dir, max_low_fidelity or settings.CVMDL_MAX_LOW_FIDELITY)
        weight = self.weight_form.to_weight()
        try:
            weight.check(handle.d)
        except ValueError as exc:
            raise ConfigurationError("weight does not fit the ensemble", {"weight": [str(exc)]}) from exc

        oracle = self.oracle_form.cleaned_data
        oracle_file = None
        if oracle.get("file"):
            oracle_file = Path(oracle["file"])
            if not oracle_file.is_absolute():
                oracle_file = self.base_dir / oracle_file
        output = Path(data["output"]) if data.get("output") else Path(settings.CVMDL_OUTPUT_ROOT) / data["name"]
        if not output.is_absolute() and data.get("output"):
            output = self.base_dir / output
        return ExperimentConfig(
            name=data["name"],
            handle=handle,
            budgets=data["budgets"],
            trials=data["trials"],
            estimators=data["estimators"],
            weight=weight,
            resolution=data["grid"]["resolution"],
            seed=data["seed"],
            output_dir=output,
            oracle_samples=oracle["samples"],
            oracle_file=oracle_file,
            oracle_analytic=oracle["analytic"],
            stats_samples=oracle["stats_samples"],
            alpha_mode=data["alpha_mode"],
            tau=data["tau"],
            levels=data["levels"],
            rtol=settings.CVMDL_RANK_RTOL,
            gbm_chunk=settings.CVMDL_GBM_CHUNK,
            snapshot=dict(self.data),
        )


def load_experiment(path, overrides=None) -> ExperimentConfig:
    """Read an experiment file (JSON or TOML) and validate it, applying CLI overrides."""
    path = Path(path)
    data = load_config_file(path)
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return ExperimentConfigForm(data, base_dir=path.parent).build()
