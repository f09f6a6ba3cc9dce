from pathlib import Path

from django import forms

from core.exceptions import ConfigurationError, DimensionMismatchError
from .pool import load_pool_table
from .specs import (
    ENSEMBLE_KINDS,
    KIND_GBM,
    KIND_LINEAR_GAUSSIAN,
    KIND_POOL,
    EnsembleHandle,
    GbmParams,
    LinearGaussianParams,
    ModelSpec,
    PoolSource,
)


def _real_list(value, name, positive=False, nonnegative=False):
    if not isinstance(value, (list, tuple)) or not value:
        raise forms.ValidationError(f"{name} must be a nonempty list")
    try:
        values = [float(v) for v in value]
    except (TypeError, ValueError):
        raise forms.ValidationError(f"{name} must contain numbers")
    if positive and any(not v > 0 for v in values):
        raise forms.ValidationError(f"{name} must be positive")
    if nonnegative and any(v < 0 for v in values):
        raise forms.ValidationError(f"{name} must be nonnegative")
    return values


def form_errors(form) -> dict:
    """Plain ``{field: [message, ...]}`` view of a bound form's errors."""
    return {field: [str(message) for message in messages] for field, messages in form.errors.items()}


class DefaultsForm(forms.Form):
    """Form whose missing keys fall back to class-level defaults."""

    defaults = {}

    def __init__(self, data=None, *args, **kwargs):
        merged = dict(self.defaults)
        merged.update(data or {})
        super().__init__(merged, *args, **kwargs)


class GbmParamsForm(DefaultsForm):
    """GBM extrema parameters; defaults are the financial-engineering setup."""

    defaults = {
        "mu": 0.05,
        "sigma": 0.2,
        "s0": 1.0,
        "horizon": 1.0,
        "dt_levels": [2.0 ** -14, 2.0 ** -8, 2.0 ** -6, 2.0 ** -4],
    }

    mu = forms.FloatField()
    sigma = forms.FloatField(min_value=0.0)
    s0 = forms.FloatField()
    horizon = forms.FloatField()
    dt_levels = forms.JSONField()

    def clean_s0(self):
        s0 = self.cleaned_data["s0"]
        if s0 <= 0:
            raise forms.ValidationError("s0 must be positive")
        return s0

    def clean_horizon(self):
        horizon = self.cleaned_data["horizon"]
        if horizon <= 0:
            raise forms.ValidationError("horizon must be positive")
        return horizon

    def clean_dt_levels(self):
        levels = _real_list(self.cleaned_data["dt_levels"], "dt_levels", positive=True)
        if levels != sorted(levels) or len(set(levels)) != len(levels):
            raise forms.ValidationError("dt_levels must be strictly increasing (finest first)")
        return levels

    def clean(self):
        cleaned = super().clean()
        levels = cleaned.get("dt_levels")
        horizon = cleaned.get("horizon")
        if levels and horizon:
            finest = levels[0]
            for dt in levels:
                steps = horizon / dt
                ratio = dt / finest
                if abs(steps - round(steps)) > 1e-9 * steps or abs(ratio - round(ratio)) > 1e-9 * ratio:
                    self.add_error("dt_levels", f"dt={dt} is not nested in the finest grid of the horizon")
        return cleaned

    def to_params(self) -> GbmParams:
        data = self.cleaned_data
        return GbmParams(
            mu=data["mu"],
            sigma=data["sigma"],
            s0=data["s0"],
            horizon=data["horizon"],
            dt_levels=tuple(data["dt_levels"]),
        )


class LinearGaussianForm(DefaultsForm):
    defaults = {"mean": 0.0, "std": 1.0}

    mean = forms.FloatField()
    std = forms.FloatField()
    noise_stds = forms.JSONField()

    def clean_std(self):
        std = self.cleaned_data["std"]
        if std <= 0:
            raise forms.ValidationError("std must be positive")
        return std

    def clean_noise_stds(self):
        return _real_list(self.cleaned_data["noise_stds"], "noise_stds", nonnegative=True)

    def to_params(self) -> LinearGaussianParams:
        data = self.cleaned_data
        return LinearGaussianParams(mean=data["mean"], std=data["std"], noise_stds=tuple(data["noise_stds"]))


class PoolSourceForm(DefaultsForm):
    defaults = {"replacement": False}

    path = forms.CharField()
    replacement = forms.BooleanField(required=False)


class EnsembleConfigForm(forms.Form):
    """
    Declarative ensemble config: ``kind``, ``costs``, ``dims``, ``seed`` and
    one table of kind parameters (``gbm``, ``linear_gaussian`` or ``pool``).

    Usage:
        form = EnsembleConfigForm(data, base_dir=config_path.parent)
        handle = form.build_handle()
    """

    kind = forms.ChoiceField(choices=ENSEMBLE_KINDS)
    costs = forms.JSONField()
    dims = forms.JSONField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)
    gbm = forms.JSONField(required=False)
    linear_gaussian = forms.JSONField(required=False)
    pool = forms.JSONField(required=False)

    sub_forms = {
        KIND_GBM: ("gbm", GbmParamsForm),
        KIND_LINEAR_GAUSSIAN: ("linear_gaussian", LinearGaussianForm),
        KIND_POOL: ("pool", PoolSourceForm),
    }

    def __init__(self, data=None, *args, base_dir=None, **kwargs):
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.sub_form = None
        super().__init__(data, *args, **kwargs)

    def clean_costs(self):
        costs = _real_list(self.cleaned_data["costs"], "costs", positive=True)
        if len(costs) < 2:
            raise forms.ValidationError("costs need the high-fidelity model and at least one low-fidelity model")
        if any(c == float("inf") for c in costs):
            raise forms.ValidationError("costs must be finite")
        return costs

    def clean_dims(self):
        dims = self.cleaned_data.get("dims")
        if dims in (None, ""):
            return None
        if not isinstance(dims, list) or any(not isinstance(d, int) or isinstance(d, bool) or d < 1 for d in dims):
            raise forms.ValidationError("dims must be a list of positive integers")
        return dims

    def clean(self):
        cleaned = super().clean()
        kind = cleaned.get("kind")
        costs = cleaned.get("costs")
        if not kind or not costs:
            return cleaned

        dims = cleaned.get("dims")
        if dims is None:
            dims = [2] * len(costs) if kind == KIND_GBM else [1] * len(costs)
        if len(dims) != len(costs):
            self.add_error("dims", "dims and costs must have the same length")
        cleaned["dims"] = dims
        if cleaned.get("seed") is None:
            cleaned["seed"] = 0

        key, form_class = self.sub_forms[kind]
        payload = cleaned.get(key)
        if payload is not None and not isinstance(payload, dict):
            self.add_error(key, "must be a table of parameters")
            return cleaned
        self.sub_form = form_class(payload or {})
        if not self.sub_form.is_valid():
            for field, messages in self.sub_form.errors.items():
                for message in messages:
                    self.add_error(key, f"{field}: {message}")
        return cleaned

    def build_handle(self) -> EnsembleHandle:
        """Validated EnsembleHandle (loads the pool table for pool ensembles)."""
        if not self.is_valid():
            raise ConfigurationError("invalid ensemble configuration", form_errors(self))
        data = self.cleaned_data
        specs = tuple(ModelSpec(id=i, dim=dim, cost=cost) for i, (dim, cost) in enumerate(zip(data["dims"], data["costs"])))
        kwargs = {}
        if data["kind"] == KIND_GBM:
            kwargs["gbm"] = self.sub_form.to_params()
        elif data["kind"] == KIND_LINEAR_GAUSSIAN:
            kwargs["linear_gaussian"] = self.sub_form.to_params()
        else:
            path = Path(self.sub_form.cleaned_data["path"])
            if not path.is_absolute():
                path = self.base_dir / path
            try:
                table = load_pool_table(path, data["dims"])
            except DimensionMismatchError as exc:
                raise ConfigurationError("invalid pool table", {"pool": [str(exc)]}) from exc
            kwargs["pool"] = PoolSource(
                table=table,
                replacement=self.sub_form.cleaned_data["replacement"],
                path=str(path),
            )
        return EnsembleHandle(specs=specs, kind=data["kind"], base_seed=data["seed"], **kwargs)
