"""
Config file loading for ensembles.

Files are JSON (``.json``) or TOML (anything else). An ensemble table may
be given inline or as a path to its own file.
"""
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional

from core.exceptions import ConfigurationError
from .forms import EnsembleConfigForm
from .sampling import validate
from .specs import EnsembleHandle

logger = logging.getLogger(__name__)


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a table at the top level")
    return data


def build_handle(data: dict, base_dir=None, max_low_fidelity: Optional[int] = None) -> EnsembleHandle:
    """
    Validate an ensemble table and return an immutable handle.

    Raises:
        ConfigurationError: form errors or failed ensemble validation
    """
    form = EnsembleConfigForm(data, base_dir=base_dir)
    handle = form.build_handle()
    validate(handle, max_low_fidelity=max_low_fidelity)
    logger.info(f"Built {handle.kind} ensemble with {handle.n} low-fidelity models, c_epr={handle.c_epr:g}")
    return handle


def resolve_ensemble(entry, base_dir, max_low_fidelity: Optional[int] = None) -> EnsembleHandle:
    """Build a handle from an inline table or a path relative to ``base_dir``."""
    base_dir = Path(base_dir)
    if isinstance(entry, dict):
        return build_handle(entry, base_dir=base_dir, max_low_fidelity=max_low_fidelity)
    if isinstance(entry, str):
        path = Path(entry)
        if not path.is_absolute():
            path = base_dir / path
        return build_handle(load_config_file(path), base_dir=path.parent, max_low_fidelity=max_low_fidelity)
    raise ConfigurationError("ensemble must be a table or a path", {"ensemble": ["expected table or path"]})


def load_ensemble(path, max_low_fidelity: Optional[int] = None) -> EnsembleHandle:
    path = Path(path)
    data = load_config_file(path)
    if "ensemble" in data:
        return resolve_ensemble(data["ensemble"], path.parent, max_low_fidelity)
    return build_handle(data, base_dir=path.parent, max_low_fidelity=max_low_fidelity)
