"""
Django settings for the distlearn project.

Multifidelity CDF estimation (cvMDL) with a management-command front end.
No web surface: the project is driven through ``manage.py`` subcommands.
"""

import os
from pathlib import Path
from dotenv import load_dotenv
import dj_database_url

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# =============================================================================
# SECURITY
# =============================================================================
SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-dev-only-change-in-production")
DEBUG = os.getenv("DEBUG", "True").lower() in ("true", "1", "yes")
ALLOWED_HOSTS = []

# =============================================================================
# APPLICATION DEFINITION
# =============================================================================
INSTALLED_APPS = [
    # Project apps
    "core.apps.CoreConfig",
    "ensemble.apps.EnsembleConfig",
    "surrogate.apps.SurrogateConfig",
    "cdf.apps.CdfConfig",
    "estimators.apps.EstimatorsConfig",
    "cvmdl.apps.CvmdlConfig",
    "metrics.apps.MetricsConfig",
    "experiments.apps.ExperimentsConfig",
]

# =============================================================================
# DATABASE
# =============================================================================
# Run ledger only (sweeps and per-trial results). SQLite unless DATABASE_URL is set.
DATABASES = {
    "default": {
        "ENGINE": os.getenv("DB_ENGINE", "django.db.backends.sqlite3"),
        "NAME": os.getenv("DB_NAME", BASE_DIR / "db.sqlite3"),
    }
}

DATABASE_URL = os.getenv("DATABASE_URL")
if DATABASE_URL:
    DATABASES["default"] = dj_database_url.config(
        default=DATABASE_URL,
        conn_max_age=600,
        conn_health_checks=True,
    )

# =============================================================================
# INTERNATIONALIZATION
# =============================================================================
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# =============================================================================
# LOGGING
# =============================================================================
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": os.getenv("DJANGO_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "ensemble": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "estimators": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "cvmdl": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "experiments": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "surrogate": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "cdf": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "metrics": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
        "core": {
            "handlers": ["console"],
            "level": os.getenv("CVMDL_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}

# =============================================================================
# CVMDL CONFIGURATION
# =============================================================================
# Default output root for run directories (overridden by --out)
CVMDL_OUTPUT_ROOT = Path(os.getenv("CVMDL_OUTPUT_ROOT", BASE_DIR / "runs"))

# Trial worker pool size (defaults to available parallelism)
CVMDL_DEFAULT_WORKERS = int(os.getenv("CVMDL_DEFAULT_WORKERS", os.cpu_count() or 1))

# Points per dimension for d >= 2 estimator grids and quadrature
CVMDL_GRID_RESOLUTION = int(os.getenv("CVMDL_GRID_RESOLUTION", "128"))

# Tail level for the extended alpha estimate (cvMDL*)
CVMDL_TAIL_TAU = float(os.getenv("CVMDL_TAIL_TAU", "0.05"))

# Hard cap on the number of low-fidelity models (2^n - 1 subsets are enumerated)
CVMDL_MAX_LOW_FIDELITY = int(os.getenv("CVMDL_MAX_LOW_FIDELITY", "12"))

# Relative singular-value cutoff for surrogate fits; empty means max(m, d_S+1)*eps
CVMDL_RANK_RTOL = float(os.getenv("CVMDL_RANK_RTOL")) if os.getenv("CVMDL_RANK_RTOL") else None

# GBM paths generated per chunk (changing it changes the random stream layout)
CVMDL_GBM_CHUNK = int(os.getenv("CVMDL_GBM_CHUNK", "256"))
