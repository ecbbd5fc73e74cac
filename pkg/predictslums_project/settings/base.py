"""
Django settings for predictslums_project project.

The project hosts the predictslums app: a batch pipeline for spatial hot-spot
analysis of street intersections and informal-settlement prediction. It has no
web surface; Django provides settings, management commands, the run ledger
database and the test runner.

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/
"""

# Build paths inside the project like this: BASE_DIR / 'subdir'.
from pathlib import Path
import os
try:
    import dj_database_url
except Exception:
    dj_database_url = None

PROJECT_DIR = Path(__file__).resolve().parent.parent
BASE_DIR = PROJECT_DIR.parent


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    "predictslums",
]

MIDDLEWARE = []


# Database (run ledger)
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

if dj_database_url is not None:
    cfg = dj_database_url.config(
        default=os.environ.get('DATABASE_URL'),
        conn_max_age=600,
        conn_health_checks=True,
    ) or None
    if cfg:
        DATABASES = {"default": cfg}
    else:
        # dj_database_url present but no DATABASE_URL provided; fall back to sqlite
        DATABASES = {
            "default": {
                "ENGINE": "django.db.backends.sqlite3",
                "NAME": BASE_DIR / "db.sqlite3",
            }
        }
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "predictslums": {
            "handlers": ["console"],
            "level": os.environ.get("PREDICTSLUMS_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}


# predictSLUMS settings
# Every key can be overridden per run from the command line.

PREDICTSLUMS = {
    "CELL_SIZE": 100.0,
    # Optimized band distance for Greater Cairo. Some maps of the same
    # analysis use 334 m; pass --band 334 for those.
    "BAND_DISTANCE": 344.0,
    "ALPHA": 0.05,
    "ENVELOPE_PERMUTATIONS": 99,
    "MORAN_PERMUTATIONS": 99,
    "SNAP_TOLERANCE": 0.5,
    "SEED": 0,
    "LEARNING_RATE": 0.001,
    "BATCH_SIZE": 10,
    "EPOCHS": 600,
    "TRAIN_FRACTION": 0.7,
    "KFOLDS": 10,
    "DROPOUT": 0.0,
    "MNL_MAX_ITER": 100,
    "MNL_TOL": 1e-8,
    "OUTPUT_DIR": BASE_DIR / "output",
}
