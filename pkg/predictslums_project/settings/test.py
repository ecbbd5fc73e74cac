from .base import *

SECRET_KEY = "predictslums-test"

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

LOGGING["loggers"]["predictslums"]["level"] = "WARNING"
