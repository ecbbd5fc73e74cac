from .base import *

DEBUG = True

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = "django-insecure-predictslums-dev-only"

ALLOWED_HOSTS = []

LOGGING["loggers"]["predictslums"]["level"] = os.environ.get("PREDICTSLUMS_LOG_LEVEL", "DEBUG")


try:
    from .local import *
except ImportError:
    pass
