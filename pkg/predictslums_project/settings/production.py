import os

from django.core.exceptions import ImproperlyConfigured

from .base import *

DEBUG = False

# Fetch secret key from environment variable (required in production)
SECRET_KEY = os.environ.get('SECRET_KEY')
if not SECRET_KEY:
    raise ImproperlyConfigured("The SECRET_KEY environment variable must be set in production.")

ALLOWED_HOSTS = []

# Batch servers keep their outputs outside the checkout.
if os.environ.get('PREDICTSLUMS_OUTPUT_DIR'):
    PREDICTSLUMS["OUTPUT_DIR"] = Path(os.environ['PREDICTSLUMS_OUTPUT_DIR'])

try:
    from .local import *
except ImportError:
    pass
