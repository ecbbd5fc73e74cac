"""
Settings access for the predictslums app.

Values come from the PREDICTSLUMS dict in the Django settings, falling back to
the built-in defaults below.
"""

from django.conf import settings


DEFAULTS = {
    'CELL_SIZE': 100.0,
    'BAND_DISTANCE': 344.0,
    'ALPHA': 0.05,
    'ENVELOPE_PERMUTATIONS': 99,
    'MORAN_PERMUTATIONS': 99,
    'SNAP_TOLERANCE': 0.5,
    'SEED': 0,
    'LEARNING_RATE': 0.001,
    'BATCH_SIZE': 10,
    'EPOCHS': 600,
    'TRAIN_FRACTION': 0.7,
    'KFOLDS': 10,
    'DROPOUT': 0.0,
    'MNL_MAX_ITER': 100,
    'MNL_TOL': 1e-8,
    'OUTPUT_DIR': 'output',
}


def get_setting(name):
    """
    Return a predictslums setting.

    Args:
        name: Key of the PREDICTSLUMS settings dict

    Returns:
        The configured value, or the built-in default
    """
    if name not in DEFAULTS:
        raise KeyError(f'Unknown predictslums setting: {name}')
    overrides = getattr(settings, 'PREDICTSLUMS', None) or {}
    return overrides.get(name, DEFAULTS[name])
