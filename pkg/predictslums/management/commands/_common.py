"""
Shared flag handling for the predictslums management commands.
"""

from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from predictslums.conf import get_setting
from predictslums.exceptions import PredictSlumsError
from predictslums.pipeline import PipelineConfig, output_lock


# option name -> PipelineConfig field
CONFIG_OPTIONS = {
    'points': 'points',
    'polylines': 'polylines',
    'labels': 'labels',
    'model': 'model',
    'frame': 'frame',
    'cell_size': 'cell_size',
    'band': 'band',
    'alpha': 'alpha',
    'permutations': 'permutations',
    'distances': 'k_distances',
    'folds': 'folds',
    'dropout': 'dropout',
    'dedupe': 'dedupe',
    'snap_tolerance': 'snap_tolerance',
    'seed': 'seed',
    'output': 'output_dir',
}

TRAIN_OPTIONS = ('epochs', 'batch_size', 'learning_rate')


def add_output(parser):
    parser.add_argument('--output', help='Output directory (default: PREDICTSLUMS OUTPUT_DIR)')


def add_seed(parser):
    parser.add_argument('--seed', type=int, help='Root seed of every random stream')


def add_input_arguments(parser):
    parser.add_argument('--points', help='Incident point CSV (x,y)')
    parser.add_argument('--polylines', help='Street polylines (.csv line_id,seq,x,y or .geojson)')
    parser.add_argument('--dedupe', type=float, help='Merge points closer than this many meters')
    parser.add_argument('--snap-tolerance', type=float, help='Intersection snapping tolerance in meters')
    parser.add_argument('--frame', type=float, nargs=4, metavar=('MIN_X', 'MIN_Y', 'MAX_X', 'MAX_Y'),
                        help='Study frame (default: bounding rectangle of the points)')
    parser.add_argument('--force-degrees', action='store_true',
                        help='Accept coordinates that look like geographic degrees')


def add_grid_arguments(parser):
    parser.add_argument('--cell-size', type=float, help='Grid cell side in meters')
    parser.add_argument('--band', type=float, help='Band distance in meters (344 or 334)')
    parser.add_argument('--alpha', type=float, help='FDR level')


def add_train_arguments(parser):
    parser.add_argument('--epochs', type=int, help='Training epochs')
    parser.add_argument('--batch-size', type=int, help='Mini-batch size')
    parser.add_argument('--learning-rate', type=float, help='Adam learning rate')
    parser.add_argument('--dropout', type=float, help='Dropout rate after each hidden layer')
    parser.add_argument('--no-coords', action='store_true', help='Train without centroid coordinates')


def config_from_options(options, **fixed):
    """
    PipelineConfig from settings defaults overridden by the given flags.
    """
    values = {}
    for option, name in CONFIG_OPTIONS.items():
        if options.get(option) is not None:
            values[name] = options[option]
    values.update(fixed)
    cfg = PipelineConfig(**values)
    train_values = {o: options[o] for o in TRAIN_OPTIONS if options.get(o) is not None}
    if train_values:
        cfg.train = replace(cfg.train, **train_values)
    if options.get('no_coords'):
        cfg.use_coords = False
    if options.get('force_degrees'):
        cfg.force_degrees = True
    return cfg


def output_path(cfg, filename):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / filename


def input_path(value, cfg, filename):
    """
    Explicit input path, or the stage file of the output directory.
    """
    return Path(value) if value else Path(cfg.output_dir) / filename


class PredictSlumsCommand(BaseCommand):
    """
    Base command: subclasses implement run(); library errors become
    CommandErrors carrying the error's exit code. The output directory is
    locked while run() writes to it unless locks_output is False.
    """

    locks_output = True

    def handle(self, *args, **options):
        try:
            with self.lock_output(options):
                self.run(**options)
        except PredictSlumsError as e:
            raise CommandError(str(e), returncode=e.exit_code)

    def lock_output(self, options):
        if not self.locks_output:
            return nullcontext()
        out = Path(options.get('output') or get_setting('OUTPUT_DIR'))
        out.mkdir(parents=True, exist_ok=True)
        return output_lock(out)

    def run(self, **options):
        raise NotImplementedError

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    def warning(self, message):
        self.stdout.write(self.style.WARNING(message))
