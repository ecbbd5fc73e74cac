import json

from predictslums import ann, hotspot
from predictslums.conf import get_setting
from predictslums.pipeline import train_config

from ._common import (
    PredictSlumsCommand,
    add_output,
    add_seed,
    add_train_arguments,
    config_from_options,
    input_path,
    output_path,
)


class Command(PredictSlumsCommand):
    help = 'K-fold cross-validation of the network on a labeled grid'

    def add_arguments(self, parser):
        parser.add_argument('--grid', help='Labeled grid CSV (default: grid.csv in the output directory)')
        parser.add_argument('--folds', type=int, help='Number of folds K')
        add_train_arguments(parser)
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        folds = cfg.folds or get_setting('KFOLDS')
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        X, y = ann.dataset_from_grids([grid], cfg.use_coords)
        result = ann.kfold_cv(X, y, folds, train_config(cfg, 'cv'), cfg.dropout, cfg.use_coords)
        with open(output_path(cfg, 'cv.json'), 'w', encoding='utf-8') as handle:
            json.dump(result.to_dict(), handle, indent=2, sort_keys=True)
            handle.write('\n')
        self.success(f'{folds}-fold accuracy: mean {result.mean:.4f}, variance {result.variance:.6f}')
        self.stdout.write(f'  cross-validation error: {result.cv_error:.4f}')
