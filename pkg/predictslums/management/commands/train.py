import json

from predictslums import ann, hotspot
from predictslums.model_io import save_model
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
    help = 'Train the formal/informal network on one or more labeled grids'

    def add_arguments(self, parser):
        parser.add_argument('--grid', nargs='+', help='Labeled grid CSVs (several cities are stacked)')
        add_train_arguments(parser)
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        paths = options['grid'] or [input_path(None, cfg, 'grid.csv')]
        grids = [hotspot.load_grid(p) for p in paths]
        X, y = ann.dataset_from_grids(grids, cfg.use_coords)

        model, report = ann.train(X, y, train_config(cfg), cfg.dropout, cfg.use_coords)
        path = save_model(model, output_path(cfg, 'model.bin'))
        with open(output_path(cfg, 'train_history.csv'), 'w', newline='', encoding='utf-8') as handle:
            report.write_history_csv(handle)
        with open(output_path(cfg, 'evaluation.json'), 'w', encoding='utf-8') as handle:
            json.dump({'validation': report.to_dict()}, handle, indent=2, sort_keys=True)
            handle.write('\n')

        self.success(f'Saved model to {path}')
        self.stdout.write(f'  validation accuracy: {report.overall_accuracy:.4f} '
                          f'({report.total} cells, {cfg.train.epochs} epochs)')
