from predictslums import ann, hotspot
from predictslums.exceptions import ConfigError
from predictslums.model_io import load_model

from ._common import PredictSlumsCommand, add_output, config_from_options, input_path, output_path


class Command(PredictSlumsCommand):
    help = 'Predict formal/informal status of every grid cell with a trained model'

    def add_arguments(self, parser):
        parser.add_argument('--model', help='Model file written by train')
        parser.add_argument('--grid', help='Categorized grid CSV (default: grid.csv in the output directory)')
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        if not cfg.model:
            raise ConfigError('pass --model')
        model = load_model(cfg.model)
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        predictions = ann.predict_grid(model, grid)
        path = output_path(cfg, 'predictions.csv')
        hotspot.save_grid(predictions, path)
        self.success(f'Predicted {int(predictions.pred.sum())} informal cells of '
                     f'{predictions.n_cells}; wrote {path}')
