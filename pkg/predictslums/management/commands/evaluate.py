import json

from predictslums import ann, hotspot
from predictslums.exceptions import ConfigError
from predictslums.model_io import load_model

from ._common import PredictSlumsCommand, add_output, config_from_options, input_path, output_path


class Command(PredictSlumsCommand):
    help = 'Confusion matrix and overall accuracy of a trained model on labeled cells'

    def add_arguments(self, parser):
        parser.add_argument('--model', help='Model file written by train')
        parser.add_argument('--grid', help='Labeled grid CSV (default: grid.csv in the output directory)')
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        if not cfg.model:
            raise ConfigError('pass --model')
        model = load_model(cfg.model)
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        X, y = ann.dataset_from_grids([grid], model.use_coords)
        report = ann.evaluate(model, X, y)
        with open(output_path(cfg, 'evaluation.json'), 'w', encoding='utf-8') as handle:
            json.dump({'labeled': report.to_dict()}, handle, indent=2, sort_keys=True)
            handle.write('\n')

        (ff, fi), (if_, ii) = report.confusion.tolist()
        self.stdout.write('               actual formal  actual informal')
        self.stdout.write(f'pred formal    {ff:>13}  {fi:>15}')
        self.stdout.write(f'pred informal  {if_:>13}  {ii:>15}')
        self.success(f'Overall accuracy {report.overall_accuracy:.4f} over {report.total} cells')
