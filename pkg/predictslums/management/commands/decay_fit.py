import json

from predictslums import hotspot
from predictslums.decay import fit_count_distribution

from ._common import PredictSlumsCommand, add_output, config_from_options, input_path, output_path


class Command(PredictSlumsCommand):
    help = 'Fit the exponential decay of the per-cell intersection count distribution'

    def add_arguments(self, parser):
        parser.add_argument('--grid', help='Grid CSV (default: grid.csv in the output directory)')
        parser.add_argument('--unweighted', action='store_true',
                            help='Plain least squares instead of weighting bins by frequency')
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        fit = fit_count_distribution(grid, weighted=not options['unweighted'])
        with open(output_path(cfg, 'decay.json'), 'w', encoding='utf-8') as handle:
            json.dump(fit.to_dict(), handle, indent=2, sort_keys=True)
            handle.write('\n')
        with open(output_path(cfg, 'decay_histogram.csv'), 'w', newline='', encoding='utf-8') as handle:
            fit.write_histogram_csv(handle)
        self.success(f'lambda {fit.lambda_:.4f}, amplitude {fit.amplitude:.4f}, r2 {fit.r_squared:.4f}')
