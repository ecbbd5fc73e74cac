from predictslums import hotspot, inference
from predictslums.exceptions import LabelError

from ._common import PredictSlumsCommand, add_output, config_from_options, input_path, output_path


class Command(PredictSlumsCommand):
    help = 'Formal vs informal t-tests and the multinomial logit of hot-spot categories'

    def add_arguments(self, parser):
        parser.add_argument('--grid', help='Labeled grid CSV (default: grid.csv in the output directory)')
        parser.add_argument('--max-iter', type=int, help='Newton-Raphson iteration cap')
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        if not grid.labeled_mask.any():
            raise LabelError('grid has no labeled cells; run hotspot with --labels first')

        tests = inference.group_t_tests(grid)
        with open(output_path(cfg, 'ttest.csv'), 'w', newline='', encoding='utf-8') as handle:
            inference.write_ttest_csv(tests, handle)

        samples = inference.samples_from_grid(grid)
        model = inference.fit_mnl(samples, options['max_iter'] or cfg.mnl_max_iter, cfg.mnl_tol)
        diagnostics = inference.mnl_diagnostics(model, samples)
        report = inference.format_mnl_report(model, diagnostics)
        output_path(cfg, 'mnl_report.txt').write_text(report, encoding='utf-8')
        with open(output_path(cfg, 'mnl_coefficients.csv'), 'w', newline='', encoding='utf-8') as handle:
            inference.write_coefficients_csv(model, handle)

        for variable, results in tests.items():
            welch = results['welch']
            self.stdout.write(f'  {variable}: Welch t={welch.t:.3f} df={welch.df:.1f} p={welch.p_value:.3g}')
        self.stdout.write(report)
        if model.converged:
            self.success(f'MNL converged in {model.iterations_used} iterations')
        else:
            self.warning(f'MNL stopped at the iteration cap ({model.iterations_used})')
