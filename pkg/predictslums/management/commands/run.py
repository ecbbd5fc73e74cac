from predictslums.exceptions import PredictSlumsError
from predictslums.hotspot import Category
from predictslums.models import PipelineRun
from predictslums.pipeline import band_sweep, run_pipeline

from ._common import (
    PredictSlumsCommand,
    add_grid_arguments,
    add_input_arguments,
    add_output,
    add_seed,
    add_train_arguments,
    config_from_options,
)


class Command(PredictSlumsCommand):
    help = 'Run the full pipeline (or a band-distance sweep) and write every artifact'
    # run_pipeline and band_sweep hold the lock themselves
    locks_output = False

    def add_arguments(self, parser):
        add_input_arguments(parser)
        parser.add_argument('--labels', help='Label source (.csv col,row,label or .geojson polygons)')
        parser.add_argument('--model', help='Predict with this trained model instead of training')
        add_grid_arguments(parser)
        parser.add_argument('--permutations', type=int, help='CSR resamples for the K-function envelope')
        parser.add_argument('--distances', type=float, nargs='+', help='K-function distances in meters')
        parser.add_argument('--no-kfunction', action='store_true', help='Skip the K-function')
        parser.add_argument('--moran', action='store_true', help='Also compute Local Moran clusters')
        add_train_arguments(parser)
        parser.add_argument('--folds', type=int, help='Also run K-fold cross-validation (K >= 2)')
        parser.add_argument('--sweep', type=float, nargs='+', metavar='BAND',
                            help='Report validation accuracy for each band instead of a full run')
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options, kfunction=not options['no_kfunction'], moran=options['moran'])
        if options['sweep']:
            rows = band_sweep(cfg, options['sweep'])
            for row in rows:
                self.stdout.write(f"  band {row['band']:>7g} m: {row['hot']} hot, {row['cold']} cold, "
                                  f"accuracy {row['validation_accuracy']:.4f}")
            self.success(f'Band sweep written to {cfg.output_dir}/sweep.csv')
            return

        cfg.validate()
        ledger = PipelineRun.objects.create(output_dir=str(cfg.output_dir), seed=cfg.seed,
                                            config=cfg.to_dict())
        try:
            result = run_pipeline(cfg)
        except PredictSlumsError as e:
            ledger.mark_failed(getattr(e, 'stage', ''), e)
            raise
        ledger.mark_complete()

        self.success(f'Pipeline complete: {len(result.files)} files in {result.output_dir}')
        hot = int((result.grid.category == Category.HOT.value).sum())
        cold = int((result.grid.category == Category.COLD.value).sum())
        self.stdout.write(f'  hot spots: {hot}, cold spots: {cold}')
        if result.report is not None:
            self.stdout.write(f'  validation accuracy: {result.report.overall_accuracy:.4f}')
        if result.kfold is not None:
            self.stdout.write(f'  {cfg.folds}-fold accuracy: mean {result.kfold.mean:.4f}, '
                              f'variance {result.kfold.variance:.6f}')
