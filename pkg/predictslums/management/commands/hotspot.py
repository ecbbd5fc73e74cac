import json

from predictslums import hotspot
from predictslums.pipeline import score_grid

from ._common import (
    PredictSlumsCommand,
    add_grid_arguments,
    add_output,
    add_seed,
    config_from_options,
    input_path,
    output_path,
)


class Command(PredictSlumsCommand):
    help = 'Gi* hot spots with FDR correction, optional Local Moran and label join'

    def add_arguments(self, parser):
        parser.add_argument('--grid', help='Grid CSV (default: grid.csv in the output directory)')
        parser.add_argument('--labels', help='Label source (.csv col,row,label or .geojson polygons)')
        parser.add_argument('--moran', action='store_true', help='Also compute Local Moran clusters')
        add_grid_arguments(parser)
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options, moran=options['moran'])
        grid = hotspot.load_grid(input_path(options['grid'], cfg, 'grid.csv'))
        grid, fdr = score_grid(grid, cfg)
        if cfg.labels:
            grid = hotspot.join_labels(grid, hotspot.load_labels(cfg.labels))

        summary = hotspot.fdr_summary(grid, fdr)
        summary.update(band=cfg.band, alpha=cfg.alpha, cells=grid.n_cells)
        with open(output_path(cfg, 'hotspot.json'), 'w', encoding='utf-8') as handle:
            json.dump(summary, handle, indent=2, sort_keys=True)
            handle.write('\n')
        hotspot.save_grid(grid, output_path(cfg, 'grid.csv'))

        fdr_counts = summary['fdr']
        self.success(
            f"{fdr_counts['hot']} hot, {fdr_counts['not_significant']} not significant, "
            f"{fdr_counts['cold']} cold cells (band {cfg.band:g} m, FDR {cfg.alpha:g})"
        )
        raw = summary['unadjusted']
        self.stdout.write(f"  without correction: {raw['hot']} hot, {raw['cold']} cold")
