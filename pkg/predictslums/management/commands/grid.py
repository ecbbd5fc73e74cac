from predictslums import hotspot
from predictslums.pipeline import build_grid, load_points, resolve_frame

from ._common import (
    PredictSlumsCommand,
    add_grid_arguments,
    add_input_arguments,
    add_output,
    config_from_options,
    input_path,
    output_path,
)


class Command(PredictSlumsCommand):
    help = 'Aggregate points to the cell lattice and count NNeighbors around each centroid'

    def add_arguments(self, parser):
        add_input_arguments(parser)
        add_grid_arguments(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        if not cfg.polylines:
            cfg.points = str(input_path(options['points'], cfg, 'points.csv'))
        ps = load_points(cfg)
        frame = resolve_frame(cfg, ps)
        grid = build_grid(ps, frame, cfg)
        path = output_path(cfg, 'grid.csv')
        hotspot.save_grid(grid, path)
        self.success(f'Wrote {grid.n_cols}x{grid.n_rows} grid to {path}')
