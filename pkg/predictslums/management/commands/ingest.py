from predictslums import ingest
from predictslums.exceptions import ConfigError
from predictslums.pipeline import load_points, resolve_frame

from ._common import PredictSlumsCommand, add_input_arguments, add_output, config_from_options, output_path


class Command(PredictSlumsCommand):
    help = 'Read incident points (or extract street intersections) and write points.csv'

    def add_arguments(self, parser):
        add_input_arguments(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        if not cfg.points and not cfg.polylines:
            raise ConfigError('pass --points or --polylines')
        ps = load_points(cfg)
        frame = resolve_frame(cfg, ps)
        path = output_path(cfg, 'points.csv')
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            ingest.write_point_csv(ps, handle)
        self.success(f'Wrote {ps.n} points to {path}')
        self.stdout.write(f'  frame: {frame.to_list()} ({frame.area / 1e6:.3f} km2)')
