import json

from predictslums import pointstats
from predictslums.pipeline import derive_seed, load_points, resolve_frame

from ._common import (
    PredictSlumsCommand,
    add_input_arguments,
    add_output,
    add_seed,
    config_from_options,
    input_path,
    output_path,
)


class Command(PredictSlumsCommand):
    help = 'Average nearest neighbour ratio and multi-distance L(d) with a CSR envelope'

    def add_arguments(self, parser):
        add_input_arguments(parser)
        parser.add_argument('--permutations', type=int, help='CSR resamples for the envelope')
        parser.add_argument('--distances', type=float, nargs='+', help='Evaluation distances in meters')
        parser.add_argument('--nn-only', action='store_true', help='Skip the K-function')
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        if not cfg.polylines:
            cfg.points = str(input_path(options['points'], cfg, 'points.csv'))
        ps = load_points(cfg)
        frame = resolve_frame(cfg, ps)

        nn = pointstats.nearest_neighbor_stat(ps, frame)
        with open(output_path(cfg, 'nn.json'), 'w', encoding='utf-8') as handle:
            json.dump(nn.to_dict(), handle, indent=2, sort_keys=True)
            handle.write('\n')
        self.success(f'Nn ratio {nn.ratio:.6f} (z {nn.z_score:.3f}, {nn.pattern})')

        if options['nn_only']:
            return
        distances = cfg.k_distances or pointstats.default_distances(frame)
        result = pointstats.ripley_l(ps, frame, distances, cfg.permutations,
                                     seed=derive_seed(cfg.seed, 'kfunction'))
        with open(output_path(cfg, 'kfunction.csv'), 'w', newline='', encoding='utf-8') as handle:
            result.write_csv(handle)
        clustered = result.distances[result.clustered]
        if len(clustered):
            self.success(f'Clustered beyond the envelope at {len(clustered)} of {len(distances)} distances')
        else:
            self.warning('L(d) stays inside the CSR envelope at every distance')
