import json

from predictslums import hotspot, ingest
from predictslums.conf import get_setting
from predictslums.synthetic import default_city_spec, generate_synthetic_city

from ._common import PredictSlumsCommand, add_output, add_seed, config_from_options, output_path


class Command(PredictSlumsCommand):
    help = 'Generate a synthetic city: incident points and formal/informal label polygons'

    def add_arguments(self, parser):
        parser.add_argument('--squares', type=int, default=5, help='City side length in 1 km squares')
        parser.add_argument('--informal', type=int, default=5, help='Number of informal blobs')
        parser.add_argument('--sparse', type=int, default=5, help='Number of sparse large-lot formal squares')
        add_seed(parser)
        add_output(parser)

    def run(self, **options):
        cfg = config_from_options(options)
        seed = cfg.seed if options['seed'] is not None else get_setting('SEED')
        spec = default_city_spec(seed, squares=options['squares'],
                                 n_informal=options['informal'], n_sparse=options['sparse'])
        ps, labels = generate_synthetic_city(spec)

        with open(output_path(cfg, 'points.csv'), 'w', newline='', encoding='utf-8') as handle:
            ingest.write_point_csv(ps, handle)
        with open(output_path(cfg, 'labels.geojson'), 'w', encoding='utf-8') as handle:
            hotspot.write_label_geojson(labels, handle)
        with open(output_path(cfg, 'synth.json'), 'w', encoding='utf-8') as handle:
            json.dump({
                'seed': seed,
                'frame': spec.frame.to_list(),
                'formal_blocks': len(spec.formal_blocks),
                'informal_blobs': len(spec.informal_blobs),
                'points': ps.n,
            }, handle, indent=2, sort_keys=True)
            handle.write('\n')
        self.success(f'Synthetic city with {ps.n} points written to {cfg.output_dir}')
