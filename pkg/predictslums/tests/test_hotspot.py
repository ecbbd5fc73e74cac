import io
import json

import numpy as np
from django.test import SimpleTestCase
from shapely.geometry import box

from predictslums.exceptions import ConfigError, DataError, LabelError, ParseError
from predictslums.hotspot import (
    Category,
    CellLabels,
    FdrResult,
    GridLattice,
    Label,
    MoranClass,
    PolygonLabels,
    aggregate_to_grid,
    brute_gi_star,
    brute_local_moran,
    categorize,
    count_neighbors,
    fdr_correct,
    fdr_summary,
    gi_star,
    hotspots,
    join_labels,
    local_moran,
    read_grid_csv,
    read_label_csv,
    read_label_geojson,
    write_grid_csv,
)
from predictslums.ingest import PointSet, Rect
from predictslums.spatial_index import brute_count_within


def grid_with_counts(counts, cell_size=100.0):
    counts = np.asarray(counts)
    grid = GridLattice((0.0, 0.0), cell_size, counts.shape[1], counts.shape[0])
    grid.count = counts.ravel().astype(np.int64)
    return grid


class AggregateTests(SimpleTestCase):

    def test_single_point(self):
        grid = aggregate_to_grid(PointSet([(50, 50)]), Rect(0, 0, 100, 100), 100)
        self.assertEqual((grid.n_cols, grid.n_rows), (1, 1))
        self.assertEqual(grid.count[0], 1)

    def test_corner_points_on_the_maximum_edge(self):
        ps = PointSet([(0, 0), (200, 0), (0, 200), (200, 200)])
        grid = aggregate_to_grid(ps, Rect(0, 0, 200, 200), 100)
        self.assertEqual((grid.n_cols, grid.n_rows), (2, 2))
        self.assertEqual(list(grid.count), [1, 1, 1, 1])

    def test_counts_match_brute_binning(self):
        coords = np.random.default_rng(0).uniform(0, 1000, size=(10000, 2))
        grid = aggregate_to_grid(PointSet(coords), Rect(0, 0, 1000, 1000), 100)
        self.assertEqual(grid.count.sum(), 10000)
        expected = np.zeros((10, 10), dtype=np.int64)
        for x, y in coords:
            expected[min(int(y // 100), 9), min(int(x // 100), 9)] += 1
        self.assertTrue(np.array_equal(grid.as_2d(grid.count), expected))

    def test_centroids(self):
        grid = GridLattice((1000.0, 2000.0), 100.0, 3, 2)
        self.assertEqual(grid.cell(2, 1).cx, 1250.0)
        self.assertEqual(grid.cell(2, 1).cy, 2150.0)

    def test_point_outside_frame(self):
        with self.assertRaises(DataError):
            aggregate_to_grid(PointSet([(150, 50)]), Rect(0, 0, 100, 100), 100)

    def test_bad_cell_size(self):
        with self.assertRaises(ConfigError):
            aggregate_to_grid(PointSet([(50, 50)]), Rect(0, 0, 100, 100), 0)


class CountNeighborsTests(SimpleTestCase):

    def test_no_points(self):
        grid = GridLattice((0.0, 0.0), 100.0, 3, 3)
        out = count_neighbors(PointSet(), grid, 344)
        self.assertEqual(out.nneighbors.sum(), 0)

    def test_point_at_band_distance_is_counted(self):
        ps = PointSet([(394.0, 50.0)])
        grid = aggregate_to_grid(ps, Rect(0, 0, 400, 100), 100)
        out = count_neighbors(ps, grid, 344)
        self.assertEqual(out.nneighbors[0], 1)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        ps = PointSet(rng.uniform(0, 2000, size=(500, 2)))
        grid = aggregate_to_grid(ps, Rect(0, 0, 2000, 2000), 100)
        out = count_neighbors(ps, grid, 344)
        expected = brute_count_within(ps.coords, grid.centroids, 344)
        self.assertTrue(np.array_equal(out.nneighbors, expected))

    def test_input_grid_unchanged(self):
        grid = GridLattice((0.0, 0.0), 100.0, 2, 2)
        count_neighbors(PointSet([(10, 10)]), grid, 100)
        self.assertIsNone(grid.nneighbors)

    def test_band_must_be_positive(self):
        with self.assertRaises(ConfigError):
            count_neighbors(PointSet(), GridLattice((0.0, 0.0), 100.0, 1, 1), 0)


class GiStarTests(SimpleTestCase):

    def test_homogeneous_field(self):
        out = gi_star(grid_with_counts(np.full((4, 4), 5)), 150)
        self.assertTrue(np.all(out.gi_z == 0))
        self.assertTrue(np.all(out.p_value == 1))

    def test_single_peak(self):
        counts = np.zeros((5, 5))
        counts[2, 2] = 100
        out = gi_star(grid_with_counts(counts), 100)
        z = out.as_2d(out.gi_z)
        self.assertGreater(z[2, 2], 0)
        self.assertEqual(z[2, 2], z.max())
        for corner in (z[0, 0], z[0, 4], z[4, 0], z[4, 4]):
            self.assertLess(corner, 0)

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(7)
        grid = grid_with_counts(rng.poisson(3.0, size=(20, 20)))
        for band in (100, 250, 344):
            out = gi_star(grid, band)
            self.assertTrue(np.allclose(out.gi_z, brute_gi_star(grid, band), rtol=0, atol=1e-9))

    def test_shifting_every_count_keeps_the_ranking(self):
        rng = np.random.default_rng(21)
        for trial in range(10):
            with self.subTest(trial=trial):
                counts = rng.poisson(4.0, size=(12, 12))
                z = gi_star(grid_with_counts(counts), 250).gi_z
                shifted = gi_star(grid_with_counts(counts + 7 * (trial + 1)), 250).gi_z
                order = np.argsort(z, kind='stable')
                self.assertTrue(np.all(np.diff(shifted[order]) >= -1e-9))
                self.assertTrue(np.allclose(shifted, z, rtol=0, atol=1e-9))

    def test_iid_counts_rarely_rejected(self):
        fractions = []
        for seed in range(50):
            counts = np.random.default_rng(seed).poisson(5.0, size=(20, 20))
            _, fdr = hotspots(grid_with_counts(counts), 150)
            fractions.append(fdr.n_rejected / 400)
        self.assertLessEqual(np.mean(fractions), 0.05)

    def test_p_values_two_tailed(self):
        rng = np.random.default_rng(2)
        out = gi_star(grid_with_counts(rng.poisson(2.0, size=(8, 8))), 200)
        self.assertTrue(np.all((out.p_value > 0) & (out.p_value <= 1)))


class FdrTests(SimpleTestCase):

    def test_hand_enumerated_thresholds(self):
        result = fdr_correct([0.01, 0.02, 0.04, 0.5], alpha=0.05)
        self.assertEqual(list(result.rejected), [True, True, False, False])
        self.assertEqual(result.n_rejected, 2)
        self.assertAlmostEqual(result.adjusted_threshold, 0.025)

    def test_input_order_is_kept(self):
        result = fdr_correct([0.5, 0.04, 0.01, 0.02], alpha=0.05)
        self.assertEqual(list(result.rejected), [False, False, True, True])

    def test_all_ones(self):
        self.assertEqual(fdr_correct([1.0] * 10).n_rejected, 0)

    def test_all_zeros(self):
        self.assertEqual(fdr_correct([0.0] * 10).n_rejected, 10)

    def test_q_values(self):
        result = fdr_correct([0.01, 0.02, 0.04, 0.5], alpha=0.05)
        self.assertTrue(np.allclose(result.q_values, [0.04, 0.04, 0.04 * 4 / 3, 0.5]))

    def test_matches_direct_step_up(self):
        rng = np.random.default_rng(13)
        for trial in range(1000):
            m = int(rng.integers(1, 40))
            p = rng.uniform(size=m) ** rng.uniform(1.0, 6.0)
            alpha = float(rng.choice([0.01, 0.05, 0.1]))
            ordered = np.sort(p)
            passing = [k for k in range(1, m + 1) if ordered[k - 1] <= k * alpha / m]
            expected = p <= ordered[max(passing) - 1] if passing else np.zeros(m, dtype=bool)
            result = fdr_correct(p, alpha)
            self.assertTrue(np.array_equal(result.rejected, expected), f'trial {trial}: {p}')

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigError):
            fdr_correct([0.1, 1.2])
        with self.assertRaises(ConfigError):
            fdr_correct([0.1], alpha=1.5)


class CategorizeTests(SimpleTestCase):

    def test_categories(self):
        grid = grid_with_counts([[1, 2, 3]])
        grid.gi_z = np.array([3.1, 3.1, -2.5])
        grid.p_value = np.array([0.002, 0.002, 0.012])
        fdr = FdrResult(0.05, np.array([True, False, True]), 0.0, np.zeros(3))
        out = categorize(grid, fdr)
        self.assertEqual(list(out.category), [Category.HOT.value, Category.NOT_SIGNIFICANT.value,
                                              Category.COLD.value])

    def test_pure_function(self):
        rng = np.random.default_rng(5)
        grid = grid_with_counts(rng.poisson(1.5, size=(10, 10)))
        a, _ = hotspots(grid, 200)
        b, _ = hotspots(grid, 200)
        self.assertTrue(np.array_equal(a.category, b.category))
        self.assertIsNone(grid.category)

    def test_summary_with_and_without_correction(self):
        counts = np.zeros((12, 12), dtype=int)
        counts[5:7, 5:7] = 30
        scored, fdr = hotspots(grid_with_counts(counts), 150)
        summary = fdr_summary(scored, fdr)
        self.assertGreater(summary['fdr']['hot'], 0)
        self.assertLessEqual(summary['fdr']['hot'], summary['unadjusted']['hot'])
        self.assertEqual(sum(summary['fdr'].values()), 144)


class LocalMoranTests(SimpleTestCase):

    def test_homogeneous_field(self):
        out = local_moran(grid_with_counts(np.full((5, 5), 3)), 100, permutations=19)
        self.assertTrue(np.all(out.moran_class == MoranClass.NOT_SIGNIFICANT.value))

    def test_single_high_cell_is_an_outlier(self):
        counts = np.zeros((7, 7))
        counts[3, 3] = 10
        out = local_moran(grid_with_counts(counts), 100, permutations=99, seed=1)
        self.assertEqual(out.cell(3, 3).moran_class, MoranClass.HIGH_LOW)

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(12)
        grid = grid_with_counts(rng.poisson(2.0, size=(10, 10)))
        out = local_moran(grid, 150, permutations=9)
        self.assertTrue(np.allclose(out.moran_i, brute_local_moran(grid, 150), rtol=0, atol=1e-9))

    def test_seeded_pseudo_p_values(self):
        rng = np.random.default_rng(3)
        grid = grid_with_counts(rng.poisson(2.0, size=(8, 8)))
        a = local_moran(grid, 150, permutations=49, seed=6)
        b = local_moran(grid, 150, permutations=49, seed=6)
        self.assertTrue(np.array_equal(a.moran_p, b.moran_p))
        self.assertTrue(np.all(a.moran_p >= 1 / 50))


class JoinLabelsTests(SimpleTestCase):

    def test_csv_label(self):
        grid = GridLattice((0.0, 0.0), 100.0, 1, 1)
        out = join_labels(grid, read_label_csv(io.StringIO('0,0,Informal\n')))
        self.assertEqual(out.cell(0, 0).label, Label.INFORMAL)

    def test_csv_key_outside_grid(self):
        grid = GridLattice((0.0, 0.0), 100.0, 1, 1)
        with self.assertRaises(LabelError):
            join_labels(grid, CellLabels([(3, 0, Label.FORMAL)]))

    def test_polygon_labels(self):
        grid = GridLattice((0.0, 0.0), 100.0, 3, 1)
        labels = PolygonLabels([(box(0, 0, 100, 100), Label.FORMAL),
                                (box(100, 0, 200, 100), Label.INFORMAL)])
        out = join_labels(grid, labels)
        self.assertEqual(list(out.label), ['F', 'I', 'U'])
        self.assertEqual(int(out.labeled_mask.sum()), 2)

    def test_conflicting_polygons_list_cells(self):
        grid = GridLattice((0.0, 0.0), 100.0, 2, 1)
        labels = PolygonLabels([(box(0, 0, 200, 100), Label.FORMAL),
                                (box(0, 0, 100, 100), Label.INFORMAL)])
        with self.assertRaises(LabelError) as ctx:
            join_labels(grid, labels)
        self.assertIn('(0,0)', str(ctx.exception))

    def test_unknown_label_text(self):
        with self.assertRaises(DataError):
            read_label_csv(io.StringIO('0,0,slum\n'))

    def test_csv_with_byte_order_mark(self):
        labels = read_label_csv(io.StringIO('\ufeffcol,row,label\n0,0,F\n'))
        self.assertEqual(labels.entries, [(0, 0, Label.FORMAL)])


def feature(status, geometry):
    return {'type': 'Feature', 'properties': {'status': status}, 'geometry': geometry}


SQUARE = {'type': 'Polygon', 'coordinates': [[[0, 0], [100, 0], [100, 100], [0, 100], [0, 0]]]}


class LabelGeojsonTests(SimpleTestCase):

    def read(self, data):
        text = data if isinstance(data, str) else json.dumps(data)
        return read_label_geojson(io.StringIO(text))

    def test_polygons(self):
        labels = self.read({'type': 'FeatureCollection', 'features': [feature('informal', SQUARE)]})
        self.assertEqual(len(labels.polygons), 1)
        self.assertEqual(labels.polygons[0][1], Label.INFORMAL)

    def test_malformed_document(self):
        with self.assertRaises(ParseError) as ctx:
            self.read('{not json')
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_top_level_array(self):
        with self.assertRaises(ParseError):
            self.read([feature('formal', SQUARE)])

    def test_feature_without_geometry(self):
        data = {'type': 'FeatureCollection', 'features': [{'type': 'Feature', 'properties': {'status': 'formal'}}]}
        with self.assertRaises(LabelError) as ctx:
            self.read(data)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_invalid_geometry(self):
        for geometry in ({'type': 'Hexagon', 'coordinates': []}, {'coordinates': [[0, 0]]}, 'box'):
            with self.subTest(geometry=geometry), self.assertRaises(ParseError):
                self.read({'type': 'FeatureCollection', 'features': [feature('formal', geometry)]})

    def test_features_must_be_objects(self):
        with self.assertRaises(ParseError):
            self.read({'type': 'FeatureCollection', 'features': [1, 2]})

    def test_non_polygon_geometry(self):
        point = {'type': 'Point', 'coordinates': [5, 5]}
        with self.assertRaises(LabelError):
            self.read({'type': 'FeatureCollection', 'features': [feature('formal', point)]})


class GridCsvTests(SimpleTestCase):

    def test_header(self):
        buffer = io.StringIO()
        write_grid_csv(GridLattice((0.0, 0.0), 100.0, 2, 1), buffer)
        self.assertEqual(buffer.getvalue().splitlines()[0],
                         'col,row,cx,cy,count,nneighbors,gi_z,p,category,label')

    def test_scored_grid_reloads(self):
        rng = np.random.default_rng(1)
        ps = PointSet(rng.uniform(0, 1000, size=(300, 2)))
        grid = count_neighbors(ps, aggregate_to_grid(ps, Rect(0, 0, 1000, 1000), 100), 344)
        scored, _ = hotspots(grid, 344)
        scored = join_labels(scored, CellLabels([(0, 0, Label.FORMAL), (9, 9, Label.INFORMAL)]))
        buffer = io.StringIO()
        write_grid_csv(scored, buffer)
        buffer.seek(0)
        loaded = read_grid_csv(buffer)
        self.assertEqual(loaded.cell_size, 100.0)
        self.assertTrue(np.array_equal(loaded.gi_z, scored.gi_z))
        self.assertTrue(np.array_equal(loaded.category, scored.category))
        self.assertTrue(np.array_equal(loaded.label, scored.label))
        self.assertTrue(np.array_equal(loaded.cx, scored.cx))

    def test_single_cell_needs_cell_size(self):
        buffer = io.StringIO()
        write_grid_csv(GridLattice((0.0, 0.0), 100.0, 1, 1), buffer)
        buffer.seek(0)
        with self.assertRaises(DataError):
            read_grid_csv(buffer)
