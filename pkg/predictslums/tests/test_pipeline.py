import json
import os
import shutil
import tempfile
from dataclasses import replace
from pathlib import Path
from unittest import mock

from django.test import SimpleTestCase, tag

from predictslums.ann import TrainConfig
from predictslums.exceptions import ConfigError, DegreeCoordinatesError, LabelError, ParseError, StageError
from predictslums.pipeline import (
    LOCK_NAME,
    PipelineConfig,
    band_sweep,
    derive_seed,
    output_lock,
    run_pipeline,
    train_config,
)

from .utils import QUICK_TRAIN, write_city


class PipelineTestCase(SimpleTestCase):
    """
    Writes a small synthetic city into a temporary directory.
    """

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmpdir)
        self.points, self.labels, self.spec = write_city(self.tmpdir / 'city')

    def config(self, name='out', **overrides):
        values = {
            'points': str(self.points),
            'labels': str(self.labels),
            'frame': self.spec.frame.to_list(),
            'kfunction': False,
            'train': QUICK_TRAIN,
            'output_dir': str(self.tmpdir / name),
        }
        values.update(overrides)
        return PipelineConfig(**values)


class ConfigTests(SimpleTestCase):

    def test_stage_seeds(self):
        self.assertEqual(derive_seed(0, 'train'), derive_seed(0, 'train'))
        self.assertNotEqual(derive_seed(0, 'train'), derive_seed(0, 'cv'))
        self.assertNotEqual(derive_seed(0, 'train'), derive_seed(1, 'train'))
        self.assertGreaterEqual(derive_seed(5, 'moran'), 0)

    def test_train_config_uses_stage_seed(self):
        cfg = PipelineConfig(points='p.csv', seed=11)
        self.assertEqual(train_config(cfg).seed, derive_seed(11, 'train'))
        self.assertEqual(train_config(cfg, 'cv').seed, derive_seed(11, 'cv'))

    def test_defaults_come_from_settings(self):
        cfg = PipelineConfig(points='p.csv')
        self.assertEqual(cfg.cell_size, 100.0)
        self.assertEqual(cfg.band, 344.0)
        self.assertEqual(cfg.train.epochs, 600)
        self.assertEqual(cfg.train.hidden, (100, 30))

    def test_dict_round_trip(self):
        cfg = PipelineConfig(points='p.csv', frame=[0, 0, 10, 10], train=TrainConfig(epochs=7))
        again = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        self.assertEqual(again.to_dict(), cfg.to_dict())
        self.assertEqual(again.train, cfg.train)

    def test_unknown_keys(self):
        with self.assertRaises(ConfigError):
            PipelineConfig.from_dict({'points': 'p.csv', 'bandwidth': 300})

    def test_validation(self):
        bad = [
            {},
            {'points': 'p.csv', 'polylines': 'l.csv'},
            {'points': 'p.csv', 'band': 0},
            {'points': 'p.csv', 'alpha': 1.0},
            {'points': 'p.csv', 'folds': 1},
            {'points': 'p.csv', 'seed': -1},
            {'points': 'p.csv', 'frame': [0, 0, 1]},
        ]
        for values in bad:
            with self.subTest(values=values), self.assertRaises(ConfigError):
                PipelineConfig(**values).validate()

    def test_lock_is_exclusive(self):
        tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, tmpdir)
        with output_lock(tmpdir):
            self.assertTrue((tmpdir / LOCK_NAME).exists())
            with self.assertRaises(ConfigError):
                with output_lock(tmpdir):
                    pass
        self.assertFalse((tmpdir / LOCK_NAME).exists())

    def test_lock_of_a_dead_process_is_replaced(self):
        tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, tmpdir)
        (tmpdir / LOCK_NAME).write_text('4194303')
        with mock.patch('predictslums.pipeline.os.kill', side_effect=ProcessLookupError) as kill:
            with self.assertLogs('predictslums.pipeline', 'WARNING') as logs:
                with output_lock(tmpdir) as path:
                    self.assertEqual(path.read_text(), str(os.getpid()))
        kill.assert_called_once_with(4194303, 0)
        self.assertIn('stale lock', logs.output[0])
        self.assertFalse((tmpdir / LOCK_NAME).exists())

    def test_lock_of_a_live_process_is_kept(self):
        tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, tmpdir)
        (tmpdir / LOCK_NAME).write_text(str(os.getpid()))
        with self.assertRaises(ConfigError) as ctx:
            with output_lock(tmpdir):
                pass
        self.assertIn(f'process {os.getpid()}', str(ctx.exception))
        self.assertTrue((tmpdir / LOCK_NAME).exists())

    def test_unreadable_lock_is_kept(self):
        tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, tmpdir)
        (tmpdir / LOCK_NAME).write_text('not a pid')
        with self.assertRaises(ConfigError) as ctx:
            with output_lock(tmpdir):
                pass
        self.assertIn('process unknown', str(ctx.exception))
        self.assertEqual((tmpdir / LOCK_NAME).read_text(), 'not a pid')


class RunPipelineTests(PipelineTestCase):

    def test_full_run_writes_every_artifact(self):
        result = run_pipeline(self.config())
        out = Path(result.output_dir)
        for name in ('config.json', 'points.csv', 'nn.json', 'hotspot.json', 'grid.csv',
                     'ttest.csv', 'model.bin', 'train_history.csv', 'predictions.csv',
                     'evaluation.json', 'run.json'):
            self.assertTrue((out / name).exists(), name)
        self.assertFalse((out / LOCK_NAME).exists())
        manifest = json.loads((out / 'run.json').read_text())
        self.assertEqual(manifest['status'], 'complete')
        self.assertEqual(manifest['stages'][:5], ['ingest', 'stats', 'grid', 'hotspot', 'join_labels'])
        self.assertEqual(manifest['stages'][-2:], ['train', 'predict'])
        evaluation = json.loads((out / 'evaluation.json').read_text())
        self.assertEqual(set(evaluation), {'validation', 'labeled'})

    def test_same_seed_same_bytes(self):
        a = run_pipeline(self.config('a'))
        b = run_pipeline(self.config('b'))
        for name in ('grid.csv', 'model.bin', 'predictions.csv', 'evaluation.json'):
            self.assertEqual((a.output_dir / name).read_bytes(), (b.output_dir / name).read_bytes(), name)

    def test_kfunction_and_moran(self):
        cfg = self.config(kfunction=True, permutations=3, k_distances=[100.0, 200.0],
                          moran=True, moran_permutations=9)
        result = run_pipeline(cfg)
        self.assertTrue((result.output_dir / 'kfunction.csv').exists())
        self.assertIsNotNone(result.grid.moran_class)
        header = (result.output_dir / 'grid.csv').read_text().splitlines()[0]
        self.assertTrue(header.endswith(',moran'))

    def test_missing_labels_fail_at_join(self):
        cfg = self.config(labels=None)
        with self.assertRaises(StageError) as ctx:
            run_pipeline(cfg)
        self.assertEqual(ctx.exception.stage, 'join_labels')
        self.assertIsInstance(ctx.exception.cause, LabelError)
        self.assertEqual(ctx.exception.exit_code, 3)
        manifest = json.loads((Path(cfg.output_dir) / 'run.json').read_text())
        self.assertEqual(manifest['status'], 'incomplete')
        self.assertEqual(manifest['failed_stage'], 'join_labels')
        self.assertFalse((Path(cfg.output_dir) / LOCK_NAME).exists())

    def test_malformed_labels_fail_at_join(self):
        self.labels.write_text('{"type": "FeatureCollection", "features": [', encoding='utf-8')
        with self.assertRaises(StageError) as ctx:
            run_pipeline(self.config())
        self.assertEqual(ctx.exception.stage, 'join_labels')
        self.assertIsInstance(ctx.exception.cause, ParseError)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_degree_points_fail_at_ingest_despite_a_metric_frame(self):
        self.points.write_text('x,y\n31.20,30.01\n31.21,30.02\n31.22,30.05\n31.25,30.03\n', encoding='utf-8')
        with self.assertRaises(StageError) as ctx:
            run_pipeline(self.config())
        self.assertEqual(ctx.exception.stage, 'ingest')
        self.assertIsInstance(ctx.exception.cause, DegreeCoordinatesError)
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_predict_with_saved_model(self):
        trained = run_pipeline(self.config('trained'))
        cfg = self.config('applied', model=str(trained.output_dir / 'model.bin'))
        result = run_pipeline(cfg)
        self.assertEqual(result.status, 'complete')
        self.assertNotIn('model', result.files)
        self.assertEqual(
            (trained.output_dir / 'predictions.csv').read_bytes(),
            (result.output_dir / 'predictions.csv').read_bytes(),
        )

    def test_folds(self):
        result = run_pipeline(self.config(folds=2))
        self.assertEqual(len(result.kfold.accuracies), 2)
        self.assertEqual(result.report.kfold_mean, result.kfold.mean)

    def test_band_sweep(self):
        rows = band_sweep(self.config('sweep'), [300, 344])
        self.assertEqual([row['band'] for row in rows], [300.0, 344.0])
        lines = (self.tmpdir / 'sweep' / 'sweep.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'band,hot,not_significant,cold,validation_accuracy,validation_loss')
        self.assertEqual(len(lines), 3)

    def test_band_sweep_needs_labels(self):
        with self.assertRaises(LabelError):
            band_sweep(self.config('sweep', labels=None), [344])


@tag('slow')
class AcceptanceTests(SimpleTestCase):
    """
    Full-size reference city at reduced epochs.
    """

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmpdir)

    def city_config(self, seed, name, **overrides):
        points, labels, spec = write_city(self.tmpdir / f'city{seed}', seed=seed,
                                          squares=5, n_informal=5, n_sparse=5)
        values = {
            'points': str(points),
            'labels': str(labels),
            'frame': spec.frame.to_list(),
            'kfunction': False,
            'train': TrainConfig(epochs=100),
            'output_dir': str(self.tmpdir / name),
        }
        values.update(overrides)
        return PipelineConfig(**values)

    def test_within_city_accuracy(self):
        result = run_pipeline(self.city_config(0, 'within'))
        self.assertGreaterEqual(result.report.overall_accuracy, 0.85)

    def test_cross_city_accuracy(self):
        trained = run_pipeline(self.city_config(0, 'city_a', use_coords=False))
        cfg = self.city_config(1, 'city_b', model=str(trained.output_dir / 'model.bin'))
        result = run_pipeline(cfg)
        evaluation = json.loads((result.output_dir / 'evaluation.json').read_text())
        self.assertGreaterEqual(evaluation['labeled']['overall_accuracy'], 0.80)
