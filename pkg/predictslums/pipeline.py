"""
Pipeline Module
Runs the whole identification and prediction chain over one city and writes
every artifact to an output directory:

    ingest -> stats -> grid -> hotspot -> join_labels -> inference -> train -> predict

Each stage writes reloadable files (points.csv, grid.csv, model.bin, ...) so
the management commands can rerun any stage on its own.
"""

import csv
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ann, hotspot, inference, ingest, pointstats
from .conf import get_setting
from .exceptions import ConfigError, DataError, LabelError, PredictSlumsError, StageError
from .model_io import load_model, save_model


logger = logging.getLogger(__name__)

LOCK_NAME = '.lock'
MANIFEST_NAME = 'run.json'


def _setting(name):
    return field(default_factory=lambda: get_setting(name))


def _train_defaults():
    return ann.TrainConfig(
        learning_rate=get_setting('LEARNING_RATE'),
        batch_size=get_setting('BATCH_SIZE'),
        epochs=get_setting('EPOCHS'),
        train_fraction=get_setting('TRAIN_FRACTION'),
    )


@dataclass
class PipelineConfig:
    points: str = None
    polylines: str = None
    labels: str = None
    model: str = None
    frame: list = None
    cell_size: float = _setting('CELL_SIZE')
    band: float = _setting('BAND_DISTANCE')
    alpha: float = _setting('ALPHA')
    permutations: int = _setting('ENVELOPE_PERMUTATIONS')
    k_distances: list = None
    kfunction: bool = True
    moran: bool = False
    moran_permutations: int = _setting('MORAN_PERMUTATIONS')
    train: ann.TrainConfig = field(default_factory=_train_defaults)
    folds: int = 0
    dropout: float = _setting('DROPOUT')
    use_coords: bool = True
    force_degrees: bool = False
    dedupe: float = 0.0
    snap_tolerance: float = _setting('SNAP_TOLERANCE')
    seed: int = _setting('SEED')
    output_dir: str = _setting('OUTPUT_DIR')
    mnl_max_iter: int = _setting('MNL_MAX_ITER')
    mnl_tol: float = _setting('MNL_TOL')

    def validate(self):
        if not self.points and not self.polylines:
            raise ConfigError('an input is required: a point CSV or a street polyline file')
        if self.points and self.polylines:
            raise ConfigError('give either points or polylines, not both')
        if int(self.seed) < 0:
            raise ConfigError(f'seed must be non-negative, got {self.seed}')
        if self.cell_size <= 0:
            raise ConfigError(f'cell size must be positive, got {self.cell_size}')
        if self.band <= 0:
            raise ConfigError(f'band distance must be positive, got {self.band}')
        if not 0 < self.alpha < 1:
            raise ConfigError(f'alpha must lie in (0, 1), got {self.alpha}')
        if self.kfunction and self.permutations < 1:
            raise ConfigError('permutations must be >= 1')
        if self.dedupe < 0 or self.snap_tolerance < 0:
            raise ConfigError('tolerances must be non-negative')
        if self.folds == 1 or self.folds < 0:
            raise ConfigError(f'folds must be 0 (disabled) or >= 2, got {self.folds}')
        if not 0 <= self.dropout < 1:
            raise ConfigError(f'dropout must lie in [0, 1), got {self.dropout}')
        if self.frame is not None and len(self.frame) != 4:
            raise ConfigError('frame takes four values: min_x, min_y, max_x, max_y')
        return self

    @property
    def trains(self):
        return self.model is None

    def to_dict(self):
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data['train'] = self.train.to_dict()
        data['frame'] = None if self.frame is None else [float(v) for v in self.frame]
        data['k_distances'] = None if self.k_distances is None else [float(d) for d in self.k_distances]
        data['output_dir'] = str(self.output_dir)
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f'unknown configuration keys {sorted(unknown)}')
        if isinstance(data.get('train'), dict):
            data['train'] = ann.TrainConfig(**data['train'])
        return cls(**data)


def derive_seed(root, stage):
    """
    Seed of a named stage, derived from the root seed. Stable across runs,
    platforms and stage orderings.
    """
    key = int.from_bytes(hashlib.sha256(stage.encode('utf-8')).digest()[:4], 'little')
    return int(np.random.SeedSequence([int(root), key]).generate_state(1)[0])


def _lock_owner(path):
    try:
        return int(path.read_text(encoding='ascii').strip())
    except (OSError, ValueError):
        return None


def _process_alive(pid):
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


@contextmanager
def output_lock(output_dir):
    """
    Hold the output directory's lock file for the duration of a run.

    The lock file holds the owner's PID. A lock left behind by a process that
    no longer exists is removed with a warning; a lock whose owner is alive or
    unknown raises ConfigError (delete the file by hand once no run is active).
    """
    path = Path(output_dir) / LOCK_NAME
    for attempt in range(2):
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            owner = _lock_owner(path)
            if attempt or owner is None or _process_alive(owner):
                raise ConfigError(
                    f'output directory {output_dir} is in use by another run '
                    f'(process {owner if owner is not None else "unknown"}, lock file {path})'
                )
            logger.warning('removing stale lock %s left by process %d', path, owner)
            try:
                path.unlink()
            except FileNotFoundError:
                pass
    try:
        os.write(fd, str(os.getpid()).encode('ascii'))
        os.close(fd)
        yield path
    finally:
        try:
            path.unlink()
        except FileNotFoundError:
            pass


def _write_json(path, data):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write('\n')


def _write_with(path, writer, *args):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer(*args, handle)


# --- Stage building blocks (shared with the management commands) ---

def load_points(cfg):
    """
    Incident points from the configured point CSV or street polylines.
    """
    try:
        if cfg.points:
            ps = ingest.read_point_csv(cfg.points)
        else:
            ps = ingest.extract_intersections(ingest.read_polylines(cfg.polylines), cfg.snap_tolerance)
    except FileNotFoundError as e:
        raise DataError(f'input file not found: {e.filename}')
    if cfg.dedupe > 0:
        ps = ingest.dedupe(ps, cfg.dedupe)
    return ps


def resolve_frame(cfg, ps):
    """
    Study frame of a point set: the configured frame, else the bounding rectangle.
    Both the points and the frame must be in projected meters.
    """
    bounds = ingest.ensure_projected(ingest.bounding_rect(ps), cfg.force_degrees)
    if cfg.frame is None:
        return bounds
    return ingest.ensure_projected(ingest.Rect(*cfg.frame), cfg.force_degrees)


def build_grid(ps, frame, cfg, band=None):
    grid = hotspot.aggregate_to_grid(ps, frame, cfg.cell_size)
    return hotspot.count_neighbors(ps, grid, cfg.band if band is None else band)


def score_grid(grid, cfg, band=None):
    """
    Gi*, FDR correction, categories and (optionally) Local Moran classes.
    """
    band = cfg.band if band is None else band
    scored, fdr = hotspot.hotspots(grid, band, cfg.alpha)
    if cfg.moran:
        scored = hotspot.local_moran(scored, band, cfg.moran_permutations,
                                     seed=derive_seed(cfg.seed, 'moran'), alpha=cfg.alpha)
    return scored, fdr


def attach_labels(grid, cfg):
    if cfg.labels:
        return hotspot.join_labels(grid, hotspot.load_labels(cfg.labels))
    if cfg.trains:
        raise LabelError('training needs a label source; pass labels or a trained model')
    return grid


def train_config(cfg, stage='train'):
    return replace(cfg.train, seed=derive_seed(cfg.seed, stage))


# --- Run bookkeeping ---

@dataclass
class PipelineResult:
    output_dir: Path
    files: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    status: str = 'incomplete'
    failed_stage: str = None
    error: str = None
    points: ingest.PointSet = None
    frame: ingest.Rect = None
    nn: pointstats.NnResult = None
    kfunction: pointstats.KFunctionResult = None
    grid: hotspot.GridLattice = None
    fdr: hotspot.FdrResult = None
    ttests: dict = None
    mnl: inference.MnlModel = None
    mnl_diagnostics: inference.MnlDiagnostics = None
    model: ann.AnnModel = None
    report: ann.EvalReport = None
    kfold: ann.KFoldResult = None
    predictions: hotspot.GridLattice = None

    def manifest(self, cfg):
        return {
            'status': self.status,
            'stages': list(self.stages),
            'skipped': list(self.skipped),
            'failed_stage': self.failed_stage,
            'error': self.error,
            'seed': int(cfg.seed),
            'files': {name: path.name for name, path in sorted(self.files.items())},
        }


class _Runner:

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.result = PipelineResult(output_dir=self.out)

    def path(self, name, filename):
        path = self.out / filename
        self.result.files[name] = path
        return path

    def write_manifest(self):
        _write_json(self.out / MANIFEST_NAME, self.result.manifest(self.cfg))

    @contextmanager
    def stage(self, name):
        logger.info('stage %s', name)
        try:
            yield
        except Exception as e:
            if isinstance(e, OSError) and not isinstance(e, PredictSlumsError):
                e = DataError(str(e))
            self.result.failed_stage = name
            self.result.error = str(e)
            self.write_manifest()
            logger.error('stage %s failed: %s', name, e)
            raise StageError(name, e) from e
        self.result.stages.append(name)
        self.write_manifest()


def run_pipeline(cfg):
    """
    Run every stage and write the artifact bundle to cfg.output_dir.

    Args:
        cfg: PipelineConfig

    Returns:
        PipelineResult; stage failures raise StageError after run.json records
        the failed stage
    """
    cfg.validate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with output_lock(out):
        return _run(cfg)


def _run(cfg):
    runner = _Runner(cfg)
    res = runner.result
    _write_json(runner.path('config', 'config.json'), cfg.to_dict())

    with runner.stage('ingest'):
        res.points = load_points(cfg)
        res.frame = resolve_frame(cfg, res.points)
        _write_with(runner.path('points', 'points.csv'), ingest.write_point_csv, res.points)

    with runner.stage('stats'):
        res.nn = pointstats.nearest_neighbor_stat(res.points, res.frame)
        _write_json(runner.path('nn', 'nn.json'), res.nn.to_dict())
        if cfg.kfunction:
            distances = cfg.k_distances or pointstats.default_distances(res.frame)
            res.kfunction = pointstats.ripley_l(res.points, res.frame, distances, cfg.permutations,
                                                seed=derive_seed(cfg.seed, 'kfunction'))
            with open(runner.path('kfunction', 'kfunction.csv'), 'w', newline='', encoding='utf-8') as f:
                res.kfunction.write_csv(f)

    with runner.stage('grid'):
        res.grid = build_grid(res.points, res.frame, cfg)

    with runner.stage('hotspot'):
        res.grid, res.fdr = score_grid(res.grid, cfg)
        summary = hotspot.fdr_summary(res.grid, res.fdr)
        summary.update(band=cfg.band, alpha=cfg.alpha, cells=res.grid.n_cells)
        _write_json(runner.path('hotspot', 'hotspot.json'), summary)

    with runner.stage('join_labels'):
        res.grid = attach_labels(res.grid, cfg)
        hotspot.save_grid(res.grid, runner.path('grid', 'grid.csv'))

    labeled = bool(res.grid.labeled_mask.any())
    if labeled:
        with runner.stage('inference'):
            res.ttests = inference.group_t_tests(res.grid)
            _write_with(runner.path('ttest', 'ttest.csv'), inference.write_ttest_csv, res.ttests)
            samples = inference.samples_from_grid(res.grid)
            present = {s.category for s in samples}
            missing = [c.name.lower() for c in inference.MNL_CATEGORIES if c not in present]
            if missing:
                logger.warning('skipping the MNL: no labeled %s cells', ', '.join(missing))
                res.skipped.append('mnl')
            else:
                res.mnl = inference.fit_mnl(samples, cfg.mnl_max_iter, cfg.mnl_tol)
                res.mnl_diagnostics = inference.mnl_diagnostics(res.mnl, samples)
                runner.path('mnl_report', 'mnl_report.txt').write_text(
                    inference.format_mnl_report(res.mnl, res.mnl_diagnostics), encoding='utf-8')
                _write_with(runner.path('mnl_coefficients', 'mnl_coefficients.csv'),
                            inference.write_coefficients_csv, res.mnl)

    evaluation = {}
    with runner.stage('train'):
        if cfg.trains:
            X, y = ann.dataset_from_grids([res.grid], cfg.use_coords)
            res.model, res.report = ann.train(X, y, train_config(cfg), cfg.dropout, cfg.use_coords)
            save_model(res.model, runner.path('model', 'model.bin'))
            with open(runner.path('history', 'train_history.csv'), 'w', newline='', encoding='utf-8') as f:
                res.report.write_history_csv(f)
            evaluation['validation'] = res.report.to_dict()
            if cfg.folds:
                res.kfold = ann.kfold_cv(X, y, cfg.folds, train_config(cfg, 'cv'),
                                         cfg.dropout, cfg.use_coords)
                res.report.kfold_mean = res.kfold.mean
                res.report.kfold_variance = res.kfold.variance
                evaluation['kfold'] = res.kfold.to_dict()
        else:
            res.model = load_model(cfg.model)

    with runner.stage('predict'):
        res.predictions = ann.predict_grid(res.model, res.grid)
        hotspot.save_grid(res.predictions, runner.path('predictions', 'predictions.csv'))
        if labeled:
            X, y = ann.dataset_from_grids([res.grid], res.model.use_coords)
            evaluation['labeled'] = ann.evaluate(res.model, X, y).to_dict()
        _write_json(runner.path('evaluation', 'evaluation.json'), evaluation)

    res.status = 'complete'
    runner.write_manifest()
    logger.info('pipeline complete: %s', runner.out)
    return res


SWEEP_COLUMNS = ['band', 'hot', 'not_significant', 'cold', 'validation_accuracy', 'validation_loss']


def band_sweep(cfg, bands):
    """
    Validation accuracy for each candidate band distance. Writes sweep.csv;
    choosing a band is left to the user.

    Returns:
        List of row dicts keyed by SWEEP_COLUMNS
    """
    cfg.validate()
    bands = [float(b) for b in bands]
    if not bands or any(b <= 0 for b in bands):
        raise ConfigError('sweep bands must be positive')
    if not cfg.labels:
        raise LabelError('a band sweep needs a label source')
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    with output_lock(out):
        ps = load_points(cfg)
        frame = resolve_frame(cfg, ps)
        base = hotspot.aggregate_to_grid(ps, frame, cfg.cell_size)
        labels = hotspot.load_labels(cfg.labels)
        for band in bands:
            grid = hotspot.count_neighbors(ps, base, band)
            grid, _ = hotspot.hotspots(grid, band, cfg.alpha)
            grid = hotspot.join_labels(grid, labels)
            X, y = ann.dataset_from_grids([grid], cfg.use_coords)
            _, report = ann.train(X, y, train_config(cfg), cfg.dropout, cfg.use_coords)
            counts = {c: int((grid.category == c.value).sum()) for c in hotspot.Category}
            rows.append({
                'band': band,
                'hot': counts[hotspot.Category.HOT],
                'not_significant': counts[hotspot.Category.NOT_SIGNIFICANT],
                'cold': counts[hotspot.Category.COLD],
                'validation_accuracy': report.overall_accuracy,
                'validation_loss': report.val_loss[-1] if report.val_loss else float('nan'),
            })
            logger.info('band %g: validation accuracy %.4f', band, report.overall_accuracy)
        with open(out / 'sweep.csv', 'w', newline='', encoding='utf-8') as handle:
            writer = csv.DictWriter(handle, fieldnames=SWEEP_COLUMNS, lineterminator='\n')
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return rows
