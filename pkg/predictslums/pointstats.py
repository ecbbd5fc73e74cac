"""
Point Pattern Statistics
Global clustering indices for incident points: the Clark-Evans nearest
neighbour ratio and Ripley's K-function in its L(d) form, with Monte Carlo
envelopes from complete-spatial-randomness resamples.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ConfigError, DataError
from .spatial_index import PointIndex


logger = logging.getLogger(__name__)

# Clark-Evans standard error constant for the mean nearest-neighbour distance
CLARK_EVANS_SE = 0.26136


@dataclass
class NnResult:
    observed_mean_dist: float
    expected_mean_dist: float
    ratio: float
    z_score: float
    p_value: float
    n: int
    area: float

    @property
    def pattern(self):
        """
        'clustered', 'dispersed' or 'random' at the 0.05 level.
        """
        if self.p_value < 0.05:
            return 'clustered' if self.z_score < 0 else 'dispersed'
        return 'random'

    def to_dict(self):
        return {
            'observed_mean_dist': self.observed_mean_dist,
            'expected_mean_dist': self.expected_mean_dist,
            'ratio': self.ratio,
            'z_score': self.z_score,
            'p_value': self.p_value,
            'n': self.n,
            'area': self.area,
            'pattern': self.pattern,
        }


@dataclass
class KFunctionResult:
    distances: np.ndarray
    l_observed: np.ndarray
    l_expected: np.ndarray
    envelope_low: np.ndarray
    envelope_high: np.ndarray
    permutations: int
    seed: int
    pair_counts: np.ndarray = field(default=None, repr=False)

    @property
    def log_difference(self):
        """
        log L_observed - log L_expected; 0 where no pairs were observed.
        """
        with np.errstate(divide='ignore'):
            diff = np.log(self.l_observed) - np.log(self.l_expected)
        return np.where(self.l_observed > 0, diff, 0.0)

    @property
    def clustered(self):
        """
        Distances where the observed curve exceeds the upper envelope.
        """
        return self.l_observed > self.envelope_high

    def write_csv(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['d', 'l_observed', 'l_expected', 'envelope_low', 'envelope_high', 'log_diff'])
        for row in zip(self.distances, self.l_observed, self.l_expected,
                       self.envelope_low, self.envelope_high, self.log_difference):
            writer.writerow([repr(float(v)) for v in row])


def nearest_neighbor_stat(ps, frame):
    """
    Average nearest neighbour analysis.

    Args:
        ps: PointSet (n >= 2)
        frame: Study Rect with positive area

    Returns:
        NnResult with observed/expected mean distance, ratio and z-score
    """
    n = ps.n
    if n < 2:
        raise DataError(f'nearest neighbour statistic needs at least 2 points, got {n}')
    area = frame.area
    if area <= 0:
        raise DataError('nearest neighbour statistic needs a frame with positive area')

    observed = float(PointIndex(ps.coords).nearest_distances().mean())
    expected = 0.5 / math.sqrt(n / area)
    se = CLARK_EVANS_SE / math.sqrt(n * n / area)
    z = (observed - expected) / se
    p = float(2.0 * stats.norm.sf(abs(z)))
    result = NnResult(observed, expected, observed / expected, z, p, n, area)
    logger.info('Nn ratio %.6f (z=%.3f, %s)', result.ratio, z, result.pattern)
    return result


def _l_function(pair_counts, n, area):
    return np.sqrt(area * pair_counts / (math.pi * n * (n - 1)))


def _validate_distances(distances):
    distances = np.asarray(distances, dtype=float).ravel()
    if len(distances) == 0:
        raise ConfigError('at least one distance is required')
    if np.any(distances <= 0):
        raise ConfigError('distances must be positive')
    if np.any(np.diff(distances) <= 0):
        raise ConfigError('distances must be strictly increasing')
    return distances


def ripley_l(ps, frame, distances, permutations=99, seed=0):
    """
    Multi-distance clustering analysis (Ripley's K as L(d)), no edge correction.

    Pairs are counted with the strict rule dist(i, j) < d. The envelope is the
    pointwise min/max of L over `permutations` uniform resamples of n points in
    the frame; resample p draws from the stream seeded with (seed, p).

    Args:
        ps: PointSet (n >= 2)
        frame: Study Rect
        distances: Strictly increasing positive distances in meters
        permutations: Number of CSR resamples (>= 1)
        seed: Root seed of the resample streams

    Returns:
        KFunctionResult
    """
    distances = _validate_distances(distances)
    if permutations < 1:
        raise ConfigError('permutations must be >= 1')
    n = ps.n
    if n < 2:
        raise DataError(f'K-function needs at least 2 points, got {n}')
    area = frame.area
    if area <= 0:
        raise DataError('K-function needs a frame with positive area')

    pair_counts = PointIndex(ps.coords).ordered_pair_counts(distances)
    l_observed = _l_function(pair_counts, n, area)

    simulated = np.empty((permutations, len(distances)))
    for p in range(permutations):
        rng = np.random.default_rng([seed, p])
        xs = rng.uniform(frame.min_x, frame.max_x, n)
        ys = rng.uniform(frame.min_y, frame.max_y, n)
        counts = PointIndex(np.column_stack([xs, ys])).ordered_pair_counts(distances)
        simulated[p] = _l_function(counts, n, area)

    result = KFunctionResult(
        distances=distances,
        l_observed=l_observed,
        l_expected=distances.copy(),
        envelope_low=simulated.min(axis=0),
        envelope_high=simulated.max(axis=0),
        permutations=permutations,
        seed=seed,
        pair_counts=pair_counts,
    )
    logger.info(
        'K-function over %d distances, %d permutations: clustered at %d distances',
        len(distances), permutations, int(result.clustered.sum()),
    )
    return result


def default_distances(frame, step=100.0, count=None):
    """
    Evenly spaced evaluation distances (step, 2*step, ...) up to a quarter of
    the frame's shorter side, or `count` steps when given.
    """
    if count is None:
        count = max(1, int(min(frame.width, frame.height) / 4 // step))
    return step * np.arange(1, count + 1, dtype=float)
