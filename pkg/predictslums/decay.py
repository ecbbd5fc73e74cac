"""
Count-distribution decay fit.

Fits log(frequency) = log(amplitude) - lambda * count over the non-empty bins
of the per-cell count histogram.
"""

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DegenerateDataError


logger = logging.getLogger(__name__)


@dataclass
class DecayFit:
    lambda_: float
    amplitude: float
    r_squared: float
    counts: np.ndarray
    frequencies: np.ndarray
    weighted: bool = True

    def to_dict(self):
        return {
            'lambda': self.lambda_,
            'amplitude': self.amplitude,
            'r_squared': self.r_squared,
            'bins': len(self.counts),
            'weighted': self.weighted,
        }

    def write_histogram_csv(self, stream):
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(['count', 'frequency', 'fitted'])
        fitted = self.amplitude * np.exp(-self.lambda_ * self.counts)
        for c, f, e in zip(self.counts, self.frequencies, fitted):
            writer.writerow([int(c), repr(float(f)), repr(float(e))])


def count_histogram(counts):
    """
    Relative frequency of each per-cell count value, zero bins dropped.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if len(counts) == 0:
        raise DataError('no cell counts to fit')
    if np.any(counts < 0):
        raise DataError('cell counts must be non-negative')
    freq = np.bincount(counts) / len(counts)
    bins = np.nonzero(freq)[0]
    return bins, freq[bins]


def fit_count_distribution(grid, weighted=True):
    """
    Exponential decay of the per-cell count distribution.

    Least squares on (count, log frequency). With weighted=True each bin is
    weighted by its frequency, so the one- and two-cell tail bins carry little
    weight; weighted=False is the plain line fit.

    Args:
        grid: GridLattice with counts
        weighted: Weight bins by frequency

    Returns:
        DecayFit
    """
    bins, freq = count_histogram(grid.count)
    if len(bins) < 3:
        raise DegenerateDataError(
            f'decay fit needs at least 3 distinct non-empty count bins, found {len(bins)}'
        )
    x = bins.astype(float)
    y = np.log(freq)
    w = freq if weighted else np.ones_like(freq)
    slope, intercept = np.polyfit(x, y, 1, w=np.sqrt(w))

    fitted = intercept + slope * x
    y_mean = np.average(y, weights=w)
    ss_tot = float((w * (y - y_mean) ** 2).sum())
    ss_res = float((w * (y - fitted) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    fit = DecayFit(float(-slope), math.exp(intercept), r_squared, bins, freq, weighted)
    logger.info('decay fit over %d bins: lambda %.4f, r2 %.4f', len(bins), fit.lambda_, r_squared)
    return fit
