"""
Hot Spot Module
Rasterizes incident points to a square lattice, counts neighbouring points
around every cell centroid, computes Getis-Ord Gi* with Benjamini-Hochberg
correction, classifies cells into hot / not significant / cold, optionally
computes Local Moran's I, and joins formal/informal labels.

Every operation returns a new GridLattice; inputs are never modified.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import shapely
from scipy import ndimage, stats
from shapely.strtree import STRtree

from .exceptions import ConfigError, DataError, LabelError, ParseError
from .ingest import csv_rows, geojson_members, geojson_shape, is_header, load_geojson
from .spatial_index import PointIndex


logger = logging.getLogger(__name__)

# Centroid distances are lattice multiples of cell_size; band comparisons allow
# for the rounding of those multiples.
BAND_TOLERANCE = 1e-9


class Category(str, Enum):
    HOT = 'H'
    NOT_SIGNIFICANT = 'N'
    COLD = 'C'


class Label(str, Enum):
    FORMAL = 'F'
    INFORMAL = 'I'
    UNLABELED = 'U'


class MoranClass(str, Enum):
    HIGH_HIGH = 'HH'
    LOW_LOW = 'LL'
    HIGH_LOW = 'HL'
    LOW_HIGH = 'LH'
    NOT_SIGNIFICANT = 'NS'


LABEL_ALIASES = {
    'f': Label.FORMAL, 'formal': Label.FORMAL,
    'i': Label.INFORMAL, 'informal': Label.INFORMAL,
    'u': Label.UNLABELED, 'unlabeled': Label.UNLABELED, '': Label.UNLABELED,
}


@dataclass
class GridCell:
    col: int
    row: int
    cx: float
    cy: float
    count: int
    nneighbors: int
    gi_z: float
    p_value: float
    category: Category = None
    moran_class: MoranClass = None
    label: Label = Label.UNLABELED
    prob: float = None
    pred: int = None


@dataclass
class FdrResult:
    alpha: float
    rejected: np.ndarray
    adjusted_threshold: float
    q_values: np.ndarray

    @property
    def n_rejected(self):
        return int(self.rejected.sum())


class GridLattice:
    """
    Dense lattice of square cells. Cell arrays are flat, indexed row-major
    (index = row * n_cols + col), with row 0 at the frame's minimum y.
    """

    def __init__(self, origin, cell_size, n_cols, n_rows, cx=None, cy=None):
        if cell_size <= 0:
            raise ConfigError(f'cell_size must be positive, got {cell_size}')
        if n_cols < 1 or n_rows < 1:
            raise ConfigError('a grid needs at least one cell')
        self.origin = (float(origin[0]), float(origin[1]))
        self.cell_size = float(cell_size)
        self.n_cols = int(n_cols)
        self.n_rows = int(n_rows)

        n = self.n_cells
        rows, cols = np.divmod(np.arange(n), self.n_cols)
        self.cols = cols
        self.rows = rows
        if cx is None:
            cx = self.origin[0] + (cols + 0.5) * self.cell_size
        if cy is None:
            cy = self.origin[1] + (rows + 0.5) * self.cell_size
        self.cx = np.asarray(cx, dtype=float)
        self.cy = np.asarray(cy, dtype=float)

        self.count = np.zeros(n, dtype=np.int64)
        self.nneighbors = None
        self.gi_z = None
        self.p_value = None
        self.category = None
        self.moran_i = None
        self.moran_p = None
        self.moran_class = None
        self.label = np.full(n, Label.UNLABELED.value, dtype='<U1')
        self.prob = None
        self.pred = None

    @property
    def n_cells(self):
        return self.n_cols * self.n_rows

    @property
    def centroids(self):
        return np.column_stack([self.cx, self.cy])

    def index(self, col, row):
        if not (0 <= col < self.n_cols and 0 <= row < self.n_rows):
            raise IndexError(f'cell ({col}, {row}) is outside the {self.n_cols}x{self.n_rows} grid')
        return row * self.n_cols + col

    def copy(self):
        other = GridLattice(self.origin, self.cell_size, self.n_cols, self.n_rows,
                            cx=self.cx.copy(), cy=self.cy.copy())
        for name in ('count', 'nneighbors', 'gi_z', 'p_value', 'category', 'moran_i',
                     'moran_p', 'moran_class', 'label', 'prob', 'pred'):
            value = getattr(self, name)
            setattr(other, name, None if value is None else value.copy())
        return other

    def as_2d(self, values):
        """
        Reshape a flat per-cell array to (n_rows, n_cols).
        """
        return np.asarray(values).reshape(self.n_rows, self.n_cols)

    def cell(self, col, row):
        i = self.index(col, row)
        return GridCell(
            col=col,
            row=row,
            cx=float(self.cx[i]),
            cy=float(self.cy[i]),
            count=int(self.count[i]),
            nneighbors=None if self.nneighbors is None else int(self.nneighbors[i]),
            gi_z=None if self.gi_z is None else float(self.gi_z[i]),
            p_value=None if self.p_value is None else float(self.p_value[i]),
            category=None if self.category is None or not self.category[i] else Category(self.category[i]),
            moran_class=None if self.moran_class is None else MoranClass(self.moran_class[i]),
            label=Label(self.label[i]),
            prob=None if self.prob is None else float(self.prob[i]),
            pred=None if self.pred is None else int(self.pred[i]),
        )

    @property
    def cells(self):
        return [self.cell(int(c), int(r)) for c, r in zip(self.cols, self.rows)]

    @property
    def labeled_mask(self):
        return self.label != Label.UNLABELED.value

    def __repr__(self):
        return (f'GridLattice({self.n_cols}x{self.n_rows}, cell_size={self.cell_size}, '
                f'origin={self.origin})')


def aggregate_to_grid(ps, frame, cell_size=100.0):
    """
    Count incident points per lattice cell.

    The lattice starts at the frame's minimum corner; points on the maximum
    edge fall into the last column/row.

    Args:
        ps: PointSet
        frame: Rect with positive area
        cell_size: Cell side in meters

    Returns:
        GridLattice with counts filled
    """
    if cell_size <= 0:
        raise ConfigError(f'cell_size must be positive, got {cell_size}')
    if frame.area <= 0:
        raise DataError('cannot build a grid over a zero-area frame')

    n_cols = max(1, math.ceil(frame.width / cell_size))
    n_rows = max(1, math.ceil(frame.height / cell_size))
    grid = GridLattice((frame.min_x, frame.min_y), cell_size, n_cols, n_rows)
    if ps.n == 0:
        return grid

    xs, ys = ps.coords[:, 0], ps.coords[:, 1]
    outside = (xs < frame.min_x) | (xs > frame.max_x) | (ys < frame.min_y) | (ys > frame.max_y)
    if outside.any():
        raise DataError(f'{int(outside.sum())} points fall outside the frame {frame.to_list()}')

    cols = np.clip(np.floor((xs - frame.min_x) / cell_size).astype(np.int64), 0, n_cols - 1)
    rows = np.clip(np.floor((ys - frame.min_y) / cell_size).astype(np.int64), 0, n_rows - 1)
    grid.count = np.bincount(rows * n_cols + cols, minlength=grid.n_cells).astype(np.int64)
    logger.info('aggregated %d points into %dx%d cells of %gm', ps.n, n_cols, n_rows, cell_size)
    return grid


def count_neighbors(ps, grid, band):
    """
    NNeighbors: number of points within band (inclusive) of each cell centroid.
    """
    if band <= 0:
        raise ConfigError(f'band distance must be positive, got {band}')
    out = grid.copy()
    out.nneighbors = PointIndex(ps.coords).count_within(grid.centroids, band, inclusive=True)
    return out


def band_kernel(cell_size, band):
    """
    Binary 2D kernel of lattice offsets whose centroid distance is <= band.
    """
    reach = int(math.floor(band / cell_size + BAND_TOLERANCE))
    offsets = np.arange(-reach, reach + 1)
    dc, dr = np.meshgrid(offsets, offsets)
    dist = cell_size * np.hypot(dc, dr)
    return (dist <= band * (1 + BAND_TOLERANCE)).astype(float)


def _band_sums(grid, values, band, include_self=True):
    kernel = band_kernel(grid.cell_size, band)
    if not include_self:
        kernel[kernel.shape[0] // 2, kernel.shape[1] // 2] = 0.0
    field = grid.as_2d(np.asarray(values, dtype=float))
    sums = ndimage.correlate(field, kernel, mode='constant', cval=0.0)
    weights = ndimage.correlate(np.ones_like(field), kernel, mode='constant', cval=0.0)
    return sums.ravel(), weights.ravel()


def _gi_from_sums(x, lag, w_sum):
    n = len(x)
    mean = x.sum() / n
    s = math.sqrt(max((x ** 2).sum() / n - mean ** 2, 0.0))
    z = np.zeros(n)
    if s == 0 or n < 2:
        return z
    denom = s * np.sqrt((n * w_sum - w_sum ** 2) / (n - 1))
    ok = denom > 0
    z[ok] = (lag[ok] - mean * w_sum[ok]) / denom[ok]
    return z


def gi_star(grid, band):
    """
    Getis-Ord Gi* z-scores over cell counts.

    Weights are binary on centroid distance (w_ij = 1 iff distance <= band,
    self included). Two-tailed p-values come from the standard normal. When all
    counts are equal (S = 0) every z is 0 and every p is 1.

    Args:
        grid: GridLattice with counts
        band: Band distance in meters

    Returns:
        GridLattice with gi_z and p_value filled
    """
    if band <= 0:
        raise ConfigError(f'band distance must be positive, got {band}')
    x = grid.count.astype(float)
    lag, w_sum = _band_sums(grid, x, band, include_self=True)
    z = _gi_from_sums(x, lag, w_sum)

    out = grid.copy()
    out.gi_z = z
    out.p_value = 2.0 * stats.norm.sf(np.abs(z))
    logger.info('Gi* over %d cells at band %gm: max z %.3f, min z %.3f',
                grid.n_cells, band, z.max(), z.min())
    return out


def brute_gi_star(grid, band):
    """
    Direct O(cells^2) evaluation of Gi* from centroid distances (test oracle).
    """
    x = grid.count.astype(float)
    c = grid.centroids
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    w = (d <= band * (1 + BAND_TOLERANCE)).astype(float)
    return _gi_from_sums(x, w @ x, w.sum(axis=1))


def fdr_correct(p_values, alpha=0.05):
    """
    Benjamini-Hochberg false discovery rate correction.

    Finds the largest k with p_(k) <= k * alpha / m and rejects the k smallest
    p-values.

    Args:
        p_values: Sequence of probabilities
        alpha: FDR level in (0, 1)

    Returns:
        FdrResult with per-hypothesis rejections in input order
    """
    p = np.asarray(p_values, dtype=float).ravel()
    if not 0 < alpha < 1:
        raise ConfigError(f'alpha must lie in (0, 1), got {alpha}')
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ConfigError('p-values must lie in [0, 1]')
    m = len(p)
    rejected = np.zeros(m, dtype=bool)
    if m == 0:
        return FdrResult(alpha, rejected, 0.0, np.empty(0))

    order = np.argsort(p, kind='mergesort')
    ranked = p[order]
    thresholds = alpha * np.arange(1, m + 1) / m
    passing = np.nonzero(ranked <= thresholds)[0]
    k = int(passing[-1]) + 1 if len(passing) else 0
    rejected[order[:k]] = True

    # step-up adjusted p-values (q-values)
    q_sorted = np.minimum.accumulate((ranked * m / np.arange(1, m + 1))[::-1])[::-1]
    q_values = np.empty(m)
    q_values[order] = np.minimum(q_sorted, 1.0)

    threshold = k * alpha / m
    logger.debug('BH: %d of %d rejected at alpha %g (threshold %g)', k, m, alpha, threshold)
    return FdrResult(alpha, rejected, threshold, q_values)


def _categories(z, rejected):
    category = np.full(len(z), Category.NOT_SIGNIFICANT.value, dtype='<U1')
    category[rejected & (z > 0)] = Category.HOT.value
    category[rejected & (z < 0)] = Category.COLD.value
    return category


def categorize(grid, fdr):
    """
    Hot iff rejected and z > 0; Cold iff rejected and z < 0; else not significant.
    """
    if grid.gi_z is None:
        raise DataError('categorize requires Gi* z-scores')
    if len(fdr.rejected) != grid.n_cells:
        raise ConfigError('FDR result does not match the grid')
    out = grid.copy()
    out.category = _categories(grid.gi_z, fdr.rejected)
    return out


def categorize_unadjusted(grid, alpha=0.05):
    """
    Categories from the raw two-tailed p-values, without FDR correction.
    """
    if grid.p_value is None:
        raise DataError('categorize requires Gi* p-values')
    return _categories(grid.gi_z, grid.p_value <= alpha)


def fdr_summary(grid, fdr):
    """
    Hot/not significant/cold counts with and without the FDR correction.
    """
    corrected = _categories(grid.gi_z, fdr.rejected)
    raw = categorize_unadjusted(grid, fdr.alpha)
    summary = {}
    for name, values in (('fdr', corrected), ('unadjusted', raw)):
        summary[name] = {c.name.lower(): int((values == c.value).sum()) for c in Category}
    summary['adjusted_threshold'] = fdr.adjusted_threshold
    return summary


def hotspots(grid, band, alpha=0.05):
    """
    Gi*, FDR correction and categorization in one call.
    """
    scored = gi_star(grid, band)
    fdr = fdr_correct(scored.p_value, alpha)
    return categorize(scored, fdr), fdr


def _local_moran_values(x, lag):
    z = x - x.mean()
    m2 = (z ** 2).sum() / len(x)
    if m2 == 0:
        return np.zeros(len(x)), z, m2
    return z * lag / m2, z, m2


def brute_local_moran(grid, band):
    """
    Direct O(cells^2) local Moran's I with binary band weights, self excluded
    (test oracle).
    """
    x = grid.count.astype(float)
    c = grid.centroids
    d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(axis=-1))
    w = (d <= band * (1 + BAND_TOLERANCE)).astype(float)
    np.fill_diagonal(w, 0.0)
    z = x - x.mean()
    m2 = (z ** 2).sum() / len(x)
    if m2 == 0:
        return np.zeros(len(x))
    return z * (w @ z) / m2


def local_moran(grid, band, permutations=99, seed=0, alpha=0.05):
    """
    Local Moran's I clusters and outliers.

    Uses binary band weights without self, and conditional permutation
    inference: each cell's neighbours are replaced by random draws from the
    other cells. Pseudo p-values are folded ((k + 1) / (P + 1), k the smaller
    tail count). Significant cells are classed by the sign of their deviation
    and of their spatial lag.

    Args:
        grid: GridLattice with counts
        band: Band distance in meters
        permutations: Number of conditional permutations (>= 1)
        seed: Seed of the permutation stream
        alpha: Significance level of the pseudo p-values

    Returns:
        GridLattice with moran_i, moran_p and moran_class filled
    """
    if band <= 0:
        raise ConfigError(f'band distance must be positive, got {band}')
    if permutations < 1:
        raise ConfigError('permutations must be >= 1')

    x = grid.count.astype(float)
    n = len(x)
    lag_x, w_sum = _band_sums(grid, x, band, include_self=False)
    mean = x.mean()
    lag = lag_x - mean * w_sum
    local_i, z, m2 = _local_moran_values(x, lag)

    out = grid.copy()
    out.moran_i = local_i
    out.moran_p = np.ones(n)
    out.moran_class = np.full(n, MoranClass.NOT_SIGNIFICANT.value, dtype='<U2')
    if m2 == 0 or n < 2:
        return out

    rng = np.random.default_rng(seed)
    neighbours = w_sum.astype(np.int64)
    max_k = min(int(neighbours.max()), n - 1)
    if max_k == 0:
        return out
    draws = np.array([rng.permutation(n - 1)[:max_k] for _ in range(permutations)])

    p_sim = np.ones(n)
    for i in range(n):
        k = min(neighbours[i], n - 1)
        if k == 0:
            continue
        picks = draws[:, :k]
        picks = picks + (picks >= i)  # skip cell i itself
        sim = z[i] * z[picks].sum(axis=1) / m2
        larger = int((sim >= local_i[i]).sum())
        if permutations - larger < larger:
            larger = permutations - larger
        p_sim[i] = (larger + 1.0) / (permutations + 1.0)

    significant = p_sim <= alpha
    classes = out.moran_class
    classes[significant & (z > 0) & (lag > 0)] = MoranClass.HIGH_HIGH.value
    classes[significant & (z < 0) & (lag < 0)] = MoranClass.LOW_LOW.value
    classes[significant & (z > 0) & (lag < 0)] = MoranClass.HIGH_LOW.value
    classes[significant & (z < 0) & (lag > 0)] = MoranClass.LOW_HIGH.value
    out.moran_p = p_sim
    logger.info('local Moran: %d significant cells of %d', int(significant.sum()), n)
    return out


# --- Labels ---

@dataclass
class CellLabels:
    """Per-cell labels keyed by (col, row)."""
    entries: list


@dataclass
class PolygonLabels:
    """Labeled polygons: list of (shapely geometry, Label)."""
    polygons: list


def _parse_label(value, line=None):
    key = str(value).strip().lower()
    if key not in LABEL_ALIASES:
        raise ParseError(f'unknown label {value!r}', line=line)
    return LABEL_ALIASES[key]


def read_label_csv(stream):
    """
    Read col,row,label rows (optional header); label is F/I/U or formal/informal.
    """
    entries = []
    for line, row in csv_rows(stream):
        if not row or all(not f.strip() for f in row):
            continue
        if line == 1 and is_header(row, ('col', 'row', 'label')):
            continue
        if len(row) != 3:
            raise ParseError(f'expected 3 fields, found {len(row)}', line=line)
        try:
            col, r = int(row[0]), int(row[1])
        except ValueError:
            raise ParseError(f'invalid cell key {row[0]!r},{row[1]!r}', line=line)
        entries.append((col, r, _parse_label(row[2], line)))
    return CellLabels(entries)


def read_label_geojson(stream):
    """
    Read labeled polygons from a GeoJSON FeatureCollection whose features carry
    a `status` property of formal or informal.
    """
    data = load_geojson(stream)
    polygons = []
    for i, feature in enumerate(geojson_members(data, 'features')):
        properties = feature.get('properties') or {}
        status = properties.get('status') if isinstance(properties, dict) else None
        label = _parse_label(status if status is not None else '')
        if label is Label.UNLABELED:
            raise LabelError(f'feature {i} has no formal/informal status')
        if not feature.get('geometry'):
            raise LabelError(f'feature {i} has no geometry')
        geom = geojson_shape(feature['geometry'], f'label feature {i}')
        if geom.geom_type not in ('Polygon', 'MultiPolygon'):
            raise LabelError(f'feature {i} is a {geom.geom_type}, not a polygon')
        polygons.append((geom, label))
    return PolygonLabels(polygons)


def write_label_geojson(polygon_labels, stream):
    features = [
        {
            'type': 'Feature',
            'properties': {'status': 'formal' if label is Label.FORMAL else 'informal'},
            'geometry': shapely.geometry.mapping(geom),
        }
        for geom, label in polygon_labels.polygons
    ]
    json.dump({'type': 'FeatureCollection', 'features': features}, stream)


def load_labels(path):
    """
    Load a label source from a .csv (per-cell) or .geojson/.json (polygons) file.
    """
    path = Path(path)
    if not path.exists():
        raise LabelError(f'label file {path} does not exist')
    with open(path, newline='', encoding='utf-8-sig') as handle:
        if path.suffix.lower() in ('.geojson', '.json'):
            return read_label_geojson(handle)
        return read_label_csv(handle)


def join_labels(grid, labels):
    """
    Attach formal/informal labels to the grid cells.

    Args:
        grid: GridLattice
        labels: CellLabels (keyed by col,row) or PolygonLabels (centroid containment)

    Returns:
        GridLattice with label filled; cells without a label stay unlabeled
    """
    out = grid.copy()
    out.label = np.full(grid.n_cells, Label.UNLABELED.value, dtype='<U1')

    if isinstance(labels, CellLabels):
        for col, row, label in labels.entries:
            try:
                i = grid.index(col, row)
            except IndexError as e:
                raise LabelError(str(e))
            out.label[i] = label.value
    elif isinstance(labels, PolygonLabels):
        if labels.polygons:
            geoms = [geom for geom, _ in labels.polygons]
            tags = np.array([label.value for _, label in labels.polygons])
            tree = STRtree(geoms)
            cell_idx, poly_idx = tree.query(shapely.points(grid.centroids), predicate='covered_by')
            conflicts = []
            for i in np.unique(cell_idx):
                found = set(tags[poly_idx[cell_idx == i]])
                if len(found) > 1:
                    conflicts.append((int(grid.cols[i]), int(grid.rows[i])))
                else:
                    out.label[i] = found.pop()
            if conflicts:
                listed = ', '.join(f'({c},{r})' for c, r in conflicts[:20])
                raise LabelError(f'conflicting polygon labels at {len(conflicts)} cells: {listed}')
    else:
        raise ConfigError(f'unsupported label source {type(labels).__name__}')

    logger.info(
        'labels joined: %d formal, %d informal, %d unlabeled',
        int((out.label == Label.FORMAL.value).sum()),
        int((out.label == Label.INFORMAL.value).sum()),
        int((out.label == Label.UNLABELED.value).sum()),
    )
    return out


# --- Grid CSV interchange ---

GRID_COLUMNS = ['col', 'row', 'cx', 'cy', 'count', 'nneighbors', 'gi_z', 'p', 'category', 'label']


def _fmt(value):
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return '' if math.isnan(value) else repr(float(value))
    return str(value)


def write_grid_csv(grid, stream):
    """
    Write the grid interchange CSV. `prob,pred` are appended when predictions
    exist and `moran` when Local Moran classes were computed.
    """
    columns = list(GRID_COLUMNS)
    if grid.prob is not None:
        columns += ['prob', 'pred']
    if grid.moran_class is not None:
        columns += ['moran']
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(columns)
    for i in range(grid.n_cells):
        row = [
            int(grid.cols[i]), int(grid.rows[i]), _fmt(grid.cx[i]), _fmt(grid.cy[i]),
            int(grid.count[i]),
            '' if grid.nneighbors is None else int(grid.nneighbors[i]),
            '' if grid.gi_z is None else _fmt(grid.gi_z[i]),
            '' if grid.p_value is None else _fmt(grid.p_value[i]),
            '' if grid.category is None else grid.category[i],
            grid.label[i],
        ]
        if grid.prob is not None:
            row += [_fmt(grid.prob[i]), int(grid.pred[i])]
        if grid.moran_class is not None:
            row += [grid.moran_class[i]]
        writer.writerow(row)


def save_grid(grid, path):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        write_grid_csv(grid, handle)


def read_grid_csv(stream, cell_size=None):
    """
    Read a grid interchange CSV back into a GridLattice.

    The cell size is inferred from centroid spacing; single-row and
    single-column grids need it passed explicitly.
    """
    reader = csv.DictReader(stream)
    missing = [c for c in ('col', 'row', 'cx', 'cy', 'count') if c not in (reader.fieldnames or [])]
    if missing:
        raise ParseError(f'grid CSV is missing columns {missing}', line=1)
    rows = list(reader)
    if not rows:
        raise DataError('grid CSV has no cells')

    def column(name, cast, line_offset=2):
        values = []
        for k, r in enumerate(rows):
            try:
                values.append(cast(r[name]))
            except (TypeError, ValueError, KeyError):
                raise ParseError(f'bad {name} value {r.get(name)!r}', line=k + line_offset)
        return values

    cols = np.array(column('col', int))
    rws = np.array(column('row', int))
    cx = np.array(column('cx', float))
    cy = np.array(column('cy', float))
    n_cols, n_rows = int(cols.max()) + 1, int(rws.max()) + 1
    if len(rows) != n_cols * n_rows:
        raise DataError(f'grid CSV has {len(rows)} cells, expected {n_cols * n_rows}')

    if cell_size is None:
        if n_cols > 1:
            cell_size = (cx.max() - cx.min()) / (n_cols - 1)
        elif n_rows > 1:
            cell_size = (cy.max() - cy.min()) / (n_rows - 1)
        else:
            raise DataError('cell size cannot be inferred from a single-cell grid; pass it explicitly')

    order = np.argsort(rws * n_cols + cols, kind='mergesort')
    origin = (float(cx[order[0]] - 0.5 * cell_size), float(cy[order[0]] - 0.5 * cell_size))
    grid = GridLattice(origin, cell_size, n_cols, n_rows, cx=cx[order], cy=cy[order])
    grid.count = np.array(column('count', int), dtype=np.int64)[order]

    def optional(name, cast, dtype):
        if name not in reader.fieldnames:
            return None
        raw = [r[name] for r in rows]
        if all(v == '' for v in raw):
            return None
        return np.array([cast(v) for v in raw], dtype=dtype)[order]

    grid.nneighbors = optional('nneighbors', int, np.int64)
    grid.gi_z = optional('gi_z', float, float)
    grid.p_value = optional('p', float, float)
    grid.category = optional('category', str, '<U1')
    grid.prob = optional('prob', float, float)
    grid.pred = optional('pred', int, np.int64)
    grid.moran_class = optional('moran', str, '<U2')
    labels = optional('label', lambda v: _parse_label(v).value, '<U1')
    if labels is not None:
        grid.label = labels
    return grid


def load_grid(path, cell_size=None):
    with open(path, newline='', encoding='utf-8-sig') as handle:
        return read_grid_csv(handle, cell_size=cell_size)
