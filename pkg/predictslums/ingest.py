"""
Ingest Module
Parses street-network inputs, derives intersection points ("incident points")
and establishes the planar study frame.

All coordinates are projected meters. Duplicates are kept at parse time; only
extract_intersections() and dedupe() merge points.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from shapely.errors import ShapelyError
from shapely.geometry import shape

from .exceptions import ConfigError, DataError, DegreeCoordinatesError, ParseError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Point:
    x: float
    y: float


class PointSet:
    """
    Ordered planar point set backed by an (n, 2) float64 array.
    """

    def __init__(self, coords=None):
        if coords is None:
            coords = np.empty((0, 2), dtype=float)
        coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(coords)):
            raise DataError('point coordinates must be finite')
        self.coords = coords

    @classmethod
    def from_points(cls, points):
        return cls([(p.x, p.y) for p in points])

    @property
    def n(self):
        return len(self.coords)

    @property
    def points(self):
        return [Point(float(x), float(y)) for x, y in self.coords]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f'PointSet(n={self.n})'


@dataclass(frozen=True)
class Rect:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.max_x < self.min_x or self.max_y < self.min_y:
            raise ConfigError(f'invalid rectangle {self}')

    @property
    def width(self):
        return self.max_x - self.min_x

    @property
    def height(self):
        return self.max_y - self.min_y

    @property
    def area(self):
        return self.width * self.height

    @property
    def degenerate(self):
        return self.area == 0.0

    def contains(self, x, y):
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def to_list(self):
        return [self.min_x, self.min_y, self.max_x, self.max_y]


class Polyline:
    """
    Street segment as an ordered vertex list (at least two vertices).
    """

    def __init__(self, vertices, line_id=None):
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(vertices) < 2:
            raise DataError(f'polyline {line_id!r} needs at least 2 vertices')
        if not np.all(np.isfinite(vertices)):
            raise DataError(f'polyline {line_id!r} has non-finite coordinates')
        self.vertices = vertices
        self.line_id = line_id

    def __repr__(self):
        return f'Polyline(id={self.line_id!r}, vertices={len(self.vertices)})'


def csv_rows(stream):
    """
    Yield (line number, row) pairs of a CSV stream, dropping a leading UTF-8 BOM.
    """
    for line, row in enumerate(csv.reader(stream), start=1):
        if line == 1 and row:
            row[0] = row[0].lstrip('\ufeff')
        yield line, row


def is_header(row, names):
    return [field.strip().lower() for field in row] == list(names)


def _parse_float(value, line, column):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ParseError(f'{column}={value!r} is not a number', line=line)
    if not math.isfinite(number):
        raise ParseError(f'{column}={value!r} is not finite', line=line)
    return number


def parse_point_csv(stream):
    """
    Parse a point CSV (columns x,y in meters, optional header).

    Args:
        stream: Text stream or iterable of lines

    Returns:
        PointSet with the points in input order, duplicates retained
    """
    coords = []
    for line, row in csv_rows(stream):
        if not row or all(not field.strip() for field in row):
            continue
        if len(row) != 2:
            raise ParseError(f'expected 2 fields, found {len(row)}', line=line)
        if line == 1 and is_header(row, ('x', 'y')):
            continue
        coords.append((
            _parse_float(row[0].strip(), line, 'x'),
            _parse_float(row[1].strip(), line, 'y'),
        ))
    logger.info('parsed %d points', len(coords))
    return PointSet(coords)


def read_point_csv(path):
    with open(path, newline='', encoding='utf-8-sig') as handle:
        return parse_point_csv(handle)


def write_point_csv(ps, stream):
    """
    Write a PointSet as CSV with an x,y header. Floats are written with repr()
    so parsing the output reproduces the coordinates exactly.
    """
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(['x', 'y'])
    for x, y in ps.coords:
        writer.writerow([repr(float(x)), repr(float(y))])


def _close_pairs(coords, tol):
    """
    Index pairs of points closer than tol; at tol 0, exactly coincident points.
    """
    pairs = cKDTree(coords).query_pairs(r=tol, output_type='ndarray')
    if tol > 0 and len(pairs):
        # query_pairs is inclusive; points exactly tol apart are kept apart
        gaps = np.hypot(*(coords[pairs[:, 0]] - coords[pairs[:, 1]]).T)
        pairs = pairs[gaps < tol]
    return pairs


def _snap_clusters(coords, tol):
    """
    Merge points closer than tol (pairs within tol, transitively) into their
    cluster means, repeating until no two output points are within tol.
    Cluster order follows the first occurrence of a member.
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    while len(coords) > 1:
        pairs = _close_pairs(coords, tol)
        if len(pairs) == 0:
            break
        parent = np.arange(len(coords))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(i) for i in range(len(coords))])
        order = []
        seen = set()
        for root in roots:
            if root not in seen:
                seen.add(root)
                order.append(root)
        coords = np.array([coords[roots == root].mean(axis=0) for root in order])
        if tol == 0:
            break
    return coords


def dedupe(ps, tol=0.0):
    """
    Merge duplicate points (within tol meters) of a PointSet.
    """
    if tol < 0:
        raise ConfigError(f'dedupe tolerance must be >= 0, got {tol}')
    if ps.n == 0:
        return PointSet()
    return PointSet(_snap_clusters(ps.coords, tol))


def extract_intersections(segments, snap_tol=0.5):
    """
    Derive incident points from street polylines.

    Emits every polyline endpoint and every interior vertex shared with another
    polyline (within snap_tol), then snaps the candidates into snap_tol
    clusters so each output point is unique.

    Args:
        segments: List of Polyline
        snap_tol: Snapping tolerance in meters (>= 0)

    Returns:
        PointSet of intersection nodes
    """
    if snap_tol < 0:
        raise ConfigError(f'snap_tol must be >= 0, got {snap_tol}')
    if not segments:
        return PointSet()

    vertices = np.concatenate([seg.vertices for seg in segments])
    owners = np.concatenate([np.full(len(seg.vertices), i) for i, seg in enumerate(segments)])
    is_end = np.concatenate([
        np.r_[True, np.zeros(len(seg.vertices) - 2, dtype=bool), True] for seg in segments
    ])

    shared = np.zeros(len(vertices), dtype=bool)
    pairs = _close_pairs(vertices, snap_tol)
    if len(pairs):
        cross = owners[pairs[:, 0]] != owners[pairs[:, 1]]
        shared[pairs[cross, 0]] = True
        shared[pairs[cross, 1]] = True

    candidates = vertices[is_end | shared]
    nodes = _snap_clusters(candidates, snap_tol)
    logger.info(
        'extracted %d intersection nodes from %d polylines (%d candidates)',
        len(nodes), len(segments), len(candidates),
    )
    return PointSet(nodes)


def bounding_rect(ps):
    """
    Minimum axis-aligned rectangle enclosing every point (inclusive).
    Zero-area rectangles are allowed and reported through Rect.degenerate.
    """
    if ps.n == 0:
        raise DataError('cannot compute the bounding rectangle of an empty point set')
    min_x, min_y = ps.coords.min(axis=0)
    max_x, max_y = ps.coords.max(axis=0)
    rect = Rect(float(min_x), float(min_y), float(max_x), float(max_y))
    if rect.degenerate:
        logger.warning('bounding rectangle %s has zero area', rect.to_list())
    return rect


def ensure_projected(rect, force_degrees=False):
    """
    Reject frames that look like geographic degrees rather than projected meters.
    """
    looks_geographic = (
        rect.min_x >= -180 and rect.max_x <= 180
        and rect.min_y >= -90 and rect.max_y <= 90
    )
    if looks_geographic and not force_degrees:
        raise DegreeCoordinatesError(
            f'bounding rectangle {rect.to_list()} fits inside [-180,180]x[-90,90]; '
            'inputs must be projected meters (use --force-degrees to override)'
        )
    return rect


def read_polylines_csv(stream):
    """
    Read polylines from CSV rows of line_id,seq,x,y (optional header).
    Rows are grouped by line_id and ordered by seq.
    """
    lines = {}
    for line, row in csv_rows(stream):
        if not row or all(not field.strip() for field in row):
            continue
        if len(row) != 4:
            raise ParseError(f'expected 4 fields, found {len(row)}', line=line)
        if line == 1 and is_header(row, ('line_id', 'seq', 'x', 'y')):
            continue
        line_id = row[0].strip()
        seq = _parse_float(row[1].strip(), line, 'seq')
        x = _parse_float(row[2].strip(), line, 'x')
        y = _parse_float(row[3].strip(), line, 'y')
        lines.setdefault(line_id, []).append((seq, x, y))

    polylines = []
    for line_id, rows in lines.items():
        rows.sort(key=lambda r: r[0])
        polylines.append(Polyline([(x, y) for _, x, y in rows], line_id=line_id))
    return polylines


def load_geojson(stream):
    """
    Decode a GeoJSON document whose top level is an object.
    """
    try:
        data = json.load(stream)
    except json.JSONDecodeError as e:
        raise ParseError(f'invalid GeoJSON: {e.msg}', line=e.lineno)
    except UnicodeDecodeError as e:
        raise ParseError(f'invalid GeoJSON: {e.reason}')
    if not isinstance(data, dict):
        raise ParseError(f'GeoJSON must be an object, found {type(data).__name__}')
    return data


def geojson_members(data, key):
    members = data.get(key, [])
    if not isinstance(members, list) or not all(isinstance(m, dict) for m in members):
        raise ParseError(f'GeoJSON {key!r} must be a list of objects')
    return members


def geojson_shape(geometry, where):
    """
    shapely geometry of a GeoJSON geometry object; malformed ones raise ParseError.
    """
    try:
        return shape(geometry)
    except (ShapelyError, AttributeError, IndexError, KeyError, TypeError, ValueError) as e:
        raise ParseError(f'{where}: invalid geometry ({e})')


def read_polylines_geojson(stream):
    """
    Read LineString / MultiLineString geometries from a GeoJSON
    FeatureCollection, GeometryCollection, Feature or bare geometry.
    """
    data = load_geojson(stream)

    if data.get('type') == 'FeatureCollection':
        items = [(f.get('id', i), f.get('geometry'))
                 for i, f in enumerate(geojson_members(data, 'features'))]
    elif data.get('type') == 'Feature':
        items = [(data.get('id', 0), data.get('geometry'))]
    elif data.get('type') == 'GeometryCollection':
        items = list(enumerate(geojson_members(data, 'geometries')))
    else:
        items = [(0, data)]

    polylines = []
    for line_id, geometry in items:
        if not geometry:
            continue
        geom = geojson_shape(geometry, f'feature {line_id!r}')
        if geom.geom_type == 'LineString':
            polylines.append(Polyline(list(geom.coords), line_id=line_id))
        elif geom.geom_type == 'MultiLineString':
            for k, part in enumerate(geom.geoms):
                polylines.append(Polyline(list(part.coords), line_id=f'{line_id}.{k}'))
        else:
            logger.debug('skipping %s geometry %r', geom.geom_type, line_id)
    return polylines


def read_polylines(path):
    """
    Read polylines from a .csv or .geojson/.json file.
    """
    path = Path(path)
    with open(path, newline='', encoding='utf-8-sig') as handle:
        if path.suffix.lower() in ('.geojson', '.json'):
            return read_polylines_geojson(handle)
        return read_polylines_csv(handle)
