"""
Synthetic Cities
Generates test cities whose informal areas are dense clusters of small
subdivided lots surrounded by regular formal street lattices, together with
the formal/informal label polygons.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Point as ShapelyPoint, box

from .exceptions import ConfigError
from .hotspot import Label, PolygonLabels
from .ingest import PointSet, Rect


logger = logging.getLogger(__name__)


@dataclass
class FormalBlock:
    region: Rect
    spacing: float


@dataclass
class InformalBlob:
    center: tuple
    radius: float
    count: int
    jitter: float = 5.0


@dataclass
class SyntheticCitySpec:
    frame: Rect
    formal_blocks: list = field(default_factory=list)
    informal_blobs: list = field(default_factory=list)
    seed: int = 0

    def validate(self):
        frame = box(*self.frame.to_list())
        formal = []
        for block in self.formal_blocks:
            if block.spacing <= 0:
                raise ConfigError(f'formal spacing must be positive, got {block.spacing}')
            region = box(*block.region.to_list())
            if not frame.covers(region):
                raise ConfigError(f'formal region {block.region.to_list()} leaves the frame')
            formal.append(region)
        for blob in self.informal_blobs:
            if blob.count <= 0 or blob.radius <= 0:
                raise ConfigError('informal blobs need a positive radius and point count')
            polygon = blob_polygon(blob)
            if not frame.covers(polygon):
                raise ConfigError(f'informal blob at {blob.center} leaves the frame')
            for region in formal:
                if polygon.intersects(region):
                    raise ConfigError(
                        f'informal blob at {blob.center} overlaps formal region {region.bounds}'
                    )


def blob_polygon(blob):
    return ShapelyPoint(*blob.center).buffer(blob.radius, quad_segs=16)


def _lattice(block):
    region = block.region
    nx = int(np.floor(region.width / block.spacing + 1e-9)) + 1
    ny = int(np.floor(region.height / block.spacing + 1e-9)) + 1
    xs = region.min_x + block.spacing * np.arange(nx)
    ys = region.min_y + block.spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _blob_points(blob, polygon, rng):
    sigma = blob.radius / 2.0
    accepted = []
    needed = blob.count
    while needed > 0:
        draw = rng.normal(blob.center, sigma, size=(2 * needed + 8, 2))
        draw += rng.normal(0.0, blob.jitter, size=draw.shape) if blob.jitter > 0 else 0.0
        inside = draw[shapely.contains_xy(polygon, draw[:, 0], draw[:, 1])]
        accepted.append(inside[:needed])
        needed -= len(accepted[-1])
    return np.concatenate(accepted)


def generate_synthetic_city(spec):
    """
    Build incident points and label polygons for a synthetic city.

    Formal regions emit inclusive lattice intersections at their spacing;
    informal blobs emit exactly `count` points from a Gaussian truncated to the
    blob polygon, with jitter.

    Returns:
        (PointSet, PolygonLabels)
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    parts, polygons = [], []
    for block in spec.formal_blocks:
        parts.append(_lattice(block))
        polygons.append((box(*block.region.to_list()), Label.FORMAL))
    for blob in spec.informal_blobs:
        polygon = blob_polygon(blob)
        parts.append(_blob_points(blob, polygon, rng))
        polygons.append((polygon, Label.INFORMAL))
    coords = np.concatenate(parts) if parts else np.empty((0, 2))
    logger.info('synthetic city: %d points, %d formal regions, %d informal blobs',
                len(coords), len(spec.formal_blocks), len(spec.informal_blobs))
    return PointSet(coords), PolygonLabels(polygons)


def default_city_spec(seed=0, squares=5, square_size=1000.0, n_informal=5, n_sparse=5):
    """
    The reference fixture: a squares x squares layout of 1 km squares. Most
    are dense formal lattices (100 m), some are sparse large-lot formal
    lattices (200 m), and some hold an informal blob at roughly ten times the
    formal density. Which squares are informal or sparse depends on the seed.
    """
    rng = np.random.default_rng([seed, 7])
    order = rng.permutation(squares * squares)
    informal = set(order[:n_informal].tolist())
    sparse = set(order[n_informal:n_informal + n_sparse].tolist())

    blocks, blobs = [], []
    inner = square_size - 100.0
    for k in range(squares * squares):
        x0 = (k % squares) * square_size
        y0 = (k // squares) * square_size
        if k in informal:
            blobs.append(InformalBlob(center=(x0 + inner / 2, y0 + inner / 2),
                                      radius=inner / 2 - 50.0, count=600, jitter=5.0))
        else:
            spacing = 200.0 if k in sparse else 100.0
            blocks.append(FormalBlock(Rect(x0, y0, x0 + inner, y0 + inner), spacing))
    frame = Rect(0.0, 0.0, squares * square_size, squares * square_size)
    return SyntheticCitySpec(frame=frame, formal_blocks=blocks, informal_blobs=blobs, seed=seed)
