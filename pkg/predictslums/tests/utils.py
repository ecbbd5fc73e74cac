from pathlib import Path

from predictslums import hotspot, ingest
from predictslums.ann import TrainConfig
from predictslums.synthetic import default_city_spec, generate_synthetic_city


SMALL_CITY = {'squares': 3, 'n_informal': 2, 'n_sparse': 2}
QUICK_TRAIN = TrainConfig(epochs=3)


def write_city(directory, seed=0, **layout):
    """
    Write points.csv and labels.geojson of a synthetic city into directory.

    Returns:
        (points path, labels path, SyntheticCitySpec)
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = default_city_spec(seed, **(layout or SMALL_CITY))
    ps, labels = generate_synthetic_city(spec)
    points = directory / 'points.csv'
    with open(points, 'w', newline='', encoding='utf-8') as handle:
        ingest.write_point_csv(ps, handle)
    label_path = directory / 'labels.geojson'
    with open(label_path, 'w', encoding='utf-8') as handle:
        hotspot.write_label_geojson(labels, handle)
    return points, label_path, spec
