"""
Model file format for trained networks.

Layout (all integers and floats little-endian):

    offset  size  field
    0       5     magic b"PSANN"
    5       2     format version (uint16), currently 1
    7       4     header length H (uint32)
    11      H     header, UTF-8 JSON: layer_sizes, activations, dropout_rate,
                  seed, use_coords, feature_names
    11+H    ...   payload, float64:
                    standardizer means (n_in), standardizer sds (n_in),
                    then per layer: W row-major (out x in), b (out)
    end-4   4     CRC-32 (uint32) of every preceding byte

Loading a saved model reproduces its outputs bitwise.
"""

import json
import logging
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .ann import AnnModel, Standardizer
from .exceptions import (
    ModelChecksumError,
    ModelFormatError,
    ModelTruncatedError,
    ModelVersionError,
)


logger = logging.getLogger(__name__)

MAGIC = b'PSANN'
FORMAT_VERSION = 1
_PREFIX = struct.Struct('<5sHI')
_CRC = struct.Struct('<I')
_FLOAT = np.dtype('<f8')


def _payload_size(layer_sizes):
    n_in = layer_sizes[0]
    size = 2 * n_in
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        size += fan_out * fan_in + fan_out
    return size * _FLOAT.itemsize


def dumps(model):
    """
    Serialize a trained model to bytes.
    """
    if model.standardizer is None:
        raise ModelFormatError('only models with a fitted standardizer can be saved')
    header = json.dumps({
        'layer_sizes': list(model.layer_sizes),
        'activations': ['relu'] * (len(model.weights) - 1) + ['sigmoid'],
        'dropout_rate': model.dropout_rate,
        'seed': model.seed,
        'use_coords': model.use_coords,
        'feature_names': list(model.standardizer.names),
    }, sort_keys=True).encode('utf-8')

    arrays = [model.standardizer.mean, model.standardizer.sd]
    for W, b in zip(model.weights, model.biases):
        arrays += [W, b]
    payload = b''.join(np.ascontiguousarray(a, dtype=_FLOAT).tobytes() for a in arrays)

    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + payload
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def loads(data):
    """
    Deserialize a model; raises a ModelFormatError subclass on any defect.
    """
    if len(data) < _PREFIX.size:
        raise ModelTruncatedError(f'model file is truncated ({len(data)} bytes)')
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError('not a predictslums model file')
    if version != FORMAT_VERSION:
        raise ModelVersionError(version, FORMAT_VERSION)

    header_end = _PREFIX.size + header_len
    if len(data) < header_end:
        raise ModelTruncatedError('model file is truncated inside the header')
    try:
        header = json.loads(data[_PREFIX.size:header_end].decode('utf-8'))
        layer_sizes = tuple(int(s) for s in header['layer_sizes'])
    except (ValueError, KeyError, TypeError):
        raise ModelFormatError('model header is not valid')

    expected = header_end + _payload_size(layer_sizes) + _CRC.size
    if len(data) < expected:
        raise ModelTruncatedError(f'model file is truncated ({len(data)} of {expected} bytes)')
    if len(data) > expected:
        raise ModelFormatError(f'model file has {len(data) - expected} unexpected trailing bytes')

    body = data[:-_CRC.size]
    (stored_crc,) = _CRC.unpack_from(data, len(body))
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ModelChecksumError('model file checksum mismatch')

    values = np.frombuffer(data, dtype=_FLOAT, count=_payload_size(layer_sizes) // 8,
                           offset=header_end).astype(float)
    n_in = layer_sizes[0]
    pos = 0

    def take(count, shape):
        nonlocal pos
        chunk = values[pos:pos + count].reshape(shape)
        pos += count
        return chunk.copy()

    mean = take(n_in, (n_in,))
    sd = take(n_in, (n_in,))
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(take(fan_out * fan_in, (fan_out, fan_in)))
        biases.append(take(fan_out, (fan_out,)))

    return AnnModel(
        layer_sizes=layer_sizes,
        dropout_rate=header.get('dropout_rate', 0.0),
        seed=header.get('seed', 0),
        use_coords=header.get('use_coords', True),
        standardizer=Standardizer(mean, sd, names=header.get('feature_names', ())),
        weights=weights,
        biases=biases,
    )


def save_model(model, path):
    """
    Write a model file atomically.
    """
    path = Path(path)
    data = dumps(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent or '.', prefix=path.name, suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    logger.info('saved model %s (%d bytes)', path, len(data))
    return path


def load_model(path):
    with open(path, 'rb') as handle:
        return loads(handle.read())
