"""
Checkpoint container.

Layout (all integers little-endian):

    offset 0    8 bytes   magic b'SEDNCKPT'
    offset 8    uint32    format version (currently 1)
    offset 12   uint32    header length in bytes, n
    offset 16   n bytes   UTF-8 YAML header:
                            model:    ModelConfig as a mapping
                            tensors:  list of {name, shape}, parameters first,
                                      then extra arrays (optimizer moments)
                            metadata: free mapping (epoch, losses, counters)
    offset 16+n           tensor payloads in header order, each prod(shape)
                          float64 little-endian values, row-major

YAML is dumped with sorted keys and no timestamps, so equal contents give
byte-identical files, and float64 payloads make save/load bit-exact.
"""
import logging
import os
import struct
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..autograd import Tensor
from ..utils.exceptions import DataLoadingError
from .model import ModelConfig, ModelParams

logger = logging.getLogger(__name__)

MAGIC = b'SEDNCKPT'
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct('<8sII')
_PAYLOAD_DTYPE = np.dtype('<f8')


@dataclass
class Checkpoint:
    params: ModelParams
    extra_arrays: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def save_checkpoint(path, params, extra_arrays=None, metadata=None):
    """Writes parameters plus optional named arrays and metadata to one file."""
    extra_arrays = extra_arrays or {}
    entries = [(name, t.data) for name, t in params.tensors.items()]
    entries += [(name, np.asarray(a)) for name, a in extra_arrays.items()]
    header = {
        'model': params.config.to_dict(),
        'tensors': [{'name': name, 'shape': list(array.shape), 'group': 'params' if i < len(params.tensors) else 'extra'}
                    for i, (name, array) in enumerate(entries)],
        'metadata': metadata or {},
    }
    header_bytes = yaml.safe_dump(header, sort_keys=True).encode('utf-8')

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for _, array in entries:
            f.write(np.ascontiguousarray(array, dtype=_PAYLOAD_DTYPE).tobytes())
    logger.info(f"Checkpoint saved to {path} ({len(entries)} tensors)")


def load_checkpoint(path):
    """Reads a checkpoint written by `save_checkpoint`."""
    if not os.path.exists(path):
        raise DataLoadingError(f"Checkpoint not found at {path}")
    with open(path, 'rb') as f:
        blob = f.read()
    if len(blob) < _PREAMBLE.size:
        raise DataLoadingError(f"{path} is too short to be a checkpoint.")
    magic, version, header_len = _PREAMBLE.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DataLoadingError(f"{path} is not a checkpoint (bad magic {magic!r}).")
    if version != FORMAT_VERSION:
        raise DataLoadingError(f"{path} has checkpoint format {version}, this build reads {FORMAT_VERSION}.")

    start = _PREAMBLE.size
    try:
        header = yaml.safe_load(blob[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, yaml.YAMLError) as e:
        raise DataLoadingError(f"Corrupt checkpoint header in {path}: {e}")

    offset = start + header_len
    params, extra = {}, {}
    for entry in header['tensors']:
        shape = tuple(entry['shape'])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * _PAYLOAD_DTYPE.itemsize
        if end > len(blob):
            raise DataLoadingError(f"Checkpoint {path} is truncated at tensor '{entry['name']}'.")
        array = np.frombuffer(blob, dtype=_PAYLOAD_DTYPE, count=count, offset=offset).reshape(shape).astype(np.float64)
        offset = end
        if entry['group'] == 'params':
            params[entry['name']] = Tensor(array, requires_grad=True, name=entry['name'])
        else:
            extra[entry['name']] = array

    config = ModelConfig.from_dict(header['model'])
    model_params = ModelParams(config, params)
    model_params.validate()
    logger.info(f"Checkpoint loaded from {path} ({config.variant.value}, {len(params)} parameter tensors)")
    return Checkpoint(params=model_params, extra_arrays=extra, metadata=header.get('metadata') or {})
