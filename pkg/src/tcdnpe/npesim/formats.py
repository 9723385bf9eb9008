"""Binary weight/feature files and model files.

A record is a 16-byte little-endian header (magic ``TCDW`` for weights or
``TCDF`` for features, u16 version, u16 number of dims, u32 rows, u32 cols)
followed by ``rows * cols`` int16 words, row-major. A model file is a
sequence of ``TCDW`` records, one ``(inputs, neurons)`` matrix per layer.
"""

import struct

import numpy as np

HEADER = struct.Struct("<4sHHII")
VERSION = 1
WEIGHTS_MAGIC = b"TCDW"
FEATURES_MAGIC = b"TCDF"


class FormatError(ValueError):
    pass


def pack_matrix(matrix, magic):
    m = np.asarray(matrix, dtype=np.int64)
    if m.ndim != 2:
        raise ValueError("only 2-D matrices are stored")
    if m.size and (m.min() < -32768 or m.max() > 32767):
        raise ValueError("values exceed the 16-bit range")
    return HEADER.pack(magic, VERSION, 2, *m.shape) + m.astype("<i2").tobytes()


def unpack_matrix(buf, offset=0, magic=None):
    """Decode one record at ``offset``; returns ``(matrix, next_offset)``."""
    if len(buf) - offset < HEADER.size:
        raise FormatError("truncated header")
    got, version, ndims, rows, cols = HEADER.unpack_from(buf, offset)
    if got not in (WEIGHTS_MAGIC, FEATURES_MAGIC) or (magic and got != magic):
        raise FormatError(f"bad magic {got!r}")
    if version != VERSION or ndims != 2:
        raise FormatError(f"unsupported version {version} / dims {ndims}")
    start = offset + HEADER.size
    end = start + 2 * rows * cols
    if end > len(buf):
        raise FormatError("truncated payload")
    data = np.frombuffer(buf[start:end], dtype="<i2").astype(np.int64).reshape(rows, cols)
    return data, end


def save_matrix(path, matrix, magic=WEIGHTS_MAGIC):
    with open(path, "wb") as f:
        f.write(pack_matrix(matrix, magic))


def load_matrix(path, magic=None):
    with open(path, "rb") as f:
        buf = f.read()
    matrix, end = unpack_matrix(buf, 0, magic)
    if end != len(buf):
        raise FormatError("trailing bytes after record")
    return matrix


def save_model(path, model):
    with open(path, "wb") as f:
        for w in model.weights:
            f.write(pack_matrix(w, WEIGHTS_MAGIC))


def load_model(path):
    from ..goldref import MlpModel

    with open(path, "rb") as f:
        buf = f.read()
    weights, offset = [], 0
    while offset < len(buf):
        w, offset = unpack_matrix(buf, offset, WEIGHTS_MAGIC)
        weights.append(w)
    if not weights:
        raise FormatError("model file holds no layers")
    sizes = [weights[0].shape[0]] + [w.shape[1] for w in weights]
    return MlpModel(sizes, weights)
