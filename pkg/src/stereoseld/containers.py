"""Little-endian binary containers: 4-byte magic + u32 version, then payload.

    SSNS  normalisation stats    (C, F dims; f32 mean then f32 std)
    SSW1  named weight tensors   (count; per tensor: name, dtype, dims, data)
    SSE1  embedding matrix       (n_tokens, dim; f32 row-major)
    SSF1  feature tensor         (ndim, dims; f32 row-major)

Writes go through a temp file and os.replace, so readers never observe a
partial file.
"""

from __future__ import annotations

import os
import struct
import tempfile
from contextlib import contextmanager

import numpy as np

from .dsp import NormStats
from .errors import FormatError

VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@contextmanager
def atomic_write(path):
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def _read_header(f, magic: bytes) -> None:
    got = _read_exact(f, 4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(f, 4))
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")


def save_norm_stats(path, stats: NormStats) -> None:
    c, fbins = stats.mean.shape
    with atomic_write(path) as f:
        f.write(b"SSNS" + struct.pack("<III", VERSION, c, fbins))
        f.write(stats.mean.astype("<f4").tobytes())
        f.write(stats.std.astype("<f4").tobytes())


def load_norm_stats(path) -> NormStats:
    with open(path, "rb") as f:
        _read_header(f, b"SSNS")
        c, fbins = struct.unpack("<II", _read_exact(f, 8))
        n = c * fbins * 4
        mean = np.frombuffer(_read_exact(f, n), dtype="<f4").reshape(c, fbins)
        std = np.frombuffer(_read_exact(f, n), dtype="<f4").reshape(c, fbins)
    return NormStats(mean=mean, std=std)


def save_weights(path, weights: dict[str, np.ndarray]) -> None:
    with atomic_write(path) as f:
        f.write(b"SSW1" + struct.pack("<II", VERSION, len(weights)))
        for name in sorted(weights):
            arr = np.ascontiguousarray(weights[name])
            if arr.dtype not in _DTYPE_CODES:
                arr = arr.astype(np.float32)
            code = _DTYPE_CODES[arr.dtype]
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)) + encoded)
            f.write(struct.pack("<BB", code, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype(_DTYPES[code]).tobytes())


def load_weights(path, expected: dict[str, tuple[int, ...]] | None = None) -> dict[str, np.ndarray]:
    """Load a named-tensor file; with an expected shape table, reject unknown
    names and report every missing or misshaped parameter."""
    weights: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        _read_header(f, b"SSW1")
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2))
            name = _read_exact(f, name_len).decode("utf-8")
            code, ndim = struct.unpack("<BB", _read_exact(f, 2))
            if code not in _DTYPES:
                raise FormatError(f"unknown dtype code {code} for {name!r}")
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
            dtype = _DTYPES[code]
            n_bytes = int(np.prod(shape)) * dtype.itemsize if ndim else dtype.itemsize
            arr = np.frombuffer(_read_exact(f, n_bytes), dtype=dtype).reshape(shape)
            weights[name] = arr
    if expected is not None:
        missing = sorted(set(expected) - set(weights))
        if missing:
            raise FormatError(f"missing parameters: {', '.join(missing)}")
        unknown = sorted(set(weights) - set(expected))
        if unknown:
            raise FormatError(f"unknown parameters: {', '.join(unknown)}")
        for name, shape in expected.items():
            if weights[name].shape != tuple(shape):
                raise FormatError(
                    f"parameter {name!r} has shape {weights[name].shape}, expected {tuple(shape)}"
                )
    return weights


def save_embedding(path, tokens: np.ndarray) -> None:
    tokens = np.asarray(tokens)
    if tokens.ndim != 2:
        raise ValueError(f"embedding must be 2-D, got {tokens.shape}")
    with atomic_write(path) as f:
        f.write(b"SSE1" + struct.pack("<III", VERSION, tokens.shape[0], tokens.shape[1]))
        f.write(tokens.astype("<f4").tobytes())


def load_embedding(path) -> np.ndarray:
    with open(path, "rb") as f:
        _read_header(f, b"SSE1")
        n, d = struct.unpack("<II", _read_exact(f, 8))
        return np.frombuffer(_read_exact(f, n * d * 4), dtype="<f4").reshape(n, d)


def save_features(path, data: np.ndarray) -> None:
    data = np.asarray(data)
    with atomic_write(path) as f:
        f.write(b"SSF1" + struct.pack("<II", VERSION, data.ndim))
        f.write(struct.pack(f"<{data.ndim}I", *data.shape))
        f.write(data.astype("<f4").tobytes())


def load_features(path) -> np.ndarray:
    with open(path, "rb") as f:
        _read_header(f, b"SSF1")
        (ndim,) = struct.unpack("<I", _read_exact(f, 4))
        shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim))
        n = int(np.prod(shape)) * 4
        return np.frombuffer(_read_exact(f, n), dtype="<f4").reshape(shape)
