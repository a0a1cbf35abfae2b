"""Strict RIFF/WAVE reader and writer for PCM 16/24-bit and float32.

Samples are exchanged as float64 in [-1, 1], shaped (n_samples, n_channels).
Unknown chunks are skipped (with the odd-size pad byte); anything structurally
off raises FormatError.
"""

from __future__ import annotations

import struct

import numpy as np

from .containers import atomic_write
from .errors import FormatError

_PCM = 1
_FLOAT = 3
_EXTENSIBLE = 0xFFFE


def read_wav(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        riff = f.read(12)
        if len(riff) != 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise FormatError(f"{path}: not a RIFF/WAVE file")
        fmt = None
        data = None
        while True:
            head = f.read(8)
            if not head:
                break
            if len(head) != 8:
                raise FormatError(f"{path}: truncated chunk header")
            ident, size = head[:4], struct.unpack("<I", head[4:])[0]
            body = f.read(size)
            if len(body) != size:
                raise FormatError(f"{path}: truncated {ident!r} chunk")
            if size % 2:
                f.read(1)
            if ident == b"fmt ":
                fmt = body
            elif ident == b"data":
                data = body
    if fmt is None or data is None:
        raise FormatError(f"{path}: missing fmt/data chunk")
    if len(fmt) < 16:
        raise FormatError(f"{path}: fmt chunk too short")
    audio_format, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if audio_format == _EXTENSIBLE:
        if len(fmt) < 26:
            raise FormatError(f"{path}: extensible fmt chunk too short")
        audio_format = struct.unpack("<H", fmt[24:26])[0]
    if channels < 1:
        raise FormatError(f"{path}: zero channels")
    if audio_format == _PCM and bits == 16:
        x = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _PCM and bits == 24:
        raw = np.frombuffer(data, dtype=np.uint8)
        if len(raw) % 3:
            raise FormatError(f"{path}: 24-bit data size not a multiple of 3")
        raw = raw.reshape(-1, 3)
        vals = (
            raw[:, 0].astype(np.int32)
            | (raw[:, 1].astype(np.int32) << 8)
            | (raw[:, 2].astype(np.int32) << 16)
        )
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        x = vals.astype(np.float64) / float(1 << 23)
    elif audio_format == _FLOAT and bits == 32:
        x = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported format {audio_format}/{bits}-bit")
    if len(x) % channels:
        raise FormatError(f"{path}: data size not divisible by channel count")
    return x.reshape(-1, channels), rate


def write_wav(path, data: np.ndarray, sample_rate: int, encoding: str = "float32") -> None:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    channels = data.shape[1]
    if encoding == "float32":
        payload = data.astype("<f4").tobytes()
        audio_format, bits = _FLOAT, 32
    elif encoding == "pcm16":
        scaled = np.clip(np.round(data * 32768.0), -32768, 32767).astype("<i2")
        payload = scaled.tobytes()
        audio_format, bits = _PCM, 16
    elif encoding == "pcm24":
        scaled = np.clip(np.round(data * float(1 << 23)), -(1 << 23), (1 << 23) - 1).astype(np.int32)
        buf = np.empty((scaled.size, 3), dtype=np.uint8)
        flat = scaled.reshape(-1)
        buf[:, 0] = flat & 0xFF
        buf[:, 1] = (flat >> 8) & 0xFF
        buf[:, 2] = (flat >> 16) & 0xFF
        payload = buf.tobytes()
        audio_format, bits = _PCM, 24
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", audio_format, channels, sample_rate, sample_rate * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        body += b"\x00"
    with atomic_write(path) as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)
