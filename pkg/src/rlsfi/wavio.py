"""Minimal RIFF/WAVE reader and writer.

Supports little-endian PCM 16/24-bit and IEEE float32, multichannel.
Integer samples map to [-1, 1) via division by 2^(bits-1); float samples
pass through unchanged. Written files are deterministic byte-for-byte.
"""

import struct

import numpy as np

from .errors import FormatError


def write_wav(path, samples, sample_rate, encoding="float32"):
    """Write a [channel][time] array as an interleaved WAV file."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("samples must be [channel][time]")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    channels, _ = x.shape
    interleaved = x.T

    if encoding == "float32":
        fmt_tag, bits = 3, 32
        data = interleaved.astype("<f4").tobytes()
    elif encoding == "pcm16":
        fmt_tag, bits = 1, 16
        scaled = np.clip(np.rint(interleaved * 32768.0), -32768, 32767)
        data = scaled.astype("<i2").tobytes()
    elif encoding == "pcm24":
        fmt_tag, bits = 1, 24
        scaled = np.clip(np.rint(interleaved * 8388608.0), -8388608, 8388607).astype("<i4")
        raw = scaled.astype("<i4").tobytes()
        # keep the low three bytes of each little-endian int32
        buf = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 4)[:, :3]
        data = buf.tobytes()
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")

    rate = int(round(sample_rate))
    block_align = channels * (bits // 8)
    byte_rate = rate * block_align
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 4 + 8 + 16 + 8 + len(data)),
            b"WAVE",
            b"fmt ",
            struct.pack("<IHHIIHH", 16, fmt_tag, channels, rate, byte_rate, block_align, bits),
            b"data",
            struct.pack("<I", len(data)),
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data)


def read_wav(path):
    """Read a WAV file; returns (samples [channel][time] float64, sample_rate)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[0:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise FormatError(f"{path} is not a RIFF/WAVE file", byte_offset=0)

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        chunk_id = blob[pos : pos + 4]
        (chunk_size,) = struct.unpack("<I", blob[pos + 4 : pos + 8])
        body = blob[pos + 8 : pos + 8 + chunk_size]
        if len(body) < chunk_size:
            raise FormatError(f"{path}: truncated chunk {chunk_id!r}", byte_offset=pos)
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise FormatError(f"{path}: short fmt chunk", byte_offset=pos)
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif chunk_id == b"data":
            data = (pos + 8, body)
        pos += 8 + chunk_size + (chunk_size % 2)

    if fmt is None or data is None:
        raise FormatError(f"{path}: missing fmt or data chunk", byte_offset=pos)
    fmt_tag, channels, rate, _, _, bits = fmt
    offset, body = data
    if channels < 1:
        raise FormatError(f"{path}: invalid channel count {channels}", byte_offset=offset)

    if fmt_tag == 3 and bits == 32:
        flat = np.frombuffer(body, dtype="<f4").astype(float)
    elif fmt_tag == 1 and bits == 16:
        flat = np.frombuffer(body, dtype="<i2").astype(float) / 32768.0
    elif fmt_tag == 1 and bits == 24:
        if len(body) % 3 != 0:
            raise FormatError(f"{path}: 24-bit data not a multiple of 3 bytes", byte_offset=offset)
        raw = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((raw.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = raw
        ints = padded.view("<i4").reshape(-1) >> 8
        flat = ints.astype(float) / 8388608.0
    else:
        raise FormatError(
            f"{path}: unsupported format tag {fmt_tag} / {bits} bits", byte_offset=offset
        )

    if flat.size % channels != 0:
        raise FormatError(f"{path}: sample count not divisible by channels", byte_offset=offset)
    if not np.all(np.isfinite(flat)):
        bad = int(np.flatnonzero(~np.isfinite(flat))[0])
        raise FormatError(
            f"{path}: non-finite sample", byte_offset=offset + bad * (bits // 8)
        )
    samples = flat.reshape(-1, channels).T.copy()
    return samples, float(rate)
