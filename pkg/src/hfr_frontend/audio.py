"""WAV input/output and band-limited resampling.

Only two encodings are handled: 16-bit PCM and 32-bit IEEE float, both
little-endian RIFF/WAVE. Samples live in memory as float64 arrays of shape
(channels, length).
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PCM16 = "pcm16"
FLOAT32 = "float32"

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class WavError(ValueError):
    """Base class for WAV decoding problems. ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MalformedHeaderError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class TruncatedDataError(WavError):
    pass


def round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero."""
    if isinstance(x, Fraction):
        q = abs(x)
        r = math.floor(q + Fraction(1, 2))
    else:
        r = math.floor(abs(x) + 0.5)
    return int(r) if x >= 0 else -int(r)


@dataclass(frozen=True)
class AudioBuffer:
    """PCM samples of shape (channels, length) at ``sample_rate`` Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must be (channels, length), got {samples.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def channel(self, index: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[index : index + 1], self.sample_rate)

    @property
    def mono(self) -> np.ndarray:
        """The single channel as a 1-D array; raises if there are several."""
        if self.num_channels != 1:
            raise ValueError(f"expected mono audio, got {self.num_channels} channels")
        return self.samples[0]

    def slice(self, start: int, end: int) -> "AudioBuffer":
        return AudioBuffer(self.samples[:, start:end], self.sample_rate)


@dataclass(frozen=True)
class ResamplerConfig:
    """Windowed-sinc interpolation settings.

    ``kernel_half_width`` counts input samples on each side of the output
    instant; ``cutoff_scale`` is a fraction of the lower of the two Nyquist
    frequencies.
    """

    kernel_half_width: int = 32
    window: str = "hann"
    cutoff_scale: float = 0.95

    def __post_init__(self):
        if self.kernel_half_width < 4:
            raise ValueError("kernel_half_width must be >= 4")
        if not 0 < self.cutoff_scale <= 1:
            raise ValueError("cutoff_scale must be in (0, 1]")
        if self.window not in _TAPERS:
            raise ValueError(f"unknown window {self.window!r}; choose from {sorted(_TAPERS)}")


def _hann_taper(u):
    return 0.5 * (1.0 + np.cos(np.pi * u))


def _blackman_taper(u):
    return 0.42 + 0.5 * np.cos(np.pi * u) + 0.08 * np.cos(2 * np.pi * u)


def _rect_taper(u):
    return np.ones_like(u)


_TAPERS = {"hann": _hann_taper, "blackman": _blackman_taper, "rectangular": _rect_taper}


def _parse_wav(data: bytes):
    """Walk the RIFF chunks; return (channels, rate, dtype, data_offset, data_size)."""
    if len(data) < 12:
        raise MalformedHeaderError("file too short for RIFF header", 0)
    if data[0:4] != b"RIFF":
        raise MalformedHeaderError(f"expected 'RIFF', found {data[0:4]!r}", 0)
    if data[8:12] != b"WAVE":
        raise MalformedHeaderError(f"expected 'WAVE', found {data[8:12]!r}", 8)

    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if chunk_id == b"fmt ":
            if size < 16 or body + size > len(data):
                raise MalformedHeaderError(f"fmt chunk of size {size} is invalid", pos)
            tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag == _WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise MalformedHeaderError("extensible fmt chunk too short", pos)
                (tag,) = struct.unpack_from("<H", data, body + 24)
            if (tag, bits) == (_WAVE_FORMAT_PCM, 16):
                dtype = np.dtype("<i2")
            elif (tag, bits) == (_WAVE_FORMAT_IEEE_FLOAT, 32):
                dtype = np.dtype("<f4")
            else:
                raise UnsupportedEncodingError(
                    f"unsupported encoding: format tag {tag:#06x}, {bits} bits", body
                )
            if channels < 1 or rate < 1:
                raise MalformedHeaderError(f"bad channel count {channels} or rate {rate}", body)
            if block_align != channels * dtype.itemsize:
                raise MalformedHeaderError(f"block_align {block_align} inconsistent", body + 12)
            fmt = (channels, rate, dtype)
        elif chunk_id == b"data":
            if fmt is None:
                raise MalformedHeaderError("data chunk before fmt chunk", pos)
            channels, rate, dtype = fmt
            if body + size > len(data):
                raise TruncatedDataError(
                    f"data chunk declares {size} bytes but only {len(data) - body} remain", pos + 4
                )
            if size % (channels * dtype.itemsize):
                raise TruncatedDataError("data chunk ends inside a sample frame", body + size)
            return channels, rate, dtype, body, size
        pos = body + size + (size & 1)
    if fmt is None:
        raise MalformedHeaderError("no fmt chunk found", 12)
    raise MalformedHeaderError("no data chunk found", pos)


def wav_info(path) -> tuple[int, int, int]:
    """Return (channels, sample_rate, frames) without decoding samples."""
    channels, rate, dtype, _, size = _parse_wav(Path(path).read_bytes())
    return channels, rate, size // (channels * dtype.itemsize)


def read_wav(path) -> AudioBuffer:
    """Decode a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples.

    16-bit values are divided by 32768. Header problems raise
    ``MalformedHeaderError``, other codecs ``UnsupportedEncodingError`` and a
    short data chunk ``TruncatedDataError``, each carrying the byte offset.
    """
    data = Path(path).read_bytes()
    channels, rate, dtype, body, size = _parse_wav(data)
    raw = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=body)
    samples = raw.reshape(-1, channels).T.astype(np.float64)
    if dtype.kind == "i":
        samples /= 32768.0
    return AudioBuffer(samples, rate)


def write_wav(buffer: AudioBuffer, path, encoding: str = PCM16) -> int:
    """Write ``buffer`` as a WAV file and return the number of clipped samples.

    Float encoding is lossless for float32-representable samples. For 16-bit
    PCM, values are scaled by 32768, rounded and clipped to the int16 range.
    """
    x = buffer.samples.T
    if encoding == PCM16:
        scaled = np.rint(x * 32768.0)
        clipped = int(np.count_nonzero((scaled < -32768) | (scaled > 32767)))
        payload = np.clip(scaled, -32768, 32767).astype("<i2")
        tag, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == FLOAT32:
        clipped = 0
        payload = x.astype("<f4")
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    if clipped:
        log.warning("%s: clipped %d samples to the 16-bit range", path, clipped)

    body = payload.tobytes()
    channels = buffer.num_channels
    block_align = channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, tag, channels, buffer.sample_rate,
        buffer.sample_rate * block_align, block_align, bits,
    )
    header += b"data" + struct.pack("<I", len(body))
    with open(path, "wb") as f:
        f.write(header)
        f.write(body)
        if len(body) & 1:
            f.write(b"\x00")
    return clipped


def interpolate(x: np.ndarray, positions: np.ndarray, cutoff: float,
                cfg: ResamplerConfig = ResamplerConfig(), chunk: int = 8192) -> np.ndarray:
    """Band-limited interpolation of ``x`` at fractional sample ``positions``.

    ``cutoff`` is in cycles per input sample (0.5 is the input Nyquist).
    Samples outside ``[0, len(x))`` count as zero.
    """
    x = np.asarray(x, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    width = cfg.kernel_half_width
    taper = _TAPERS[cfg.window]
    taps = np.arange(-width + 1, width + 1)
    padded = np.concatenate([np.zeros(width), x, np.zeros(width + 1)])

    out = np.empty(positions.shape[0])
    for lo in range(0, positions.shape[0], chunk):
        p = positions[lo : lo + chunk]
        base = np.floor(p).astype(np.int64)
        idx = base[:, None] + taps[None, :]
        dist = p[:, None] - idx
        kernel = 2.0 * cutoff * np.sinc(2.0 * cutoff * dist) * taper(dist / width)
        kernel[np.abs(dist) >= width] = 0.0
        src = np.clip(idx + width, 0, padded.shape[0] - 1)
        out[lo : lo + chunk] = np.einsum("ij,ij->i", kernel, padded[src])
    return out


def resampled_length(length: int, in_rate: int, out_rate: int) -> int:
    return round_half_away(Fraction(length * int(out_rate), int(in_rate)))


def resample(buffer: AudioBuffer, out_rate: int, cfg: ResamplerConfig = ResamplerConfig()) -> AudioBuffer:
    """Resample every channel to ``out_rate``.

    Output sample n is the band-limited input evaluated at time n/out_rate.
    Equal rates return an exact copy.
    """
    if out_rate <= 0 or int(out_rate) != out_rate:
        raise ValueError(f"out_rate must be a positive integer, got {out_rate}")
    out_rate = int(out_rate)
    in_rate = buffer.sample_rate
    if out_rate == in_rate:
        return AudioBuffer(buffer.samples.copy(), in_rate)

    n_out = resampled_length(buffer.length, in_rate, out_rate)
    positions = np.arange(n_out) * (in_rate / out_rate)
    cutoff = cfg.cutoff_scale * 0.5 * min(in_rate, out_rate) / in_rate
    channels = [interpolate(ch, positions, cutoff, cfg) for ch in buffer.samples]
    return AudioBuffer(np.array(channels).reshape(buffer.num_channels, n_out), out_rate)
