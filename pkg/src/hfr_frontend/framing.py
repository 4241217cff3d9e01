"""Pre-emphasis, framing at a configurable frame rate, windowing and DFT magnitude."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audio import AudioBuffer, round_half_away

WINDOWS = ("hamming", "hann", "rectangular")


@dataclass(frozen=True)
class FramingConfig:
    """Frame geometry. Sample counts are derived per sample rate.

    ``fft_size=None`` picks the smallest power of two that holds one frame.
    """

    frame_rate: float = 100.0
    frame_length_ms: float = 25.0
    preemphasis_coeff: float = 0.97
    window: str = "hamming"
    fft_size: Optional[int] = None
    dither_amplitude: float = 0.0
    snip_edges: bool = True

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")
        if self.frame_length_ms <= 0:
            raise ValueError("frame_length_ms must be positive")
        if not 0 <= self.preemphasis_coeff < 1:
            raise ValueError("preemphasis_coeff must be in [0, 1)")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        if self.fft_size is not None and (self.fft_size < 1 or self.fft_size & (self.fft_size - 1)):
            raise ValueError("fft_size must be a power of two")
        if self.dither_amplitude < 0:
            raise ValueError("dither_amplitude must be >= 0")

    def hop_samples(self, sample_rate: int) -> int:
        hop = round_half_away(sample_rate / self.frame_rate)
        if hop < 1:
            raise ValueError(f"frame rate {self.frame_rate} too high for {sample_rate} Hz")
        return hop

    def frame_length_samples(self, sample_rate: int) -> int:
        return round_half_away(sample_rate * self.frame_length_ms / 1000.0)

    def fft_size_for(self, sample_rate: int) -> int:
        n = self.frame_length_samples(sample_rate)
        if self.fft_size is None:
            return 1 << max(0, (n - 1).bit_length())
        if self.fft_size < n:
            raise ValueError(f"fft_size {self.fft_size} shorter than frame length {n}")
        return self.fft_size


@dataclass(frozen=True)
class SpectrumMatrix:
    """Magnitudes of shape (frames, fft_size // 2 + 1)."""

    magnitudes: np.ndarray
    fft_size: int
    frame_rate: float

    @property
    def num_frames(self) -> int:
        return self.magnitudes.shape[0]


def preemphasize(samples: np.ndarray, coeff: float) -> np.ndarray:
    """First-order high-pass ``y[n] = x[n] - coeff * x[n-1]`` along the last axis.

    The first sample uses itself as its predecessor, so ``y[0] = (1 - coeff) x[0]``.
    Applied to a 2-D array, each row (frame) is filtered independently.
    """
    if not 0 <= coeff < 1:
        raise ValueError("coeff must be in [0, 1)")
    x = np.asarray(samples, dtype=np.float64)
    prev = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    return x - coeff * prev


def num_frames(length: int, cfg: FramingConfig, sample_rate: int) -> int:
    hop = cfg.hop_samples(sample_rate)
    if cfg.snip_edges:
        frame_len = cfg.frame_length_samples(sample_rate)
        if length < frame_len:
            return 0
        return (length - frame_len) // hop + 1
    return (length + hop // 2) // hop


def frame_signal(buffer: AudioBuffer, cfg: FramingConfig, seed: Optional[int] = None) -> np.ndarray:
    """Slice a mono buffer into overlapping frames of shape (T, frame_length).

    With ``snip_edges`` frame i covers samples ``[i*hop, i*hop + frame_length)``.
    Otherwise frames are centred on ``i*hop + hop/2`` and the signal is
    reflected at both ends. Dither, when enabled, adds uniform noise in
    ``[-dither_amplitude, dither_amplitude]`` drawn from ``seed``.
    """
    x = buffer.mono
    sr = buffer.sample_rate
    hop = cfg.hop_samples(sr)
    frame_len = cfg.frame_length_samples(sr)
    n = num_frames(x.shape[0], cfg, sr)
    if n == 0:
        return np.zeros((0, frame_len))

    if cfg.snip_edges:
        frames = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop][:n].copy()
    else:
        starts = np.arange(n) * hop + hop // 2 - frame_len // 2
        idx = starts[:, None] + np.arange(frame_len)[None, :]
        length = x.shape[0]
        # reflect out-of-range indices (Kaldi convention, no repeated edge sample)
        while np.any((idx < 0) | (idx >= length)):
            idx = np.where(idx < 0, -idx - 1, idx)
            idx = np.where(idx >= length, 2 * length - idx - 1, idx)
        frames = x[idx]

    if cfg.dither_amplitude > 0:
        rng = np.random.default_rng(seed)
        frames = frames + rng.uniform(-cfg.dither_amplitude, cfg.dither_amplitude, frames.shape)
    return frames


def make_window(kind: str, length: int) -> np.ndarray:
    if kind == "hamming":
        return np.hamming(length)
    if kind == "hann":
        return np.hanning(length)
    if kind == "rectangular":
        return np.ones(length)
    raise ValueError(f"unknown window {kind!r}")


def window_and_spectrum(frames: np.ndarray, cfg: FramingConfig) -> SpectrumMatrix:
    """Window each frame, zero-pad to the FFT size and return bin magnitudes 0..N/2."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    fft_size = cfg.fft_size or 1 << max(0, (frames.shape[1] - 1).bit_length())
    if frames.shape[1] > fft_size:
        raise ValueError(f"frame length {frames.shape[1]} exceeds fft_size {fft_size}")
    windowed = frames * make_window(cfg.window, frames.shape[1])
    mags = np.abs(np.fft.rfft(windowed, n=fft_size, axis=1))
    return SpectrumMatrix(mags, fft_size, cfg.frame_rate)
