"""End-to-end FBANK(+pitch) extraction for one utterance."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

from .audio import AudioBuffer
from .fbank import (DEFAULT_LOG_FLOOR, FeatureMatrix, MelFilterbank, build_mel_filterbank,
                    compute_fbank, concat_features, mean_normalize)
from .framing import FramingConfig, frame_signal, preemphasize, window_and_spectrum
from .pitch import PitchConfig, pitch_features, track_pitch


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to turn a waveform into a feature matrix."""

    sample_rate: int = 16000
    frame_rate: float = 100.0
    frame_length_ms: float = 25.0
    num_mel: int = 40
    low_freq: float = 20.0
    high_freq: Optional[float] = None
    enable_pitch: bool = True
    mean_norm: bool = True
    dither: float = 0.0
    seed: int = 0
    speeds: Sequence[float] = (0.9, 1.0, 1.1)
    workers: int = 1
    log_floor: float = DEFAULT_LOG_FLOOR
    pitch: PitchConfig = field(default_factory=PitchConfig)

    def framing(self) -> FramingConfig:
        return FramingConfig(frame_rate=self.frame_rate, frame_length_ms=self.frame_length_ms,
                             dither_amplitude=self.dither)

    def filterbank(self) -> MelFilterbank:
        framing = self.framing()
        return _filterbank(self.num_mel, self.sample_rate, framing.fft_size_for(self.sample_rate),
                           self.low_freq, self.high_freq)

    def validate(self) -> None:
        """Build every component config once so bad settings fail early."""
        framing = self.framing()
        framing.hop_samples(self.sample_rate)
        self.filterbank()
        if self.enable_pitch:
            self.pitch.lag_range(self.sample_rate, framing.frame_length_samples(self.sample_rate))
        if any(s <= 0 for s in self.speeds):
            raise ValueError(f"speeds must be positive, got {list(self.speeds)}")


@lru_cache(maxsize=16)
def _filterbank(num_mel, sample_rate, fft_size, low_freq, high_freq):
    return build_mel_filterbank(num_mel, sample_rate, fft_size, low_freq, high_freq)


def utterance_seed(seed: int, utt_id: str) -> int:
    """Per-utterance dither seed, independent of processing order."""
    return (seed * 0x9E3779B1 + zlib.crc32(utt_id.encode("utf-8"))) & 0xFFFFFFFF


def extract_features(buffer: AudioBuffer, cfg: PipelineConfig, utt_id: str = "",
                     pitch_only: bool = False) -> FeatureMatrix:
    """Frame, filter and (optionally) append pitch and mean-normalize.

    Frames are pre-emphasized individually after slicing, then windowed.
    Pitch runs on the raw (dithered) frames so rows always align.
    """
    if buffer.sample_rate != cfg.sample_rate:
        raise ValueError(f"{utt_id}: audio is {buffer.sample_rate} Hz, config expects {cfg.sample_rate} Hz")
    framing = cfg.framing()
    frames = frame_signal(buffer, framing, seed=utterance_seed(cfg.seed, utt_id))
    if frames.shape[0] == 0:
        raise ValueError(f"{utt_id}: {buffer.length} samples is shorter than one frame")

    pitch = None
    if cfg.enable_pitch or pitch_only:
        track = track_pitch(frames, cfg.pitch, buffer.sample_rate, cfg.frame_rate, utt_id)
        pitch = pitch_features(track)
    if pitch_only:
        feats = pitch
    else:
        spectrum = window_and_spectrum(preemphasize(frames, framing.preemphasis_coeff), framing)
        feats = compute_fbank(spectrum, cfg.filterbank(), cfg.log_floor, utt_id)
        if pitch is not None:
            feats = concat_features(feats, pitch, tolerance_frames=0)
    if cfg.mean_norm:
        feats = mean_normalize(feats)
    return feats
