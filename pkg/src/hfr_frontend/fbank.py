"""Mel filterbank, log filterbank energies and utterance-level normalization."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .framing import SpectrumMatrix

DEFAULT_LOG_FLOOR = 1e-10


class FrameCountMismatch(ValueError):
    pass


def mel_scale(freq):
    """HTK mel scale, ``1127 ln(1 + f/700)``. Works on scalars and arrays."""
    return 1127.0 * np.log1p(np.asarray(freq, dtype=np.float64) / 700.0)


def inverse_mel_scale(mel):
    return 700.0 * np.expm1(np.asarray(mel, dtype=np.float64) / 1127.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters on the mel axis, one row of FFT-bin weights per filter."""

    weights: np.ndarray  # (num_filters, fft_size // 2 + 1)
    center_freqs: np.ndarray
    low_freq: float
    high_freq: float
    sample_rate: int
    fft_size: int

    @property
    def num_filters(self) -> int:
        return self.weights.shape[0]


def build_mel_filterbank(num_filters: int = 40, sample_rate: int = 16000, fft_size: int = 512,
                         low_freq: float = 20.0, high_freq: Optional[float] = None) -> MelFilterbank:
    """Build ``num_filters`` triangles with edges equally spaced in mel.

    Weights are evaluated at each bin's centre frequency, measured in mel, and
    are not area-normalised. ``high_freq=None`` means the Nyquist frequency.
    """
    nyquist = sample_rate / 2.0
    if high_freq is None:
        high_freq = nyquist
    if num_filters < 1:
        raise ValueError("num_filters must be >= 1")
    if not 0 <= low_freq < high_freq:
        raise ValueError(f"need 0 <= low_freq < high_freq, got {low_freq}, {high_freq}")
    if high_freq > nyquist:
        raise ValueError(f"high_freq {high_freq} exceeds Nyquist {nyquist}")

    edges = np.linspace(mel_scale(low_freq), mel_scale(high_freq), num_filters + 2)
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    bin_mel = mel_scale(np.arange(fft_size // 2 + 1) * sample_rate / fft_size)[None, :]

    rising = (bin_mel - left) / (center - left)
    falling = (right - bin_mel) / (right - center)
    weights = np.where((bin_mel > left) & (bin_mel < right), np.minimum(rising, falling), 0.0)
    weights = np.maximum(weights, 0.0)

    empty = np.flatnonzero(~np.any(weights > 0, axis=1))
    if empty.size:
        raise ValueError(
            f"{num_filters} filters do not fit {fft_size // 2 + 1} bins: "
            f"filter {empty[0]} covers no FFT bin"
        )
    return MelFilterbank(weights, inverse_mel_scale(edges[1:-1]), float(low_freq),
                         float(high_freq), sample_rate, fft_size)


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-frame feature vectors of shape (T, D) plus provenance metadata."""

    data: np.ndarray
    frame_rate: float
    kind: str = "fbank"
    utt_id: str = ""

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def compute_fbank(spectrum: SpectrumMatrix, fb: MelFilterbank,
                  log_floor: float = DEFAULT_LOG_FLOOR, utt_id: str = "") -> FeatureMatrix:
    """Log of mel-weighted sums of magnitude spectra, floored before the log."""
    if spectrum.magnitudes.shape[1] != fb.weights.shape[1]:
        raise ValueError(
            f"spectrum has {spectrum.magnitudes.shape[1]} bins, filterbank expects {fb.weights.shape[1]}"
        )
    energies = spectrum.magnitudes @ fb.weights.T
    return FeatureMatrix(np.log(np.maximum(energies, log_floor)), spectrum.frame_rate, "fbank", utt_id)


def mean_normalize(feat: FeatureMatrix) -> FeatureMatrix:
    if feat.num_frames < 1:
        raise ValueError("cannot normalize an empty feature matrix")
    return replace(feat, data=feat.data - feat.data.mean(axis=0, keepdims=True))


def concat_features(a: FeatureMatrix, b: FeatureMatrix, tolerance_frames: int = 2) -> FeatureMatrix:
    """Join two frame-aligned matrices column-wise, ``a`` first.

    Both are cut to the shorter length when they differ by at most
    ``tolerance_frames``.
    """
    if a.utt_id != b.utt_id:
        raise ValueError(f"utterance ids differ: {a.utt_id!r} vs {b.utt_id!r}")
    if a.frame_rate != b.frame_rate:
        raise ValueError(f"frame rates differ: {a.frame_rate} vs {b.frame_rate}")
    if abs(a.num_frames - b.num_frames) > tolerance_frames:
        raise FrameCountMismatch(
            f"{a.utt_id or 'utterance'}: {a.num_frames} vs {b.num_frames} frames "
            f"exceeds tolerance {tolerance_frames}"
        )
    t = min(a.num_frames, b.num_frames)
    return FeatureMatrix(np.hstack([a.data[:t], b.data[:t]]), a.frame_rate,
                         f"{a.kind}+{b.kind}", a.utt_id)
