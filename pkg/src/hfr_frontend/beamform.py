"""Weighted delay-and-sum beamforming with GCC-PHAT delay estimates.

A positive delay d means the other channel lags the reference, i.e.
``other[n] ~ ref[n - d]``. One global delay per channel per utterance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .audio import AudioBuffer


@dataclass(frozen=True)
class TdoaEstimate:
    delay: int
    confidence: float


def gcc_phat_tdoa(ref: np.ndarray, other: np.ndarray, max_delay: int) -> TdoaEstimate:
    """Integer delay of ``other`` relative to ``ref`` from the PHAT-weighted cross-correlation.

    Confidence is the correlation peak divided by the peak of ``ref``
    correlated with itself, so it is 1 for identical channels.
    """
    ref = np.asarray(ref, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    if ref.shape != other.shape or ref.ndim != 1:
        raise ValueError("channels must be 1-D and of equal length")
    if max_delay < 1:
        raise ValueError("max_delay must be >= 1")
    if ref.shape[0] < 4 * max_delay:
        raise ValueError(f"need at least {4 * max_delay} samples for max_delay {max_delay}")
    if not np.any(ref) or not np.any(other):
        return TdoaEstimate(0, 0.0)

    n = 1 << (2 * ref.shape[0] - 1).bit_length()
    X = np.fft.rfft(ref, n)
    Y = np.fft.rfft(other, n)
    cross = Y * np.conj(X)
    mag = np.abs(cross)
    phat = np.zeros_like(cross)
    nz = mag > 1e-12 * mag.max()
    phat[nz] = cross[nz] / mag[nz]
    cc = np.fft.irfft(phat, n)

    self_mag = np.abs(X) ** 2
    self_cc0 = np.fft.irfft((self_mag > 1e-12 * self_mag.max()).astype(float), n)[0]

    lags = np.arange(-max_delay, max_delay + 1)
    scores = cc[lags % n]
    best = int(np.argmax(scores))
    return TdoaEstimate(int(lags[best]), float(scores[best] / self_cc0))


def normalize_weights(raw: Sequence[float]) -> np.ndarray:
    """Scale non-negative weights to sum to 1; all-zero falls back to uniform."""
    raw = np.clip(np.asarray(raw, dtype=np.float64), 0.0, None)
    total = raw.sum()
    if total <= 0:
        return np.full(raw.shape, 1.0 / raw.size)
    return raw / total


def delay_and_sum(channels: np.ndarray, delays: Sequence[int], weights: Sequence[float]) -> np.ndarray:
    """``out[n] = sum_c w_c * channel_c[n + delay_c]``, zero outside each channel.

    The output has the reference (first) channel's length.
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=np.float64))
    delays = [int(d) for d in delays]
    weights = np.asarray(weights, dtype=np.float64)
    n_ch, length = channels.shape
    if len(delays) != n_ch or weights.shape != (n_ch,):
        raise ValueError(f"{n_ch} channels need {n_ch} delays and weights, "
                         f"got {len(delays)} and {weights.size}")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be non-negative and sum to 1, got {weights.tolist()}")

    out = np.zeros(length)
    for ch, d, w in zip(channels, delays, weights):
        if w == 0:
            continue
        lo, hi = max(0, -d), min(length, length - d)
        if lo < hi:
            out[lo:hi] += w * ch[lo + d : hi + d]
    return out


def beamform(buffer: AudioBuffer, max_delay: int = 100, ref_channel: int = 0,
             weights: Optional[Sequence[float]] = None) -> Tuple[AudioBuffer, List[TdoaEstimate], np.ndarray]:
    """Estimate per-channel delays against ``ref_channel`` and sum the aligned channels.

    Default weights are the GCC-PHAT confidences normalized to sum to one.
    """
    x = buffer.samples
    max_delay = max(1, min(max_delay, x.shape[1] // 4))
    tdoas = []
    for c in range(x.shape[0]):
        if c == ref_channel:
            tdoas.append(TdoaEstimate(0, 1.0 if np.any(x[c]) else 0.0))
        else:
            tdoas.append(gcc_phat_tdoa(x[ref_channel], x[c], max_delay))
    if weights is None:
        weights = normalize_weights([t.confidence for t in tdoas])
    else:
        weights = normalize_weights(weights)
    order = [ref_channel] + [c for c in range(x.shape[0]) if c != ref_channel]
    out = delay_and_sum(x[order], [tdoas[c].delay for c in order], weights[order])
    return AudioBuffer(out, buffer.sample_rate), tdoas, weights
