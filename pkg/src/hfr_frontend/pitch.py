"""Frame-synchronous pitch tracking: NCCF lag scores decoded with Viterbi.

The tracker runs on the same frames as the filterbank so that pitch rows line
up with FBANK rows at any frame rate. Every frame gets a pitch value; how
voiced it is lives in the probability-of-voicing column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fbank import FeatureMatrix


@dataclass(frozen=True)
class PitchConfig:
    f_min: float = 50.0
    f_max: float = 400.0
    nccf_floor: float = 1e-4
    transition_weight: float = 0.35
    # small per-octave cost that breaks ties between a period and its multiples
    lag_penalty: float = 0.02
    delta_window: int = 2

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError("need 0 < f_min < f_max")
        if self.transition_weight < 0 or self.lag_penalty < 0:
            raise ValueError("costs must be non-negative")
        if self.delta_window < 1:
            raise ValueError("delta_window must be >= 1")

    def lag_range(self, sample_rate: int, frame_length: int) -> range:
        if self.f_max >= sample_rate / 2:
            raise ValueError(f"f_max {self.f_max} must be below Nyquist of {sample_rate} Hz")
        lo = math.ceil(sample_rate / self.f_max)
        hi = min(math.floor(sample_rate / self.f_min), frame_length - 1)
        if hi < lo:
            raise ValueError(f"empty lag range [{lo}, {hi}] for {frame_length}-sample frames")
        return range(lo, hi + 1)


@dataclass(frozen=True)
class PitchTrack:
    f0: np.ndarray
    pov: np.ndarray
    delta_log_pitch: np.ndarray
    frame_rate: float = 100.0
    utt_id: str = ""

    @property
    def num_frames(self) -> int:
        return self.f0.shape[0]


def compute_nccf(frames: np.ndarray, lags, floor: float = 1e-4) -> np.ndarray:
    """Normalized cross-correlation of each frame with itself at each lag.

    For lag t the correlation runs over the overlap ``n in [0, N - t)``::

        sum x[n] x[n+t] / sqrt((sum x[n]^2 + floor) (sum x[n+t]^2 + floor))

    Accepts one frame (returns shape (K,)) or a (T, N) stack (returns (T, K)).
    """
    lags = np.asarray(list(lags), dtype=np.int64)
    if lags.size == 0:
        raise ValueError("lag range is empty")
    frames = np.asarray(frames, dtype=np.float64)
    single = frames.ndim == 1
    frames = np.atleast_2d(frames)
    n = frames.shape[1]
    if lags.min() < 0 or lags.max() >= n:
        raise ValueError(f"lags must lie in [0, {n - 1}] for {n}-sample frames")

    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(frames, nfft, axis=1)
    acf = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, nfft, axis=1)[:, lags]

    csum = np.concatenate([np.zeros((frames.shape[0], 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    head = csum[:, n - lags]                  # energy of x[0 : n-lag]
    tail = csum[:, n:n + 1] - csum[:, lags]   # energy of x[lag : n]
    nccf = acf / np.sqrt((head + floor) * (tail + floor))
    nccf = np.clip(nccf, -1.0, 1.0)
    return nccf[0] if single else nccf


def _viterbi(local_cost: np.ndarray, positions: np.ndarray, weight: float) -> np.ndarray:
    """Minimum-cost state path with transition cost ``weight * |p_i - p_j|``.

    ``positions`` must be increasing. The L1 min-convolution is done with a
    forward and a backward running minimum, so each frame costs O(K).
    """
    n_frames, k = local_cost.shape
    back = np.empty((n_frames, k), dtype=np.int64)
    idx = np.arange(k)
    wp = weight * positions
    cost = local_cost[0].copy()
    for t in range(1, n_frames):
        fwd = cost - wp
        fwd_min = np.minimum.accumulate(fwd)
        fwd_arg = np.maximum.accumulate(np.where(fwd == fwd_min, idx, 0))
        bwd = (cost + wp)[::-1]
        bwd_run = np.minimum.accumulate(bwd)
        bwd_min = bwd_run[::-1]
        bwd_arg = (k - 1 - np.maximum.accumulate(np.where(bwd == bwd_run, idx, 0)))[::-1]
        from_left = fwd_min + wp
        from_right = bwd_min - wp
        use_left = from_left <= from_right
        back[t] = np.where(use_left, fwd_arg, bwd_arg)
        cost = np.where(use_left, from_left, from_right) + local_cost[t]

    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmin(cost))
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def delta_slope(values: np.ndarray, window: int = 2) -> np.ndarray:
    """Least-squares slope over ``+-window`` frames, edges padded by repetition."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values.copy()
    padded = np.pad(values, window, mode="edge")
    offsets = np.arange(-window, window + 1)
    num = sum(k * padded[window + k : window + k + values.size] for k in offsets)
    return num / float(np.sum(offsets ** 2))


def track_pitch(frames: np.ndarray, cfg: PitchConfig, sample_rate: int,
                frame_rate: float = 100.0, utt_id: str = "") -> PitchTrack:
    """Pick one lag per frame by Viterbi over NCCF scores.

    Local cost is ``-NCCF(lag) + lag_penalty * log2(lag / min_lag)``; moving
    between frames costs ``transition_weight * |ln(lag_t / lag_t-1)|``.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    n_frames = frames.shape[0]
    lags = cfg.lag_range(sample_rate, frames.shape[1])
    if n_frames == 0:
        empty = np.zeros(0)
        return PitchTrack(empty, empty, empty, frame_rate, utt_id)

    nccf = compute_nccf(frames, lags, cfg.nccf_floor)
    log_lag = np.log(np.asarray(lags, dtype=np.float64))
    local = -nccf + cfg.lag_penalty * (log_lag - log_lag[0]) / math.log(2.0)
    path = _viterbi(local, log_lag, cfg.transition_weight)

    f0 = sample_rate / np.asarray(lags, dtype=np.float64)[path]
    pov = np.clip(nccf.max(axis=1), 0.0, 1.0)
    delta = delta_slope(np.log(f0), cfg.delta_window)
    return PitchTrack(f0, pov, delta, frame_rate, utt_id)


def pitch_features(track: PitchTrack) -> FeatureMatrix:
    """Stack ``[ln f0, delta ln f0, pov]`` into a (T, 3) matrix."""
    data = np.column_stack([np.log(track.f0), track.delta_log_pitch, track.pov]).reshape(-1, 3)
    return FeatureMatrix(data, track.frame_rate, "pitch", track.utt_id)
