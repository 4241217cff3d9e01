import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfr_frontend.audio import AudioBuffer
from hfr_frontend.framing import (FramingConfig, frame_signal, num_frames, preemphasize,
                                  window_and_spectrum)

SR = 16000


def naive_dft_magnitude(frame, n):
    """O(n^2) DFT, independent of numpy.fft."""
    x = np.zeros(n)
    x[: len(frame)] = frame
    k = np.arange(n // 2 + 1)[:, None]
    m = np.arange(n)[None, :]
    basis = np.exp(-2j * np.pi * k * m / n)
    return np.abs(basis @ x)


def test_preemphasis_identity():
    x = np.random.default_rng(0).standard_normal(50)
    assert np.array_equal(preemphasize(x, 0.0), x)


def test_preemphasis_constant_input():
    assert np.allclose(preemphasize(np.ones(10), 0.97), 0.03, atol=1e-15)


def test_preemphasis_two_samples():
    assert np.allclose(preemphasize(np.array([1.0, 0.0]), 0.97), [0.03, -0.97])


def test_preemphasis_per_row():
    frames = np.array([[1.0, 0.0], [2.0, 2.0]])
    assert np.allclose(preemphasize(frames, 0.5), [[0.5, -0.5], [1.0, 1.0]])


@pytest.mark.parametrize("length,rate,expected", [
    (16000, 100, 98), (16000, 200, 196), (16000, 400, 391), (399, 100, 0), (400, 100, 1),
])
def test_num_frames_examples(length, rate, expected):
    assert num_frames(length, FramingConfig(frame_rate=rate), SR) == expected


@pytest.mark.parametrize("rate,hop", [(100, 160), (200, 80), (400, 40)])
def test_integer_hops(rate, hop):
    cfg = FramingConfig(frame_rate=rate)
    assert cfg.hop_samples(SR) == hop
    assert cfg.frame_length_samples(SR) == 400
    assert cfg.fft_size_for(SR) == 512


def test_frame_count_law():
    rng = np.random.default_rng(2024)
    lengths = np.unique(np.concatenate([np.arange(400, 3000), rng.integers(400, 10**6 + 1, 20000)]))
    for length in lengths:
        n100 = num_frames(int(length), FramingConfig(frame_rate=100), SR)
        n200 = num_frames(int(length), FramingConfig(frame_rate=200), SR)
        n400 = num_frames(int(length), FramingConfig(frame_rate=400), SR)
        assert 2 * n100 - 2 <= n200 <= 2 * n100
        assert 4 * n100 - 6 <= n400 <= 4 * n100


def test_frame_count_matches_brute_force():
    # oracle: count start positions by walking the signal
    for length in [0, 399, 400, 401, 560, 561, 16000, 16001]:
        for rate in (100, 200, 400):
            cfg = FramingConfig(frame_rate=rate)
            hop = cfg.hop_samples(SR)
            count, start = 0, 0
            while start + 400 <= length:
                count += 1
                start += hop
            assert num_frames(length, cfg, SR) == count


def test_single_frame_equals_signal():
    x = np.random.default_rng(0).standard_normal(400)
    frames = frame_signal(AudioBuffer(x, SR), FramingConfig())
    assert frames.shape == (1, 400)
    assert np.array_equal(frames[0], x)


def test_frame_counts_200_vs_100():
    buf = AudioBuffer(np.zeros(16000), SR)
    assert frame_signal(buf, FramingConfig(frame_rate=200)).shape[0] == 196
    assert frame_signal(buf, FramingConfig(frame_rate=100)).shape[0] == 98


def test_frames_cover_expected_samples():
    x = np.arange(2000, dtype=float)
    frames = frame_signal(AudioBuffer(x, SR), FramingConfig(frame_rate=400))
    for i in range(frames.shape[0]):
        assert np.array_equal(frames[i], x[i * 40 : i * 40 + 400])


def test_dither_determinism():
    x = np.random.default_rng(0).standard_normal(4000)
    buf = AudioBuffer(x, SR)
    assert np.array_equal(frame_signal(buf, FramingConfig()), frame_signal(buf, FramingConfig()))
    dithered = FramingConfig(dither_amplitude=0.01)
    a = frame_signal(buf, dithered, seed=5)
    assert np.array_equal(a, frame_signal(buf, dithered, seed=5))
    assert not np.array_equal(a, frame_signal(buf, dithered, seed=6))
    assert np.max(np.abs(a - frame_signal(buf, FramingConfig()))) <= 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(400, 6000), st.sampled_from([100, 200, 400]), st.integers(0, 2**31 - 1))
def test_shift_by_one_hop(length, rate, seed):
    cfg = FramingConfig(frame_rate=rate)
    hop = cfg.hop_samples(SR)
    x = np.random.default_rng(seed).standard_normal(length + hop)
    original = frame_signal(AudioBuffer(x[hop:], SR), cfg)
    shifted = frame_signal(AudioBuffer(x, SR), cfg)
    n = min(original.shape[0], shifted.shape[0] - 1)
    assert np.array_equal(shifted[1 : n + 1], original[:n])


def test_no_snip_edges_count_and_shape():
    cfg = FramingConfig(snip_edges=False)
    frames = frame_signal(AudioBuffer(np.arange(1000, dtype=float), SR), cfg)
    assert frames.shape == (num_frames(1000, cfg, SR), 400)
    assert frames.shape[0] == 6


def test_impulse_spectrum_flat():
    frame = np.zeros(400)
    frame[0] = 1.0
    spec = window_and_spectrum(frame[None, :], FramingConfig(window="rectangular"))
    assert spec.magnitudes.shape == (1, 257)
    assert np.allclose(spec.magnitudes, 1.0)


@pytest.mark.parametrize("k", [1, 5, 32, 100, 255])
def test_sine_at_bin(k):
    n = np.arange(512)
    frame = np.sin(2 * np.pi * k * n / 512)
    cfg = FramingConfig(window="rectangular", fft_size=512, frame_length_ms=32)
    spec = window_and_spectrum(frame[None, :], cfg)
    assert np.argmax(spec.magnitudes[0]) == k


def test_zero_frame():
    spec = window_and_spectrum(np.zeros((3, 400)), FramingConfig())
    assert np.all(spec.magnitudes == 0)


@pytest.mark.parametrize("window", ["hamming", "hann", "rectangular"])
def test_spectrum_matches_naive_dft(window):
    rng = np.random.default_rng(7)
    frames = rng.standard_normal((3, 400))
    cfg = FramingConfig(window=window)
    spec = window_and_spectrum(frames, cfg)
    w = {"hamming": np.hamming(400), "hann": np.hanning(400), "rectangular": np.ones(400)}[window]
    for i in range(3):
        assert np.allclose(spec.magnitudes[i], naive_dft_magnitude(frames[i] * w, 512), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_parseval(seed):
    frame = np.random.default_rng(seed).standard_normal(400)
    mags = window_and_spectrum(frame[None, :], FramingConfig(window="rectangular")).magnitudes[0]
    full = mags[0] ** 2 + mags[-1] ** 2 + 2 * np.sum(mags[1:-1] ** 2)
    assert np.isclose(np.sum(frame ** 2), full / 512, rtol=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        FramingConfig(preemphasis_coeff=1.0)
    with pytest.raises(ValueError):
        FramingConfig(fft_size=500)
    with pytest.raises(ValueError):
        FramingConfig(fft_size=256).fft_size_for(SR)
    with pytest.raises(ValueError):
        FramingConfig(frame_rate=40000).hop_samples(SR)
