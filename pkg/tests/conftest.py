import numpy as np
import pytest

from hfr_frontend.audio import AudioBuffer, write_wav

SR = 16000


def tone(freq, seconds=1.0, sr=SR, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def peak_frequency(x, sr, pad=8):
    """Frequency of the largest DFT magnitude, zero-padded for finer bins."""
    n = pad * len(x)
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x)), n))
    return np.argmax(spec) * sr / n


@pytest.fixture
def make_corpus(tmp_path):
    """Write synthetic recordings and a wav.scp; returns (wav_scp, {rec: path})."""

    def _make(n=3, seconds=1.0, sr=SR, seed=0, name="wav.scp"):
        rng = np.random.default_rng(seed)
        wav_dir = tmp_path / "audio"
        wav_dir.mkdir(exist_ok=True)
        paths = {}
        for i in range(n):
            rec = f"rec{i:02d}"
            f0 = 100 + 30 * i
            x = tone(f0, seconds, sr, amp=0.3) + 0.01 * rng.standard_normal(int(round(seconds * sr)))
            path = wav_dir / f"{rec}.wav"
            write_wav(AudioBuffer(x, sr), path)
            paths[rec] = str(path)
        scp = tmp_path / name
        scp.write_text("".join(f"{r} {p}\n" for r, p in paths.items()))
        return scp, paths

    return _make


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
