import os

import numpy as np
import pytest

from hfr_frontend import kio
from hfr_frontend.audio import AudioBuffer, read_wav, write_wav
from hfr_frontend.cli import expand_config, main, shapes_table


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def fbank_args(scp, tmp_path, name="f", *extra):
    return ["fbank", "--wav-scp", scp, "--out-ark", tmp_path / f"{name}.ark",
            "--out-scp", tmp_path / f"{name}.scp", *extra]


@pytest.mark.parametrize("rate,rows", [(100, 98), (400, 391)])
def test_fbank_rows(make_corpus, tmp_path, capsys, rate, rows):
    scp, _ = make_corpus(2)
    code, out, _ = run(fbank_args(scp, tmp_path, "f", "--frame-rate", rate, "--workers", 1), capsys)
    assert code == 0
    assert out.split() == ["rec00", str(rows), "rec01", str(rows)]
    mats = kio.read_scp(tmp_path / "f.scp")
    assert [m.shape for _, m in mats] == [(rows, 43)] * 2


def test_fbank_no_pitch(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1)
    assert run(fbank_args(scp, tmp_path, "f", "--no-pitch"), capsys)[0] == 0
    assert kio.read_ark(tmp_path / "f.ark")[0][1].shape == (98, 40)


def test_pitch_subcommand(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1)
    code, _, _ = run(["pitch", "--wav-scp", scp, "--out-ark", tmp_path / "p.ark"], capsys)
    assert code == 0
    assert kio.read_ark(tmp_path / "p.ark")[0][1].shape == (98, 3)


def test_workers_and_determinism(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(5)
    for name, workers in (("a", 1), ("b", 4), ("c", 4)):
        assert run(fbank_args(scp, tmp_path, name, "--workers", workers, "--dither", 1.0, "--seed", 3),
                   capsys)[0] == 0
    a = (tmp_path / "a.ark").read_bytes()
    assert a == (tmp_path / "b.ark").read_bytes() == (tmp_path / "c.ark").read_bytes()


def test_segments_slice(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1, seconds=2.0)
    (tmp_path / "segments").write_text("b rec00 1.0 2.0\na rec00 0.0 0.5\n")
    code, out, _ = run(fbank_args(scp, tmp_path, "s", "--segments", tmp_path / "segments"), capsys)
    assert code == 0
    assert out.split() == ["a", "48", "b", "98"]


def test_partial_failure(make_corpus, tmp_path, capsys):
    scp, paths = make_corpus(3)
    with open(paths["rec01"], "r+b") as f:
        f.write(b"XXXX")
    code, out, err = run(fbank_args(scp, tmp_path), capsys)
    assert code == 1
    assert "rec01" in err
    assert [k for k, _ in kio.read_ark(tmp_path / "f.ark")] == ["rec00", "rec02"]


def test_usage_errors(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1)
    assert run(["fbank", "--wav-scp", scp], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["fbank", "--wav-scp", tmp_path / "missing.scp", "--out-ark", tmp_path / "x.ark"], capsys)[0] == 2
    assert run(fbank_args(scp, tmp_path, "f", "--num-mel", 0), capsys)[0] == 2


def test_config_file(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1)
    cfg = tmp_path / "conf"
    cfg.write_text("# high frame rate\n--frame-rate 200\n--no-pitch\n")
    code, out, _ = run(["--config", cfg] + fbank_args(scp, tmp_path), capsys)
    assert code == 0 and out.split() == ["rec00", "196"]
    # explicit flags override the file
    code, out, _ = run(fbank_args(scp, tmp_path, "g", "--config", cfg, "--frame-rate", 400), capsys)
    assert out.split() == ["rec00", "391"]
    assert expand_config(["shapes"]) == ["shapes"]
    assert run(["shapes", "--config", tmp_path / "nope"], capsys)[0] == 2


def test_perturb(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(2)
    out_dir = tmp_path / "aug"
    code, _, _ = run(["perturb", "--wav-scp", scp, "--out-dir", out_dir, "--workers", 2], capsys)
    assert code == 0
    m = kio.parse_manifest(out_dir / "wav.scp")
    assert len(m) == 6
    assert read_wav(m.wav["sp0.9-rec00"]).length == 17778


def test_perturb_identity_copies_bytes(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(2)
    (tmp_path / "segments").write_text("x rec00 0.0 0.5\n")
    out_dir = tmp_path / "same"
    code, _, _ = run(["perturb", "--wav-scp", scp, "--segments", tmp_path / "segments",
                      "--speeds", "1.0", "--out-dir", out_dir], capsys)
    assert code == 0
    assert (out_dir / "wav.scp").read_bytes() == scp.read_bytes()
    assert (out_dir / "segments").read_bytes() == (tmp_path / "segments").read_bytes()


def test_perturb_unwritable(make_corpus, tmp_path, capsys):
    scp, _ = make_corpus(1)
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(["perturb", "--wav-scp", scp, "--out-dir", blocker / "sub"], capsys)
    assert code != 0 and "writable" in err


def _write_channels(tmp_path, delays, rates=None):
    src = np.random.default_rng(4).standard_normal(9000) * 0.1
    paths = []
    for c, d in enumerate(delays):
        rate = rates[c] if rates else 16000
        path = tmp_path / f"ch{c}.wav"
        write_wav(AudioBuffer(src[300 - d : 300 - d + 8000], rate), path)
        paths.append(path)
    return paths


def _table(out):
    lines = out.strip().splitlines()
    assert lines[0] == "channel delay confidence weight"
    return [line.split() for line in lines[1:]]


def test_beamform_identical(tmp_path, capsys):
    paths = _write_channels(tmp_path, [0, 0, 0])
    code, out, _ = run(["beamform", "--inputs", *paths, "--output", tmp_path / "o.wav"], capsys)
    assert code == 0
    rows = _table(out)
    assert [r[1] for r in rows] == ["0", "0", "0"]
    assert np.allclose(read_wav(tmp_path / "o.wav").samples, read_wav(paths[0]).samples, atol=1e-4)


def test_beamform_shifted(tmp_path, capsys):
    paths = _write_channels(tmp_path, [0, 17, -40, 99])
    code, out, _ = run(["beamform", "--inputs", *paths, "--output", tmp_path / "o.wav"], capsys)
    assert code == 0
    assert [int(r[1]) for r in _table(out)] == [0, 17, -40, 99]


def test_beamform_rate_mismatch(tmp_path, capsys):
    paths = _write_channels(tmp_path, [0, 3], rates=[16000, 8000])
    code, _, err = run(["beamform", "--inputs", *paths, "--output", tmp_path / "o.wav"], capsys)
    assert code == 2 and "mismatch" in err
    assert not os.path.exists(tmp_path / "o.wav")


def test_shapes(capsys):
    code, out, _ = run(["shapes"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].split()[3] == "encoder_frames"
    assert [line.split()[3] for line in lines[1:]] == ["7", "13", "25"]
    assert [row[4] for row in shapes_table([1.0], [100, 200, 400])] == [98, 196, 391]
    code, out, _ = run(["shapes", "--encoder", "pblstm", "--frame-rates", "100"], capsys)
    assert out.strip().splitlines()[1].split()[3] == "25"
