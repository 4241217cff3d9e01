"""Frame counts and encoder lengths over the frame-rate x speed grid.

Builds a small synthetic corpus, speed-perturbs it, extracts FBANK+pitch at
each frame rate and prints one row per (rate, speed) with the mean extracted
frame count and the mean encoder output length.

    python scripts/frame_rate_grid.py --num-utts 5 --seconds 2.0
"""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from hfr_frontend import kio
from hfr_frontend.audio import AudioBuffer, read_wav, write_wav
from hfr_frontend.augment import SpeedPerturbSpec, augment_manifest
from hfr_frontend.extract import PipelineConfig, extract_features
from hfr_frontend.shapes import encoder_output_length, vgg_pblstm


def synth_corpus(out_dir: Path, n: int, seconds: float, sr: int, seed: int) -> Path:
    """Harmonic tones with a slow pitch glide plus a little noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * sr)) / sr
    lines = []
    for i in range(n):
        f0 = rng.uniform(90, 260) * (1 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * t))
        phase = 2 * np.pi * np.cumsum(f0) / sr
        x = sum(0.2 / k * np.sin(k * phase) for k in range(1, 6))
        x = x + 0.005 * rng.standard_normal(t.size)
        path = out_dir / f"utt{i:03d}.wav"
        write_wav(AudioBuffer(x, sr), path)
        lines.append(f"utt{i:03d} {path}\n")
    scp = out_dir / "wav.scp"
    scp.write_text("".join(lines))
    return scp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--num-utts", type=int, default=5)
    ap.add_argument("--seconds", type=float, default=2.0)
    ap.add_argument("--rates", type=float, nargs="+", default=[100, 200, 400])
    ap.add_argument("--speeds", type=float, nargs="+", default=[0.9, 1.0, 1.1])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        scp = synth_corpus(tmp, args.num_utts, args.seconds, 16000, args.seed)
        manifest, _ = augment_manifest(kio.parse_manifest(scp), SpeedPerturbSpec(tuple(args.speeds)),
                                       tmp / "aug")
        audio = {rec: read_wav(path) for rec, path in manifest.wav.items()}

        spec = vgg_pblstm()
        print("frame_rate speed utts mean_frames mean_encoder_frames feat_dim")
        for rate in args.rates:
            cfg = PipelineConfig(frame_rate=rate)
            for s in args.speeds:
                prefix = SpeedPerturbSpec(tuple(args.speeds)).copy_id(s, "")
                recs = [r for r in audio if (r.startswith(prefix) if prefix else not r.startswith("sp"))]
                frames, enc, dim = [], [], 0
                for rec in recs:
                    feats = extract_features(audio[rec], cfg, rec)
                    frames.append(feats.num_frames)
                    enc.append(encoder_output_length(feats.num_frames, spec))
                    dim = feats.dim
                print(f"{rate:g} {s:g} {len(recs)} {np.mean(frames):.1f} {np.mean(enc):.1f} {dim}")


if __name__ == "__main__":
    main()
