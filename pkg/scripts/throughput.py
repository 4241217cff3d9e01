"""Real-time factor of FBANK+pitch extraction per frame rate.

    python scripts/throughput.py --seconds 60 --repeats 3
"""

import argparse
import time

import numpy as np

from hfr_frontend.audio import AudioBuffer
from hfr_frontend.extract import PipelineConfig, extract_features


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=60.0)
    ap.add_argument("--rates", type=float, nargs="+", default=[100, 200, 400])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--no-pitch", action="store_true")
    args = ap.parse_args()

    sr = 16000
    rng = np.random.default_rng(0)
    t = np.arange(int(args.seconds * sr)) / sr
    x = 0.3 * np.sin(2 * np.pi * (150 + 50 * np.sin(2 * np.pi * 0.3 * t)) * t) + 0.02 * rng.standard_normal(t.size)
    buf = AudioBuffer(x, sr)

    print("frame_rate frames best_s rtf")
    for rate in args.rates:
        cfg = PipelineConfig(frame_rate=rate, enable_pitch=not args.no_pitch)
        best, frames = float("inf"), 0
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            frames = extract_features(buf, cfg).num_frames
            best = min(best, time.perf_counter() - t0)
        print(f"{rate:g} {frames} {best:.3f} {best / args.seconds:.4f}")


if __name__ == "__main__":
    main()
