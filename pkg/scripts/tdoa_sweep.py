"""GCC-PHAT exact-recovery rate versus SNR on synthetic shifted noise.

    python scripts/tdoa_sweep.py --trials 200 --snrs 0 5 10 20
"""

import argparse

import numpy as np

from hfr_frontend.beamform import gcc_phat_tdoa


def trial(rng, snr_db, max_delay, length):
    d = int(rng.integers(-max_delay, max_delay + 1))
    src = rng.standard_normal(length + 2 * max_delay + 1)
    ref = src[max_delay : max_delay + length]
    other = src[max_delay - d : max_delay - d + length]
    sigma = np.sqrt(1.0 / 10 ** (snr_db / 10))
    ref = ref + sigma * rng.standard_normal(length)
    other = other + sigma * rng.standard_normal(length)
    return gcc_phat_tdoa(ref, other, max_delay).delay == d


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--snrs", type=float, nargs="+", default=[-5, 0, 5, 10, 20])
    ap.add_argument("--max-delay", type=int, default=100)
    ap.add_argument("--length", type=int, default=4096)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("snr_db exact_rate")
    for snr in args.snrs:
        hits = sum(trial(rng, snr, args.max_delay, args.length) for _ in range(args.trials))
        print(f"{snr:g} {hits / args.trials:.3f}")


if __name__ == "__main__":
    main()
