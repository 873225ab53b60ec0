"""Median test MSE at the largest n for the explicit (eps) and implicit (alpha) families.

For each master seed, prints the three medians of each family and whether
they decrease along the family. Only the n = 128 cells are run.
"""

import argparse

import numpy as np

from lmmbench.experiments import get_preset
from lmmbench.experiments.sweep import run_trial

FAMILIES = {
    "explicit": ["explicit-eps0.25", "explicit-eps0.5", "explicit-eps1"],
    "implicit": ["implicit-alpha0.25", "implicit-alpha0.5", "implicit-alpha1"],
}


def median_at(name, n, seed, trials):
    sc = get_preset(name, seed=seed, trials=trials)
    return float(np.nanmedian([run_trial(sc, n, t).test_mse for t in range(trials)]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--trials", type=int, default=50)
    args = ap.parse_args()

    for family, names in FAMILIES.items():
        wins = 0
        for seed in args.seeds:
            meds = [median_at(name, args.n, seed, args.trials) for name in names]
            ordered = meds[0] > meds[1] > meds[2]
            wins += ordered
            print(f"{family} seed={seed}: " + "  ".join(f"{m:.4g}" for m in meds) + ("  ordered" if ordered else ""))
        print(f"{family}: {wins}/{len(args.seeds)} seeds ordered\n")


if __name__ == "__main__":
    main()
