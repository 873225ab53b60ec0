"""Rate sweeps for the finite, exponential and polynomial spectrum presets.

Writes results.csv and summary.json per preset under --out and prints the
fitted slope of median test MSE against n.

    python3 scripts/run_rate_tables.py --out runs/rates --trials 20
"""

import argparse
import logging
from pathlib import Path

from lmmbench.experiments import get_preset, run_rate_sweep

PRESETS = (
    "finite-implicit",
    "finite-explicit",
    "exp-implicit",
    "exp-explicit",
    "poly-implicit",
    "poly-explicit",
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/rates")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", nargs="*", default=PRESETS)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    for name in args.only:
        sc = get_preset(name, trials=args.trials, seed=args.seed)
        res = run_rate_sweep(sc, workers=args.workers)
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        res.write_csv(out / "results.csv")
        res.write_summary(out / "summary.json")
        meds = " ".join(f"{m:.4g}" for m in res.medians)
        print(f"{name:18s} slope {res.slope:+.3f} (se {res.slope_se:.3f})  medians {meds}")


if __name__ == "__main__":
    main()
