"""Shifted-Gaussian experiment across the four optimizers, seed by seed.

Usage: python scripts/optimizer_table.py [--seeds 1 2 3] [--epochs 2000]
"""

import argparse

from mm_monge.train import fit, gauss_shift_config

OPTIMIZERS = ("adam", "adagrad", "sgd", "rmsprop")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--lam", type=float, default=100.0)
    args = ap.parse_args()

    print("optimizer  seed  T2 mean  T2 sd   T3 mean  T3 sd   unstable")
    for opt in OPTIMIZERS:
        for seed in args.seeds:
            cfg = gauss_shift_config(optimizer=opt, lambdas=(args.lam,), seed=seed, epochs=args.epochs)
            _, rep = fit(cfg)
            (a, b) = rep.marginals
            flag = a["unstable"] or b["unstable"]
            print(f"{opt:9s}  {seed:4d}  {a['mean']:7.3f}  {a['sd']:6.3f}  {b['mean']:7.3f}  {b['sd']:6.3f}  {flag}")


if __name__ == "__main__":
    main()
