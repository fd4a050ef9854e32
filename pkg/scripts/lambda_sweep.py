"""Penalty-weight sweep on the shifted-Gaussian experiment."""

import argparse

from mm_monge.train import fit, gauss_shift_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 10.0, 100.0, 1000.0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--optimizer", default="adam")
    args = ap.parse_args()

    print("lambda    seed  T2 mean  T2 sd   T3 mean  T3 sd   chain cost  unstable")
    for lam in args.lambdas:
        for seed in args.seeds:
            cfg = gauss_shift_config(optimizer=args.optimizer, lambdas=(lam,), seed=seed, epochs=args.epochs)
            _, rep = fit(cfg)
            a, b = rep.marginals
            flag = a["unstable"] or b["unstable"]
            print(f"{lam:8g}  {seed:4d}  {a['mean']:7.3f}  {a['sd']:6.3f}  {b['mean']:7.3f}  {b['sd']:6.3f}"
                  f"  {rep.mean_cost:10.2f}  {flag}")


if __name__ == "__main__":
    main()
