"""Cauchy-noise saddle estimator: relative error and ln t curvature as n grows with k = 0.6 n."""
import argparse

import numpy as np

from partition_mmse.models.cauchy import CauchyModel, cauchy_conditional_mean, cauchy_saddle_t


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[5, 10, 25, 50, 100, 200])
    ap.add_argument("--k-ratio", type=float, default=0.6)
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    rng = np.random.default_rng(args.seed)
    print("n,k,mean_relative_error,max_relative_error,median_curvature")
    for n in args.n:
        k = max(args.k_ratio * n, n / 2 + 1.5)
        model = CauchyModel(n, 1.0, k)
        _, Y = model.sample(rng, args.samples)
        rel, curv = [], []
        for y in Y:
            sol = cauchy_saddle_t(model, y)
            approx = sol.argmax / (sol.argmax + model.half_precision) * y
            exact = cauchy_conditional_mean(model, y)
            rel.append(np.linalg.norm(approx - exact) / np.linalg.norm(exact))
            curv.append(sol.curvature)
        print(f"{n},{k:g},{np.mean(rel):.5f},{np.max(rel):.5f},{np.median(curv):.3f}")
