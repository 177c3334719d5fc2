"""Mismatched Gaussian estimation: assumed prior variance swept, quadrature against Monte Carlo."""
import argparse

from partition_mmse import ExpectationConfig, mismatched_mse
from partition_mmse.models.gaussian import gaussian_awgn, gaussian_mmse, wiener_coefficient
from partition_mmse.oracle import oracle_mismatched_mse


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--power", type=float, default=1.0)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--assumed", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--samples", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=0)
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    true = gaussian_awgn(args.power, args.beta)
    print(f"# matched mmse = {gaussian_mmse(args.power, args.beta):.6f}")
    print("assumed_power,quadrature,monte_carlo,stderr")
    for q in args.assumed:
        lib = mismatched_mse(true, gaussian_awgn(q, args.beta), ExpectationConfig("quadrature_y")).mse
        coef = wiener_coefficient(q, args.beta)
        mc = oracle_mismatched_mse(true, gaussian_awgn(q, args.beta),
                                   ExpectationConfig("monte_carlo", samples=args.samples, seed=args.seed),
                                   batch_mean=lambda ys, c=coef: c * ys)
        print(f"{q:g},{lib:.6f},{mc.value:.6f},{mc.stderr:.6f}")
