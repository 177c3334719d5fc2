"""Per-symbol MSE of the codebook posterior mean across beta, with the critical beta_R marked."""
import argparse
import math

import numpy as np

from partition_mmse.models.codebook import codebook_monte_carlo_mse, critical_beta


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--rate", type=float, default=math.log(2.0))
    ap.add_argument("--power", type=float, default=1.0)
    ap.add_argument("--betas", type=float, nargs=3, default=[0.5, 5.0, 0.25], metavar=("START", "STOP", "STEP"))
    ap.add_argument("--seeds", type=int, default=50)
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    beta_r = critical_beta(args.rate, args.power)
    print(f"# beta_R = {beta_r:.6f}")
    print("beta,regime,mse,stderr,wiener,method")
    start, stop, step = args.betas
    for beta in np.arange(start, stop + 1e-12, step):
        res = codebook_monte_carlo_mse(args.n, args.rate, args.power, float(beta), range(args.seeds))
        regime = "error_dominated" if beta < beta_r else "correct_dominated"
        wiener = args.power / (1 + beta * args.power)
        print(f"{beta:.3f},{regime},{res.per_symbol_mse:.6f},{res.stderr:.6f},{wiener:.6f},{res.method}")
