"""Nonlinearity-diffusivity exponent for each builtin model.

    python3 scripts/nld_scan.py --gammas 0.1 0.01 0.001
"""

import argparse

from fcsl.checks import nld_exponent_fit
from fcsl.model import BUILTIN_MODELS, builtin_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gammas", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3])
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--zeta", type=float, nargs=2, default=[-10.0, 10.0])
    args = ap.parse_args()
    print("model,gamma,eta")
    for name in BUILTIN_MODELS:
        res = nld_exponent_fit(builtin_model(name, alpha=args.alpha), args.gammas, tuple(args.zeta))
        for g, e in zip(res.gamma_ladder, res.eta_values):
            print(f"{name},{g:g},{e:.6e}")
        verdict = "degenerate" if res.degenerate else f"s={res.fitted_s:.4f} C={res.fitted_C:.4f}"
        print(f"# {name}: {verdict}")


if __name__ == "__main__":
    main()
