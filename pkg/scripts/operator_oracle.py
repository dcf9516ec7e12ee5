"""Spectral fractional Laplacian against the singular-integral quadrature.

    python3 scripts/operator_oracle.py --n 256 --alphas 0.1 0.25 0.4 0.45
"""

import argparse

import numpy as np

from fcsl.operators import frac_laplacian_quadrature, frac_laplacian_spectral
from fcsl.torus import Field, make_grid


def band_limited(n: int, kmax: int, seed: int) -> Field:
    rng = np.random.default_rng(seed)
    x = make_grid(n).x
    k = np.arange(1, kmax + 1)
    a, b = rng.standard_normal((2, kmax)) / k
    return Field(make_grid(n), a @ np.cos(2 * np.pi * np.outer(k, x)) + b @ np.sin(2 * np.pi * np.outer(k, x)))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.1, 0.25, 0.4, 0.45])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    f = band_limited(args.n, args.n // 8, args.seed)
    print("alpha,relative_l2_error")
    for a in args.alphas:
        s = frac_laplacian_spectral(f, a).values
        q = frac_laplacian_quadrature(f, a).values
        print(f"{a},{np.linalg.norm(q - s) / np.linalg.norm(s):.3e}")


if __name__ == "__main__":
    main()
