"""Time-averaged law of a functional over two windows and two seeds.

    python3 scripts/invariant_measure.py --T 200 --seeds 11 12
"""

import argparse

import numpy as np

from fcsl.ergodic import compare_measures, simulate_long, sobolev_norm_track
from fcsl.model import additive_noise, builtin_model
from fcsl.solver import SolverConfig
from fcsl.torus import Field, make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--burn-in", type=float, default=20.0)
    ap.add_argument("--stride", type=float, default=0.5)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--seeds", type=int, nargs="+", default=[11, 12])
    ap.add_argument("--functional", default="L1_norm")
    args = ap.parse_args()
    model = builtin_model("burgers_frac", alpha=0.3, noise=additive_noise(8))
    u0 = Field.from_function(make_grid(args.n), lambda x: np.sin(2 * np.pi * x))
    T = args.T
    runs = []
    for seed in args.seeds:
        run = simulate_long(u0, model, SolverConfig(grid_n=args.n, seed=seed), T, args.burn_in, args.stride)
        runs.append(run)
        cmp_ = compare_measures(run.measure(args.functional, T / 2, 3 * T / 4),
                                run.measure(args.functional, 3 * T / 4, T))
        tr = sobolev_norm_track(run, 0.5)
        half = tr.values[tr.times <= T / 2].mean()
        last = tr.values[tr.times >= 3 * T / 4].mean()
        print(f"seed {seed}: window W1 {cmp_.w1:.4f} (tolerance {cmp_.tolerance:.4f}), "
              f"Sobolev drift {100 * (last / half - 1):+.1f}%")
    if len(runs) >= 2:
        cmp_ = compare_measures(runs[0].measure(args.functional, args.burn_in),
                                runs[1].measure(args.functional, args.burn_in))
        print(f"seeds {args.seeds[0]} vs {args.seeds[1]}: W1 {cmp_.w1:.4f} (tolerance {cmp_.tolerance:.4f})")


if __name__ == "__main__":
    main()
