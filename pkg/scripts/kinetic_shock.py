"""Entropy production across a stationary Burgers shock.

The kinetic residual grows at the rate |[u]|^3 / 12 once the shock has formed;
this prints the residual series and the fitted slope.

    python3 scripts/kinetic_shock.py --n 512
"""

import argparse

import numpy as np

from fcsl.kinetic import KineticTestFunction, TrigPoly, kinetic_residual, ramp_profile
from fcsl.model import ModelSpec, burgers_flux, zero_diffusion, zero_noise
from fcsl.solver import SolverConfig, evolve
from fcsl.torus import Field, make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--t-end", type=float, default=0.4)
    args = ap.parse_args()
    model = ModelSpec(burgers_flux(), zero_diffusion(), zero_noise(), 0.3, name="inviscid_burgers")
    u0 = Field.from_function(make_grid(args.n), lambda x: np.where(x < 0.5, 1.0, -1.0))
    tr = evolve(u0, model, SolverConfig(grid_n=args.n, dt=0.4 / args.n, t_end=args.t_end))
    tf = KineticTestFunction(TrigPoly(0.5, cos=(-0.5,)), ramp_profile(-1.1, 1.1))
    res = kinetic_residual(tr, model, tf)
    print("time,D")
    for t, d in zip(res.times[::10], res.D[::10]):
        print(f"{t:.4f},{d:.6e}")
    late = res.times >= 0.1
    slope = np.polyfit(res.times[late], res.D[late], 1)[0]
    print(f"# slope {slope:.5f}, jump^3/12 = {8 / 12:.5f}")


if __name__ == "__main__":
    main()
