"""How far apart are neighbouring grid points in loss units?

For each parameter, step away from the generating point with the other two
held fixed, estimate model moments with many paths, and report the
noise-free chi-square distance to the generating point's moments in units
of one simulated data set's standard errors.

    python scripts/identifiability.py --paths 400
"""
import argparse
import time

import numpy as np

from cojumps.calibrate import DEFAULT_J, DEFAULT_S, DEFAULT_TAU, F2_WEIGHT, model_moments, moment_profile
from cojumps.experiments import HORIZON, TOTAL_RATE, TRUE_POINT, generating_params, simulate_data
from cojumps.hawkes import HawkesParams

OFFSETS = (-0.3, -0.15, -0.1, -0.05, 0.05, 0.1, 0.15, 0.3)


def distance(a, b, data):
    """Chi-square of ``a`` against ``b`` with the data's standard errors only."""
    out = []
    for fa, fb, fd in ((a.f1, b.f1, data.f1), (a.f2, b.f2, data.f2)):
        s = 0.0
        for M in data.m_grid:
            if fd[M].empty or fd[M].stderr == 0 or fa[M].empty or fb[M].empty:
                continue
            s += ((fa[M].mean - fb[M].mean) / fd[M].stderr) ** 2
        out.append(s)
    return out[0], out[1], out[0] + F2_WEIGHT * out[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=400)
    ap.add_argument("--seed", type=int, default=2013)
    ap.add_argument("--replicate", type=int, default=0)
    ap.add_argument("--total-rate", type=float, default=TOTAL_RATE, help="summed stationary event rate per minute")
    args = ap.parse_args()

    truth = generating_params(total_rate=args.total_rate)
    data = moment_profile(simulate_data(truth, HORIZON, np.random.default_rng([args.seed, args.replicate, 0])))

    def moments(point, k):
        p = HawkesParams(truth.n, *point, truth.lambda_bar)
        return model_moments(p, DEFAULT_TAU, DEFAULT_J, DEFAULT_S, args.paths, HORIZON, [args.seed, 99, k])

    t0 = time.time()
    base = moments(TRUE_POINT, 0)
    print("parameter,offset,chi2_1,chi2_2,total")
    k = 1
    for axis, name in enumerate(("eta", "beta", "gamma")):
        for off in OFFSETS:
            point = list(TRUE_POINT)
            point[axis] = round(point[axis] + off, 10)
            if point[axis] <= 0 or (axis == 0 and point[axis] >= 1):
                continue
            c1, c2, tot = distance(moments(tuple(point), k), base, data)
            k += 1
            print(f"{name},{off:+.2f},{c1:.2f},{c2:.2f},{tot:.2f}", flush=True)
    # the same comparison between two independent estimates at the generating point
    c1, c2, tot = distance(moments(TRUE_POINT, k), base, data)
    print(f"none,+0.00,{c1:.2f},{c2:.2f},{tot:.2f}")
    print(f"# {args.paths} paths per point, {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
