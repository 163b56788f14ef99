"""Recover the unit sphere (psi = 1, rho = 1 on the boundary) from caps of
increasing curvature, and show where round caps stop existing.

    python3 scripts/sphere_recovery.py --resolution 33
"""
import argparse
import time

import numpy as np

from radgraph import CurvatureFunction, DomainSpec, Psi, build_domain, make_cap_subsolution, residual, solve
from radgraph.errors import NoSubsolution


def main():
    ap = argparse.ArgumentParser(description="unit sphere recovery from cap subsolutions")
    ap.add_argument("--resolution", type=int, default=33)
    ap.add_argument("--theta0", type=float, default=np.pi / 3)
    ap.add_argument("--multipliers", type=float, nargs="+", default=[1.02, 1.05, 1.1, 1.15, 1.3])
    args = ap.parse_args()

    f = CurvatureFunction("sigma_k_root", 2, 2)
    psi = Psi("constant", c=1.0)
    g = build_domain(DomainSpec("ball", args.theta0), args.resolution)
    print(f"ball of radius {args.theta0:.4f}, {g.size} nodes; largest cap curvature {1 / np.sin(args.theta0):.4f}")
    print(f"{'cap':>6} {'eps':>9} {'steps':>5} {'newton':>6} {'|v|_inf':>9} {'residual':>9} {'sec':>6}")
    for mu in args.multipliers:
        t0 = time.perf_counter()
        try:
            sub = make_cap_subsolution(g, 1.0, mu, psi, f)
        except NoSubsolution as exc:
            print(f"{mu:6.3f}  no subsolution: {exc}")
            continue
        out = solve(g, f, psi, sub)
        elapsed = time.perf_counter() - t0
        reps = (out.stage1, out.stage2)
        steps = sum(len(r.steps) for r in reps)
        iters = sum(s.iterations for r in reps for s in r.steps)
        res = np.max(np.abs(residual(out.target_problem(), out.v).values))
        print(
            f"{sub.cap_curvature:6.3f} {out.epsilon:9.3e} {steps:5d} {iters:6d} "
            f"{np.max(np.abs(out.v)):9.2e} {res:9.2e} {elapsed:6.2f}"
        )


if __name__ == "__main__":
    main()
