"""Refinement study for the constant-curvature cap.

Solves sigma_2^{1/2}(kappa) = c on a geodesic ball with rho = 1 on the boundary
and compares against the sphere of curvature c through the boundary circle.

    python3 scripts/convergence_study.py --resolutions 17 33 65 --c 0.5
"""
import argparse
import time

import numpy as np

from radgraph import (
    CurvatureFunction,
    DomainSpec,
    Psi,
    build_domain,
    check_beta_identity,
    make_cap_subsolution,
    oracle_principal_curvatures,
    snapshot,
    solve,
)


def sphere_rho(x, center, theta0, curvature):
    R = 1.0 / curvature
    z = np.cos(theta0) - np.sqrt(R * R - np.sin(theta0) ** 2)
    c = x @ center
    return z * c + np.sqrt(R * R - z * z * (1 - c * c))


def run(resolution, theta0, c, multiplier):
    f = CurvatureFunction("sigma_k_root", 2, 2)
    psi = Psi("constant", c=c)
    t0 = time.perf_counter()
    g = build_domain(DomainSpec("ball", theta0), resolution)
    sub = make_cap_subsolution(g, 1.0, multiplier, psi, f)
    out = solve(g, f, psi, sub)
    elapsed = time.perf_counter() - t0
    exact = -np.log(sphere_rho(g.points, g.chart.center, theta0, c))
    snap = snapshot(g, out.v)
    steps = len(out.stage1.steps) + len(out.stage2.steps)
    return {
        "N": resolution,
        "nodes": g.size,
        "v_err": np.max(np.abs(out.v - exact)),
        "kappa_dev": np.max(np.abs(oracle_principal_curvatures(out.v, g) - c)),
        "beta_viol": check_beta_identity(snap, g),
        "steps": steps,
        "seconds": elapsed,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolutions", type=int, nargs="+", default=[17, 33, 65])
    ap.add_argument("--theta0", type=float, default=np.pi / 3)
    ap.add_argument("--c", type=float, default=0.5)
    ap.add_argument("--multiplier", type=float, default=2.0)
    args = ap.parse_args()

    rows = [run(N, args.theta0, args.c, args.multiplier) for N in args.resolutions]
    keys = ("v_err", "kappa_dev", "beta_viol")
    print(f"{'N':>4} {'nodes':>6} " + " ".join(f"{k:>10} {'order':>6}" for k in keys) + f" {'steps':>5} {'sec':>6}")
    prev = None
    for r in rows:
        cells = []
        for k in keys:
            p = np.log2(prev[k] / r[k]) if prev else np.nan
            cells.append(f"{r[k]:10.3e} {p:6.2f}")
        print(f"{r['N']:4d} {r['nodes']:6d} " + " ".join(cells) + f" {r['steps']:5d} {r['seconds']:6.2f}")
        prev = r


if __name__ == "__main__":
    main()
