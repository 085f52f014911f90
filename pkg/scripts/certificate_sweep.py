"""Feasibility map of the smallness certificate over a log-spaced (epsilon, delta) grid.

    python scripts/certificate_sweep.py --model congestion --T 0.5 --L-star 0.5 --n 9
"""

import argparse
import sys

import numpy as np

from kinetic_mfg.fixed_point import check_smallness, write_certificates
from kinetic_mfg.hamiltonians import BUILTINS, builtin


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--model", default="congestion", choices=sorted(BUILTINS))
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--L-star", type=float, default=0.5)
    p.add_argument("--lo", type=float, default=1e-5)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--csv", default="certificate_sweep.csv")
    args = p.parse_args(argv)
    base = builtin(args.model)
    vals = np.geomspace(args.lo, args.hi, args.n)
    certs = [[check_smallness(base.with_coupling(e, d), args.T, args.L_star) for d in vals] for e in vals]
    write_certificates(args.csv, [c for row in certs for c in row])
    print("rows: epsilon, columns: delta; '#' feasible, '.' infeasible")
    print(" " * 10 + " ".join(f"{d:8.1e}" for d in vals))
    for e, row in zip(vals, certs):
        print(f"{e:9.1e} " + " ".join(f"{'#' if c.feasible else '.':>8}" for c in row))
    c = certs[0][0]
    print(f"lipschitz_bound {c.lipschitz_bound:.4f}, contraction {c.contraction}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
