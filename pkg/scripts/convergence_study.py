"""Time-step refinement study: oracle error of the free solve and MFG residuals.

    python scripts/convergence_study.py --config configs/congestion.yaml --levels 64 128 256 512
"""

import argparse
import csv
import sys

from kinetic_mfg.config import config_from_dict, load_config
from kinetic_mfg.fixed_point import picard_solve, residual_check
from kinetic_mfg.verify import oracle_errors


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--levels", type=int, nargs="+", default=[64, 128, 256, 512])
    p.add_argument("--csv", default="convergence.csv")
    args = p.parse_args(argv)
    base = load_config(args.config) if args.config else config_from_dict({})
    grid = base.build_grid()
    m0, spec = base.build_m0(grid), base.build_spec()
    errs = oracle_errors(base, args.levels)
    rows = []
    for n, err in zip(args.levels, errs):
        cfg = config_from_dict({**base.to_dict(), "time": {"T": base.time.T, "N_t": n}})
        pc = cfg.picard()
        state, reps = picard_solve(m0, spec, pc)
        res_fp, res_hjb = residual_check(state, m0, spec, pc)
        rows.append({"N_t": n, "oracle_l2": err, "residual_fp": res_fp, "residual_hjb": res_hjb, "iterations": len(reps)})
    with open(args.csv, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)
    print(f"{'N_t':>6} {'oracle L2':>11} {'ratio':>6} {'FP res':>11} {'ratio':>6} {'HJB res':>11} {'ratio':>6}")
    prev = None
    for r in rows:
        ratios = ["" if prev is None or not r[k] else f"{prev[k] / r[k]:6.3f}" for k in ("oracle_l2", "residual_fp", "residual_hjb")]
        print(
            f"{r['N_t']:>6} {r['oracle_l2']:11.3e} {ratios[0]:>6} {r['residual_fp']:11.3e} {ratios[1]:>6} "
            f"{r['residual_hjb']:11.3e} {ratios[2]:>6}"
        )
        prev = r
    return 0


if __name__ == "__main__":
    sys.exit(main())
