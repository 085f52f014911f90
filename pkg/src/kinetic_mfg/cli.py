"""Command line entry point: ``mfg solve | certify | verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, SolverConfig, config_from_dict, load_config
from .fixed_point import (
    ConvergenceError,
    DivergenceError,
    check_smallness,
    picard_solve,
    write_certificates,
    write_iteration_reports,
)
from .hamiltonians import ModelError, eval_H_frames, eval_J_frames
from .kolmogorov import EnergyReport, SolverError, SourceSpec, energy_report, save_trajectory
from .phase_grid import Trajectory
from .verify import SUITES, format_table, run_suite

log = logging.getLogger("kinetic_mfg")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_DIVERGED = 2
EXIT_NOT_CONVERGED = 3
EXIT_BAD_INPUT = 4


def _out_dir(cfg: SolverConfig, override: str | None) -> Path:
    d = Path(override or cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_energy_csv(path, state, spec, cfg: SolverConfig) -> None:
    """energy.csv: the per-frame report for each equation, keyed by an ``equation`` column."""
    grid, times, s = state.grid, state.times, cfg.norms.s
    fwd = bwd = None
    if spec.epsilon != 0.0:
        m, p = state.m.data, state.dvu.scalar()
        J = eval_J_frames(spec, grid, times, m, p)
        H = eval_H_frames(spec, grid, times, m, p)
        fwd = SourceSpec(h2=Trajectory(grid, times, (-spec.epsilon * J)[:, None]))
        bwd = SourceSpec(h1=Trajectory(grid, times, spec.epsilon * H))
    rows = [("m", r) for r in energy_report(state.m, state.dvm, fwd, s=s)]
    rows += [("u", r) for r in energy_report(state.u, state.dvu, bwd, s=s, backward=True)]
    with open(path, "w") as fh:
        fh.write(",".join(("equation",) + EnergyReport.CSV_HEADER) + "\n")
        for eq, r in rows:
            fh.write(",".join([eq] + [repr(float(x)) for x in r.csv_row()]) + "\n")


def run_solve(cfg: SolverConfig, out: str | None = None) -> int:
    out_dir = _out_dir(cfg, out)
    grid = cfg.build_grid()
    m0, spec, pc = cfg.build_m0(grid), cfg.build_spec(), cfg.picard()
    try:
        state, reports = picard_solve(m0, spec, pc)
    except DivergenceError as exc:
        write_iteration_reports(out_dir / "iterations.csv", exc.reports)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ConvergenceError as exc:
        write_iteration_reports(out_dir / "iterations.csv", exc.reports)
        print(f"error: {exc}; ratio history {exc.ratios}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (SolverError, ModelError) as exc:
        step = getattr(exc, "step", None)
        print(f"error: solver failure ({exc})" + (f" at step {step}" if step else ""), file=sys.stderr)
        return EXIT_FAILED

    write_iteration_reports(out_dir / "iterations.csv", reports)
    write_energy_csv(out_dir / "energy.csv", state, spec, cfg)
    cert = check_smallness(spec, cfg.time.T, cfg.certificate.L_star)
    ratios = [r.ratio for r in reports[1:] if np.isfinite(r.ratio)]
    with open(out_dir / "certificate.txt", "w") as fh:
        fh.write(cert.to_text())
        fh.write(f"iterations = {len(reports)}\n")
        fh.write(f"max_measured_ratio = {max(ratios) if ratios else float('nan')}\n")
    if cert.contraction and cert.feasible and ratios:
        bad = [r for r in ratios[1:] if r > cert.lipschitz_bound + 0.1]
        if bad:
            log.warning("measured ratios %s exceed the certified bound %.3f + 0.1", bad, cert.lipschitz_bound)
    if cfg.output.save_trajectories:
        save_trajectory(out_dir / "m", state.m, name="m")
        save_trajectory(out_dir / "u", state.u, name="u")
    print(f"converged in {len(reports)} iterations; final xs_diff {reports[-1].xs_diff:.3e}; outputs in {out_dir}")
    return EXIT_OK


def run_certify(cfg: SolverConfig, out: str | None = None) -> int:
    out_dir = _out_dir(cfg, out)
    base = cfg.build_spec()
    certs = [check_smallness(base.with_coupling(e, d), cfg.time.T, cfg.certificate.L_star) for e, d in cfg.certificate_pairs()]
    write_certificates(out_dir / "certificate.csv", certs)
    n_ok = sum(c.feasible for c in certs)
    print(f"{n_ok}/{len(certs)} (epsilon, delta) points feasible; wrote {out_dir / 'certificate.csv'}")
    return EXIT_OK


def run_verify(suite: str, cfg: SolverConfig, seed: int | None = None) -> int:
    checks = run_suite(suite, cfg, seed)
    print(format_table(checks))
    ok = all(c.passed for c in checks)
    print(f"suite {suite}: {'PASS' if ok else 'FAIL'} ({sum(c.passed for c in checks)}/{len(checks)})")
    return EXIT_OK if ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfg", description="Kinetic mean field game solver and verification suite")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "certify", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML config; defaults apply when omitted")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            sp.add_argument("--suite", required=True, choices=sorted(SUITES))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else config_from_dict({})
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.command == "solve":
        return run_solve(cfg, args.out)
    if args.command == "certify":
        return run_certify(cfg, args.out)
    return run_verify(args.suite, cfg, args.seed)


if __name__ == "__main__":
    sys.exit(main())
