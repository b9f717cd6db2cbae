"""Command-line front end: ``levyfv {solve,weights,converge,check} CONFIG``.

Exit status is 0 when every gate passes, 1 when a gate fails and 2 when the
configuration cannot be used.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .diagnostics import CheckResult, check_entropy, check_kato, check_pair, check_trajectory
from .errors import CFLViolation, ConfigError, LevyFVError
from .harness import convergence_study
from .scheme import Problem, SchemeConfig, discretise, run, step_size
from .weights import WeightKernel, assemble, dump, verify_laws

__all__ = ["main", "write_atomic", "snapshot_csv"]

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def snapshot_csv(values: np.ndarray, dx: float) -> str:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        x = (np.arange(v.size) + 0.5) * dx
        rows = ["cell_index,x_center,value"]
        rows += [f"{i},{float(x[i])!r},{float(v[i])!r}" for i in range(v.size)]
    else:
        n1, n2 = v.shape
        rows = ["cell_index,x_center,y_center,value"]
        for i in range(n1):
            for j in range(n2):
                rows.append(f"{i * n2 + j},{(i + 0.5) * dx!r},{(j + 0.5) * dx!r},{float(v[i, j])!r}")
    return "\n".join(rows) + "\n"


def _kernel(cfg: Config, problem: Problem) -> WeightKernel:
    policy = cfg["weights.policy"]
    K = cfg["weights.K"] if policy == "diagonal_lump" else max(1, problem.N // 2)
    try:
        return assemble(problem.measure, problem.dx, problem.dimension, K=K, policy=policy, n_cells=problem.N)
    except (ValueError, LevyFVError) as exc:
        raise ConfigError(str(exc), cfg.lines.get("weights.K"), "weights.K") from None


def _run(cfg: Config, scheme: SchemeConfig, problem: Problem, kernel: WeightKernel, keep_levels=True):
    try:
        return run(scheme, problem, kernel=kernel, keep_levels=keep_levels)
    except CFLViolation as exc:
        raise ConfigError(str(exc), cfg.lines.get("scheme.dt"), "scheme.dt") from None


def _mass_tol(scheme: SchemeConfig, problem: Problem) -> float:
    # the implicit solve stops on a scaled l1 residual, which bounds the mass defect per step
    if scheme.variant == "explicit":
        return 1e-12
    return max(1e-12, 10.0 * scheme.fixed_point.tol * max(1.0, problem.T / problem.dx))


def _out_dir(cfg: Config) -> Path:
    return cfg.path("output.dir")


def cmd_solve(cfg: Config) -> int:
    problem = cfg.problem()
    scheme = cfg.scheme()
    kernel = _kernel(cfg, problem)
    traj = _run(cfg, scheme, problem, kernel)
    out = _out_dir(cfg)
    for i, (ts, u) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        write_atomic(out / f"snapshot_{i:03d}.csv", snapshot_csv(u, problem.dx))
    write_atomic(out / "final.csv", snapshot_csv(traj.final, problem.dx))
    report = check_trajectory(traj, problem.dx, mass_tol=_mass_tol(scheme, problem))
    write_atomic(out / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_weights(cfg: Config) -> int:
    problem = cfg.problem()
    kernel = _kernel(cfg, problem)
    laws = verify_laws(kernel, problem.measure)
    out = _out_dir(cfg)
    dump(kernel, out / "kernel.txt")
    text = "".join(line + "\n" for line in laws.lines())
    write_atomic(out / "laws.txt", text)
    sys.stdout.write(text)
    return EXIT_OK if laws.ok else EXIT_GATE


def cmd_converge(cfg: Config) -> int:
    problem = cfg.problem()
    scheme = cfg.scheme()
    try:
        table = convergence_study(problem, scheme, cfg["converge.resolutions"], cfg["converge.reference"],
                                  cfg["converge.refinement"], workers=cfg["converge.workers"])
    except CFLViolation as exc:
        raise ConfigError(str(exc), cfg.lines.get("scheme.dt"), "scheme.dt") from None
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.lines.get("converge.resolutions"), "converge.resolutions") from None
    gate = cfg["converge.min_order"]
    if gate is None and table.theoretical_order is not None:
        gate = table.theoretical_order - 0.1
    fitted = table.fitted_order
    passed = gate is None or (math.isfinite(fitted) and fitted >= gate)
    out = _out_dir(cfg)
    summary = table.to_markdown()
    if gate is not None:
        summary += f"Gate: fitted order >= {gate:.3f}: {'PASS' if passed else 'FAIL'}\n"
    write_atomic(out / "errors.csv", table.to_csv())
    write_atomic(out / "summary.md", summary)
    sys.stdout.write(summary)
    return EXIT_OK if passed else EXIT_GATE


def cmd_check(cfg: Config) -> int:
    problem = cfg.problem()
    scheme = cfg.scheme()
    kernel = _kernel(cfg, problem)
    U0, disc = discretise(problem, kernel)
    try:
        dt = step_size(scheme, disc, problem.measure.order)
    except CFLViolation as exc:
        raise ConfigError(str(exc), cfg.lines.get("scheme.dt"), "scheme.dt") from None
    # both runs of the pair must share one time grid
    fixed = replace(scheme, dt=None if math.isinf(dt) else dt)
    traj = _run(cfg, fixed, problem, kernel)
    dx = problem.dx
    report = check_trajectory(traj, dx, mass_tol=_mass_tol(scheme, problem))

    lo, hi = float(np.min(U0.values)), float(np.max(U0.values))
    lower = np.minimum(U0.values, 0.5 * (lo + hi))
    other = _run(cfg, fixed, replace(problem, u0=lower, snapshots=()), kernel)
    report = report.merge(check_pair(other, traj, dx, ordered=True))

    rng = np.random.default_rng(0)
    shape = (problem.N,) * problem.dimension
    samples = [(rng.uniform(lo - 1, hi + 1, shape), rng.uniform(lo - 1, hi + 1, shape)) for _ in range(100)]
    report = report.merge(check_kato(kernel, problem.nonlin.A, samples))

    if problem.dimension == 1:
        tol = 1e-10
        if scheme.variant != "explicit":
            tol = max(tol, 10.0 * scheme.fixed_point.tol / dx)
        report = report.merge(check_entropy(traj, problem.measure, disc, tol=tol))

    laws = verify_laws(kernel, problem.measure)
    report.add(_law_check(laws))
    out = _out_dir(cfg)
    write_atomic(out / "report.txt", report.to_text())
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_GATE


def _law_check(laws) -> CheckResult:
    verdicts = (("row_sum", laws.row_sum_ok), ("sign", laws.sign_ok), ("toeplitz", laws.toeplitz_ok))
    broken = [name for name, ok in verdicts if not ok]
    return CheckResult("weight_laws", math.inf if broken else 0.0, 0.0, ",".join(broken))


COMMANDS = {"solve": cmd_solve, "weights": cmd_weights, "converge": cmd_converge, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levyfv", description="Finite volume solver for nonlocal convection-diffusion.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run to the final time and write snapshots and a report",
        "weights": "assemble the weight kernel, verify its laws and dump it",
        "converge": "run a resolution sweep and write errors.csv and summary.md",
        "check": "run the full invariant suite",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config", type=Path)
        sp.add_argument("-o", "--output", type=Path, help="override output.dir")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.output is not None:
            cfg.values["output.dir"] = str(args.output.resolve())
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"levyfv: config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LevyFVError as exc:
        print(f"levyfv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
