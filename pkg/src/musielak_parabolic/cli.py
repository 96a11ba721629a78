"""Batch front-end.

Exit codes: 0 success, 1 a contracted verdict failed, 2 config/validation
error (including unwritable outputs), 3 solver nonconvergence.

Precedence: values in the config file, overridden by --mode and --out.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, harness
from .config import MODES, RunConfig, load_config
from .errors import (
    ConfigError,
    NonconvergenceError,
    StructureViolationError,
    StudyPreconditionError,
    TraceViolationError,
)
from .fem import FemSpace, build_mesh
from .problem import problem_from_config, validate_all
from .stepper import SolverOptions, TimeGrid, run

log = logging.getLogger("musielak_parabolic")

TEMPORAL_ORDER_MIN = 0.9


@dataclass
class Results:
    mode: str
    verdict: bool = True
    summary: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)  # report name -> (filename, text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def trajectory_csv(traj) -> str:
    lines = ["n,t_n,newton_iters,final_residual_norm,fallback_used,method"]
    if traj is None:
        return lines[0] + "\n"
    for n, rep in enumerate(traj.reports, start=1):
        lines.append(
            f"{n},{float(traj.grid.nodes[n])!r},{rep.iterations},{rep.final_residual_norm!r},"
            f"{int(rep.fallback_used)},{rep.method}"
        )
    return "\n".join(lines) + "\n"


def emit_reports(results: Results, outputs) -> list:
    """Write the selected artifacts plus ``summary.json``; returns written paths."""
    out = Path(outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(results.artifacts):
        if name not in outputs.reports:
            continue
        filename, text = results.artifacts[name]
        path = out / filename
        path.write_text(text)
        written.append(path)
    summary = {"mode": results.mode, "verdict": "pass" if results.verdict else "fail", **results.summary}
    path = out / "summary.json"
    path.write_text(_dumps(summary))
    written.append(path)
    return written


# ---------------------------------------------------------------------------
# pipelines


def _spec(cfg: RunConfig):
    return problem_from_config(cfg.problem_block(), cfg.mesh.dim)


def _mode_validate(cfg: RunConfig, spec) -> Results:
    reports = validate_all(spec, seed=cfg.seed, sampling=cfg.sampling.model_dump())
    res = Results("validate", all(r.passed for r in reports))
    res.summary["validators"] = {r.name: r.passed for r in reports}
    res.summary["messages"] = [r.message() for r in reports if not r.passed]
    res.artifacts["validation"] = ("validation.json", _dumps([r.to_dict() for r in reports]))
    return res


def _solve(cfg: RunConfig, spec):
    spec.constants.check_structure()
    space = FemSpace(build_mesh(cfg.mesh.dim, cfg.mesh.m))
    grid = TimeGrid(cfg.time.T, cfg.time.N)
    traj = run(spec, space, grid, SolverOptions.from_config(cfg.solver.model_dump()))
    return traj


def _solve_artifacts(res: Results, traj):
    res.artifacts["trajectory"] = ("trajectory.csv", trajectory_csv(traj))
    res.artifacts["field"] = ("field_final.csv", traj.states[-1].to_csv())
    res.artifacts["mesh"] = ("mesh.txt", traj.space.mesh.to_text())
    res.summary["steps"] = traj.grid.N
    res.summary["max_newton_iters"] = max((r.iterations for r in traj.reports), default=0)
    res.summary["fallback_steps"] = sum(r.fallback_used for r in traj.reports)
    res.summary["max_final_residual"] = max((r.final_residual_norm for r in traj.reports), default=0.0)


def _mode_solve(cfg: RunConfig, spec) -> Results:
    traj = _solve(cfg, spec)
    res = Results("solve")
    _solve_artifacts(res, traj)
    return res


def _mode_audit(cfg: RunConfig, spec) -> Results:
    traj = _solve(cfg, spec)
    ledger = diagnostics.energy_audit(traj, spec, eps=cfg.audit.eps)
    res = Results("audit", ledger.passed)
    _solve_artifacts(res, traj)
    res.summary["audit"] = ledger.summary()
    res.artifacts["ledger"] = ("ledger.csv", ledger.to_csv())
    return res


def _manufactured(cfg: RunConfig, spec) -> harness.ManufacturedCase:
    if spec.exact is None:
        raise ConfigError("convergence studies need a problem with f of kind 'manufactured'")
    return harness.ManufacturedCase(str(spec.exact.symbolic), spec, spec.exact)


def _study_artifacts(res, report):
    res.artifacts["study"] = ("study.csv", report.to_csv())
    res.artifacts["study_json"] = ("study.json", report.to_json())
    res.summary["study"] = report.to_dict()


def _mode_temporal(cfg: RunConfig, spec) -> Results:
    spec.constants.check_structure()
    case = _manufactured(cfg, spec)
    report = harness.temporal_order_study(
        case, cfg.study.m, cfg.study.N_list, T=cfg.time.T, opts=SolverOptions.from_config(cfg.solver.model_dump())
    )
    ok = report.degenerate or (report.order_l1 >= TEMPORAL_ORDER_MIN and report.monotone)
    res = Results("temporal-study", ok)
    _study_artifacts(res, report)
    return res


def _mode_spatial(cfg: RunConfig, spec) -> Results:
    spec.constants.check_structure()
    case = _manufactured(cfg, spec)
    report = harness.spatial_refinement_study(
        case, cfg.study.N, cfg.study.m_list, T=cfg.time.T, opts=SolverOptions.from_config(cfg.solver.model_dump())
    )
    res = Results("spatial-study", True)
    _study_artifacts(res, report)
    return res


def _mode_oracle(cfg: RunConfig, spec) -> Results:
    from .stepper import solve_step

    rng = np.random.default_rng(cfg.seed)
    opts = SolverOptions.from_config(cfg.solver.model_dump())
    rows = ["instance,model,unknowns,tau,max_abs_diff"]
    worst = 0.0
    for k in range(cfg.oracle.instances):
        name, spec_k, space, u_prev, tau, t_n = harness.random_tiny_instance(rng, cfg.oracle.models)
        oracle = harness.brute_force_oracle(spec_k, space, u_prev, tau, t_n, cfg.oracle.grid_resolution)
        u, _ = solve_step(spec_k, space, u_prev, tau, t_n, opts)
        diff = float(np.max(np.abs(oracle.coefficients - u.coefficients)))
        worst = max(worst, diff)
        rows.append(f"{k},{name},{space.n_dofs},{tau!r},{diff!r}")
    res = Results("oracle-check", worst <= cfg.oracle.tolerance)
    res.summary["oracle"] = {"instances": cfg.oracle.instances, "max_abs_diff": worst, "tolerance": cfg.oracle.tolerance}
    res.artifacts["oracle"] = ("oracle.csv", "\n".join(rows) + "\n")
    return res


PIPELINES = {
    "validate": _mode_validate,
    "solve": _mode_solve,
    "audit": _mode_audit,
    "temporal-study": _mode_temporal,
    "spatial-study": _mode_spatial,
    "oracle-check": _mode_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="musielak-parabolic",
        description="Backward Euler / P1 solver and estimate audits for nonlinear parabolic problems.",
    )
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--mode", choices=MODES, help="override the mode in the config")
    p.add_argument("--out", help="output directory (overrides outputs.dir)")
    p.add_argument("--seed", type=int, help="seed for the sampling validators and oracle instances")
    p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return p


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")

    def say(msg):
        if not args.quiet:
            print(msg)

    try:
        cfg = load_config(args.config, {"mode": args.mode, "seed": args.seed})
        if args.out:
            cfg.outputs.dir = args.out
        spec = _spec(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        results = PIPELINES[cfg.mode](cfg, spec)
    except (StructureViolationError, TraceViolationError, StudyPreconditionError, ConfigError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NonconvergenceError as exc:
        where = f" at step {exc.step}" if exc.step is not None else ""
        print(f"solver nonconvergence{where}: {exc}", file=sys.stderr)
        return 3

    try:
        written = emit_reports(results, cfg.outputs)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2

    for msg in results.summary.get("messages", []):
        print(msg, file=sys.stderr)
    say(f"{cfg.mode}: {'pass' if results.verdict else 'fail'}")
    for path in written:
        say(f"  wrote {path}")
    if cfg.mode == "validate" and not results.verdict:
        return 2
    return 0 if results.verdict else 1


def main():
    sys.exit(run_cli())
