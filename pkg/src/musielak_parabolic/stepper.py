"""Backward Euler time stepping: damped Newton per step with a Picard fallback."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .errors import NonconvergenceError
from .fem import FemFunction, FemSpace, assemble_jacobian, assemble_residual, restrict

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iters: int = 100
    damping: bool = True
    fallback_picard: bool = True
    max_halvings: int = 30

    @classmethod
    def from_config(cls, cfg: dict | None):
        cfg = dict(cfg or {})
        known = {k: cfg[k] for k in ("tol", "max_iters", "damping", "fallback_picard", "max_halvings") if k in cfg}
        return cls(**known)


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int
    tau0: float = 0.999

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one time step")
        if self.T <= 0:
            raise ValueError("final time must be positive")
        if not self.tau0 < 1.0:
            raise ValueError("tau0 must be below one")
        if self.tau > self.tau0:
            raise ValueError(f"time step tau={self.tau} exceeds tau0={self.tau0} (must stay below one)")

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.tau * np.arange(self.N + 1)


@dataclass
class StepReport:
    iterations: int = 0
    residual_norms: list = field(default_factory=list)
    damping_factors: list = field(default_factory=list)
    method: str = "newton"
    fallback_used: bool = False
    final_residual_norm: float = float("nan")

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "method": self.method,
            "fallback_used": self.fallback_used,
            "final_residual_norm": self.final_residual_norm,
            "residual_norms": list(self.residual_norms),
            "damping_factors": list(self.damping_factors),
        }


@dataclass
class DiscreteTrajectory:
    grid: TimeGrid
    states: list
    reports: list

    @property
    def space(self) -> FemSpace:
        return self.states[0].space


def _iterate(spec, space, u_prev, tau, t_n, u, opts, report, picard):
    """Linearised iterations from ``u``; returns (u, converged)."""

    def residual(c):
        return assemble_residual(spec, space, FemFunction(space, c), u_prev, tau, t_n)

    c = u.coefficients.copy()
    r = residual(c)
    r2 = float(np.linalg.norm(r))
    for _ in range(opts.max_iters):
        if np.max(np.abs(r), initial=0.0) <= opts.tol:
            return FemFunction(space, c), r, True
        J = assemble_jacobian(spec, space, FemFunction(space, c), tau, picard=picard)
        delta = splu(J.tocsc()).solve(-r)
        alpha = 1.0
        trial = c + delta
        r_trial = residual(trial)
        if opts.damping:
            halvings = 0
            while not np.linalg.norm(r_trial) <= (1.0 - ARMIJO_C * alpha) * r2:
                if halvings >= opts.max_halvings:
                    return FemFunction(space, c), r, False
                alpha *= 0.5
                halvings += 1
                trial = c + alpha * delta
                r_trial = residual(trial)
        elif not np.all(np.isfinite(r_trial)):
            return FemFunction(space, c), r, False
        c, r = trial, r_trial
        r2 = float(np.linalg.norm(r))
        report.iterations += 1
        report.residual_norms.append(r2)
        report.damping_factors.append(alpha)
    return FemFunction(space, c), r, bool(np.max(np.abs(r), initial=0.0) <= opts.tol)


def solve_step(spec, space: FemSpace, u_prev: FemFunction, tau: float, t_n: float,
               opts: SolverOptions | None = None, guess: FemFunction | None = None):
    """Solve one implicit Euler step; returns ``(u, StepReport)``.

    Convergence is measured by the sup-norm of the Galerkin residual.
    """
    opts = opts or SolverOptions()
    start = u_prev if guess is None else guess
    report = StepReport()
    r0 = assemble_residual(spec, space, start, u_prev, tau, t_n)
    report.residual_norms.append(float(np.linalg.norm(r0)))
    if np.max(np.abs(r0), initial=0.0) <= opts.tol:
        report.method = "none"
        report.final_residual_norm = float(np.max(np.abs(r0), initial=0.0))
        return start, report

    u, r, ok = _iterate(spec, space, u_prev, tau, t_n, start, opts, report, picard=False)
    if not ok and opts.fallback_picard:
        log.info("Newton stagnated at t=%g (residual %.3e); switching to Picard", t_n, np.max(np.abs(r)))
        report.fallback_used = True
        report.method = "picard"
        u, r, ok = _iterate(spec, space, u_prev, tau, t_n, u, opts, report, picard=True)
    report.final_residual_norm = float(np.max(np.abs(r), initial=0.0))
    if not ok:
        raise NonconvergenceError(
            f"step at t={t_n:g} did not converge: residual {report.final_residual_norm:.3e} > tol {opts.tol:g}",
            last_iterate=u, report=report,
        )
    return u, report


def run(spec, space: FemSpace, grid: TimeGrid, opts: SolverOptions | None = None,
        u0: FemFunction | None = None) -> DiscreteTrajectory:
    """March the scheme from the nodal interpolant of ``spec.u0`` over ``grid``."""
    opts = opts or SolverOptions()
    u = restrict(spec.u0_map, space) if u0 is None else u0
    states, reports = [u], []
    tau = grid.tau
    for n in range(1, grid.N + 1):
        t_n = n * tau
        try:
            u, rep = solve_step(spec, space, u, tau, t_n, opts)
        except NonconvergenceError as exc:
            exc.step = n
            raise
        states.append(u)
        reports.append(rep)
    return DiscreteTrajectory(grid, states, reports)


def uniqueness_probe(spec, space: FemSpace, u_prev: FemFunction, tau: float, t_n: float,
                     guesses, opts: SolverOptions | None = None) -> float:
    """Largest pairwise L2 distance between step solutions reached from different guesses."""
    sols = [solve_step(spec, space, u_prev, tau, t_n, opts, guess=g)[0] for g in guesses]
    worst = 0.0
    for i in range(len(sols)):
        for j in range(i + 1, len(sols)):
            worst = max(worst, (sols[i] - sols[j]).l2_norm())
    return worst
