"""Manufactured solutions, convergence studies and a brute-force step oracle."""
from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import sympy

from . import models
from .errors import OracleFailureError, StudyPreconditionError
from .fem import FemFunction, FemSpace, assemble_residual, build_mesh, quadrature_rule, worker_count
from .problem import ProblemSpec, problem_from_config
from .stepper import SolverOptions, TimeGrid, run

DEGENERATE_ERROR = 1e-12
DEGENERATE_SPREAD = 1e-6


@dataclass(frozen=True)
class ManufacturedCase:
    """An exact solution together with the problem whose source it induces."""

    name: str
    spec: ProblemSpec
    exact: models.Expression

    @property
    def dim(self):
        return self.spec.dim


def manufactured_case(name: str, problem_cfg: dict, exact: str, dim: int = 1) -> ManufacturedCase:
    cfg = dict(problem_cfg)
    cfg["f"] = {"kind": "manufactured", "params": {"exact": exact}}
    cfg["u0"] = {"kind": "manufactured"}
    spec = problem_from_config(cfg, dim)
    xs = tuple(sympy.symbols(f"x0:{dim}", real=True))
    t = sympy.Symbol("t", real=True)
    ex = spec.exact.symbolic
    for xk in xs:
        for edge in (0, 1):
            for tv in (0, sympy.Rational(1, 3), 1):
                val = float(ex.subs({xk: edge, t: tv}).subs({x: sympy.Rational(1, 2) for x in xs}))
                if abs(val) > 1e-12:
                    raise ValueError(f"manufactured solution {exact!r} does not vanish on the boundary")
    return ManufacturedCase(name, spec, spec.exact)


@dataclass
class ConvergenceReport:
    kind: str
    parameter: str
    values: list
    err_l1: list
    err_l2: list
    order_l1: float | None
    order_l2: float | None
    degenerate: bool = False
    monotone: bool = True
    metadata: dict = field(default_factory=dict)

    def rates(self, errors):
        out = [None]
        for k in range(1, len(errors)):
            if errors[k] > 0 and errors[k - 1] > 0:
                out.append(float(np.log(errors[k - 1] / errors[k]) / np.log(self.values[k - 1] / self.values[k])))
            else:
                out.append(None)
        return out

    def to_csv(self) -> str:
        lines = ["level,tau_or_h,err_L1,err_L2,rate"]
        rates = self.rates(self.err_l1)
        for k, (v, e1, e2, r) in enumerate(zip(self.values, self.err_l1, self.err_l2, rates)):
            lines.append(f"{k},{float(v)!r},{float(e1)!r},{float(e2)!r},{'' if r is None else repr(r)}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameter": self.parameter,
            "values": list(self.values),
            "err_L1": list(self.err_l1),
            "err_L2": list(self.err_l2),
            "order_L1": self.order_l1,
            "order_L2": self.order_l2,
            "degenerate": self.degenerate,
            "monotone": self.monotone,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def fitted_order(params, errors) -> float:
    """Least-squares slope of log(error) against log(parameter)."""
    x = np.log(np.asarray(params, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def final_time_errors(case: ManufacturedCase, u: FemFunction, T: float):
    """L1 and L2 errors at time T with a doubled-degree quadrature."""
    space = u.space
    fine = space.with_quadrature(quadrature_rule(space.dim, 2 * space.quad.degree))
    uh = fine.values_at_quadrature(u.coefficients)
    ue = case.exact(fine.xq, T)
    d = ue - uh
    return fine.integrate(np.abs(d)), float(np.sqrt(fine.integrate(d * d)))


def _solve(case, m, N, T, opts):
    space = FemSpace(build_mesh(case.dim, m))
    traj = run(case.spec, space, TimeGrid(T, N), opts)
    return traj.states[-1]


def _pmap(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def temporal_order_study(case: ManufacturedCase, m: int, N_list, T: float = 1.0,
                         opts: SolverOptions | None = None, check_spatial: bool = True) -> ConvergenceReport:
    """L1-at-T errors for a sequence of step counts on a fixed fine mesh."""
    N_list = list(N_list)
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise StudyPreconditionError("N_list must be strictly increasing with at least 3 entries")
    opts = opts or SolverOptions()
    finals = _pmap(lambda N: _solve(case, m, N, T, opts), N_list)
    errs = [final_time_errors(case, u, T) for u in finals]
    e1 = [e[0] for e in errs]
    e2 = [e[1] for e in errs]
    taus = [T / N for N in N_list]
    meta = {"case": case.name, "m": m, "T": T, "N_list": N_list}

    # errors independent of N carry no temporal component: nothing to fit
    degenerate = max(e1) <= DEGENERATE_ERROR or (max(e1) - min(e1)) <= DEGENERATE_SPREAD * max(e1)
    if check_spatial and not degenerate:
        # one extra spatial refinement at the coarsest step size
        u_fine = _solve(case, 2 * m, N_list[0], T, opts)
        e_fine = final_time_errors(case, u_fine, T)[0]
        spatial = abs(e1[0] - e_fine)
        meta["spatial_error_estimate"] = spatial
        if spatial > 0.1 * e1[0]:
            raise StudyPreconditionError(
                f"spatial error estimate {spatial:.3e} exceeds 10% of the coarsest temporal error {e1[0]:.3e}; refine m"
            )

    monotone = all(b < a for a, b in zip(e1, e1[1:]))
    if degenerate:
        return ConvergenceReport("temporal", "tau", taus, e1, e2, None, None, True, monotone, meta)
    return ConvergenceReport("temporal", "tau", taus, e1, e2, fitted_order(taus, e1), fitted_order(taus, e2),
                             False, monotone, meta)


def spatial_refinement_study(case: ManufacturedCase, N: int, m_list, T: float = 1.0,
                             opts: SolverOptions | None = None) -> ConvergenceReport:
    """Exploratory errors under mesh refinement at a fixed fine time step (report only)."""
    m_list = list(m_list)
    if len(m_list) < 3 or any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise StudyPreconditionError("m_list must be strictly increasing with at least 3 entries")
    opts = opts or SolverOptions()
    finals = _pmap(lambda m: _solve(case, m, N, T, opts), m_list)
    errs = [final_time_errors(case, u, T) for u in finals]
    e1 = [e[0] for e in errs]
    e2 = [e[1] for e in errs]
    hs = [u.space.mesh.h_max for u in finals]
    meta = {"case": case.name, "N": N, "T": T, "m_list": m_list}
    degenerate = max(e1) <= DEGENERATE_ERROR
    monotone = all(b < a for a, b in zip(e1, e1[1:]))
    if degenerate:
        return ConvergenceReport("spatial", "h", hs, e1, e2, None, None, True, monotone, meta)
    return ConvergenceReport("spatial", "h", hs, e1, e2, fitted_order(hs, e1), fitted_order(hs, e2),
                             False, monotone, meta)


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_oracle(spec, space: FemSpace, u_prev: FemFunction, tau: float, t_n: float,
                       grid_resolution: int = 11, tol: float = 1e-13, max_sweeps: int = 2000) -> FemFunction:
    """Solve a tiny step system without Newton.

    A dense coefficient grid picks the start with the smallest residual; then
    nonlinear Gauss-Seidel sweeps solve each residual component for its own
    coefficient by bisection (each component is increasing in its own
    coefficient for monotone models).
    """
    n = space.n_dofs
    if n > 3:
        raise ValueError("brute-force oracle handles at most 3 unknowns")

    def residual(c):
        return assemble_residual(spec, space, FemFunction(space, np.asarray(c, float)), u_prev, tau, t_n)

    scale = 1.0 + float(np.max(np.abs(u_prev.coefficients), initial=0.0))
    axis = np.linspace(-2.0 * scale, 2.0 * scale, grid_resolution)
    best, best_norm = None, np.inf
    for point in itertools.product(axis, repeat=n):
        r = np.linalg.norm(residual(point))
        if r < best_norm:
            best, best_norm = np.array(point), r
    c = best.copy()

    def solve_component(i, c):
        def g(v):
            trial = c.copy()
            trial[i] = v
            return residual(trial)[i]

        lo, hi = c[i] - 1.0, c[i] + 1.0
        glo, ghi = g(lo), g(hi)
        expand = 0
        while glo > 0 or ghi < 0:
            if expand > 60:
                raise OracleFailureError(f"no sign change for component {i}")
            width = hi - lo
            if glo > 0:
                lo -= width
                glo = g(lo)
            if ghi < 0:
                hi += width
                ghi = g(hi)
            expand += 1
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            gm = g(mid)
            if gm == 0.0:
                return mid
            if gm < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    for _ in range(max_sweeps):
        old = c.copy()
        for i in range(n):
            c[i] = solve_component(i, c)
        if np.max(np.abs(c - old)) <= tol * max(1.0, np.max(np.abs(c))):
            return FemFunction(space, c)
    raise OracleFailureError("coordinate sweeps did not settle")


def random_tiny_instance(rng, model_names):
    """A random 1-3 unknown step problem drawn from the shipped models."""
    from .library import shipped_problem

    name = model_names[int(rng.integers(len(model_names)))]
    dim = 1
    m = int(rng.integers(2, 5))  # 1..3 interior vertices
    spec = shipped_problem(name, dim=dim)
    space = FemSpace(build_mesh(dim, m))
    u_prev = FemFunction(space, rng.uniform(-2.0, 2.0, size=space.n_dofs))
    tau = float(rng.uniform(0.01, 0.5))
    t_n = float(rng.uniform(0.0, 1.0))
    return name, spec, space, u_prev, tau, t_n
