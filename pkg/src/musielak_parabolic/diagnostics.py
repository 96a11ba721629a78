"""Post-processing of discrete trajectories: the energy ledger of the a priori
estimate, time interpolants, the centred Steklov average and a Poincare probe.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ProbeFailureError, StructureViolationError
from .musielak import modular


@dataclass
class LedgerRow:
    n: int
    t_n: float
    b_norm_sq: float
    jump_sq: float
    modular: float
    data_term: float
    lhs_cum: float
    rhs_cum: float
    verdict: bool


@dataclass
class EnergyLedger:
    rows: list
    eps: float
    margin: float
    f_norm_l1l2: float
    b0_norm_sq: float
    c4_measured: float
    c4_bound: float
    increment_check: bool
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(r.verdict for r in self.rows) and self.increment_check

    COLUMNS = ("n", "t_n", "b_norm_sq", "jump_sq", "modular", "data_term", "lhs_cum", "rhs_cum", "verdict")

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for r in self.rows:
            lines.append(
                ",".join(
                    [str(r.n)]
                    + [repr(float(v)) for v in (r.t_n, r.b_norm_sq, r.jump_sq, r.modular, r.data_term, r.lhs_cum, r.rhs_cum)]
                    + ["pass" if r.verdict else "fail"]
                )
            )
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "eps": self.eps,
            "margin": self.margin,
            "f_norm_l1l2": self.f_norm_l1l2,
            "b0_norm_sq": self.b0_norm_sq,
            "c4_measured": self.c4_measured,
            "c4_bound": self.c4_bound,
            "increment_check": self.increment_check,
            "max_lhs_over_rhs": max((r.lhs_cum / r.rhs_cum for r in self.rows if r.rhs_cum > 0), default=0.0),
        }


def energy_audit(traj, spec, eps: float = 0.5, quad=None) -> EnergyLedger:
    """Check the explicit energy inequality step by step.

    For every n::

        |b(u^n)|^2 + sum_j |b(u^j) - b(u^{j-1})|^2 + 2 tau (nu b0 - 2 b1 nu0) sum_j rho(grad u^j)
            <= |f|^2_{L1(L2)} / eps^2 + eps^2 max_j |b(u^j)|^2 + |b(u^0)|^2

    with L2(Omega) norms, rho the modular and the time norm of f taken by the
    right-endpoint rule.  Also measures the increment bound
    ``b0 sum |u^j - u^{j-1}| <= sum |b(u^j) - b(u^{j-1})|``.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    c = spec.constants
    if not c.margin > 0:
        raise StructureViolationError(
            f"energy margin nu*b0 - 2*b1*nu0 = {c.margin:.6g} is not positive (needs nu > 4 nu0)"
        )
    space = traj.space if quad is None else traj.space.with_quadrature(quad)
    tau = traj.grid.tau
    nodes = traj.grid.nodes

    uq = [space.values_at_quadrature(u.coefficients) for u in traj.states]
    bq = [spec.b(v) for v in uq]
    b_norm_sq = [space.integrate(v * v) for v in bq]
    f_norms = []
    rows = []
    mods, jumps, data_terms, inc = [], [], [], []
    for n in range(1, len(traj.states)):
        jump = bq[n] - bq[n - 1]
        jumps.append(space.integrate(jump * jump))
        mods.append(modular(spec.phi, traj.states[n].gradient_sampled(quad)))
        fq = spec.f(space.xq, nodes[n])
        f_norms.append(np.sqrt(space.integrate(fq * fq)))
        data_terms.append(space.integrate(np.abs(fq) * np.abs(bq[n])))
        inc.append(space.l2_norm(uq[n] - uq[n - 1]))

    f_norm = tau * float(np.sum(f_norms))
    b_max_sq = max(b_norm_sq[1:], default=0.0)
    rhs = f_norm**2 / eps**2 + eps**2 * b_max_sq + b_norm_sq[0]
    jump_cum = np.cumsum(jumps)
    mod_cum = np.cumsum(mods)
    for k, n in enumerate(range(1, len(traj.states))):
        lhs = b_norm_sq[n] + jump_cum[k] + 2.0 * tau * c.margin * mod_cum[k]
        rows.append(
            LedgerRow(n, float(nodes[n]), b_norm_sq[n], jumps[k], mods[k], data_terms[k], float(lhs), float(rhs),
                      bool(lhs <= rhs * (1.0 + 1e-12)))
        )
    c4 = float(np.sum(inc))
    c4_bound = float(np.sum(np.sqrt(jumps))) / c.b0
    return EnergyLedger(rows, eps, c.margin, f_norm, b_norm_sq[0], c4, c4_bound,
                        bool(c4 <= c4_bound * (1.0 + 1e-10) + 1e-300))


# ---------------------------------------------------------------------------
# time interpolants


@dataclass(frozen=True)
class PiecewiseLinearInTime:
    """Knot values ``values[n]`` (any array shape) at increasing times ``knots``."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t: float):
        t0, t1 = self.knots[0], self.knots[-1]
        if t < t0 - 1e-14 or t > t1 + 1e-14:
            raise ValueError(f"t={t} outside [{t0}, {t1}]")
        n = int(np.clip(np.searchsorted(self.knots, t, side="right"), 1, len(self.knots) - 1))
        ta, tb = self.knots[n - 1], self.knots[n]
        s = (t - ta) / (tb - ta)
        return (1.0 - s) * self.values[n - 1] + s * self.values[n]


@dataclass(frozen=True)
class Interpolants:
    """``hat_u`` interpolates b(u^n) linearly in time; ``bar_u`` and ``bar_f`` are
    piecewise constant, equal to the right-endpoint value on (t_{n-1}, t_n]."""

    traj: object
    spec: object
    hat_u: PiecewiseLinearInTime

    def _index(self, t):
        nodes = self.traj.grid.nodes
        if t < -1e-14 or t > nodes[-1] + 1e-14:
            raise ValueError(f"t={t} outside [0, {nodes[-1]}]")
        # right-continuous convention; t = 0 uses the first step
        return int(np.clip(np.searchsorted(nodes, t - 1e-14 * max(1.0, nodes[-1]), side="left"), 1, len(nodes) - 1))

    def bar_u(self, t):
        return self.traj.states[self._index(t)]

    def bar_f(self, t):
        n = self._index(t)
        space = self.traj.space
        return self.spec.f(space.xq, self.traj.grid.nodes[n])

    def mismatch_sq(self, time_points: int = 3) -> float:
        """``||b(bar_u) - hat_u||^2`` over space-time by Gauss quadrature in t."""
        space = self.traj.space
        nodes = self.traj.grid.nodes
        z, w = np.polynomial.legendre.leggauss(time_points)
        total = 0.0
        for n in range(1, len(nodes)):
            ta, tb = nodes[n - 1], nodes[n]
            bu = self.spec.b(self.bar_u(tb).at_quadrature())
            for zi, wi in zip(z, w):
                t = ta + 0.5 * (zi + 1.0) * (tb - ta)
                d = bu - self.hat_u(t)
                total += 0.5 * (tb - ta) * wi * space.integrate(d * d)
        return total

    def jump_identity(self) -> float:
        """``(tau / 3) sum_n ||b(u^n) - b(u^{n-1})||^2``."""
        vals = self.hat_u.values
        space = self.traj.space
        tau = self.traj.grid.tau
        return tau / 3.0 * sum(space.integrate((vals[n] - vals[n - 1]) ** 2) for n in range(1, len(vals)))


def build_interpolants(traj, spec) -> Interpolants:
    space = traj.space
    knots = traj.grid.nodes
    values = np.stack([spec.b(space.values_at_quadrature(u.coefficients)) for u in traj.states])
    return Interpolants(traj, spec, PiecewiseLinearInTime(knots, values))


def steklov_average(w: PiecewiseLinearInTime, h: float, t: float):
    """``(1 / 2h) int_{t-h}^{t+h} w(s) ds`` with ``w`` extended by zero outside its knots.

    Exact for the piecewise-linear input: trapezoid rule between consecutive
    breakpoints of the window.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    t0, t1 = w.knots[0], w.knots[-1]
    a, b = max(t - h, t0), min(t + h, t1)
    if b <= a:
        return np.zeros_like(w.values[0])
    inner = w.knots[(w.knots > a) & (w.knots < b)]
    pts = np.concatenate([[a], inner, [b]])
    total = np.zeros_like(w.values[0], dtype=float)
    for lo, hi in zip(pts[:-1], pts[1:]):
        total = total + 0.5 * (hi - lo) * (w(lo) + w(hi))
    return total / (2.0 * h)


# ---------------------------------------------------------------------------
# Poincare probe


@dataclass(frozen=True)
class PoincareResult:
    lam: float
    modular_u: float
    modular_grad: float


def poincare_probe(phi, u, lambda_grid=None, quad=None) -> PoincareResult:
    """Smallest sampled lam with ``rho(|u|) <= rho(lam |grad u|)``; empirical, not a proof."""
    grad = u.gradient_sampled(quad)
    if not np.any(grad.magnitude() > 0.0):
        raise ValueError("Poincare probe needs a field with nonzero gradient")
    if lambda_grid is None:
        lambda_grid = 2.0 ** np.arange(-20, 21)
    rho_u = modular(phi, u.sampled(quad))
    for lam in np.sort(np.asarray(lambda_grid, dtype=float)):
        rho_g = modular(phi, grad.scaled(lam))
        if rho_u <= rho_g:
            return PoincareResult(float(lam), rho_u, rho_g)
    raise ProbeFailureError(f"no lambda up to {float(np.max(lambda_grid)):g} satisfies the modular Poincare inequality")
