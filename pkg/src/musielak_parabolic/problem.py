"""PDE instances ``d/dt b(u) - div(a(x, grad u) + K(u)) = f`` and sampled
checks of the structural assumptions on b, a and K.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import models
from .errors import ConfigError, StructureViolationError
from .musielak import MusielakFunction, conjugate_inverse
from .musielak import from_config as phi_from_config

B_TOL = 1e-12
SECANT_TOL = 1e-9
GROWTH_RTOL = 1e-9
COERCIVITY_RTOL = 1e-12


@dataclass(frozen=True)
class Constants:
    b0: float
    nu: float
    nu0: float
    nu1: float
    lam: float

    def __post_init__(self):
        for name in ("b0", "nu", "nu0", "nu1", "lam"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"constant {name} must be positive")

    @property
    def b1(self) -> float:
        return 2.0 * self.b0

    @property
    def margin(self) -> float:
        """``nu*b0 - 2*b1*nu0``; positive exactly when nu > 4 nu0."""
        return self.nu * self.b0 - 2.0 * self.b1 * self.nu0

    def check_structure(self):
        if not self.nu - 4.0 * self.nu0 > 0:
            raise StructureViolationError(
                f"structure condition nu > 4 nu0 violated: nu={self.nu}, nu0={self.nu0} "
                f"(energy margin 2 tau (nu b0 - 2 b1 nu0) = 2 tau * {self.margin:.6g} is not positive)"
            )


@dataclass(frozen=True)
class ProblemSpec:
    """One PDE instance: (b, a, K, f, u0), the Musielak function and the constants."""

    dim: int
    b: models.Accumulation
    a: models.Stress
    K: models.Convection
    f: models.Expression
    u0: models.Expression
    phi: MusielakFunction
    constants: Constants
    exact: Optional[models.Expression] = None
    config: dict = field(default_factory=dict, compare=False, repr=False)

    def u0_map(self, x):
        return self.u0(x, 0.0)


def problem_from_config(cfg: dict, dim: int) -> ProblemSpec:
    try:
        b = models.accumulation_from_config(cfg["b"])
        a = models.stress_from_config(cfg["a"])
        K = models.convection_from_config(cfg.get("K", {"kind": "zero"}), dim)
        phi = phi_from_config(cfg["phi"])
        c = cfg["constants"]
        constants = Constants(
            b0=float(c["b0"]), nu=float(c["nu"]), nu0=float(c["nu0"]),
            nu1=float(c["nu1"]), lam=float(c.get("lambda", c.get("lam", 1.0))),
        )
    except KeyError as exc:
        raise ConfigError(f"problem block is missing {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    exact = None
    f_cfg = cfg.get("f", {"kind": "zero"})
    if f_cfg.get("kind") == "manufactured":
        src = models.expression_from_config(f_cfg, dim)
        exact = models.exact_solution(src.symbolic, dim)
        f = models.manufactured_source(b, a, K, src.symbolic, dim)
    else:
        f = models.expression_from_config(f_cfg, dim)
    u0_cfg = cfg.get("u0", {"kind": "zero"})
    if u0_cfg.get("kind") == "manufactured" and exact is None:
        raise ConfigError("u0 kind 'manufactured' needs a manufactured f")
    if u0_cfg.get("kind") == "manufactured":
        u0 = exact
    else:
        u0 = models.expression_from_config(u0_cfg, dim)
    return ProblemSpec(dim, b, a, K, f, u0, phi, constants, exact, config=cfg)


# ---------------------------------------------------------------------------
# truncation


@dataclass(frozen=True)
class Truncation:
    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("truncation level must be positive")

    def __call__(self, r):
        return np.maximum(-self.k, np.minimum(self.k, r))


def truncate(T: Truncation, r):
    """``T_k(r) = max(-k, min(k, r))``."""
    return T(r)


# ---------------------------------------------------------------------------
# validators


@dataclass
class ValidationReport:
    name: str
    passed: bool
    observed: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def message(self) -> str:
        if self.passed:
            return f"{self.name}: ok"
        # first violation of each distinct assumption
        seen, picked = set(), []
        for v in self.violations:
            key = v.split(" fails", 1)[0]
            if key not in seen:
                seen.add(key)
                picked.append(v)
        return f"{self.name}: " + "; ".join(picked)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "observed": self.observed, "violations": self.violations[:20]}


def _x_samples(dim, n, rng):
    return rng.uniform(0.0, 1.0, size=(n, dim))


def validate_b(spec: ProblemSpec, s_samples=None, *, s_max: float = 100.0, n: int = 1000) -> ValidationReport:
    """Check b(0) = 0 and b0 < b'(s) < 2 b0 on samples, analytically and by secant slopes."""
    if s_samples is None:
        s_samples = np.linspace(-s_max, s_max, n + 1)
    s = np.unique(np.append(np.asarray(s_samples, dtype=float), 0.0))
    b0, b1 = spec.constants.b0, spec.constants.b1
    report = ValidationReport("b growth assumption", True)
    b_at_zero = float(spec.b(0.0))
    if abs(b_at_zero) > B_TOL:
        report.passed = False
        report.violations.append(f"b growth assumption fails: b(0) = {b_at_zero:.3e}, expected 0")
    db = spec.b.deriv(s)
    bad = (db <= b0 - B_TOL) | (db >= b1 + B_TOL)
    # report the failures nearest the origin first
    for si in sorted(s[bad], key=abs)[:5]:
        report.violations.append(
            f"b growth assumption fails at sampled s={si:.6g}: b'(s)={float(spec.b.deriv(si)):.6g} "
            f"not in ({b0:.6g}, {b1:.6g})"
        )
    bs = spec.b(s)
    slopes = np.diff(bs) / np.diff(s)
    slack = SECANT_TOL * max(1.0, b1)
    bad_sec = (slopes <= b0 - slack) | (slopes >= b1 + slack)
    for i in np.flatnonzero(bad_sec)[:5]:
        report.violations.append(
            f"b growth assumption fails on [{s[i]:.6g}, {s[i + 1]:.6g}]: secant slope {slopes[i]:.6g} "
            f"not in ({b0:.6g}, {b1:.6g})"
        )
    report.passed = report.passed and not bad.any() and not bad_sec.any()
    report.observed = {
        "b_at_zero": b_at_zero,
        "min_db": float(min(db.min(), slopes.min())),
        "max_db": float(max(db.max(), slopes.max())),
        "b0": b0,
        "b1": b1,
    }
    return report


def _random_xi(dim, n, radius, rng):
    direction = rng.normal(size=(n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = np.exp(rng.uniform(np.log(1e-3), np.log(radius), size=n))
    return direction * r[:, None]


def validate_stress(
    spec: ProblemSpec, xi_samples=None, x_samples=None, *, n_xi: int = 10_000, n_x: int = 1000,
    radius: float = 1e3, seed: int = 0,
) -> ValidationReport:
    """Sampled growth, strict monotonicity and coercivity of the stress."""
    rng = np.random.default_rng(seed)
    dim = spec.dim
    xi = _random_xi(dim, n_xi, radius, rng) if xi_samples is None else np.atleast_2d(np.asarray(xi_samples, float))
    xs = _x_samples(dim, n_x, rng) if x_samples is None else np.atleast_2d(np.asarray(x_samples, float))
    x = xs[np.arange(len(xi)) % len(xs)]
    xi_star = xi[rng.permutation(len(xi))] if len(xi) > 1 else -xi
    report = ValidationReport("stress assumptions", True)

    a = spec.a(x, xi)
    norm_xi = np.linalg.norm(xi, axis=1)
    phi_xi = spec.phi(x, norm_xi)

    # growth: |a| <= conj^{-1}(phi(x, |xi|))
    bound = conjugate_inverse(spec.phi, x, phi_xi)
    mag_a = np.linalg.norm(a, axis=1)
    growth_bad = mag_a > bound * (1.0 + GROWTH_RTOL)
    for i in np.flatnonzero(growth_bad)[:3]:
        report.violations.append(
            f"stress growth assumption fails at sampled xi={xi[i].tolist()}: |a|={mag_a[i]:.6g} > {bound[i]:.6g}"
        )

    # strict monotonicity
    a_star = spec.a(x, xi_star)
    diff = xi - xi_star
    distinct = np.linalg.norm(diff, axis=1) > 0.0
    mono = np.sum((a - a_star) * diff, axis=1)
    mono_bad = distinct & ~(mono > 0.0)
    for i in np.flatnonzero(mono_bad)[:3]:
        report.violations.append(
            f"stress monotonicity assumption fails at sampled xi={xi[i].tolist()}, xi*={xi_star[i].tolist()}: "
            f"(a(xi)-a(xi*)).(xi-xi*)={mono[i]:.6g}"
        )

    # coercivity
    power = np.sum(a * xi, axis=1)
    nu = spec.constants.nu
    coer_bad = power < nu * phi_xi * (1.0 - COERCIVITY_RTOL)
    for i in np.flatnonzero(coer_bad)[:3]:
        report.violations.append(
            f"coercivity assumption fails at sampled xi={xi[i].tolist()}: a.xi={power[i]:.6g} < nu*phi={nu * phi_xi[i]:.6g}"
        )

    report.passed = not (growth_bad.any() or mono_bad.any() or coer_bad.any())
    pos = phi_xi > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, mag_a / bound, 0.0)
    report.observed = {
        "nu_observed": float(np.min(power[pos] / phi_xi[pos])) if pos.any() else float("nan"),
        "growth_ratio_max": float(ratio.max()),
        "monotonicity_min": float(mono[distinct].min()) if distinct.any() else float("nan"),
        "n_samples": int(len(xi)),
    }
    return report


def validate_convection(
    spec: ProblemSpec, s_samples=None, x_samples=None, *, s_max: float = 100.0, n: int = 1000,
    n_x: int = 1000, seed: int = 0,
) -> ValidationReport:
    """Sampled growth bound ``|K(s)| <= nu0 conj^{-1}(phi(x, s/lam))`` and Lipschitz bound nu1."""
    rng = np.random.default_rng(seed)
    dim = spec.dim
    if s_samples is None:
        s_samples = np.linspace(-s_max, s_max, n + 1)
    s = np.unique(np.asarray(s_samples, dtype=float))
    xs = _x_samples(dim, n_x, rng) if x_samples is None else np.atleast_2d(np.asarray(x_samples, float))
    x = xs[np.arange(len(s)) % len(xs)]
    c = spec.constants
    report = ValidationReport("convection assumptions", True)

    K = spec.K(s)
    mag_K = np.linalg.norm(K, axis=-1)
    bound = conjugate_inverse(spec.phi, x, spec.phi(x, np.abs(s) / c.lam))
    growth_bad = mag_K > c.nu0 * bound * (1.0 + GROWTH_RTOL)
    for i in np.flatnonzero(growth_bad)[:3]:
        report.violations.append(
            f"convection growth assumption fails at sampled s={s[i]:.6g}: |K|={mag_K[i]:.6g} > nu0*bound={c.nu0 * bound[i]:.6g}"
        )

    pairs_i = np.concatenate([np.arange(len(s) - 1), rng.integers(0, len(s), size=len(s))])
    pairs_j = np.concatenate([np.arange(1, len(s)), rng.integers(0, len(s), size=len(s))])
    keep = s[pairs_i] != s[pairs_j]
    pairs_i, pairs_j = pairs_i[keep], pairs_j[keep]
    slope = np.linalg.norm(K[pairs_i] - K[pairs_j], axis=-1) / np.abs(s[pairs_i] - s[pairs_j])
    lip_bad = slope > c.nu1 * (1.0 + GROWTH_RTOL) + 1e-14
    for k in np.flatnonzero(lip_bad)[:3]:
        report.violations.append(
            f"convection Lipschitz assumption fails between s={s[pairs_i[k]]:.6g} and s'={s[pairs_j[k]]:.6g}: "
            f"slope {slope[k]:.6g} > nu1={c.nu1:.6g}"
        )
    report.passed = not (growth_bad.any() or lip_bad.any())
    pos = bound > 0
    report.observed = {
        "nu0_observed": float(np.max(mag_K[pos] / bound[pos])) if pos.any() else 0.0,
        "nu1_observed": float(slope.max()) if slope.size else 0.0,
    }
    return report


def validate_structure(spec: ProblemSpec) -> ValidationReport:
    c = spec.constants
    ok = c.nu - 4.0 * c.nu0 > 0
    report = ValidationReport("structure condition nu > 4 nu0", ok, {"nu": c.nu, "nu0": c.nu0, "margin": c.margin})
    if not ok:
        report.violations.append(f"structure condition nu > 4 nu0 fails: nu={c.nu}, nu0={c.nu0}")
    return report


def validate_all(spec: ProblemSpec, seed: int = 0, sampling: dict | None = None) -> list[ValidationReport]:
    sampling = dict(sampling or {})
    return [
        validate_structure(spec),
        validate_b(spec, s_max=sampling.get("s_max", 100.0), n=sampling.get("s_samples", 1000)),
        validate_stress(
            spec, n_xi=sampling.get("xi_samples", 10_000), n_x=sampling.get("x_samples", 1000),
            radius=sampling.get("xi_radius", 1e3), seed=seed,
        ),
        validate_convection(
            spec, s_max=sampling.get("s_max", 100.0), n=sampling.get("s_samples", 1000),
            n_x=sampling.get("x_samples", 1000), seed=seed,
        ),
    ]
