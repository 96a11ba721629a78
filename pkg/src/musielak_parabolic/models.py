"""Model components selectable by ``kind``: the accumulation function b,
the stress a(x, xi), the convection K(s) and closed-form data maps.

Each component exposes numpy callables for assembly and a sympy form used
to derive manufactured source terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy

from .errors import ConfigError

JACOBIAN_EPS = 1e-10


def _params(cfg):
    if "params" in cfg:
        return dict(cfg["params"] or {})
    return {k: v for k, v in cfg.items() if k != "kind"}


# ---------------------------------------------------------------------------
# b(s)


@dataclass(frozen=True)
class Accumulation:
    kind: str
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "linear":
            return p["slope"] * s
        if self.kind == "linear-sine":
            return p["slope"] * s + p["amplitude"] * np.sin(s)
        if self.kind == "quadratic":
            return p["coef"] * s * s
        raise ConfigError(f"unknown b kind {self.kind!r}")

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "linear":
            return np.full_like(s, p["slope"])
        if self.kind == "linear-sine":
            return p["slope"] + p["amplitude"] * np.cos(s)
        if self.kind == "quadratic":
            return 2.0 * p["coef"] * s
        raise ConfigError(f"unknown b kind {self.kind!r}")

    def symbolic(self, s):
        p = self.params
        if self.kind == "linear":
            return sympy.Float(p["slope"]) * s
        if self.kind == "linear-sine":
            return sympy.Float(p["slope"]) * s + sympy.Float(p["amplitude"]) * sympy.sin(s)
        if self.kind == "quadratic":
            return sympy.Float(p["coef"]) * s**2
        raise ConfigError(f"unknown b kind {self.kind!r}")


def accumulation_from_config(cfg) -> Accumulation:
    kind = cfg.get("kind")
    p = _params(cfg)
    defaults = {"linear": {"slope": 1.0}, "linear-sine": {"slope": 1.5, "amplitude": 0.2}, "quadratic": {"coef": 1.0}}
    if kind not in defaults:
        raise ConfigError(f"unknown b kind {kind!r}")
    return Accumulation(kind, {**defaults[kind], **{k: float(v) for k, v in p.items()}})


# ---------------------------------------------------------------------------
# a(x, xi)


def _affine(coefficients, x):
    p = np.full(x.shape[:-1], float(coefficients[0]))
    for k, c in enumerate(coefficients[1:]):
        if c != 0.0:
            p = p + c * x[..., k]
    return p


@dataclass(frozen=True)
class Stress:
    """Isotropic stress ``a(x, xi) = kappa(x, |xi|) xi``."""

    kind: str
    params: dict = field(default_factory=dict)

    def exponent(self, x):
        return _affine(self.params["exponent_expr"], np.asarray(x, dtype=float))

    def __call__(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "linear":
            return self.params["coef"] * xi
        if self.kind == "p-laplacian":
            p = self.exponent(x)
            r = np.linalg.norm(xi, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                k = np.where(r > 0.0, r ** (p - 2.0), 0.0)
            return self.params["coef"] * k[..., None] * xi
        raise ConfigError(f"unknown stress kind {self.kind!r}")

    def jacobian(self, x, xi, eps: float = JACOBIAN_EPS):
        """d a / d xi with |xi| replaced by sqrt(|xi|^2 + eps^2) for the power law."""
        xi = np.asarray(xi, dtype=float)
        d = xi.shape[-1]
        eye = np.broadcast_to(np.eye(d), xi.shape[:-1] + (d, d))
        if self.kind == "linear":
            return self.params["coef"] * eye
        if self.kind == "p-laplacian":
            p = self.exponent(x)
            r2 = np.sum(xi * xi, axis=-1) + eps * eps
            k = r2 ** ((p - 2.0) / 2.0)
            outer = xi[..., :, None] * xi[..., None, :]
            D = k[..., None, None] * (eye + ((p - 2.0) / r2)[..., None, None] * outer)
            return self.params["coef"] * D
        raise ConfigError(f"unknown stress kind {self.kind!r}")

    def secant(self, x, xi, eps: float = JACOBIAN_EPS):
        """Frozen coefficient kappa used by the Picard linearisation."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "linear":
            return np.full(xi.shape[:-1], float(self.params["coef"]))
        if self.kind == "p-laplacian":
            p = self.exponent(x)
            r2 = np.sum(xi * xi, axis=-1) + eps * eps
            return self.params["coef"] * r2 ** ((p - 2.0) / 2.0)
        raise ConfigError(f"unknown stress kind {self.kind!r}")

    def symbolic(self, xs, grad):
        c = sympy.Float(self.params["coef"])
        if self.kind == "linear":
            return [c * g for g in grad]
        if self.kind == "p-laplacian":
            coeffs = self.params["exponent_expr"]
            p = sympy.Float(coeffs[0]) + sum(
                (sympy.Float(ci) * xk for ci, xk in zip(coeffs[1:], xs)), sympy.Integer(0)
            )
            r = sympy.sqrt(sum(g**2 for g in grad))
            return [c * r ** (p - 2) * g for g in grad]
        raise ConfigError(f"unknown stress kind {self.kind!r}")


def stress_from_config(cfg) -> Stress:
    kind = cfg.get("kind")
    p = _params(cfg)
    if kind == "linear":
        return Stress("linear", {"coef": float(p.get("coef", 1.0))})
    if kind == "p-laplacian":
        expr = p.get("exponent_expr", [2.0])
        return Stress("p-laplacian", {"coef": float(p.get("coef", 1.0)), "exponent_expr": tuple(float(c) for c in expr)})
    raise ConfigError(f"unknown stress kind {kind!r}")


# ---------------------------------------------------------------------------
# K(s)


@dataclass(frozen=True)
class Convection:
    """``K(s) = g(s) e`` for a fixed direction ``e``."""

    kind: str
    direction: tuple
    params: dict = field(default_factory=dict)

    def _profile(self, s):
        c = self.params.get("c", 0.0)
        if self.kind == "zero":
            return np.zeros_like(s), np.zeros_like(s)
        if self.kind == "linear":
            return c * s, np.full_like(s, c)
        if self.kind == "sine":
            return c * np.sin(s), c * np.cos(s)
        if self.kind == "quadratic":
            return c * s * s, 2.0 * c * s
        raise ConfigError(f"unknown convection kind {self.kind!r}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        g, _ = self._profile(s)
        return g[..., None] * np.asarray(self.direction)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        _, dg = self._profile(s)
        return dg[..., None] * np.asarray(self.direction)

    def symbolic(self, s):
        c = sympy.Float(self.params.get("c", 0.0))
        g = {
            "zero": sympy.Integer(0),
            "linear": c * s,
            "sine": c * sympy.sin(s),
            "quadratic": c * s**2,
        }[self.kind]
        return [sympy.Float(e) * g for e in self.direction]


def convection_from_config(cfg, dim: int) -> Convection:
    kind = cfg.get("kind", "zero")
    p = _params(cfg)
    direction = list(p.pop("direction", [1.0] + [0.0] * (dim - 1)))
    direction = (direction + [0.0] * dim)[:dim]
    if kind not in ("zero", "linear", "sine", "quadratic"):
        raise ConfigError(f"unknown convection kind {kind!r}")
    return Convection(kind, tuple(float(e) for e in direction), {k: float(v) for k, v in p.items()})


# ---------------------------------------------------------------------------
# data maps f(x, t) and u0(x)


@dataclass(frozen=True)
class Expression:
    """Closed-form map ``(x, t) -> value``; ``x`` has the dimension in its last axis."""

    kind: str
    func: object
    params: dict = field(default_factory=dict)
    symbolic: object = None

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x, t), dtype=float), x.shape[:-1]).copy()


def _symbols(dim):
    xs = tuple(sympy.symbols(f"x0:{dim}", real=True))
    return xs, sympy.Symbol("t", real=True)


def _lambdify(expr, dim):
    xs, t = _symbols(dim)
    f = sympy.lambdify(list(xs) + [t], expr, "numpy")

    def func(x, tt):
        return f(*[x[..., k] for k in range(dim)], tt)

    return func


def parse_expression(text: str, dim: int):
    xs, t = _symbols(dim)
    local = {f"x{k}": xs[k] for k in range(dim)}
    local["t"] = t
    local["pi"] = sympy.pi
    if dim >= 1:
        local.setdefault("x", xs[0])
    if dim >= 2:
        local.setdefault("y", xs[1])
    try:
        return sympy.sympify(text, locals=local)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from exc


def _product_expr(dim, factor):
    xs, _ = _symbols(dim)
    out = sympy.Integer(1)
    for xk in xs:
        out = out * factor(xk)
    return out


def expression_from_config(cfg, dim: int) -> Expression:
    kind = cfg.get("kind", "zero")
    p = _params(cfg)
    amp = sympy.Float(p.get("amplitude", 1.0))
    if kind == "zero":
        expr = sympy.Integer(0)
    elif kind == "constant":
        expr = sympy.Float(p.get("value", 0.0))
    elif kind == "sine":
        expr = amp * _product_expr(dim, lambda xk: sympy.sin(sympy.pi * xk))
    elif kind == "bubble":
        expr = amp * _product_expr(dim, lambda xk: xk * (1 - xk))
    elif kind == "hat":
        expr = amp * _product_expr(dim, lambda xk: 1 - sympy.Abs(2 * xk - 1))
    elif kind in ("expr", "manufactured"):
        if "expr" not in p and "exact" not in p:
            raise ConfigError(f"{kind} expression needs an 'expr' or 'exact' string")
        expr = parse_expression(p.get("expr", p.get("exact")), dim)
    else:
        raise ConfigError(f"unknown expression kind {kind!r}")
    return Expression(kind, _lambdify(expr, dim), p, expr)


def manufactured_source(b: Accumulation, a: Stress, K: Convection, exact, dim: int) -> Expression:
    """Source ``f = d/dt b(u) - div(a(x, grad u) + K(u))`` for a closed-form ``u``."""
    xs, t = _symbols(dim)
    grad = [sympy.diff(exact, xk) for xk in xs]
    flux = [fa + fk for fa, fk in zip(a.symbolic(xs, grad), K.symbolic(exact))]
    f = sympy.diff(b.symbolic(exact), t) - sum((sympy.diff(fl, xk) for fl, xk in zip(flux, xs)), sympy.Integer(0))
    return Expression("manufactured-source", _lambdify(f, dim), {"exact": str(exact)}, f)


def exact_solution(exact, dim: int) -> Expression:
    return Expression("exact", _lambdify(exact, dim), {"exact": str(exact)}, exact)
