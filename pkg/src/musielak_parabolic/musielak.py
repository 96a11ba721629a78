"""Musielak functions phi(x, t): modulars, Luxemburg norms, Young conjugates.

Every routine is vectorised over sample arrays.  Points ``x`` carry the
spatial dimension in their last axis; ``t`` (or ``s``) broadcasts against
``x[..., 0]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConjugateInfiniteError, DivergentModularError, UnboundedNormError

MAX_CONJUGATE_DOUBLINGS = 40
MAX_NORM_DOUBLINGS = 200


@dataclass(frozen=True)
class MusielakFunction:
    """A generalised N-function ``phi(x, t)`` with its t-derivative."""

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    deriv_t: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x, t):
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(t, dtype=float))

    def derivative(self, x, t):
        if self.deriv_t is None:
            raise AttributeError(f"{self.kind} Musielak function has no t-derivative")
        return self.deriv_t(np.asarray(x, dtype=float), np.asarray(t, dtype=float))

    def exponent(self, x):
        """Pointwise exponent for the power kinds."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            return np.full(x.shape[:-1], float(self.params["exponent"]))
        if self.kind == "variable-power":
            return _affine_exponent(self.params["coefficients"], x)
        raise AttributeError("only power kinds carry an exponent")

    def conjugate(self) -> "MusielakFunction":
        """The Young conjugate as a new (numerically evaluated) Musielak function."""
        parent = self

        def evaluate(x, s):
            return conjugate(parent, x, s)

        def deriv(x, s):
            return conjugate_argmax(parent, x, s)

        return MusielakFunction(evaluate, deriv, kind="custom", params={"conjugate_of": self.kind})


def _affine_exponent(coefficients, x):
    coefficients = list(coefficients)
    p = np.full(x.shape[:-1], float(coefficients[0]))
    for k, c in enumerate(coefficients[1:]):
        if c != 0.0:
            p = p + c * x[..., k]
    return p


def power(exponent: float, scale: float = 1.0) -> MusielakFunction:
    """``phi(t) = scale * t**exponent``."""
    p = float(exponent)
    c = float(scale)
    if p < 1.0 or c <= 0.0:
        raise ValueError("power Musielak function needs exponent >= 1 and scale > 0")

    def evaluate(x, t):
        return c * np.abs(t) ** p

    def deriv(x, t):
        return c * p * np.abs(t) ** (p - 1.0)

    return MusielakFunction(evaluate, deriv, kind="power", params={"exponent": p, "scale": c})


def variable_power(coefficients, scale: float = 1.0) -> MusielakFunction:
    """``phi(x, t) = scale * t**p(x)`` with affine ``p(x) = p0 + p1*x1 (+ p2*x2)``."""
    coefficients = tuple(float(c) for c in coefficients)
    c = float(scale)

    def evaluate(x, t):
        p = _affine_exponent(coefficients, x)
        return c * np.abs(t) ** p

    def deriv(x, t):
        p = _affine_exponent(coefficients, x)
        return c * p * np.abs(t) ** (p - 1.0)

    return MusielakFunction(
        evaluate, deriv, kind="variable-power", params={"coefficients": coefficients, "scale": c}
    )


def from_config(cfg: dict) -> MusielakFunction:
    kind = cfg.get("kind")
    params = cfg.get("params", cfg)
    if kind == "power":
        return power(params["exponent"], params.get("scale", 1.0))
    if kind == "variable-power":
        return variable_power(params["exponent_expr"], params.get("scale", 1.0))
    raise ValueError(f"unknown Musielak function kind {kind!r}")


def exponent_bounds(phi: MusielakFunction, points) -> tuple[float, float]:
    """Sampled (p-, p+) for power kinds; checks 1 < p- <= p+ < inf."""
    p = phi.exponent(np.asarray(points, dtype=float))
    lo, hi = float(p.min()), float(p.max())
    if not (1.0 < lo <= hi < np.inf):
        raise ValueError(f"exponent range [{lo}, {hi}] violates 1 < p- <= p+ < inf")
    return lo, hi


def log_holder_probe(phi: MusielakFunction, points) -> float:
    """Sampled constant C in |p(x) - p(y)| * log(1/|x - y|) <= C over close pairs."""
    points = np.asarray(points, dtype=float)
    p = phi.exponent(points)
    diff = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    close = (diff > 0.0) & (diff < 0.5)
    if not close.any():
        return 0.0
    dp = np.abs(p[:, None] - p[None, :])
    return float(np.max(dp[close] * np.log(1.0 / diff[close])))


# ---------------------------------------------------------------------------
# sampled fields


@dataclass(frozen=True)
class SampledField:
    """Quadrature samples of a scalar (or vector) field.

    ``values`` is ``(n,)`` for scalars or ``(n, d)`` for vectors; the modular
    uses the Euclidean magnitude.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    cells: np.ndarray

    def magnitude(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            return np.linalg.norm(v, axis=-1)
        return np.abs(v)

    def scaled(self, c: float) -> "SampledField":
        return SampledField(self.points, c * self.values, self.weights, self.cells)


def _as_samples(u, quad=None) -> SampledField:
    if isinstance(u, SampledField):
        return u
    return u.sampled(quad)


def _modular_of_magnitude(phi, points, mag, weights, cells):
    with np.errstate(over="ignore", invalid="ignore"):
        vals = phi(points, mag)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise DivergentModularError(int(cells[np.argmax(bad)]))
    return float(np.dot(weights, vals))


def modular(phi: MusielakFunction, u, quad=None) -> float:
    """``int phi(x, |u(x)|) dx`` by quadrature over the cells carrying ``u``."""
    s = _as_samples(u, quad)
    return _modular_of_magnitude(phi, s.points, s.magnitude(), s.weights, s.cells)


def luxemburg_norm(phi: MusielakFunction, u, tol: float = 1e-10, quad=None) -> float:
    """``inf{lam > 0 : modular(u / lam) <= 1}`` by bracketing and bisection."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = _as_samples(u, quad)
    mag = s.magnitude()
    if not np.any(mag > 0.0):
        return 0.0

    def rho(lam):
        return _modular_of_magnitude(phi, s.points, mag / lam, s.weights, s.cells)

    hi = float(mag.max())
    count = 0
    while rho(hi) > 1.0:
        hi *= 2.0
        count += 1
        if count > MAX_NORM_DOUBLINGS:
            raise UnboundedNormError("Luxemburg bracket exceeded 200 doublings")
    lo = hi
    count = 0
    while rho(lo) <= 1.0:
        lo *= 0.5
        count += 1
        if count > MAX_NORM_DOUBLINGS:
            # modular stays below one at every scale; the norm is numerically zero
            return lo
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Young conjugate


def _broadcast_point_scalar(x, s):
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    shape = np.broadcast_shapes(x.shape[:-1], s.shape)
    x = np.broadcast_to(x, shape + x.shape[-1:])
    s = np.broadcast_to(s, shape)
    return x, s


def _conjugate_core(phi: MusielakFunction, x, s):
    x, s = _broadcast_point_scalar(x, s)
    if np.any(s < 0):
        raise ValueError("Young conjugate needs s >= 0")

    def objective(t):
        with np.errstate(over="ignore", invalid="ignore"):
            val = s * t - phi(x, t)
        return np.where(np.isnan(val), -np.inf, val)

    # expand the bracket while the concave objective still increases
    upper = np.ones(s.shape)
    growing = objective(2.0 * upper) > objective(upper)
    doublings = 0
    while growing.any():
        if doublings >= MAX_CONJUGATE_DOUBLINGS:
            raise ConjugateInfiniteError(
                "sup_t (s t - phi(x, t)) unbounded up to t = 2^40; phi is not superlinear"
            )
        upper = np.where(growing, 2.0 * upper, upper)
        growing = growing & (objective(2.0 * upper) > objective(upper))
        doublings += 1
    upper = 2.0 * upper

    lo = np.zeros(s.shape)
    hi = upper.copy()
    # with a derivative available the ternary pass only seeds the refinement
    sweeps = 100 if phi.deriv_t is None else 30
    for _ in range(sweeps):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        left = objective(m1) < objective(m2)
        lo = np.where(left, m1, lo)
        hi = np.where(left, hi, m2)
    t_star = 0.5 * (lo + hi)

    if phi.deriv_t is not None:
        # refine on the stationarity condition phi'(x, t) = s
        a = np.zeros(s.shape)
        b = upper.copy()
        at_zero = phi.derivative(x, a) >= s
        for _ in range(90):
            mid = 0.5 * (a + b)
            with np.errstate(over="ignore", invalid="ignore"):
                g = phi.derivative(x, mid) - s
            below = g < 0
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        t_root = np.where(at_zero, 0.0, 0.5 * (a + b))
        better = objective(t_root) >= objective(t_star)
        t_star = np.where(better, t_root, t_star)

    best = objective(t_star)
    # t = 0 is always admissible with objective 0
    t_star = np.where(best >= 0.0, t_star, 0.0)
    return np.maximum(best, 0.0), t_star


def conjugate(phi: MusielakFunction, x, s):
    """Vectorised ``sup_{t >= 0} (s t - phi(x, t))``."""
    return _conjugate_core(phi, x, s)[0]


def conjugate_argmax(phi: MusielakFunction, x, s):
    """Maximiser t* of ``s t - phi(x, t)``; the derivative of the conjugate at s."""
    return _conjugate_core(phi, x, s)[1]


def young_conjugate(phi: MusielakFunction, x, s: float) -> float:
    return float(conjugate(phi, np.atleast_1d(np.asarray(x, dtype=float)), float(s)).reshape(-1)[0])


def conjugate_inverse(phi: MusielakFunction, x, y, iterations: int = 70):
    """Solve ``conj(phi)(x, s) = y`` for s >= 0 by bisection (the conjugate is non-decreasing)."""
    x, y = _broadcast_point_scalar(x, y)
    if np.any(y < 0):
        raise ValueError("conjugate inverse needs y >= 0")
    hi = np.ones(y.shape)
    short = conjugate(phi, x, hi) < y
    count = 0
    while short.any():
        if count > MAX_NORM_DOUBLINGS:
            raise UnboundedNormError("conjugate inverse bracket exceeded 200 doublings")
        hi = np.where(short, 2.0 * hi, hi)
        short = short & (conjugate(phi, x, hi) < y)
        count += 1
    lo = np.zeros(y.shape)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = conjugate(phi, x, mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(y > 0.0, 0.5 * (lo + hi), 0.0)


def young_inequality_check(phi: MusielakFunction, x, s, t):
    """Residual ``phi(x, s) + conj(phi)(x, t) - s t``; non-negative by Young's inequality."""
    x, s = _broadcast_point_scalar(x, s)
    t = np.broadcast_to(np.asarray(t, dtype=float), s.shape)
    return phi(x, s) + conjugate(phi, x, t) - s * t


def orlicz_dual_bound(phi: MusielakFunction, v, tol: float = 1e-10, quad=None) -> float:
    """Twice the Luxemburg norm of ``v`` under the conjugate function.

    Bounds the Orlicz (dual) norm, so ``|int u v| <= ||u||_phi * orlicz_dual_bound(v)``.
    """
    return 2.0 * luxemburg_norm(phi.conjugate(), v, tol=tol, quad=quad)


# ---------------------------------------------------------------------------
# Delta_2 heuristic


@dataclass(frozen=True)
class Delta2Report:
    satisfied: bool
    C_estimate: float
    t_grid: np.ndarray
    ratios: np.ndarray


def delta2_probe(phi: MusielakFunction, t_grid=None, x_samples=None) -> Delta2Report:
    """Sampled doubling check ``phi(x, 2t) <= C phi(x, t) + 1``.

    A heuristic: the ratio must not keep growing between the second-highest
    and the highest decade of the grid.  The estimate is relative to h = 1.
    """
    if t_grid is None:
        t_grid = 2.0 ** np.arange(-10, 21)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if t_grid[-1] < 2.0**10:
        raise ValueError("t grid must reach at least 2^10")
    if x_samples is None:
        x_samples = np.array([[0.5]])
    x_samples = np.atleast_2d(np.asarray(x_samples, dtype=float))
    xx = x_samples[:, None, :]
    tt = t_grid[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = phi(xx, 2.0 * tt) / (phi(xx, tt) + 1.0)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    worst = ratio.max(axis=0)
    t_max = t_grid[-1]
    upper = worst[t_grid >= t_max / 10.0]
    lower = worst[(t_grid >= t_max / 100.0) & (t_grid < t_max / 10.0)]
    finite = bool(np.all(np.isfinite(worst)))
    if finite and lower.size and upper.size:
        satisfied = bool(upper.max() <= lower.max() * (1.0 + 1e-3) + 1e-12)
    else:
        satisfied = False
    c_est = float(worst.max()) if finite else float("inf")
    return Delta2Report(satisfied, c_est, t_grid, worst)
