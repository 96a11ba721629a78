"""P1 Lagrange finite elements on structured simplicial meshes of the unit interval/square.

Homogeneous Dirichlet data: unknowns live on interior vertices only.
Assembly of the implicit-Euler residual and its Jacobian is vectorised over
cells and split into fixed-size cell chunks; chunk results are reduced in
order so output does not depend on the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from math import ceil

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyNaNError, InvalidResolutionError, TraceViolationError
from .musielak import SampledField

CHUNK_CELLS = 4096


def worker_count() -> int:
    env = os.environ.get("MP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points ``(nq, dim+1)``; weights sum to the reference measure."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self):
        return self.points.shape[1] - 1


def _gauss_interval(n):
    z, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (z + 1.0)
    return np.column_stack([1.0 - s, s]), 0.5 * w


# Strang-Fix / Dunavant six point rule, exact for degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322


def _triangle_degree4():
    pts, wts = [], []
    for a, w in ((_A1, _W1), (_A2, _W2)):
        b = 1.0 - 2.0 * a
        for lam in ((a, a, b), (a, b, a), (b, a, a)):
            pts.append(lam)
            wts.append(0.5 * w)
    return np.array(pts), np.array(wts)


def _triangle_collapsed(degree):
    # Duffy-collapsed Gauss product rule
    n = max(1, ceil((degree + 2) / 2))
    z, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (z + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for si, wi in zip(s, w):
        for ti, wj in zip(s, w):
            x = si
            y = ti * (1.0 - si)
            pts.append((1.0 - x - y, x, y))
            wts.append(wi * wj * (1.0 - si))
    return np.array(pts), np.array(wts)


def quadrature_rule(dim: int, degree: int = 4) -> QuadratureRule:
    """Gauss rule on the interval or a symmetric/collapsed rule on the triangle.

    The 1D default (degree 4) is the 4-point Gauss rule.
    """
    if degree < 2:
        raise ValueError("quadrature degree must be at least 2")
    if dim == 1:
        n = 4 if degree == 4 else ceil((degree + 1) / 2)
        pts, wts = _gauss_interval(n)
        return QuadratureRule(pts, wts, 2 * n - 1)
    if dim == 2:
        if degree <= 4:
            pts, wts = _triangle_degree4()
            return QuadratureRule(pts, wts, 4)
        pts, wts = _triangle_collapsed(degree)
        return QuadratureRule(pts, wts, degree)
    raise ValueError("only 1D and 2D are supported")


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    m: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_vertices: np.ndarray

    @cached_property
    def h_max(self) -> float:
        v = self.vertices[self.cells]
        diam = 0.0
        k = self.cells.shape[1]
        for i in range(k):
            for j in range(i + 1, k):
                diam = max(diam, float(np.max(np.linalg.norm(v[:, i] - v[:, j], axis=-1))))
        return diam

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def to_text(self) -> str:
        lines = [f"dim {self.dim}", f"vertices {len(self.vertices)}"]
        for i, v in enumerate(self.vertices):
            lines.append(f"{i} " + " ".join(repr(float(c)) for c in v))
        lines.append(f"cells {len(self.cells)}")
        for i, c in enumerate(self.cells):
            lines.append(f"{i} " + " ".join(str(int(k)) for k in c))
        lines.append("boundary " + " ".join(str(int(k)) for k in self.boundary_vertices))
        return "\n".join(lines) + "\n"


def build_mesh(dim: int, m: int) -> Mesh:
    """Uniform mesh of (0, 1) with m cells, or of the unit square with 2 m^2 triangles.

    The square uses alternating diagonals (union-jack pattern), which stays
    nested when m is doubled.
    """
    if m < 2:
        raise InvalidResolutionError(f"mesh resolution m={m} must be at least 2")
    if dim == 1:
        vertices = np.linspace(0.0, 1.0, m + 1)[:, None]
        cells = np.column_stack([np.arange(m), np.arange(1, m + 1)])
        boundary = np.array([0, m])
    elif dim == 2:
        g = np.linspace(0.0, 1.0, m + 1)
        X, Y = np.meshgrid(g, g, indexing="xy")
        vertices = np.column_stack([X.ravel(), Y.ravel()])

        def vid(i, j):
            return j * (m + 1) + i

        cells = []
        for j in range(m):
            for i in range(m):
                v00, v10, v01, v11 = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
                if (i + j) % 2 == 0:
                    cells.append((v00, v10, v11))
                    cells.append((v00, v11, v01))
                else:
                    cells.append((v00, v10, v01))
                    cells.append((v10, v11, v01))
        cells = np.array(cells)
        on_edge = (
            np.isclose(vertices[:, 0], 0.0)
            | np.isclose(vertices[:, 0], 1.0)
            | np.isclose(vertices[:, 1], 0.0)
            | np.isclose(vertices[:, 1], 1.0)
        )
        boundary = np.flatnonzero(on_edge)
    else:
        raise ValueError("only 1D and 2D meshes are supported")
    return Mesh(dim, m, vertices, cells, boundary)


# ---------------------------------------------------------------------------
# function space


class FemSpace:
    """P1 space on ``mesh`` with zero trace; caches geometry at quadrature points."""

    def __init__(self, mesh: Mesh, quad: QuadratureRule | None = None):
        self.mesh = mesh
        self.dim = mesh.dim
        self.quad = quad if quad is not None else quadrature_rule(mesh.dim)
        nv = len(mesh.vertices)
        self.free = mesh.interior_vertices
        self.dof_of_vertex = np.full(nv, -1, dtype=np.int64)
        self.dof_of_vertex[self.free] = np.arange(len(self.free))
        self.cell_dofs = self.dof_of_vertex[mesh.cells]

        verts = mesh.vertices[mesh.cells]  # (nc, dim+1, dim)
        J = (verts[:, 1:, :] - verts[:, :1, :]).transpose(0, 2, 1)  # (nc, dim, dim)
        det = np.linalg.det(J)
        if np.any(np.abs(det) <= 1e-14):
            raise ValueError("degenerate cell in mesh")
        self.measure = np.abs(det) / (1.0 if self.dim == 1 else 2.0)
        Jinv_T = np.linalg.inv(J).transpose(0, 2, 1)
        ref_grads = np.vstack([-np.ones((1, self.dim)), np.eye(self.dim)])  # (dim+1, dim)
        self.grads = np.einsum("cij,aj->cai", Jinv_T, ref_grads)  # (nc, dim+1, dim)
        self._geometry(self.quad)

    def _geometry(self, quad):
        verts = self.mesh.vertices[self.mesh.cells]
        self.basis = quad.points  # barycentric coordinates equal the P1 basis values
        self.xq = np.einsum("qa,cad->cqd", quad.points, verts)
        ref_measure = 1.0 if self.dim == 1 else 0.5
        self.wq = np.outer(self.measure / ref_measure, quad.weights)

    @property
    def n_dofs(self) -> int:
        return len(self.free)

    @property
    def n_cells(self) -> int:
        return len(self.mesh.cells)

    def with_quadrature(self, quad: QuadratureRule) -> "FemSpace":
        return FemSpace(self.mesh, quad)

    def zero(self) -> "FemFunction":
        return FemFunction(self, np.zeros(self.n_dofs))

    def full(self, coefficients) -> np.ndarray:
        v = np.zeros(len(self.mesh.vertices))
        v[self.free] = coefficients
        return v

    def values_at_quadrature(self, coefficients):
        local = self.full(coefficients)[self.mesh.cells]
        return local @ self.basis.T  # (nc, nq)

    def gradients(self, coefficients):
        local = self.full(coefficients)[self.mesh.cells]
        return np.einsum("ca,cad->cd", local, self.grads)  # (nc, dim)

    def integrate(self, values) -> float:
        return float(np.sum(self.wq * values))

    def l2_norm(self, values) -> float:
        return float(np.sqrt(self.integrate(np.asarray(values) ** 2)))

    def locate(self, points):
        """Cell index and barycentric coordinates of ``points`` in the structured mesh."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.mesh.m
        idx = np.clip(np.floor(points * m).astype(int), 0, m - 1)
        if self.dim == 1:
            cell = idx[:, 0]
        else:
            i, j = idx[:, 0], idx[:, 1]
            base = 2 * (j * m + i)
            # pick the one of the two triangles of the square containing the point
            lam0 = self._barycentric(base, points)
            inside = np.all(lam0 >= -1e-12, axis=1)
            cell = np.where(inside, base, base + 1)
        return cell, self._barycentric(cell, points)

    def _barycentric(self, cell, points):
        verts = self.mesh.vertices[self.mesh.cells[cell]]  # (n, dim+1, dim)
        rhs = points - verts[:, 0, :]
        J = (verts[:, 1:, :] - verts[:, :1, :]).transpose(0, 2, 1)
        lam_tail = np.linalg.solve(J, rhs[..., None])[..., 0]
        return np.column_stack([1.0 - lam_tail.sum(axis=1), lam_tail])


@dataclass(frozen=True, eq=False)
class FemFunction:
    """Coefficients on the interior vertices of ``space``; zero on the boundary."""

    space: FemSpace
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    def nodal_values(self) -> np.ndarray:
        return self.space.full(self.coefficients)

    def at_quadrature(self):
        return self.space.values_at_quadrature(self.coefficients)

    def gradient(self):
        return self.space.gradients(self.coefficients)

    def evaluate(self, points):
        cell, lam = self.space.locate(points)
        local = self.nodal_values()[self.space.mesh.cells[cell]]
        return np.sum(local * lam, axis=1)

    def sampled(self, quad: QuadratureRule | None = None) -> SampledField:
        space = self.space if quad is None else self.space.with_quadrature(quad)
        vals = space.values_at_quadrature(self.coefficients)
        return _samples(space, vals)

    def gradient_sampled(self, quad: QuadratureRule | None = None) -> SampledField:
        space = self.space if quad is None else self.space.with_quadrature(quad)
        g = space.gradients(self.coefficients)
        nq = space.wq.shape[1]
        vals = np.repeat(g[:, None, :], nq, axis=1)
        return _samples(space, vals)

    def l2_norm(self) -> float:
        return self.space.l2_norm(self.at_quadrature())

    def __add__(self, other):
        return FemFunction(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return FemFunction(self.space, self.coefficients - other.coefficients)

    def __mul__(self, c):
        return FemFunction(self.space, c * self.coefficients)

    __rmul__ = __mul__

    def to_csv(self) -> str:
        mesh = self.space.mesh
        coord_names = ["x", "y"][: mesh.dim]
        lines = [",".join(["vertex"] + coord_names + ["value"])]
        vals = self.nodal_values()
        for i, (v, u) in enumerate(zip(mesh.vertices, vals)):
            lines.append(",".join([str(i)] + [repr(float(c)) for c in v] + [repr(float(u))]))
        return "\n".join(lines) + "\n"


def _samples(space, vals):
    nc, nq = space.wq.shape
    flat_vals = vals.reshape((nc * nq,) + vals.shape[2:])
    return SampledField(
        points=space.xq.reshape(nc * nq, space.dim),
        values=flat_vals,
        weights=space.wq.ravel(),
        cells=np.repeat(np.arange(nc), nq),
    )


def restrict(v, space: FemSpace, tol: float = 1e-10) -> FemFunction:
    """Nodal interpolation onto ``space`` (the restriction operator).

    ``v`` maps an ``(n, dim)`` array of points to ``(n,)`` values and must
    vanish on the boundary.
    """
    verts = space.mesh.vertices
    vals = np.asarray(v(verts), dtype=float).reshape(len(verts))
    bvals = vals[space.mesh.boundary_vertices]
    if np.any(np.abs(bvals) > tol):
        k = int(np.argmax(np.abs(bvals)))
        where = verts[space.mesh.boundary_vertices[k]]
        raise TraceViolationError(f"boundary value {bvals[k]:.3e} at {where.tolist()} exceeds {tol}")
    return FemFunction(space, vals[space.free])


# ---------------------------------------------------------------------------
# assembly


def _chunks(n):
    return [slice(s, min(s + CHUNK_CELLS, n)) for s in range(0, n, CHUNK_CELLS)]


def _map_chunks(fn, n):
    chunks = _chunks(n)
    workers = min(worker_count(), len(chunks))
    if workers <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _check_finite(local, offset):
    bad = ~np.isfinite(local)
    if bad.any():
        flat = np.argmax(bad.reshape(len(local), -1).any(axis=1))
        raise AssemblyNaNError(int(offset + flat))


def assemble_residual(spec, space: FemSpace, u: FemFunction, u_prev: FemFunction, tau: float, t_n: float):
    """Residual of one implicit Euler step tested against every interior hat function."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if u.space is not space or u_prev.space is not space:
        raise ValueError("u and u_prev must live on the given space")
    uq_all = space.values_at_quadrature(u.coefficients)
    pq_all = space.values_at_quadrature(u_prev.coefficients)
    gu_all = space.gradients(u.coefficients)

    def local(c):
        uq, pq, gu = uq_all[c], pq_all[c], gu_all[c]
        xq, wq, grads = space.xq[c], space.wq[c], space.grads[c]
        nq = wq.shape[1]
        gq = np.repeat(gu[:, None, :], nq, axis=1)
        with np.errstate(all="ignore"):
            time_term = (spec.b(uq) - spec.b(pq)) / tau - spec.f(xq, t_n)
            flux = spec.a(xq, gq) + spec.K(uq)  # (nc, nq, dim)
            res = np.einsum("cq,qa->ca", wq * time_term, space.basis)
            res += np.einsum("cq,cqd,cad->ca", wq, flux, grads)
        _check_finite(res, c.start)
        return res

    parts = _map_chunks(local, space.n_cells)
    loc = np.concatenate(parts, axis=0)
    full = np.bincount(space.mesh.cells.ravel(), weights=loc.ravel(), minlength=len(space.mesh.vertices))
    return full[space.free]


def assemble_jacobian(spec, space: FemSpace, u: FemFunction, tau: float, *, picard: bool = False):
    """Derivative of ``assemble_residual`` with respect to the coefficients of ``u``.

    With ``picard=True`` the stress is linearised by its frozen secant
    coefficient instead of its derivative.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    uq_all = space.values_at_quadrature(u.coefficients)
    gu_all = space.gradients(u.coefficients)

    def local(c):
        uq, gu = uq_all[c], gu_all[c]
        xq, wq, grads = space.xq[c], space.wq[c], space.grads[c]
        nq = wq.shape[1]
        gq = np.repeat(gu[:, None, :], nq, axis=1)
        N = space.basis
        with np.errstate(all="ignore"):
            mass = np.einsum("cq,qa,qb->cab", wq * spec.b.deriv(uq) / tau, N, N)
            if picard:
                kappa = spec.a.secant(xq, gq)  # (nc, nq)
                stiff = np.einsum("cq,cad,cbd->cab", wq * kappa, grads, grads)
            else:
                D = spec.a.jacobian(xq, gq)  # (nc, nq, dim, dim)
                stiff = np.einsum("cq,cqij,cbj,cai->cab", wq, D, grads, grads)
            dK = spec.K.deriv(uq)  # (nc, nq, dim)
            conv = np.einsum("cq,cqd,cad,qb->cab", wq, dK, grads, N)
            loc = mass + stiff + conv
        _check_finite(loc, c.start)
        return loc

    loc = np.concatenate(_map_chunks(local, space.n_cells), axis=0)
    dofs = space.cell_dofs
    k = dofs.shape[1]
    rows = np.repeat(dofs, k, axis=1).ravel()
    cols = np.tile(dofs, (1, k)).ravel()
    vals = loc.reshape(len(dofs), k * k).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = space.n_dofs
    return sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
