"""P1 finite elements for Dirichlet problems -div(A grad v) = 0."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from .geometry import CoefficientError, CoefficientField
from .mesh import D1, D2, DOUTER, INTERIOR, Mesh


class SolverError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class MeshMismatchError(ValueError):
    pass


def p1_gradients(mesh: Mesh):
    """Per-triangle barycentric gradients (T, 3, 2) and areas (T,)."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    G = np.empty(p.shape)
    G[:, 0, 0] = y[:, 1] - y[:, 2]
    G[:, 0, 1] = x[:, 2] - x[:, 1]
    G[:, 1, 0] = y[:, 2] - y[:, 0]
    G[:, 1, 1] = x[:, 0] - x[:, 2]
    G[:, 2, 0] = y[:, 0] - y[:, 1]
    G[:, 2, 1] = x[:, 1] - x[:, 0]
    G /= area2[:, None, None]
    return G, 0.5 * area2


def triangle_coefficients(mesh: Mesh, A: Optional[CoefficientField]):
    """A sampled at triangle centroids, shape (T, 2, 2); ``None`` for the identity."""
    if A is None or A.is_identity:
        return None
    c = mesh.centroids()
    A.check_ellipticity(c)
    return A(c[:, 0], c[:, 1])


@dataclass
class DirichletProblem:
    """Boundary values given per tag (constant or callable phi(x, y)) or per vertex."""

    mesh: Mesh
    values: Union[dict, np.ndarray]
    A: Optional[CoefficientField] = None

    def boundary_vector(self):
        m = self.mesh
        bmask = m.tags != INTERIOR
        g = np.zeros(m.n_vertices)
        if isinstance(self.values, dict):
            seen = np.zeros(m.n_vertices, dtype=int)
            for tag, val in self.values.items():
                sel = m.tags == tag
                seen += sel
                if callable(val):
                    g[sel] = val(m.vertices[sel, 0], m.vertices[sel, 1])
                else:
                    g[sel] = val
            missing = bmask & (seen == 0)
            if np.any(missing):
                raise ValueError(f"{missing.sum()} boundary vertices have no Dirichlet value")
        else:
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (m.n_vertices,):
                raise ValueError("per-vertex boundary values have the wrong shape")
            g[bmask] = vals[bmask]
        return g, bmask


class HarmonicSystem:
    """Assembled P1 operator on a mesh; reused across Dirichlet problems."""

    def __init__(self, mesh: Mesh, A: Optional[CoefficientField] = None):
        self.mesh = mesh
        self.A = A
        self.G, self.areas = p1_gradients(mesh)
        if np.any(self.areas <= 0):
            raise ValueError("mesh has nonpositive triangle areas")
        self.At = triangle_coefficients(mesh, A)
        self.K = self._assemble()
        self._prec_cache = {}

    def _assemble(self):
        G, ar = self.G, self.areas
        if self.At is None:
            Kl = np.einsum("tik,tjk->tij", G, G)
        else:
            Kl = np.einsum("tik,tkl,tjl->tij", G, self.At, G)
        Kl = 0.5 * (Kl + Kl.transpose(0, 2, 1)) * ar[:, None, None]
        t = self.mesh.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = self.mesh.n_vertices
        return sp.coo_matrix((Kl.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    def reduced(self, bmask):
        free = np.flatnonzero(~bmask)
        fixed = np.flatnonzero(bmask)
        Kff = self.K[free][:, free].tocsr()
        Kfb = self.K[free][:, fixed].tocsr()
        return free, fixed, Kff, Kfb

    def preconditioner(self, key, Kff, kind):
        if (key, kind) in self._prec_cache:
            return self._prec_cache[(key, kind)]
        if kind == "amg":
            import pyamg

            # pyamg estimates spectral radii from the global numpy RNG; pin it so
            # the hierarchy, and hence every solve, is bit-reproducible
            state = np.random.get_state()
            np.random.seed(0)
            try:
                ml = pyamg.smoothed_aggregation_solver(Kff, symmetry="symmetric", max_coarse=200)
            finally:
                np.random.set_state(state)
            M = ml.aspreconditioner(cycle="V")
            apply = M.matvec
        elif kind == "jacobi":
            dinv = 1.0 / Kff.diagonal()
            apply = lambda r: dinv * r
        else:
            raise ValueError(f"unknown preconditioner {kind!r}")
        self._prec_cache[(key, kind)] = apply
        return apply


def assemble(p: DirichletProblem, system: Optional[HarmonicSystem] = None):
    """Reduced SPD operator and load for the free (non-Dirichlet) vertices.

    Returns ``(Kff, load, free, g)`` where ``g`` carries the boundary values.
    """
    system = system or HarmonicSystem(p.mesh, p.A)
    g, bmask = p.boundary_vector()
    free, fixed, Kff, Kfb = system.reduced(bmask)
    load = -(Kfb @ g[fixed])
    return Kff, load, free, g


def pcg(K, b, apply_prec, tol=1e-10, maxiter=None, x0=None):
    """Preconditioned conjugate gradients; stops on ||r|| <= tol*||b||."""
    n = len(b)
    if maxiter is None:
        maxiter = int(50 * math.sqrt(max(n, 1))) + 10
    x = np.zeros(n) if x0 is None else x0.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, {"iterations": 0, "residual": 0.0, "converged": True}
    r = b - K @ x
    z = apply_prec(r)
    d = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol and it < maxiter:
        Kd = K @ d
        alpha = rz / (d @ Kd)
        x += alpha * d
        r -= alpha * Kd
        it += 1
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = apply_prec(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    # report the true residual, not the recurrence
    res = np.linalg.norm(b - K @ x) / bnorm
    return x, {"iterations": it, "residual": float(res), "converged": bool(res <= 10 * tol)}


@dataclass
class FieldSolution:
    mesh: Mesh
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    system: Optional[HarmonicSystem] = None
    _grad: Optional[np.ndarray] = None

    @property
    def gradients(self) -> np.ndarray:
        if self._grad is None:
            G = self.system.G if self.system is not None else p1_gradients(self.mesh)[0]
            self._grad = np.einsum("tk,tki->ti", self.values[self.mesh.triangles], G)
        return self._grad

    def __add__(self, other):
        _same_mesh(self, other)
        return FieldSolution(self.mesh, self.values + other.values, system=self.system)

    def __sub__(self, other):
        _same_mesh(self, other)
        return FieldSolution(self.mesh, self.values - other.values, system=self.system)

    def __rmul__(self, c):
        return FieldSolution(self.mesh, c * self.values, system=self.system)

    def dump_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex_id", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])

    def dump_gradient_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["triangle_id", "gx", "gy"])
            for i, g in enumerate(self.gradients):
                w.writerow([i, repr(float(g[0])), repr(float(g[1]))])


def _same_mesh(f, g):
    if f.mesh is not g.mesh and not (
        f.mesh.n_vertices == g.mesh.n_vertices and np.array_equal(f.mesh.triangles, g.mesh.triangles)
    ):
        raise MeshMismatchError("fields live on different meshes")


def interpolant(mesh: Mesh, func: Callable, system=None) -> FieldSolution:
    return FieldSolution(mesh, np.asarray(func(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float),
                         system=system)


def solve_dirichlet(p: DirichletProblem, tol: float = 1e-10, system: Optional[HarmonicSystem] = None,
                    precond: str = "amg", maxiter: Optional[int] = None) -> FieldSolution:
    """Solve the discrete Dirichlet problem with preconditioned CG from a zero guess."""
    system = system or HarmonicSystem(p.mesh, p.A)
    g, bmask = p.boundary_vector()
    free, fixed, Kff, Kfb = system.reduced(bmask)
    load = -(Kfb @ g[fixed])
    vals = g.copy()
    if len(free):
        key = bmask.tobytes()
        apply = system.preconditioner(key, Kff, precond)
        x, diag = pcg(Kff, load, apply, tol=tol, maxiter=maxiter)
        if not diag["converged"]:
            raise SolverError("conjugate gradients did not converge", diag)
        vals[free] = x
    else:
        diag = {"iterations": 0, "residual": 0.0, "converged": True}
    diag["unknowns"] = int(len(free))
    return FieldSolution(p.mesh, vals, diag, system)


def energy_inner_product(f: FieldSolution, g: FieldSolution, A: Optional[CoefficientField] = None,
                         system: Optional[HarmonicSystem] = None) -> float:
    """Integral of A grad f . grad g over the mesh (exact for P1 fields)."""
    _same_mesh(f, g)
    if system is None:
        system = f.system if (f.system is not None and f.system.A == A) else None
    if system is not None:
        ar, At = system.areas, system.At
    else:
        _, ar = p1_gradients(f.mesh)
        At = triangle_coefficients(f.mesh, A)
    gf, gg = f.gradients, g.gradients
    if At is None:
        Agf, Agg = gf, gg
    else:
        Agf = np.einsum("tij,tj->ti", At, gf)
        Agg = np.einsum("tij,tj->ti", At, gg)
    per = 0.5 * (np.einsum("ti,ti->t", Agf, gg) + np.einsum("ti,ti->t", Agg, gf))
    return float(np.sum(ar * per))


def boundary_flux_sum(f: FieldSolution, tag: int, system: HarmonicSystem) -> float:
    """Variationally consistent flux of f out of Omega through a boundary component.

    Sums the unconstrained residual (K f)_k over the component's vertices.
    """
    r = system.K @ f.values
    return float(np.sum(r[f.mesh.tags == tag]))


def boundary_line_flux(f: FieldSolution, tag: int, system: HarmonicSystem) -> float:
    """Line integral of the outward (from Omega) normal derivative along edges of a component.

    Uses the gradient of the triangle adjacent to each boundary edge; first-order
    accurate, kept as a coarse cross-check of the energy-form fluxes.
    """
    m = f.mesh
    t = m.triangles
    loc = [(0, 1, 2), (1, 2, 0), (2, 0, 1)]
    total = 0.0
    grads = f.gradients
    edges = np.vstack([t[:, [a, b]] for a, b, _ in loc])
    tri_of = np.tile(np.arange(len(t)), 3)
    key = np.sort(edges, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bnd = cnt[inv] == 1
    on = bnd & (m.tags[edges[:, 0]] == tag) & (m.tags[edges[:, 1]] == tag)
    e = edges[on]
    tr = tri_of[on]
    p0, p1 = m.vertices[e[:, 0]], m.vertices[e[:, 1]]
    dvec = p1 - p0
    # triangles are counterclockwise, so the outward normal of an edge (a->b) is (dy, -dx)
    nrm = np.column_stack([dvec[:, 1], -dvec[:, 0]])
    At = system.At
    g = grads[tr] if At is None else np.einsum("tij,tj->ti", At[tr], grads[tr])
    total = float(np.sum(np.einsum("ti,ti->t", g, nrm)))
    return total


def gradient_field(f: FieldSolution) -> np.ndarray:
    return f.gradients


def region_max(f: FieldSolution, mask: np.ndarray) -> float:
    """Max |grad f| over the triangles selected by ``mask``."""
    if not np.any(mask):
        return float("nan")
    return float(np.max(np.linalg.norm(f.gradients[mask], axis=1)))


def binned_profile(f: FieldSolution, mask: np.ndarray, edges: np.ndarray):
    """Max |grad f| per lateral bin of triangle centroids (NaN for empty bins)."""
    c = f.mesh.centroids()[:, 0]
    gm = np.linalg.norm(f.gradients, axis=1)
    out = np.full(len(edges) - 1, np.nan)
    which = np.digitize(c, edges) - 1
    for k in range(len(out)):
        sel = mask & (which == k)
        if np.any(sel):
            out[k] = gm[sel].max()
    return out


def line_max(f: FieldSolution, x0: float, mask: Optional[np.ndarray] = None) -> float:
    """Max |grad f| over triangles whose lateral extent contains x0."""
    p = f.mesh.vertices[f.mesh.triangles][..., 0]
    sel = (p.min(axis=1) <= x0) & (p.max(axis=1) >= x0)
    if mask is not None:
        sel &= mask
    return region_max(f, sel)


# --------------------------------------------------------------------------
# manufactured solutions
# --------------------------------------------------------------------------

EXACT_PRESETS = {
    "linear": (lambda x, y: 1.0 + 2.0 * x - 3.0 * y,
               lambda x, y: np.column_stack([np.full_like(x, 2.0), np.full_like(x, -3.0)])),
    "log": (lambda x, y: np.log(np.hypot(x, y)),
            lambda x, y: np.column_stack([x, y]) / (x * x + y * y)[:, None]),
    "rcos": (lambda x, y: x + 0.0 * y,
             lambda x, y: np.column_stack([np.ones_like(x), np.zeros_like(x)])),
    "r2cos2": (lambda x, y: x * x - y * y,
               lambda x, y: np.column_stack([2 * x, -2 * y])),
}


@dataclass
class ConvergenceResult:
    h: np.ndarray
    linf: np.ndarray
    grad_l2: np.ndarray
    order_linf: float
    order_grad: float


def _slope(h, e):
    h, e = np.log(np.asarray(h)), np.log(np.asarray(e))
    return float(np.polyfit(h, e, 1)[0])


def manufactured_error(exact: str, meshes, tol: float = 1e-12) -> ConvergenceResult:
    """Nodal L-inf and gradient L2 errors of the P1 solution on nested meshes.

    Dirichlet data come from the exact harmonic function on every boundary vertex.
    """
    u, du = EXACT_PRESETS[exact]
    hs, linf, gl2 = [], [], []
    for m in meshes:
        vals = u(m.vertices[:, 0], m.vertices[:, 1])
        sol = solve_dirichlet(DirichletProblem(m, vals), tol=tol)
        err = sol.values - vals
        linf.append(float(np.max(np.abs(err))))
        # edge-midpoint rule: exact for quadratics in each triangle
        P = m.vertices[m.triangles]
        mids = [(P[:, 0] + P[:, 1]) / 2, (P[:, 1] + P[:, 2]) / 2, (P[:, 2] + P[:, 0]) / 2]
        _, ar = p1_gradients(m)
        acc = np.zeros(len(ar))
        for q in mids:
            d = sol.gradients - du(q[:, 0], q[:, 1])
            acc += np.einsum("ti,ti->t", d, d) / 3.0
        gl2.append(float(np.sqrt(np.sum(ar * acc))))
        e = m.edges()
        hs.append(float(np.max(np.linalg.norm(m.vertices[e[:, 0]] - m.vertices[e[:, 1]], axis=1))))
    hs, linf, gl2 = map(np.asarray, (hs, linf, gl2))
    tiny = 1e-13
    order_linf = _slope(hs, linf) if np.all(linf > tiny) else float("inf")
    order_grad = _slope(hs, gl2) if np.all(gl2 > tiny) else float("inf")
    return ConvergenceResult(hs, linf, gl2, order_linf, order_grad)
