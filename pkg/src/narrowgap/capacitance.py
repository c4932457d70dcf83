"""Flux matrix, conductor potentials and the reconstructed perfect-conductor field.

Sign convention: nu is the outward normal of an inclusion, so for a P1 field
``int_{dD_i} dv/dnu = -(K v) summed over dD_i`` and, for the component fields,
``a_ij = -E(v_i, v_j)`` with ``E`` the energy inner product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import BOUNDARY, TWO_INCLUSIONS, Scene
from .harmonic import (DirichletProblem, FieldSolution, HarmonicSystem, boundary_flux_sum,
                       energy_inner_product, line_max, region_max, solve_dirichlet)
from .mesh import D1, D2, DOUTER, INTERIOR, REGION_EXTERIOR, REGION_GAP, GradingPolicy, Mesh, triangulate_scene


class ConductorError(RuntimeError):
    """The flux matrix is inconsistent with a solvable conductor system."""


@dataclass
class FluxMatrix:
    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float
    f1: float = float("nan")
    f2: float = float("nan")
    Qtilde: Optional[float] = None

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a21, self.a22]]), np.array([self.b1, self.b2])


def flux_matrix(v1: FieldSolution, v2: Optional[FieldSolution], v3: FieldSolution, A=None,
                system: Optional[HarmonicSystem] = None) -> FluxMatrix:
    """Energy-form capacitance coefficients and loads.

    The outer fluxes f1, f2 are summed independently from the discrete boundary
    residuals on dD, not derived from the a_ij.
    """
    system = system or v1.system
    E = lambda f, g: energy_inner_product(f, g, A, system)
    a11 = -E(v1, v1)
    b1 = -E(v1, v3)
    f1 = boundary_flux_sum(v1, DOUTER, system)
    if v2 is None:
        return FluxMatrix(a11, 0.0, 0.0, float("nan"), b1, float("nan"), f1, float("nan"))
    a12 = -E(v1, v2)
    a21 = -E(v2, v1)
    a22 = -E(v2, v2)
    b2 = -E(v2, v3)
    f2 = boundary_flux_sum(v2, DOUTER, system)
    return FluxMatrix(a11, a12, a21, a22, b1, b2, f1, f2)


def solve_conductors(F: FluxMatrix):
    """Solve C1 a11 + C2 a12 + b1 = 0, C1 a21 + C2 a22 + b2 = 0.

    Returns ``(C1, C2, alpha, gap_factored)`` where ``gap_factored`` is
    |b1 - alpha b2| / |a11 - alpha a12|, cross-checked against |C1 - C2|.
    """
    det = F.det
    if not det > 0:
        raise ConductorError(f"nonpositive determinant {det:g}")
    if not (F.a11 < 0 and F.a22 < 0):
        raise ConductorError("diagonal flux coefficients must be negative")
    C1 = (-F.b1 * F.a22 + F.b2 * F.a12) / det
    C2 = (-F.a11 * F.b2 + F.a21 * F.b1) / det
    alpha = (F.a11 + F.a12) / (F.a21 + F.a22)
    denom = abs(F.a11 - alpha * F.a12)
    factored = abs(F.b1 - alpha * F.b2) / denom
    scale = max(abs(C1 - C2), abs(C1) + abs(C2), 1e-300)
    if abs(factored - abs(C1 - C2)) > 1e-9 * scale + 1e-14:
        raise ConductorError("factored potential gap disagrees with the direct solve")
    return C1, C2, alpha, factored


@dataclass
class ConductorSolution:
    C1: float
    C2: Optional[float]
    alpha: Optional[float]
    u: FieldSolution
    flux: FluxMatrix
    components: dict
    grad_max: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def potential_gap(self) -> float:
        return abs(self.C1 - self.C2) if self.C2 is not None else abs(self.C1)


def region_masks(scene: Scene, mesh: Mesh) -> dict:
    c = mesh.centroids()
    gap = mesh.regions == REGION_GAP
    masks = {"gap": gap, "far": mesh.regions == REGION_EXTERIOR,
             "sigma": gap & (np.abs(c[:, 0]) < scene.profile.R0),
             "all": np.ones(mesh.n_triangles, dtype=bool)}
    return masks


def _grad_report(scene, mesh, f: FieldSolution):
    masks = region_masks(scene, mesh)
    out = {k: region_max(f, masks[k]) for k in ("sigma", "gap", "far")}
    out["line0"] = line_max(f, 0.0, masks["gap"])
    return out


def solve_components(scene: Scene, mesh: Mesh, tol: float = 1e-10, precond: str = "amg",
                     system: Optional[HarmonicSystem] = None):
    """v1, v2, v3 for two inclusions; v1, v0 in boundary mode."""
    system = system or HarmonicSystem(mesh, scene.A)
    phi = scene.phi
    A = scene.A
    if scene.mode == TWO_INCLUSIONS:
        v1 = solve_dirichlet(DirichletProblem(mesh, {D1: 1.0, D2: 0.0, DOUTER: 0.0}, A), tol, system, precond)
        v2 = solve_dirichlet(DirichletProblem(mesh, {D1: 0.0, D2: 1.0, DOUTER: 0.0}, A), tol, system, precond)
        v3 = solve_dirichlet(DirichletProblem(mesh, {D1: 0.0, D2: 0.0, DOUTER: phi}, A), tol, system, precond)
        return {"v1": v1, "v2": v2, "v3": v3}, system
    p0 = scene.phi0()
    v1 = solve_dirichlet(DirichletProblem(mesh, {D1: 1.0, DOUTER: 0.0}, A), tol, system, precond)
    v0 = solve_dirichlet(DirichletProblem(mesh, {D1: 0.0, DOUTER: lambda x, y: phi(x, y) - p0}, A),
                         tol, system, precond)
    return {"v1": v1, "v0": v0}, system


def reconstruct(scene: Scene, mesh: Mesh, comps: dict, C1: float, C2: float, F: FluxMatrix,
                alpha: float, system: HarmonicSystem) -> ConductorSolution:
    """u = C1 v1 + C2 v2 + v3 with its gradient and per-region maxima."""
    v1, v2, v3 = comps["v1"], comps["v2"], comps["v3"]
    vals = C1 * v1.values + C2 * v2.values + v3.values
    # exact conductor values on the inclusions
    vals[mesh.tags == D1] = C1
    vals[mesh.tags == D2] = C2
    u = FieldSolution(mesh, vals, system=system)
    t1 = (C1 - C2) * v1
    t2 = C2 * (v1 + v2)
    terms = {"(C1-C2)grad v1": _grad_report(scene, mesh, t1),
             "C2 grad(v1+v2)": _grad_report(scene, mesh, t2),
             "grad v3": _grad_report(scene, mesh, v3)}
    diag = {k: comps[k].diagnostics for k in comps}
    return ConductorSolution(C1, C2, alpha, u, F, comps, _grad_report(scene, mesh, u), terms, diag)


def solve_boundary_mode(scene: Scene, mesh: Mesh, tol: float = 1e-10, precond: str = "amg",
                        comps=None, system=None) -> ConductorSolution:
    """Single conductor facing the outer boundary: u = (C1 - phi(0)) v1 + v0 + phi(0)."""
    if scene.mode != BOUNDARY:
        raise ValueError("scene is not in inclusion-vs-boundary mode")
    if comps is None:
        comps, system = solve_components(scene, mesh, tol, precond, system)
    v1, v0 = comps["v1"], comps["v0"]
    E = lambda f, g: energy_inner_product(f, g, scene.A, system)
    a11 = -E(v1, v1)
    Q = -E(v1, v0)
    if not a11 < 0:
        raise ConductorError("a11 must be negative")
    p0 = scene.phi0()
    # (C1 - phi(0)) a11 + Q = 0
    C1 = p0 - Q / a11
    f1 = boundary_flux_sum(v1, DOUTER, system)
    F = FluxMatrix(a11, 0.0, 0.0, float("nan"), float("nan"), float("nan"), f1, float("nan"), Q)
    vals = (C1 - p0) * v1.values + v0.values + p0
    vals[mesh.tags == D1] = C1
    u = FieldSolution(mesh, vals, system=system)
    terms = {"(C1-phi0)grad v1": _grad_report(scene, mesh, (C1 - p0) * v1),
             "grad v0": _grad_report(scene, mesh, v0)}
    diag = {k: comps[k].diagnostics for k in comps}
    return ConductorSolution(C1, None, None, u, F, comps, _grad_report(scene, mesh, u), terms, diag)


def solve_two_inclusions(scene: Scene, mesh: Mesh, tol: float = 1e-10, precond: str = "amg",
                         comps=None, system=None) -> ConductorSolution:
    if comps is None:
        comps, system = solve_components(scene, mesh, tol, precond, system)
    F = flux_matrix(comps["v1"], comps["v2"], comps["v3"], scene.A, system)
    C1, C2, alpha, _ = solve_conductors(F)
    return reconstruct(scene, mesh, comps, C1, C2, F, alpha, system)


def solve_scene(scene: Scene, policy: GradingPolicy = GradingPolicy(), tol: float = 1e-10,
                precond: str = "amg", mesh: Optional[Mesh] = None) -> ConductorSolution:
    mesh = mesh if mesh is not None else triangulate_scene(scene, policy)
    if scene.mode == TWO_INCLUSIONS:
        return solve_two_inclusions(scene, mesh, tol, precond)
    return solve_boundary_mode(scene, mesh, tol, precond)


def direct_constrained_solve(scene: Scene, mesh: Mesh, max_unknowns: int = 20000) -> np.ndarray:
    """One-shot solve of the perfect-conductor problem with a sparse direct method.

    All vertices of an inclusion share one unknown; the row of that unknown is
    the zero-total-flux condition.  Independent of the decomposition route.
    """
    system = HarmonicSystem(mesh, scene.A)
    K = system.K
    n = mesh.n_vertices
    tags = mesh.tags
    free = np.flatnonzero(tags == INTERIOR)
    conductors = [D1, D2] if scene.mode == TWO_INCLUSIONS else [D1]
    n_unk = len(free) + len(conductors)
    if n_unk > max_unknowns:
        raise ValueError(f"direct oracle limited to {max_unknowns} unknowns (got {n_unk})")
    rows, cols = [], []
    rows.extend(free.tolist())
    cols.extend(range(len(free)))
    for k, tag in enumerate(conductors):
        ids = np.flatnonzero(tags == tag)
        rows.extend(ids.tolist())
        cols.extend([len(free) + k] * len(ids))
    P = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n_unk))
    g = np.zeros(n)
    outer = tags == DOUTER
    g[outer] = scene.phi(mesh.vertices[outer, 0], mesh.vertices[outer, 1])
    Kr = (P.T @ K @ P).tocsc()
    rhs = -(P.T @ (K @ g))
    z = spla.spsolve(Kr, rhs)
    return P @ z + g


def result_record(scene: Scene, sol: ConductorSolution, mesh: Mesh) -> dict:
    """Flat JSON-ready result record."""
    F = sol.flux
    nan_to_none = lambda v: None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
    rec = {
        "schema_version": 1,
        "mode": scene.mode,
        "epsilon": scene.epsilon,
        "R0": scene.profile.R0,
        "R1": scene.profile.R1,
        "m": scene.profile.m,
        "a11": nan_to_none(F.a11),
        "a12": nan_to_none(F.a12),
        "a21": nan_to_none(F.a21),
        "a22": nan_to_none(F.a22),
        "b1": nan_to_none(F.b1),
        "b2": nan_to_none(F.b2),
        "f1": nan_to_none(F.f1),
        "f2": nan_to_none(F.f2),
        "C1": float(sol.C1),
        "C2": nan_to_none(sol.C2),
        "alpha": nan_to_none(sol.alpha),
        "Qtilde": nan_to_none(F.Qtilde),
        "grad_max_sigma": nan_to_none(sol.grad_max["sigma"]),
        "grad_max_gap": nan_to_none(sol.grad_max["gap"]),
        "grad_max_far": nan_to_none(sol.grad_max["far"]),
        "grad_line0": nan_to_none(sol.grad_max["line0"]),
        "n_vertices": mesh.n_vertices,
        "n_triangles": mesh.n_triangles,
        "solver_diag": sol.diagnostics,
    }
    return rec
