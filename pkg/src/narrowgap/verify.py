"""Invariant checks on small meshes, run by ``narrowgap verify``."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _check(name, fn):
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail, time.perf_counter() - t0)


def check_annulus():
    from .capacitance import flux_matrix
    from .harmonic import DirichletProblem, HarmonicSystem, solve_dirichlet
    from .mesh import D1, DOUTER, annulus_mesh

    m = annulus_mesh(1.0, 2.0, 16, 128)
    sysm = HarmonicSystem(m)
    v = solve_dirichlet(DirichletProblem(m, {D1: 1.0, DOUTER: 0.0}), system=sysm)
    z = solve_dirichlet(DirichletProblem(m, {D1: 0.0, DOUTER: 0.0}), system=sysm)
    a = -flux_matrix(v, None, z, None, sysm).a11
    exact = 2 * math.pi / math.log(2.0)
    err = abs(a - exact) / exact
    return err < 0.01, f"-a11={a:.6f}, closed form {exact:.6f}, rel err {err:.2e}"


def _small_solution(name="strict", eps=1e-2, **kw):
    from .capacitance import solve_scene
    from .mesh import triangulate_scene
    from .scenes import canonical_policy, canonical_scene

    s = canonical_scene(name, eps, **kw)
    mesh = triangulate_scene(s, canonical_policy(name))
    return s, mesh, solve_scene(s, mesh=mesh)


def check_flux_signs():
    _, _, sol = _small_solution()
    F = sol.flux
    ok = F.a12 == F.a21 and F.a11 < 0 and F.a22 < 0 and F.a12 > 0
    return ok, f"a11={F.a11:.5g} a12={F.a12:.5g} a21={F.a21:.5g} a22={F.a22:.5g}"


def check_outer_flux():
    _, _, sol = _small_solution()
    F = sol.flux
    err = abs((F.a11 + F.a21) - F.f1)
    return err <= 1e-6 * abs(F.f1), f"|a11+a21-f1|={err:.2e}, f1={F.f1:.6g}"


def check_direct_oracle():
    from .capacitance import direct_constrained_solve

    s, mesh, sol = _small_solution()
    u = direct_constrained_solve(s, mesh)
    err = np.max(np.abs(u - sol.u.values)) / np.max(np.abs(u))
    return err <= 1e-8, f"relative nodal difference {err:.2e} ({mesh.n_vertices} vertices)"


def check_boundary_constant():
    from .geometry import BOUNDARY, BoundaryData

    _, _, sol = _small_solution("strict", 1e-2, mode=BOUNDARY, phi=BoundaryData("constant", 1.0))
    g = float(np.max(np.abs(sol.u.gradients)))
    q = abs(sol.flux.Qtilde)
    return g <= 1e-8 and q <= 1e-8, f"max|grad u|={g:.1e}, |Q|={q:.1e}"


def check_boundary_odd():
    from .geometry import BOUNDARY, BoundaryData

    _, _, sol = _small_solution("strict", 1e-2, mode=BOUNDARY, phi=BoundaryData("linear_x1"))
    q = abs(sol.flux.Qtilde)
    return q <= 1e-6, f"|Q|={q:.1e}"


def check_mesh_quality():
    from .mesh import mesh_quality_report

    _, mesh, _ = _small_solution()
    rep = mesh_quality_report(mesh)
    return rep.ok, (f"min angle {rep.min_angle_deg:.1f} deg, max aspect {rep.max_aspect:.2f}, "
                    f"{len(rep.aniso_violations)} cap violations")


def check_oracle():
    from .asymptotics import arctan_closed_form, capacitance_oracle

    worst = 0.0
    for e in (1e-2, 1e-4, 1e-6):
        r = capacitance_oracle(2, 2, 0.5, 1.0, e)
        worst = max(worst, abs(r.off_sigma / arctan_closed_form(0.5, 1.0, e) - 1))
    return worst <= 1e-8, f"max relative deviation from arctan form {worst:.1e}"


def check_rho_consistency():
    from .asymptotics import rho_n, rho_n_m

    eps = (0.3, 1e-2, 1e-5)
    ok = all(math.isclose(rho_n(n, e), rho_n_m(n, 2, e), rel_tol=1e-15) for n in (2, 3, 4, 5) for e in eps)
    return ok, "rho_n equals rho_n_m with m = 2"


def check_auxiliary():
    from .auxiliary import AuxiliaryField
    from .scenes import canonical_scene

    s = canonical_scene("strict", 1e-2)
    x = np.linspace(-1, 1, 201)
    a = AuxiliaryField("ubar1", s)
    top = a.value(x, s.upper_curve(x))
    bot = a.value(x, s.lower_curve(x))
    err = max(np.max(np.abs(top - 1)), np.max(np.abs(bot)))
    return err <= 1e-12, f"boundary mismatch {err:.1e}"


def check_corrector_identity():
    from .auxiliary import AuxiliaryField, gap_samples
    from .scenes import canonical_scene

    s = canonical_scene("strict", 1e-2)
    pts = gap_samples(s, np.linspace(-0.9, 0.9, 13))
    a = AuxiliaryField("ubar1", s).eval(pts[:, 0], pts[:, 1])
    b = AuxiliaryField("utilde1", s).eval(pts[:, 0], pts[:, 1])
    err = max(np.max(np.abs(a[0] - b[0])), np.max(np.abs(a[1] - b[1])))
    return err == 0.0, f"utilde1 - ubar1 with A = I: {err:.1e}"


CHECKS = (
    ("annulus capacitance", check_annulus),
    ("flux symmetry and signs", check_flux_signs),
    ("outer flux identity", check_outer_flux),
    ("direct constrained oracle", check_direct_oracle),
    ("boundary mode, constant data", check_boundary_constant),
    ("boundary mode, odd data", check_boundary_odd),
    ("mesh quality", check_mesh_quality),
    ("quadrature oracle", check_oracle),
    ("rate normalizers", check_rho_consistency),
    ("auxiliary boundary values", check_auxiliary),
    ("corrector with identity coefficients", check_corrector_identity),
)


def run_checks():
    return [_check(name, fn) for name, fn in CHECKS]
