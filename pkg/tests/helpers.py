"""Cached solves and sweeps shared by several test modules."""
from __future__ import annotations

from functools import lru_cache

from narrowgap.asymptotics import SweepPlan, run_sweep
from narrowgap.capacitance import solve_scene
from narrowgap.geometry import BOUNDARY, TWO_INCLUSIONS, BoundaryData
from narrowgap.mesh import triangulate_scene
from narrowgap.scenes import ANISO, canonical_policy, canonical_scene, canonical_scene_json

SWEEP_CASES = {
    "strict": dict(name="strict"),
    "m4": dict(name="m4"),
    "flat": dict(name="flat"),
    "flat_boundary": dict(name="flat", mode=BOUNDARY),
    "strict_aniso": dict(name="strict", A=ANISO),
    "flat_aniso": dict(name="flat", A=ANISO),
}


@lru_cache(maxsize=None)
def sweep(key: str):
    case = dict(SWEEP_CASES[key])
    name = case.pop("name")
    d = canonical_scene_json(name, 1e-2, **case)
    policy = d.pop("policy")
    return run_sweep(SweepPlan(d, policy=policy, workers=1))


@lru_cache(maxsize=None)
def solution(name: str = "strict", eps: float = 1e-2, mode: str = TWO_INCLUSIONS,
             phi: BoundaryData = None, aniso: bool = False):
    """(scene, mesh, ConductorSolution) for a canonical scene."""
    s = canonical_scene(name, eps, mode=mode, phi=phi, A=ANISO if aniso else None)
    mesh = triangulate_scene(s, canonical_policy(name))
    return s, mesh, solve_scene(s, mesh=mesh)
