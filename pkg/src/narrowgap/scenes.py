"""Canonical scenes used by the acceptance sweeps, the scripts and ``verify``.

The far-field shape (closure height, outer radius, curvature) is chosen so the
finite-epsilon grid 4e-2 ... 2.5e-3 sits in the asymptotic regime as far as the
fixed closure family allows:

* ``strict`` and ``m4`` use a shallow profile (c = 0.25), so the gap term
  dominates the O(1) exterior capacitance;
* ``flat`` uses a steep, short transition off the flat set (c = 50 over
  R1 - R0 = 0.1) and a larger outer radius to keep the off-flat part small.
"""
from __future__ import annotations

from dataclasses import asdict

from .geometry import (BOUNDARY, TWO_INCLUSIONS, BoundaryData, CoefficientField, GapProfile,
                       Scene, build_scene)
from .mesh import GradingPolicy

ANISO = CoefficientField("rotation_aniso", theta=0.3, ratio=4.0)

_SPECS = {
    "strict": dict(profile=GapProfile(R0=0.0, R1=1.0, m=2, c1=0.25, c2=0.25), H=0.6, L=4.0,
                   policy=GradingPolicy()),
    "m4": dict(profile=GapProfile(R0=0.0, R1=1.0, m=4, c1=0.25, c2=0.25), H=0.6, L=4.0,
               policy=GradingPolicy()),
    "flat": dict(profile=GapProfile(R0=0.5, R1=0.6, m=2, c1=50.0, c2=50.0, kappa1=500.0),
                 H=0.6, L=10.0, policy=GradingPolicy(layers=12, h_far=0.05, beta=0.25)),
}

NAMES = tuple(_SPECS)


def canonical_policy(name: str) -> GradingPolicy:
    return _SPECS[name]["policy"]


def canonical_scene(name: str, epsilon: float, mode: str = TWO_INCLUSIONS,
                    phi: BoundaryData = None, A: CoefficientField = None) -> Scene:
    sp = _SPECS[name]
    return build_scene(sp["profile"], epsilon, H=sp["H"], L=sp["L"], mode=mode,
                       phi=phi or BoundaryData("linear_xn"), A=A)


def canonical_scene_json(name: str, epsilon: float = 1e-2, mode: str = TWO_INCLUSIONS,
                         phi: BoundaryData = None, A: CoefficientField = None) -> dict:
    """Scene JSON including the grading policy."""
    d = canonical_scene(name, epsilon, mode, phi, A).to_json()
    pol = asdict(canonical_policy(name))
    d["policy"] = {k: v for k, v in pol.items() if v is not None}
    return d


__all__ = ["ANISO", "BOUNDARY", "NAMES", "canonical_policy", "canonical_scene", "canonical_scene_json"]
