"""Closed-form gap profiles used to compare against the finite element fields.

``ubar1`` interpolates linearly in x_n across the gap, ``utilde1`` adds a
quadratic-in-x_n corrector that absorbs the mixed term of a general coefficient
matrix, and ``uhat`` carries the boundary data across the gap in the
inclusion-vs-boundary setting.

Outside the gap block the fields are extended by freezing the ramp at
|x'| = R1, clipping it to [0, 1] and tapering it to zero near dD with a cubic
smoothstep.  The extension is continuous across |x'| = R1 and takes the right
boundary values on dD1, dD2 and dD (``uhat`` excepted on the outer arc).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import BOUNDARY, TWO_INCLUSIONS, GeometryError, Region, Scene
from .harmonic import FieldSolution, interpolant

KINDS = ("ubar1", "ubar2", "uhat", "utilde1", "utilde2")


class AuxiliaryDomainError(GeometryError):
    """Evaluation requested outside the closed gap block without the extension flag."""


class ResidualToleranceError(ArithmeticError):
    """Finite-difference step too small relative to the sample coordinates."""


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class AuxiliaryField:
    kind: str
    scene: Scene
    extend: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown auxiliary field {self.kind!r}")
        if self.kind == "uhat" and self.scene.mode != BOUNDARY:
            raise ValueError("uhat is defined for the inclusion-vs-boundary setting")
        if self.kind in ("ubar2", "utilde2") and self.scene.mode != TWO_INCLUSIONS:
            raise ValueError(f"{self.kind} needs two inclusions")

    # -- gap block --------------------------------------------------------
    def in_gap(self, x, y, tol: float = 1e-12):
        s = self.scene
        R1 = s.profile.R1
        inside = np.abs(x) <= R1 * (1 + tol)
        xc = np.clip(x, -R1, R1)
        lo, hi = s.lower_curve(xc), s.upper_curve(xc)
        pad = tol * np.maximum(1.0, np.abs(hi))
        return inside & (y >= lo - pad) & (y <= hi + pad)

    def _gap(self, x, y):
        """Value and gradient inside the gap block (x clamped to [-R1, R1])."""
        s = self.scene
        p = s.profile
        x = np.clip(x, -p.R1, p.R1)
        h1, h2 = p.h1(x), p.h2(x)
        dh1, dh2 = p.dh1(x), p.dh2(x)
        dl = s.epsilon + h1 - h2
        Dp = dh1 - dh2
        ub = (y - h2) / dl
        gub = np.stack([-dh2 / dl - ub * Dp / dl, 1.0 / dl], axis=-1)
        k = self.kind
        if k == "ubar1":
            return ub, gub
        if k == "ubar2":
            return 1.0 - ub, -gub
        if k == "uhat":
            phi = s.phi
            g = phi(x, h2) - s.phi0()
            gp = phi.gradient(x, h2)
            dg = gp[..., 0] + gp[..., 1] * dh2
            val = (1.0 - ub) * g
            grad = np.stack([-gub[..., 0] * g + (1.0 - ub) * dg, -gub[..., 1] * g], axis=-1)
            return val, grad
        # corrector: k(x) * (s^2 - 1) with k = A21 (h1 - h2)' / (4 A22)
        A = s.A(x, y)
        dAx, dAy = s.A.derivatives(x, y)
        rho = A[..., 1, 0] / A[..., 1, 1]
        drx = (dAx[..., 1, 0] * A[..., 1, 1] - A[..., 1, 0] * dAx[..., 1, 1]) / A[..., 1, 1] ** 2
        dry = (dAy[..., 1, 0] * A[..., 1, 1] - A[..., 1, 0] * dAy[..., 1, 1]) / A[..., 1, 1] ** 2
        D2 = p.d2h1(x) - p.d2h2(x)
        kk = 0.25 * Dp * rho
        dkx = 0.25 * (D2 * rho + Dp * drx)
        dky = 0.25 * Dp * dry
        sv = (2.0 * y - (s.epsilon + h1 + h2)) / dl
        dsx = (-(dh1 + dh2) - sv * Dp) / dl
        dsy = 2.0 / dl
        q = sv * sv - 1.0
        val = ub + kk * q
        grad = np.stack([gub[..., 0] + dkx * q + kk * 2 * sv * dsx,
                         gub[..., 1] + dky * q + kk * 2 * sv * dsy], axis=-1)
        if k == "utilde1":
            return val, grad
        return 1.0 - val, -grad

    # -- extension ----------------------------------------------------------
    def _collar(self) -> float:
        s = self.scene
        R1 = s.profile.R1
        if s.mode == TWO_INCLUSIONS:
            reach = math.hypot(R1, s.d1_top + R1 - s.center[1])
            room = s.L - reach
        else:
            xs = np.linspace(-R1, R1, 201)
            room = float(np.min(self._upper_arc(xs) - (s.d1_top + np.sqrt(R1 * R1 - xs * xs))))
        if not room > 0:
            raise GeometryError("no room for the extension collar")
        return min(0.25 * R1, room)

    def _upper_arc(self, x):
        s = self.scene
        c = s.outer_arc_center
        return c[1] + np.sqrt(np.maximum(s.L ** 2 - x * x, 0.0))

    def _lower_arc(self, x):
        s = self.scene
        c = s.outer_arc_center
        return c[1] - np.sqrt(np.maximum(s.L ** 2 - x * x, 0.0))

    def _ramp(self, x, y):
        """Unclipped ubar1-type ramp frozen at |x'| = R1 outside the band."""
        s = self.scene
        p = s.profile
        xc = np.clip(x, -p.R1, p.R1)
        band = np.abs(x) <= p.R1
        r_in = (y - s.lower_curve(xc)) / s.delta(xc)
        if s.mode == TWO_INCLUSIONS:
            r_out = (y - s.side_bottom) / s.delta(p.R1)
        else:
            r_out = (y - self._lower_arc(x)) / s.delta(p.R1)
        return np.where(band, r_in, r_out)

    def _taper(self, x, y):
        s = self.scene
        w = self._collar()
        if s.mode == TWO_INCLUSIONS:
            d = s.L - np.hypot(x - s.center[0], y - s.center[1])
        else:
            d = np.where(np.abs(x) < s.L, self._upper_arc(x) - y, 0.0)
        return smoothstep(d / w)

    def _extension_value(self, x, y):
        s = self.scene
        sig = np.clip(self._ramp(x, y), 0.0, 1.0)
        T = self._taper(x, y)
        k = self.kind
        if k in ("ubar1", "ubar2", "uhat"):
            u1 = T * sig
            if k == "ubar1":
                return u1
            if k == "ubar2":
                return T * (1.0 - sig)
            xc = np.clip(x, -s.profile.R1, s.profile.R1)
            h2 = s.lower_curve(xc)
            return (1.0 - u1) * (s.phi(xc, h2) - s.phi0())
        p = s.profile
        xc = np.clip(x, -p.R1, p.R1)
        A = s.A(x, y)
        kk = 0.25 * (p.dh1(xc) - p.dh2(xc)) * A[..., 1, 0] / A[..., 1, 1]
        corr = kk * 4.0 * sig * (sig - 1.0)
        if k == "utilde1":
            return T * (sig + corr)
        return T * (1.0 - sig - corr)

    # -- public -------------------------------------------------------------
    def eval(self, x, y):
        """Value and gradient at points; gradient has a trailing axis of length 2.

        Inside the gap block both are closed form.  Outside (extension flag
        set) the gradient is a centered difference of the extension.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        inside = self.in_gap(x, y)
        if not self.extend and not np.all(inside):
            raise AuxiliaryDomainError("point outside the gap block; set extend=True")
        val = np.empty(x.shape)
        grad = np.empty(x.shape + (2,))
        if np.any(inside):
            v, g = self._gap(x[inside], y[inside])
            val[inside] = v
            grad[inside] = g
        out = ~inside
        if np.any(out):
            xo, yo = x[out], y[out]
            h = 1e-7 * max(1.0, self.scene.L)
            val[out] = self._extension_value(xo, yo)
            grad[out, 0] = (self._extension_value(xo + h, yo) - self._extension_value(xo - h, yo)) / (2 * h)
            grad[out, 1] = (self._extension_value(xo, yo + h) - self._extension_value(xo, yo - h)) / (2 * h)
        return val, grad

    def value(self, x, y):
        return self.eval(x, y)[0]


def auxiliary(kind: str, scene: Scene, extend: bool = False) -> AuxiliaryField:
    return AuxiliaryField(kind, scene, extend)


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------

def corrector_residual(aux: AuxiliaryField, points, A=None, rel_step: float = 1e-6) -> np.ndarray:
    """div(A grad aux) at gap points by centered differences of the analytic flux.

    The step is ``rel_step * epsilon``.  ``aux`` may be ``ubar1`` (the naive
    profile) or ``utilde1``.
    """
    s = aux.scene
    A = A if A is not None else s.A
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    h = rel_step * s.epsilon
    scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    if np.any(h < 64 * np.finfo(float).eps * scale):
        raise ResidualToleranceError(f"difference step {h:g} below resolution of the coordinates")

    def flux(xx, yy):
        _, g = aux.eval(xx, yy)
        return np.einsum("...ij,...j->...i", A(xx, yy), g)

    dfx = (flux(x + h, y)[:, 0] - flux(x - h, y)[:, 0]) / (2 * h)
    dfy = (flux(x, y + h)[:, 1] - flux(x, y - h)[:, 1]) / (2 * h)
    return dfx + dfy


def gap_samples(scene: Scene, xs, n_layers: int = 5):
    """Points strictly inside the gap on vertical lines through ``xs``."""
    xs = np.asarray(xs, dtype=float)
    t = (np.arange(n_layers) + 1.0) / (n_layers + 1.0)
    lo = scene.lower_curve(xs)
    dl = scene.delta(xs)
    X = np.repeat(xs, n_layers)
    Y = (lo[:, None] + t[None, :] * dl[:, None]).ravel()
    return np.column_stack([X, Y])


# --------------------------------------------------------------------------
# comparison with finite element fields
# --------------------------------------------------------------------------

@dataclass
class GradientComparison:
    max_diff: float
    edges: np.ndarray
    profile: np.ndarray           # max |grad(v - aux)| per lateral bin


def aux_interpolant(aux: AuxiliaryField, v: FieldSolution) -> FieldSolution:
    m = v.mesh
    return interpolant(m, aux.value, system=v.system)


def compare_gradients(v: FieldSolution, aux: AuxiliaryField, region: Optional[Region] = None,
                      n_bins: int = 40) -> GradientComparison:
    """max |grad(v - I aux)| over the triangles of ``region`` (centroid rule)."""
    region = region or Region("all")
    if region.kind not in ("gap", "sigma", "slab") and not aux.extend:
        aux = AuxiliaryField(aux.kind, aux.scene, extend=True)
    m = v.mesh
    mask = region.contains(aux.scene, m.centroids())
    if not np.any(mask):
        raise ValueError("region contains no triangles of the mesh")
    if not aux.extend:
        # only vertices of selected triangles need the closed form
        vids = np.unique(m.triangles[mask])
        vals = np.zeros(m.n_vertices)
        vals[vids] = aux.value(m.vertices[vids, 0], m.vertices[vids, 1])
        w = FieldSolution(m, v.values - vals, system=v.system)
    else:
        w = v - aux_interpolant(aux, v)
    gm = np.linalg.norm(w.gradients, axis=1)
    R1 = aux.scene.profile.R1
    edges = np.linspace(-R1, R1, n_bins + 1)
    cx = m.centroids()[:, 0]
    which = np.digitize(cx, edges) - 1
    prof = np.full(n_bins, np.nan)
    for k in range(n_bins):
        sel = mask & (which == k)
        if np.any(sel):
            prof[k] = gm[sel].max()
    return GradientComparison(float(gm[mask].max()), edges, prof)


def difference_field(v: FieldSolution, aux: AuxiliaryField) -> FieldSolution:
    """v - I aux with the extension switched on."""
    if not aux.extend:
        aux = AuxiliaryField(aux.kind, aux.scene, extend=True)
    return v - aux_interpolant(aux, v)


def local_energy(w: FieldSolution, scene: Scene, z: float, n: int = 2):
    """Energy of ``w`` over the gap slab |x' - z| < delta(z) and delta(z)^n.

    Triangles count when their centroid lies in the slab.
    """
    m = w.mesh
    dz = float(scene.delta(z))
    mask = Region("slab", center=z, half_width=dz).contains(scene, m.centroids())
    if not np.any(mask):
        raise ValueError(f"no triangles in the slab around x'={z:g}")
    ar = 0.5 * np.abs(m.signed_areas())
    g = w.gradients[mask]
    e = float(np.sum(ar[mask] * np.einsum("ti,ti->t", g, g)))
    return e, dz ** n


# --------------------------------------------------------------------------
# profile table
# --------------------------------------------------------------------------

PROFILE_COLUMNS = ("x_prime", "d", "delta", "grad_ubar_max", "grad_diff_max", "local_energy",
                   "delta_pow_n")


def profile_rows(v: FieldSolution, aux: AuxiliaryField, positions, n: int = 2):
    """Per-position diagnostics along the gap; one dict per x'.

    ``grad_ubar_max`` is the closed-form |grad aux| maximized over a vertical line,
    ``grad_diff_max`` the max |grad(v - I aux)| over gap triangles spanning x'.
    """
    s = aux.scene
    p = s.profile
    w = difference_field(v, aux)
    m = v.mesh
    gm = np.linalg.norm(w.gradients, axis=1)
    cen = m.centroids()
    gap = Region("gap").contains(s, cen)
    px = m.vertices[m.triangles][..., 0]
    rows = []
    for z in np.asarray(positions, dtype=float):
        pts = gap_samples(s, [z], 9)
        _, ga = AuxiliaryField(aux.kind, s).eval(pts[:, 0], pts[:, 1])
        sel = gap & (px.min(axis=1) <= z) & (px.max(axis=1) >= z)
        e, dn = local_energy(w, s, z, n)
        rows.append({
            "x_prime": float(z),
            "d": float(max(abs(z) - p.R0, 0.0)),
            "delta": float(s.delta(z)),
            "grad_ubar_max": float(np.linalg.norm(ga, axis=1).max()),
            "grad_diff_max": float(gm[sel].max()) if np.any(sel) else float("nan"),
            "local_energy": e,
            "delta_pow_n": dn,
        })
    return rows


def write_profile_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=PROFILE_COLUMNS)
        wr.writeheader()
        for r in rows:
            wr.writerow({k: repr(float(r[k])) for k in PROFILE_COLUMNS})
