"""Inclusion-pair geometry: gap profiles, scenes, coefficient fields, regions.

Coordinates are planar ``(x, y)`` with ``x`` the lateral variable x' and ``y``
the normal variable x_n.  The lower inclusion D2 touches the flat set at
``y = 0``; the upper inclusion D1 is translated up by ``epsilon``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np


class GeometryError(ValueError):
    """Raised when a scene cannot be constructed from its parameters."""


class ProfileRangeError(GeometryError):
    """Raised when a profile is evaluated outside ``|x'| <= R1``."""


class CoefficientError(ValueError):
    """Raised when a coefficient field violates its ellipticity bounds."""


# --------------------------------------------------------------------------
# gap profile
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GapProfile:
    """h1(x') = c1 (|x'|-R0)_+^m and h2(x') = -c2 (|x'|-R0)_+^m on |x'| <= R1."""

    R0: float = 0.5
    R1: float = 1.0
    m: int = 2
    c1: float = 1.0
    c2: float = 1.0
    kappa0: Optional[float] = None
    kappa1: float = 100.0

    def __post_init__(self):
        if self.R0 < 0:
            raise GeometryError("R0 must be >= 0")
        if not self.R1 > self.R0:
            raise GeometryError("R1 must exceed R0")
        if int(self.m) != self.m or self.m < 2:
            raise GeometryError("growth order m must be an integer >= 2")
        if self.c1 < 0 or self.c2 < 0:
            raise GeometryError("profile coefficients must be nonnegative")
        if self.kappa0 is None:
            object.__setattr__(self, "kappa0", 2.0 * (self.c1 + self.c2) * (1 - 1e-6))

    @property
    def lam0(self) -> float:
        return self.c1 + self.c2

    @property
    def lam1(self) -> float:
        return self.c1 + self.c2

    @property
    def sigma_measure(self) -> float:
        """|Sigma'| for the planar case: the length of [-R0, R0]."""
        return 2.0 * self.R0

    def _check_range(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.R1 * (1 + 1e-12)):
            raise ProfileRangeError(f"|x'| exceeds R1={self.R1}")
        return x

    def _pos(self, x):
        return np.maximum(np.abs(x) - self.R0, 0.0)

    def h1(self, x):
        x = self._check_range(x)
        return self.c1 * self._pos(x) ** self.m

    def h2(self, x):
        x = self._check_range(x)
        return -self.c2 * self._pos(x) ** self.m

    def dh1(self, x):
        x = self._check_range(x)
        return self.c1 * self.m * self._pos(x) ** (self.m - 1) * np.sign(x)

    def dh2(self, x):
        x = self._check_range(x)
        return -self.c2 * self.m * self._pos(x) ** (self.m - 1) * np.sign(x)

    def d2h1(self, x):
        x = self._check_range(x)
        return self.c1 * self.m * (self.m - 1) * self._pos(x) ** (self.m - 2) * (np.abs(x) > self.R0)

    def d2h2(self, x):
        x = self._check_range(x)
        return -self.c2 * self.m * (self.m - 1) * self._pos(x) ** (self.m - 2) * (np.abs(x) > self.R0)


def eval_profiles(p: GapProfile, x):
    """Return ``(h1(x'), h2(x'))``."""
    return p.h1(x), p.h2(x)


def dist_to_sigma(p: GapProfile, x):
    """Distance from x' to the flat set [-R0, R0]."""
    return np.maximum(np.abs(np.asarray(x, dtype=float)) - p.R0, 0.0)


# --------------------------------------------------------------------------
# boundary data and coefficient presets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryData:
    """Named preset for phi on the outer boundary, with gradient and Hessian."""

    kind: str = "linear_xn"
    value_: float = 1.0
    params: tuple = ()

    KINDS = ("zero", "constant", "linear_xn", "linear_x1", "quadratic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise GeometryError(f"unknown boundary-data preset {self.kind!r}")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "zero":
            return np.zeros(np.broadcast(x, y).shape)
        if k == "constant":
            return np.full(np.broadcast(x, y).shape, self.value_)
        if k == "linear_xn":
            return self.value_ * y + 0 * x
        if k == "linear_x1":
            return self.value_ * x + 0 * y
        return self.value_ * (x * x - y * y)

    def gradient(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        zero = np.zeros(np.broadcast(x, y).shape)
        k = self.kind
        if k in ("zero", "constant"):
            return np.stack([zero, zero], axis=-1)
        if k == "linear_xn":
            return np.stack([zero, zero + self.value_], axis=-1)
        if k == "linear_x1":
            return np.stack([zero + self.value_, zero], axis=-1)
        return np.stack([2 * self.value_ * x + zero, -2 * self.value_ * y + zero], axis=-1)

    def hessian(self, x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        H = np.zeros(shape + (2, 2))
        if self.kind == "quadratic":
            H[..., 0, 0] = 2 * self.value_
            H[..., 1, 1] = -2 * self.value_
        return H

    def to_json(self) -> dict:
        out = {"phi": self.kind}
        if self.kind != "zero":
            out["value"] = self.value_
        return out

    @classmethod
    def from_json(cls, d: dict) -> "BoundaryData":
        return cls(kind=d["phi"], value_=float(d.get("value", 1.0)))


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric 2x2 coefficient field A(x) given by a named preset.

    ``rotation_aniso`` is the constant matrix R(theta) diag(ratio, 1) R(theta)^T.
    ``swirl_aniso`` rotates the principal axes with x': theta(x) = theta + twist*x.
    """

    kind: str = "identity"
    theta: float = 0.0
    ratio: float = 1.0
    twist: float = 0.0

    KINDS = ("identity", "rotation_aniso", "swirl_aniso")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise CoefficientError(f"unknown coefficient preset {self.kind!r}")
        if self.ratio <= 0:
            raise CoefficientError("anisotropy ratio must be positive")

    @property
    def lam(self) -> float:
        return min(1.0, self.ratio) if self.kind != "identity" else 1.0

    @property
    def Lam(self) -> float:
        return max(1.0, self.ratio) if self.kind != "identity" else 1.0

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    def __call__(self, x, y):
        """Return A at the given points, shape ``(..., 2, 2)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        if self.kind == "identity":
            A = np.zeros(shape + (2, 2))
            A[..., 0, 0] = 1.0
            A[..., 1, 1] = 1.0
            return A
        th = np.full(shape, self.theta)
        if self.kind == "swirl_aniso":
            th = th + self.twist * x
        c, s = np.cos(th), np.sin(th)
        A = np.empty(shape + (2, 2))
        A[..., 0, 0] = self.ratio * c * c + s * s
        A[..., 1, 1] = self.ratio * s * s + c * c
        A[..., 0, 1] = A[..., 1, 0] = (self.ratio - 1.0) * c * s
        return A

    def derivatives(self, x, y):
        """Return (dA/dx, dA/dy), each of shape ``(..., 2, 2)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        dx = np.zeros(shape + (2, 2))
        dy = np.zeros(shape + (2, 2))
        if self.kind != "swirl_aniso":
            return dx, dy
        th = self.theta + self.twist * x
        c, s = np.cos(th), np.sin(th)
        r = self.ratio
        dx[..., 0, 0] = 2 * c * s * (1.0 - r) * self.twist
        dx[..., 1, 1] = 2 * c * s * (r - 1.0) * self.twist
        dx[..., 0, 1] = dx[..., 1, 0] = (r - 1.0) * (c * c - s * s) * self.twist
        return dx, dy

    def check_ellipticity(self, points, n_dirs: int = 8, seed: int = 0):
        """Check lam|xi|^2 <= A xi.xi <= Lam|xi|^2 for random unit xi at each point."""
        pts = np.asarray(points, dtype=float)
        A = self(pts[:, 0], pts[:, 1])
        rng = np.random.default_rng(seed)
        ang = rng.uniform(0, 2 * np.pi, size=(len(pts), n_dirs))
        xi = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        q = np.einsum("pdi,pij,pdj->pd", xi, A, xi)
        tol = 1e-12 * self.Lam
        if np.any(q < self.lam - tol) or np.any(q > self.Lam + tol):
            raise CoefficientError("ellipticity bounds violated")
        return True

    def to_json(self) -> Optional[dict]:
        if self.kind == "identity":
            return None
        d = {"A": self.kind, "theta": self.theta, "ratio": self.ratio}
        if self.kind == "swirl_aniso":
            d["twist"] = self.twist
        return d

    @classmethod
    def from_json(cls, d: Optional[dict]) -> "CoefficientField":
        if not d:
            return cls()
        return cls(kind=d["A"], theta=float(d.get("theta", 0.0)),
                   ratio=float(d.get("ratio", 1.0)), twist=float(d.get("twist", 0.0)))


# --------------------------------------------------------------------------
# scene
# --------------------------------------------------------------------------

TWO_INCLUSIONS = "two-inclusion"
BOUNDARY = "inclusion-vs-boundary"


@dataclass(frozen=True)
class Scene:
    profile: GapProfile
    epsilon: float
    H: float = 1.0
    L: float = 4.0
    mode: str = TWO_INCLUSIONS
    phi: BoundaryData = field(default_factory=BoundaryData)
    A: CoefficientField = field(default_factory=CoefficientField)

    # -- gap quantities ----------------------------------------------------
    def delta(self, x):
        p = self.profile
        return self.epsilon + p.h1(x) - p.h2(x)

    def upper_curve(self, x):
        return self.epsilon + self.profile.h1(x)

    def lower_curve(self, x):
        return self.profile.h2(x)

    @property
    def center(self):
        """Center of the outer disk (two-inclusion mode)."""
        return np.array([0.0, 0.5 * self.epsilon])

    @property
    def side_top(self) -> float:
        """Height of the corner where D1 leaves the profiled region."""
        return float(self.upper_curve(self.profile.R1))

    @property
    def side_bottom(self) -> float:
        return float(self.lower_curve(self.profile.R1))

    @property
    def d1_top(self) -> float:
        """Height at which D1's vertical sides are capped."""
        return self.epsilon + self.H

    @property
    def d2_bottom(self) -> float:
        return -self.H

    @property
    def outer_arc_center(self):
        """Center of the outer arc closing D in boundary mode."""
        R1 = self.profile.R1
        return np.array([0.0, self.side_bottom + math.sqrt(self.L ** 2 - R1 ** 2)])

    def phi0(self) -> float:
        return float(self.phi(0.0, 0.0))

    # -- exact boundary distance, used to check mesh vertices ----------------
    def distance_to_boundary(self, tag: str, pts):
        """Distance from points to the exact boundary component ``D1``, ``D2`` or ``D``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        R1 = self.profile.R1
        if tag == "D1":
            return _stadium_distance(self, x, y, upper=True)
        if tag == "D2":
            if self.mode != TWO_INCLUSIONS:
                raise GeometryError("D2 absent in boundary mode")
            return _stadium_distance(self, x, y, upper=False)
        if tag == "D":
            if self.mode == TWO_INCLUSIONS:
                return np.abs(np.hypot(x, y - self.center[1]) - self.L)
            c = self.outer_arc_center
            xc = np.clip(x, -R1, R1)
            d_prof = np.where(np.abs(x) <= R1, np.abs(y - self.lower_curve(xc)), np.inf)
            d_arc = np.abs(np.hypot(x - c[0], y - c[1]) - self.L)
            return np.minimum(d_prof, d_arc)
        raise GeometryError(f"unknown boundary tag {tag!r}")

    # -- closed polylines --------------------------------------------------
    def gap_columns(self, layers: int = 6, h_far: float = 0.1, aniso: float = 8.0,
                    beta: float = 0.5) -> np.ndarray:
        """Lateral node positions on [-R1, R1]; spacing tracks the local gap width.

        Spacing is ``min(h_far, beta*sqrt(delta), 0.8*aniso*delta/layers)`` so that
        mapped cells respect the anisotropy cap.  Nodes at 0 and +-R0 are exact,
        except that a flat set narrower than a quarter of the local step gets no
        node of its own (it would only produce sliver cells).
        """
        p = self.profile

        def spacing(x):
            x = min(x, p.R1)
            dl = float(self.delta(x))
            # slanted top/bottom edges are longer than the lateral step
            slope = max(abs(float(p.dh1(x))), abs(float(p.dh2(x))))
            cap = 0.7 * aniso * dl / (layers * math.sqrt(1.0 + slope * slope))
            return min(h_far, beta * math.sqrt(dl), cap)

        stops = [0.0] + ([p.R0] if p.R0 > 0.25 * spacing(0.0) else []) + [p.R1]
        right = [0.0]
        for a, b in zip(stops[:-1], stops[1:]):
            pts = [a]
            x = a
            while True:
                s = spacing(x)
                if x + s >= b - 1e-3 * s:
                    break
                x += s
                pts.append(x)
            pts = np.asarray(pts)
            # stretch so the last interval lands on b with comparable size
            n = len(pts)
            if n > 1:
                scale = (b - a) / (pts[-1] - a + spacing(pts[-1]))
                pts = a + (pts - a) * scale
            right.extend(pts[1:].tolist() + [b])
        right = np.asarray(right)
        return np.concatenate([-right[:0:-1], right])

    def closure_polyline(self, upper: bool, h_far: float, first: float) -> np.ndarray:
        """Closure of an inclusion outside the profiled region.

        Returns the vertices from the right corner, up the vertical side, over the
        semicircular cap and down the left side to the left corner (for D1; mirrored
        for D2), excluding the gap curve itself.
        """
        R1 = self.profile.R1
        if upper:
            y0, y1 = self.side_top, self.d1_top
        else:
            y0, y1 = -self.side_bottom, -self.d2_bottom
        side = _graded_segment(y0, y1, first, h_far)
        n_cap = 2 * max(4, int(math.ceil(0.5 * math.pi * R1 / h_far)))
        ang = np.linspace(0.0, math.pi, n_cap + 1)
        cap = np.column_stack([R1 * np.cos(ang), y1 + R1 * np.sin(ang)])
        # exact apex on the symmetry axis so mirrored half-meshes conform
        cap[n_cap // 2] = (0.0, y1 + R1)
        cap[-1, 0] = -R1
        right = np.column_stack([np.full(len(side), R1), side])
        left = right[::-1].copy()
        left[:, 0] = -R1
        pts = np.vstack([right[:-1], cap, left[1:]])
        if not upper:
            pts[:, 1] = -pts[:, 1]
            pts[:, 0] = -pts[:, 0]
        return pts

    def inclusion_polyline(self, upper: bool, h_far: float = 0.1, layers: int = 6,
                           aniso: float = 8.0) -> np.ndarray:
        """Closed counterclockwise polyline of D1 (upper) or D2."""
        cols = self.gap_columns(layers=layers, h_far=h_far, aniso=aniso)
        first = float(self.delta(self.profile.R1)) / layers
        clos = self.closure_polyline(upper, h_far, first)
        if upper:
            gap = np.column_stack([cols, self.upper_curve(cols)])
            # counterclockwise: along the gap curve left->right, then closure
            return np.vstack([gap, clos[1:-1]])
        gap = np.column_stack([cols[::-1], self.lower_curve(cols[::-1])])
        return np.vstack([gap, clos[1:-1]])

    def to_json(self) -> dict:
        p = asdict(self.profile)
        return {
            "schema_version": 1,
            "profile": p,
            "epsilon": self.epsilon,
            "H": self.H,
            "L": self.L,
            "mode": self.mode,
            "phi": self.phi.to_json(),
            "A": self.A.to_json(),
        }

    def with_epsilon(self, eps: float) -> "Scene":
        return build_scene(self.profile, eps, self.H, self.L, self.mode, self.phi, self.A)


def _graded_segment(a: float, b: float, first: float, h_far: float, growth: float = 1.2):
    """Points from a to b, spacing growing geometrically from ``first`` to ``h_far``."""
    pts = [a]
    s = min(first, h_far)
    while pts[-1] + s < b - 0.5 * min(s, h_far):
        pts.append(pts[-1] + s)
        s = min(s * growth, h_far)
    pts.append(b)
    pts = np.asarray(pts)
    if len(pts) > 2 and pts[-1] - pts[-2] < 0.5 * (pts[-2] - pts[-3]):
        pts = np.delete(pts, -2)
    return pts


def _stadium_distance(scene: Scene, x, y, upper: bool):
    """Distance to the closed boundary of D1 (upper) or D2."""
    p = scene.profile
    R1 = p.R1
    if not upper:
        y = -y
        top = -scene.d2_bottom
        bot = -scene.side_bottom
        curve = lambda t: -scene.lower_curve(t)
    else:
        top = scene.d1_top
        bot = scene.side_top
        curve = scene.upper_curve
    d = np.full(x.shape, np.inf)
    inside_band = np.abs(x) <= R1
    xc = np.clip(x, -R1, R1)
    # gap curve: vertical distance is exact at the nodes we check (they sit on it)
    d = np.where(inside_band, np.minimum(d, np.abs(y - curve(xc))), d)
    yc = np.clip(y, bot, top)
    d = np.minimum(d, np.hypot(np.abs(x) - R1, y - yc))
    cap = np.abs(np.hypot(x, y - top) - R1)
    d = np.where(y >= top, np.minimum(d, cap), d)
    return d


def gap_thickness(s: Scene, x):
    """delta(x') = eps + h1(x') - h2(x')."""
    return s.delta(x)


def _polyline_convex(poly: np.ndarray, tol: float = 1e-14) -> bool:
    e = np.diff(np.vstack([poly, poly[:1]]), axis=0)
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    scale = np.max(np.abs(cross)) if len(cross) else 1.0
    return bool(np.all(cross >= -tol * scale) or np.all(cross <= tol * scale))


def build_scene(p: GapProfile, epsilon: float, H: float = 1.0, L: Optional[float] = None,
                mode: str = TWO_INCLUSIONS, phi: Optional[BoundaryData] = None,
                A: Optional[CoefficientField] = None) -> Scene:
    """Construct and check a scene; raises :class:`GeometryError` on bad input."""
    if not epsilon > 0:
        raise GeometryError("epsilon must be positive")
    if L is None:
        L = 4.0 * p.R1
    if not L > 3 * p.R1:
        raise GeometryError("outer radius must exceed 3*R1")
    if mode not in (TWO_INCLUSIONS, BOUNDARY):
        raise GeometryError(f"unknown mode {mode!r}")
    hmax = max(float(p.h1(p.R1)), float(-p.h2(p.R1)))
    if not H > hmax + epsilon:
        raise GeometryError("closure height H must exceed sup h + epsilon")
    s = Scene(p, float(epsilon), float(H), float(L), mode,
              phi if phi is not None else BoundaryData(), A if A is not None else CoefficientField())
    # extent checks: inclusions strictly inside D
    if mode == TWO_INCLUSIONS:
        reach = math.hypot(p.R1, s.d1_top + p.R1 - s.center[1])
        if reach >= L:
            raise GeometryError("inclusions do not fit inside the outer boundary")
    else:
        c = s.outer_arc_center
        if math.hypot(p.R1, s.d1_top + p.R1 - c[1]) >= L:
            raise GeometryError("inclusion does not fit inside the outer boundary")
    polys = [s.inclusion_polyline(True, h_far=0.05)]
    if mode == TWO_INCLUSIONS:
        polys.append(s.inclusion_polyline(False, h_far=0.05))
    for poly in polys:
        if not _polyline_convex(poly):
            raise GeometryError("inclusion closure is not convex")
    return s


# --------------------------------------------------------------------------
# assumption checks
# --------------------------------------------------------------------------

@dataclass
class AssumptionReport:
    results: dict = field(default_factory=dict)   # name -> True / False / None (n/a)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v is not False for v in self.results.values())

    def failures(self):
        return [k for k, v in self.results.items() if v is False]


def validate_assumptions(s: Scene, n: int = 4001) -> AssumptionReport:
    """Check flatness, separation, vanishing gradients, Hessian floor and C2 cap."""
    p = s.profile
    rep = AssumptionReport()
    x = np.linspace(-p.R1, p.R1, n)
    h1, h2 = p.h1(x), p.h2(x)
    on = np.abs(x) <= p.R0
    rep.results["flat"] = bool(np.all(h1[on] == 0) and np.all(h2[on] == 0))

    off = ~on
    sep = (h1 - h2)[off]
    rep.results["separation"] = bool(np.all(sep > 0)) if sep.size else True
    rep.details["min_separation_off_sigma"] = float(sep.min()) if sep.size else None

    if p.R0 > 0:
        edge = np.array([-p.R0, p.R0])
        g = np.abs(np.concatenate([p.dh1(edge), p.dh2(edge)]))
        rep.results["flat_edge_gradient"] = bool(np.all(g <= 1e-12))
    else:
        g = np.abs(np.array([p.dh1(0.0), p.dh2(0.0)]))
        rep.results["flat_edge_gradient"] = bool(np.all(g <= 1e-12))

    hstep = x[1] - x[0]
    if p.m == 2:
        mask = np.abs(x[1:-1]) - hstep > p.R0
        diff = h1 - h2
        sd = (diff[2:] - 2 * diff[1:-1] + diff[:-2]) / hstep ** 2
        sd = sd[mask]
        floor = p.kappa0 * (1 - 1e-6)
        rep.results["hessian_floor"] = bool(sd.size == 0 or np.all(sd >= floor))
        rep.details["min_second_difference"] = float(sd.min()) if sd.size else None
    else:
        rep.results["hessian_floor"] = None

    def c2(h):
        d1 = np.diff(h) / hstep
        d2 = np.diff(h, 2) / hstep ** 2
        return np.max(np.abs(h)) + np.max(np.abs(d1)) + np.max(np.abs(d2))

    c2n = c2(h1) + c2(h2)
    rep.details["c2_norm"] = float(c2n)
    rep.results["c2_cap"] = bool(c2n <= p.kappa1)
    return rep


# --------------------------------------------------------------------------
# regions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Selector for the flat block, the gap region, a local slab or the exterior."""

    kind: str                     # "sigma" | "gap" | "slab" | "exterior" | "all"
    r: Optional[float] = None
    center: float = 0.0
    half_width: Optional[float] = None

    def contains(self, s: Scene, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        p = s.profile
        if self.kind == "all":
            return np.ones(len(x), dtype=bool)
        within = np.abs(x) < p.R1
        xc = np.clip(x, -p.R1, p.R1)
        in_gap = within & (y > s.lower_curve(xc)) & (y < s.upper_curve(xc))
        if self.kind == "sigma":
            return in_gap & (np.abs(x) < p.R0)
        if self.kind == "gap":
            r = p.R1 if self.r is None else self.r
            return in_gap & (np.abs(x) < r)
        if self.kind == "slab":
            t = self.half_width
            if t is None:
                t = float(s.delta(self.center))
            return in_gap & (np.abs(x - self.center) < t)
        if self.kind == "exterior":
            return ~in_gap
        raise GeometryError(f"unknown region {self.kind!r}")


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

SCENE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "profile", "epsilon"],
    "properties": {
        "schema_version": {"const": 1},
        "profile": {
            "type": "object",
            "required": ["R0", "R1", "m", "c1", "c2"],
            "properties": {
                "R0": {"type": "number", "minimum": 0},
                "R1": {"type": "number", "exclusiveMinimum": 0},
                "m": {"type": "integer", "minimum": 2},
                "c1": {"type": "number", "minimum": 0},
                "c2": {"type": "number", "minimum": 0},
                "kappa0": {"type": ["number", "null"]},
                "kappa1": {"type": "number"},
            },
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "H": {"type": "number", "exclusiveMinimum": 0},
        "L": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "mode": {"enum": [TWO_INCLUSIONS, BOUNDARY]},
        "phi": {
            "type": "object",
            "required": ["phi"],
            "properties": {"phi": {"enum": list(BoundaryData.KINDS)}, "value": {"type": "number"}},
        },
        "policy": {
            "type": "object",
            "properties": {
                "layers": {"type": "integer", "minimum": 3},
                "h_far": {"type": "number", "exclusiveMinimum": 0},
                "aniso": {"type": "number", "minimum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "h_outer": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "A": {
            "type": ["object", "null"],
            "properties": {
                "A": {"enum": list(CoefficientField.KINDS)},
                "theta": {"type": "number"},
                "ratio": {"type": "number", "exclusiveMinimum": 0},
                "twist": {"type": "number"},
            },
        },
    },
}


def scene_from_json(d: dict) -> Scene:
    import jsonschema

    try:
        jsonschema.validate(d, SCENE_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise GeometryError(f"scene JSON invalid: {exc.message}") from exc
    prof = GapProfile(**d["profile"])
    return build_scene(
        prof, d["epsilon"], H=d.get("H", 1.0), L=d.get("L"),
        mode=d.get("mode", TWO_INCLUSIONS),
        phi=BoundaryData.from_json(d.get("phi", {"phi": "linear_xn"})),
        A=CoefficientField.from_json(d.get("A")),
    )


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_json(json.load(fh))


def dump_scene(s: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(s.to_json(), fh, indent=2, sort_keys=True)
