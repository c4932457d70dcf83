"""Boundary-fitted triangulations with gap-graded resolution.

The gap block |x'| <= R1 is a mapped structured grid
``(xi, sigma) -> (xi, h2(xi) + sigma*delta(xi))``.  The rest of the domain is
triangulated by Triangle with the gap block's side columns and all boundary
vertices held fixed (no Steiner points on segments), so the two parts share
vertex indices along |x'| = R1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BOUNDARY, TWO_INCLUSIONS, Scene, _graded_segment

INTERIOR, D1, D2, DOUTER = 0, 1, 2, 3
TAG_NAMES = {INTERIOR: "interior", D1: "D1", D2: "D2", DOUTER: "D"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

REGION_EXTERIOR, REGION_GAP = 0, 1


class MeshError(RuntimeError):
    pass


class GradingError(MeshError):
    """A mapped cell came out with nonpositive area."""


@dataclass(frozen=True)
class GradingPolicy:
    layers: int = 6
    h_far: float = 0.1
    aniso: float = 8.0
    beta: float = 0.5
    h_outer: float = None   # spacing on the outer boundary; defaults to 4*h_far

    def __post_init__(self):
        if self.layers < 3:
            raise ValueError("layers_across_gap must be >= 3")
        if not self.h_far > 0:
            raise ValueError("h_far must be positive")
        if not self.aniso >= 1:
            raise ValueError("anisotropy cap must be >= 1")

    def refined(self) -> "GradingPolicy":
        return GradingPolicy(2 * self.layers, 0.5 * self.h_far, self.aniso, 0.5 * self.beta,
                             None if self.h_outer is None else 0.5 * self.h_outer)


@dataclass
class Mesh:
    vertices: np.ndarray           # (V, 2)
    triangles: np.ndarray          # (T, 3), counterclockwise
    tags: np.ndarray               # (V,) boundary tag per vertex
    regions: np.ndarray            # (T,) REGION_GAP / REGION_EXTERIOR
    gap_shape: tuple = None        # (layers+1, ncols) when the gap block exists
    gap_index: np.ndarray = None   # (layers+1, ncols) vertex ids of the gap block
    n_loops: int = 3
    info: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def boundary_edges(self) -> np.ndarray:
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        u, cnt = np.unique(e, axis=0, return_counts=True)
        return u[cnt == 1]

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def dump_csv(self, directory) -> None:
        import os

        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "tag"])
            for i, (p, t) in enumerate(zip(self.vertices, self.tags)):
                w.writerow([i, repr(float(p[0])), repr(float(p[1])), TAG_NAMES[int(t)]])
        with open(os.path.join(directory, "triangles.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "v0", "v1", "v2", "region"])
            for i, (t, r) in enumerate(zip(self.triangles, self.regions)):
                w.writerow([i, int(t[0]), int(t[1]), int(t[2]), "gap" if r == REGION_GAP else "exterior"])

    @classmethod
    def load_csv(cls, directory) -> "Mesh":
        import os

        verts, tags = [], []
        with open(os.path.join(directory, "vertices.csv")) as fh:
            for row in csv.DictReader(fh):
                verts.append((float(row["x"]), float(row["y"])))
                tags.append(TAG_CODES[row["tag"]])
        tris, regs = [], []
        with open(os.path.join(directory, "triangles.csv")) as fh:
            for row in csv.DictReader(fh):
                tris.append((int(row["v0"]), int(row["v1"]), int(row["v2"])))
                regs.append(REGION_GAP if row["region"] == "gap" else REGION_EXTERIOR)
        return cls(np.array(verts), np.array(tris, dtype=np.int64), np.array(tags, dtype=np.int8),
                   np.array(regs, dtype=np.int8))


def split_quads(idx: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Triangulate a structured (rows, cols) index grid along shorter diagonals.

    Ties (rectangles) are broken by the side of x = 0 the quad lies on, so a
    grid that is mirror symmetric in x yields a mirror symmetric triangulation.
    """
    ll = idx[:-1, :-1].ravel()
    lr = idx[:-1, 1:].ravel()
    ul = idx[1:, :-1].ravel()
    ur = idx[1:, 1:].ravel()
    d_main = np.linalg.norm(verts[ur] - verts[ll], axis=1)
    d_anti = np.linalg.norm(verts[ul] - verts[lr], axis=1)
    xc = verts[ll, 0] + verts[lr, 0] + verts[ul, 0] + verts[ur, 0]
    use_main = (d_main < d_anti) | ((d_main == d_anti) & (xc >= 0))
    t1 = np.where(use_main[:, None], np.column_stack([ll, lr, ur]), np.column_stack([ll, lr, ul]))
    t2 = np.where(use_main[:, None], np.column_stack([ll, ur, ul]), np.column_stack([lr, ur, ul]))
    return np.vstack([t1, t2])


def _gap_block(scene: Scene, g: GradingPolicy):
    cols = scene.gap_columns(layers=g.layers, h_far=g.h_far, aniso=g.aniso, beta=g.beta)
    sig = np.linspace(0.0, 1.0, g.layers + 1)
    lo = scene.lower_curve(cols)
    hi = scene.upper_curve(cols)
    X = np.broadcast_to(cols, (len(sig), len(cols)))
    Y = lo[None, :] + sig[:, None] * (hi - lo)[None, :]
    Y[0] = lo
    Y[-1] = hi
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(len(verts)).reshape(len(sig), len(cols))
    tris = split_quads(idx, verts)
    return cols, verts, idx, tris


def _circle(center, radius, h, start=0.0):
    n = max(16, int(math.ceil(2 * math.pi * radius / h)))
    a = start + 2 * math.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a)])


def triangulate_scene(scene: Scene, g: GradingPolicy = GradingPolicy()) -> Mesh:
    """Mesh the scene's domain Omega (or Omega-tilde in boundary mode)."""
    import triangle

    if not isinstance(g, GradingPolicy):
        raise TypeError("grading policy required")
    cols, gverts, gidx, gtris = _gap_block(scene, g)
    nl = g.layers
    areas = _areas(gverts, gtris)
    if np.any(areas <= 0):
        raise GradingError("mapped gap cell with nonpositive area; raise the anisotropy cap")

    first = float(scene.delta(scene.profile.R1)) / nl
    h_out = g.h_outer if g.h_outer is not None else 4.0 * g.h_far
    right_col = gidx[:, -1]        # bottom -> top at x = +R1
    left_col = gidx[:, 0]          # bottom -> top at x = -R1

    # exterior PSLG: list of vertex coordinates with a parallel list of ids into
    # the global numbering (-1 for new boundary vertices), plus tags.
    ext_pts, ext_ids, ext_tags, segs = [], [], [], []

    def add_loop(points, ids, tags, closed=True):
        start = len(ext_pts)
        ext_pts.extend(points)
        ext_ids.extend(ids)
        ext_tags.extend(tags)
        n = len(points)
        for k in range(n - 1):
            segs.append((start + k, start + k + 1))
        if closed:
            segs.append((start + n - 1, start))
        return start

    # Only the right half x >= 0 of the exterior is handed to Triangle; the left
    # half is its mirror image, so the whole mesh is symmetric under x -> -x.
    c1 = scene.closure_polyline(True, g.h_far, first)     # right corner -> left corner
    apex1 = int(np.flatnonzero(c1[:, 0] == 0.0)[0])
    loop_pts, loop_ids, loop_tags = [], [], []

    def push(p, i, t):
        loop_pts.append(p); loop_ids.append(i); loop_tags.append(t)

    if scene.mode == TWO_INCLUSIONS:
        c2 = scene.closure_polyline(False, g.h_far, first)  # left corner -> right corner
        apex2 = int(np.flatnonzero(c2[:, 0] == 0.0)[0])
        cy = scene.center[1]
        for k in range(nl + 1):
            push(gverts[right_col[k]], right_col[k], D2 if k == 0 else (D1 if k == nl else INTERIOR))
        for p in c1[1:apex1 + 1]:
            push(p, -1, D1)
        cut = _graded_segment(c1[apex1, 1], cy + scene.L, g.h_far, h_out)
        for y in cut[1:-1]:
            push((0.0, y), -1, INTERIOR)
        n_half = max(8, int(math.ceil(math.pi * scene.L / h_out)))
        ang = np.linspace(0.5 * math.pi, -0.5 * math.pi, n_half + 1)
        arc = np.column_stack([scene.L * np.cos(ang), cy + scene.L * np.sin(ang)])
        arc[0, 0] = arc[-1, 0] = 0.0
        for p in arc:
            push(p, -1, DOUTER)
        cut = -_graded_segment(-c2[apex2, 1], scene.L - cy, g.h_far, h_out)
        for y in cut[::-1][1:-1]:
            push((0.0, y), -1, INTERIOR)
        for p in c2[apex2:-1]:
            push(p, -1, D2)
        n_loops = 3
    else:
        c = scene.outer_arc_center
        R1 = scene.profile.R1
        a0 = math.atan2(scene.side_bottom - c[1], R1)
        n_arc = max(8, int(math.ceil(scene.L * (0.5 * math.pi - a0) / h_out)))
        ang = np.linspace(a0, 0.5 * math.pi, n_arc + 1)
        arc = np.column_stack([c[0] + scene.L * np.cos(ang), c[1] + scene.L * np.sin(ang)])
        arc[-1, 0] = 0.0
        push(gverts[right_col[0]], right_col[0], DOUTER)
        for p in arc[1:]:
            push(p, -1, DOUTER)
        cut = _graded_segment(c1[apex1, 1], arc[-1, 1], g.h_far, h_out)
        for y in cut[::-1][1:-1]:
            push((0.0, y), -1, INTERIOR)
        for p in c1[apex1:0:-1]:
            push(p, -1, D1)
        for k in range(nl, 0, -1):
            push(gverts[right_col[k]], right_col[k], D1 if k == nl else INTERIOR)
        n_loops = 2

    pts = np.asarray(loop_pts, dtype=float)
    n = len(pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n]).astype(np.int32)
    area_max = 0.5 * h_out ** 2
    out = triangle.triangulate({"vertices": pts, "segments": segs}, f"pq28Ya{area_max:.10g}Q")
    tv = out["vertices"]
    tt = out["triangles"]
    if not np.array_equal(tv[:n], pts):
        raise MeshError("triangulator moved input vertices")
    if np.any(tv[:, 0] < 0):
        raise MeshError("half-domain triangulation crossed the symmetry axis")

    # global numbering: gap block, then right-half exterior vertices, then mirrors
    n_gap = len(gverts)
    ids = np.full(len(tv), -1, dtype=np.int64)
    ids[:n] = loop_ids
    vtags = np.zeros(len(tv), dtype=np.int8)
    vtags[:n] = loop_tags
    new_r = ids < 0
    right_map = np.empty(len(tv), dtype=np.int64)
    right_map[~new_r] = ids[~new_r]
    right_map[new_r] = n_gap + np.arange(int(new_r.sum()))
    on_axis = tv[:, 0] == 0.0
    # mirror partner of each right-half vertex
    col_mirror = dict(zip(right_col.tolist(), left_col.tolist()))
    new_l = new_r & ~on_axis
    left_map = right_map.copy()
    left_map[~new_r] = [col_mirror[i] for i in ids[~new_r]]
    n_base = n_gap + int(new_r.sum())
    left_map[new_l] = n_base + np.arange(int(new_l.sum()))
    mirrored = tv[new_l].copy()
    mirrored[:, 0] = -mirrored[:, 0]
    vertices = np.vstack([gverts, tv[new_r], mirrored])
    tags = np.zeros(len(vertices), dtype=np.int8)
    tags[gidx[-1]] = D1
    tags[gidx[0]] = D2 if scene.mode == TWO_INCLUSIONS else DOUTER
    tags[right_map[new_r]] = vtags[new_r]
    tags[left_map[new_l]] = vtags[new_l]

    ext_tris = np.vstack([right_map[tt], left_map[tt][:, [0, 2, 1]]])
    triangles = np.vstack([gtris, ext_tris]).astype(np.int64)
    regions = np.concatenate([np.full(len(gtris), REGION_GAP, dtype=np.int8),
                              np.full(len(ext_tris), REGION_EXTERIOR, dtype=np.int8)])
    m = Mesh(vertices, triangles, tags, regions, gap_shape=gidx.shape, gap_index=gidx,
             n_loops=n_loops)
    ar = m.signed_areas()
    if np.any(ar <= 0):
        raise GradingError("triangle with nonpositive area")
    m.info = {"n_vertices": m.n_vertices, "n_triangles": m.n_triangles,
              "n_gap_vertices": n_gap, "n_gap_columns": len(cols)}
    return m


def _areas(verts, tris):
    p = verts[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


# --------------------------------------------------------------------------
# simple meshes used by the validation harness
# --------------------------------------------------------------------------

def annulus_mesh(r_in: float, r_out: float, n_r: int, n_theta: int) -> Mesh:
    """Structured polar mesh of an annulus; inner circle tagged D1, outer D."""
    r = np.linspace(r_in, r_out, n_r + 1)
    t = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(r, t, indexing="ij")
    verts = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    idx = np.arange(len(verts)).reshape(n_r + 1, n_theta)
    idx = np.hstack([idx, idx[:, :1]])  # periodic wrap
    tris = split_quads(idx.T.copy(), verts)  # rows = angle, cols = radius keeps orientation
    tags = np.zeros(len(verts), dtype=np.int8)
    tags[idx[0, :-1]] = D1
    tags[idx[-1, :-1]] = DOUTER
    return Mesh(verts, tris.astype(np.int64), tags, np.zeros(len(tris), dtype=np.int8), n_loops=2)


def rect_mesh(nx: int, ny: int, x0=0.0, x1=1.0, y0=0.0, y1=1.0) -> Mesh:
    """Structured rectangle; the whole boundary tagged D."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(len(verts)).reshape(ny + 1, nx + 1)
    tris = split_quads(idx, verts)
    tags = np.zeros(len(verts), dtype=np.int8)
    b = np.zeros_like(idx, dtype=bool)
    b[0, :] = b[-1, :] = b[:, 0] = b[:, -1] = True
    tags[idx[b]] = DOUTER
    return Mesh(verts, tris.astype(np.int64), tags, np.zeros(len(tris), dtype=np.int8), n_loops=1)


def equilateral_patch(n: int = 4) -> Mesh:
    """Patch of equilateral triangles (rows of a triangular lattice)."""
    verts, rows = [], []
    for j in range(n + 1):
        row = []
        for i in range(n + 1 - j):
            row.append(len(verts))
            verts.append((i + 0.5 * j, j * math.sqrt(3) / 2))
        rows.append(row)
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((rows[j][i], rows[j][i + 1], rows[j + 1][i]))
            if i < n - j - 1:
                tris.append((rows[j][i + 1], rows[j + 1][i + 1], rows[j + 1][i]))
    verts = np.array(verts)
    tags = np.zeros(len(verts), dtype=np.int8)
    return Mesh(verts, np.array(tris, dtype=np.int64), tags, np.zeros(len(tris), dtype=np.int8), n_loops=1)


# --------------------------------------------------------------------------
# quality report
# --------------------------------------------------------------------------

@dataclass
class QualityReport:
    n_vertices: int
    n_triangles: int
    min_angle_deg: float
    min_normalized_angle_deg: float
    max_aspect: float
    inverted: np.ndarray
    aniso_violations: np.ndarray

    @property
    def ok(self) -> bool:
        return len(self.inverted) == 0 and len(self.aniso_violations) == 0


def _angles(p):
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    A = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
    B = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
    return np.degrees(np.column_stack([A, B, np.pi - A - B])), np.column_stack([a, b, c])


def mesh_quality_report(m: Mesh, aniso: float = 8.0) -> QualityReport:
    """Angles, aspect ratios and flags for inverted or over-stretched triangles.

    The normalized angle is measured after stretching each triangle along its
    longest edge's normal direction so its smallest altitude matches the
    longest edge; it shows how well-shaped cells are once the intended
    anisotropy is factored out.
    """
    p = m.vertices[m.triangles]
    ang, lens = _angles(p)
    ratio = lens.max(axis=1) / lens.min(axis=1)
    area = m.signed_areas()
    inverted = np.flatnonzero(area <= 0)

    # anisotropy normalization: map each triangle by the affine map sending its
    # longest edge to unit length and its height to sqrt(3)/2
    k = np.argmax(lens, axis=1)
    # vertices opposite edges: edge a is opposite vertex 0
    e0 = np.take_along_axis(m.triangles, ((k + 1) % 3)[:, None], axis=1)[:, 0]
    e1 = np.take_along_axis(m.triangles, ((k + 2) % 3)[:, None], axis=1)[:, 0]
    apex = np.take_along_axis(m.triangles, k[:, None], axis=1)[:, 0]
    P0, P1, Q = m.vertices[e0], m.vertices[e1], m.vertices[apex]
    base = P1 - P0
    bl = np.linalg.norm(base, axis=1)
    u = base / bl[:, None]
    nrm = np.column_stack([-u[:, 1], u[:, 0]])
    rel = Q - P0
    s = np.einsum("ij,ij->i", rel, u) / bl
    h = np.abs(np.einsum("ij,ij->i", rel, nrm)) / bl
    q = np.column_stack([np.zeros_like(s), np.zeros_like(s), np.ones_like(s), np.zeros_like(s),
                         s, np.full_like(s, math.sqrt(3) / 2)]).reshape(-1, 3, 2)
    with np.errstate(invalid="ignore"):
        ang_n, _ = _angles(q)
    ang_n = np.where(h[:, None] > 0, ang_n, 0.0)
    return QualityReport(
        n_vertices=m.n_vertices,
        n_triangles=m.n_triangles,
        min_angle_deg=float(ang.min()),
        min_normalized_angle_deg=float(np.nanmin(ang_n)),
        max_aspect=float(ratio.max()),
        inverted=inverted,
        aniso_violations=np.flatnonzero(ratio > aniso * (1 + 1e-9)),
    )
