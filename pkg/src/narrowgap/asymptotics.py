"""Rate normalizers, the radial capacitance quadrature oracle, epsilon sweeps and
log-log rate fits."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_EPS_GRID = (4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3)


class RateDomainError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    def __init__(self, msg, bracket=None):
        super().__init__(msg)
        self.bracket = bracket


class DegenerateFitError(ValueError):
    pass


class WorkerConfigError(ValueError):
    """Unusable worker count from the environment."""


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise RateDomainError(f"epsilon must lie in (0, 1), got {eps!r}")


def rho_n(n: int, eps: float) -> float:
    """sqrt(eps) in 2D, eps*|ln eps| in 3D, eps from 4D on."""
    if n < 2:
        raise RateDomainError("dimension must be >= 2")
    _check_eps(eps)
    if n == 2:
        return math.sqrt(eps)
    if n == 3:
        return eps * abs(math.log(eps))
    return eps


def rho_n_m(n: int, m: int, eps: float) -> float:
    """Normalizer for relative gap profiles of growth order m."""
    if n < 2 or m < 2:
        raise RateDomainError("need n >= 2 and m >= 2")
    _check_eps(eps)
    if m > n - 1:
        return eps ** ((n - 1) / m)
    if m == n - 1:
        return eps * abs(math.log(eps))
    return eps


# --------------------------------------------------------------------------
# quadrature oracle
# --------------------------------------------------------------------------

def sphere_measure(k: int) -> float:
    """Surface measure of the unit sphere S^k (S^0 is two points)."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


def ball_volume(k: int, r: float = 1.0) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1) * r ** k


def adaptive_simpson(f, a: float, b: float, rtol: float = 1e-8, max_evals: int = 2_000_000):
    """Adaptive Simpson with Richardson correction for a positive integrand.

    Each panel is accepted when |S2 - S1| <= 15 rtol |S2|; since the integrand
    is positive the accepted local errors add up to at most rtol times the total.
    Returns ``(value, n_evals)``.
    """
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    evals = 3
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    stack = [(a, b, fa, fm, fb, whole, 0)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, S1, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl = f(0.5 * (lo + mid))
        fr = f(0.5 * (mid + hi))
        evals += 2
        left = (mid - lo) / 6.0 * (flo + 4 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4 * fr + fhi)
        S2 = left + right
        if abs(S2 - S1) <= 15.0 * rtol * abs(S2):
            total += S2 + (S2 - S1) / 15.0
            continue
        if depth >= 80:
            raise QuadratureError("maximum bisection depth reached", (lo, hi))
        if evals > max_evals:
            raise QuadratureError("evaluation budget exhausted", (lo, hi))
        stack.append((mid, hi, fmid, fr, fhi, right, depth + 1))
        stack.append((lo, mid, flo, fl, fmid, left, depth + 1))
    return total, evals


@dataclass
class OracleResult:
    n: int
    m: int
    R0: float
    R1: float
    epsilon: float
    off_sigma: float
    sigma_block: float
    evaluations: int

    @property
    def total(self) -> float:
        return self.off_sigma + self.sigma_block


def capacitance_oracle(n: int, m: int, R0: float, R1: float, eps: float,
                       rtol: float = 1e-8) -> OracleResult:
    """Integral of 1/(eps + d^m) over the (n-1)-ball of radius R1 minus the flat ball.

    The off-flat part is the radial integral
    ``|S^{n-2}| int_{R0}^{R1} r^{n-2} / (eps + (r - R0)^m) dr``; the flat ball
    contributes its exact volume divided by eps.
    """
    if n < 2 or m < 1:
        raise RateDomainError("need n >= 2 and m >= 1")
    if not (R1 > R0 >= 0):
        raise RateDomainError("need R1 > R0 >= 0")
    if not eps > 0:
        raise RateDomainError("epsilon must be positive")
    k = n - 2

    def f(r):
        t = r - R0
        return r ** k / (eps + t ** m)

    # split at the natural width of the near-singular layer
    w = eps ** (1.0 / m)
    cuts = [R0]
    x = R0 + w
    while x < R1:
        cuts.append(x)
        x = R0 + 4.0 * (x - R0)
    cuts.append(R1)
    val = 0.0
    ev = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        v, e = adaptive_simpson(f, a, b, rtol)
        val += v
        ev += e
    off = sphere_measure(k) * val
    sig = ball_volume(n - 1, R0) / eps if R0 > 0 else 0.0
    return OracleResult(n, m, R0, R1, eps, off, sig, ev)


def arctan_closed_form(R0: float, R1: float, eps: float) -> float:
    """Off-flat integral for n = 2, m = 2 in closed form."""
    return 2.0 * math.atan((R1 - R0) / math.sqrt(eps)) / math.sqrt(eps)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass
class SweepPlan:
    scene: dict                                   # scene JSON (any epsilon)
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID
    policy: Optional[dict] = None                 # GradingPolicy fields
    tol: float = 1e-10
    aux_diagnostics: bool = True
    workers: int = 1

    def __post_init__(self):
        g = [float(e) for e in self.eps_grid]
        if len(g) < 4:
            raise ValueError("epsilon grid needs at least 4 points")
        if any(b >= a for a, b in zip(g[:-1], g[1:])):
            raise ValueError("epsilon grid must be strictly decreasing")
        if any(e <= 0 for e in g):
            raise ValueError("epsilon grid must be positive")
        self.eps_grid = tuple(g)


SWEEP_COLUMNS = ("epsilon", "status", "neg_a11", "a11", "a12", "a22", "b1", "b2", "f1", "f2",
                 "C1", "C2", "potential_gap", "Qtilde", "grad_max_sigma", "grad_max_gap",
                 "grad_max_far", "grad_line0", "grad_diff_max", "local_energy_ratio", "oracle",
                 "n_vertices", "iterations", "error")


@dataclass
class SweepRecord:
    plan: SweepPlan
    rows: list = field(default_factory=list)

    def ok_rows(self):
        return [r for r in self.rows if r["status"] == "ok"]

    def column(self, name: str):
        rows = self.ok_rows()
        eps = np.array([r["epsilon"] for r in rows], dtype=float)
        y = np.array([np.nan if r.get(name) is None else r[name] for r in rows], dtype=float)
        return eps, y

    @property
    def failures(self):
        return [r for r in self.rows if r["status"] != "ok"]


def sweep_point(scene_json: dict, eps: float, policy: Optional[dict], tol: float,
                aux_diagnostics: bool = True) -> dict:
    """One full solve at a single epsilon; exceptions become a failure row."""
    from .auxiliary import AuxiliaryField, compare_gradients, difference_field, local_energy
    from .capacitance import solve_scene
    from .geometry import TWO_INCLUSIONS, scene_from_json
    from .mesh import GradingPolicy, triangulate_scene

    row = {c: None for c in SWEEP_COLUMNS}
    row["epsilon"] = float(eps)
    try:
        d = dict(scene_json)
        d["epsilon"] = float(eps)
        s = scene_from_json(d)
        pol = GradingPolicy(**policy) if policy else GradingPolicy()
        mesh = triangulate_scene(s, pol)
        sol = solve_scene(s, pol, tol=tol, mesh=mesh)
        F = sol.flux
        two = s.mode == TWO_INCLUSIONS
        row.update({
            "status": "ok",
            "neg_a11": -F.a11, "a11": F.a11, "f1": F.f1, "C1": sol.C1,
            "potential_gap": sol.potential_gap,
            "grad_max_sigma": sol.grad_max["sigma"], "grad_max_gap": sol.grad_max["gap"],
            "grad_max_far": sol.grad_max["far"], "grad_line0": sol.grad_max["line0"],
            "n_vertices": mesh.n_vertices,
            "iterations": int(sum(v.get("iterations", 0) for v in sol.diagnostics.values())),
        })
        if two:
            row.update({"a12": F.a12, "a22": F.a22, "b1": F.b1, "b2": F.b2, "f2": F.f2,
                        "C2": sol.C2})
        else:
            row["Qtilde"] = F.Qtilde
        p = s.profile
        try:
            row["oracle"] = capacitance_oracle(2, p.m, p.R0, p.R1, eps).total
        except (QuadratureError, RateDomainError):
            row["oracle"] = None
        if aux_diagnostics:
            v1 = sol.components["v1"]
            aux = AuxiliaryField("ubar1", s, extend=True)
            row["grad_diff_max"] = compare_gradients(v1, aux).max_diff
            e, dn = local_energy(difference_field(v1, aux), s, 0.0)
            row["local_energy_ratio"] = e / dn
    except Exception as exc:  # isolate per-epsilon failures
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    for k, v in row.items():
        if isinstance(v, (np.floating, np.integer)):
            row[k] = v.item()
    return row


def run_sweep(plan: SweepPlan, workers: Optional[int] = None) -> SweepRecord:
    """Solve at every epsilon of the plan; rows come back in grid order."""
    workers = plan.workers if workers is None else workers
    args = [(plan.scene, e, plan.policy, plan.tol, plan.aux_diagnostics) for e in plan.eps_grid]
    if workers <= 1:
        rows = [sweep_point(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(sweep_point, *a) for a in args]
            rows = [f.result() for f in futs]
    rows.sort(key=lambda r: -r["epsilon"])
    return SweepRecord(plan, rows)


def is_monotone_increasing_as_eps_decreases(record: SweepRecord, name: str = "neg_a11") -> bool:
    _, y = record.column(name)
    return bool(np.all(np.diff(y) > 0))


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------

@dataclass
class RateFit:
    observable: str
    model: str
    slope: float
    intercept: float
    residual: float
    n_points: int

    def to_json(self) -> dict:
        return asdict(self)


def fit_power(eps, y, observable: str = "y", model: str = "power") -> RateFit:
    """Least squares of log y on log eps.

    With ``model="power_log"`` y is first divided by |ln eps|.
    """
    eps = np.asarray(eps, dtype=float)
    y = np.asarray(y, dtype=float)
    if model not in ("power", "power_log"):
        raise ValueError(f"unknown model {model!r}")
    if model == "power_log":
        y = y / np.abs(np.log(eps))
    ok = np.isfinite(eps) & np.isfinite(y) & (eps > 0) & (y > 0)
    if ok.sum() < 3:
        raise DegenerateFitError("need at least 3 finite positive points")
    le, ly = np.log(eps[ok]), np.log(y[ok])
    if np.ptp(le) == 0:
        raise DegenerateFitError("all epsilon values coincide")
    X = np.column_stack([le, np.ones_like(le)])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    res = ly - X @ coef
    return RateFit(observable, model, float(coef[0]), float(coef[1]),
                   float(np.sqrt(np.mean(res ** 2))), int(ok.sum()))


def fit_rate(record: SweepRecord, observable: str, model: str = "power") -> RateFit:
    eps, y = record.column(observable)
    return fit_power(np.abs(eps), np.abs(y), observable, model)


def variation(values) -> float:
    """max/min - 1 of positive values."""
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min() - 1.0)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def write_sweep_csv(record: SweepRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in record.rows:
            w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in SWEEP_COLUMNS])


def read_sweep_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            out = {}
            for k, v in r.items():
                if v == "":
                    out[k] = None
                elif k in ("status", "error"):
                    out[k] = v
                else:
                    out[k] = float(v)
            rows.append(out)
    return rows


DEFAULT_FITS = (("neg_a11", "power"), ("grad_line0", "power"), ("grad_max_gap", "power"),
                ("potential_gap", "power"))


def summarize(record: SweepRecord, fits=DEFAULT_FITS) -> dict:
    out = {"schema_version": 1, "eps_grid": list(record.plan.eps_grid),
           "n_ok": len(record.ok_rows()), "n_failed": len(record.failures), "fits": []}
    for name, model in fits:
        try:
            out["fits"].append(fit_rate(record, name, model).to_json())
        except DegenerateFitError as exc:
            out["fits"].append({"observable": name, "model": model, "error": str(exc)})
    _, y = record.column("neg_a11")
    eps, _ = record.column("neg_a11")
    if len(y) and np.all(np.isfinite(y)):
        out["eps_times_neg_a11_variation"] = variation(eps * y)
        out["neg_a11_monotone"] = bool(np.all(np.diff(y) > 0))
    return out


def write_fit_json(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


def default_workers() -> int:
    env = os.environ.get("NARROWGAP_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise WorkerConfigError(f"NARROWGAP_WORKERS must be an integer, got {env!r}") from exc
        if n < 1:
            raise WorkerConfigError("NARROWGAP_WORKERS must be >= 1")
        return n
    return 1
