"""Command-line entry point: solve, sweep, verify, oracle and plot.

Exit codes: 0 ok, 2 input or validation error, 3 numerical failure, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4


class InputError(Exception):
    """Bad command-line input or missing files."""


class ValidationFailure(Exception):
    """Scene violates a modelling assumption; nothing was solved."""


@dataclass
class RunConfig:
    subcommand: str
    scene: Optional[Path] = None
    out: Optional[Path] = None
    workers: int = 1
    tol: float = 1e-10
    eps_grid: Optional[tuple] = None
    field: str = "grad_u"
    region: str = "all"
    scale: str = "auto"
    dim: int = 2
    extra: dict = dc_field(default_factory=dict)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _read_scene_json(path: Optional[Path]) -> dict:
    if path is None:
        raise InputError("--scene is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"scene file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"scene file is not valid JSON: {exc}") from exc


def _policy(d: dict):
    from .mesh import GradingPolicy

    return GradingPolicy(**d["policy"]) if d.get("policy") else GradingPolicy()


def _out_dir(cfg: RunConfig) -> Path:
    if cfg.out is None:
        raise InputError("--out is required")
    cfg.out.mkdir(parents=True, exist_ok=True)
    probe = cfg.out / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise InputError(f"output directory not writable: {cfg.out}") from exc
    return cfg.out


def _parse_grid(text: Optional[str]):
    if text is None:
        return None
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise InputError(f"bad --eps-grid {text!r}") from exc
    if not vals:
        raise InputError("empty --eps-grid")
    return vals


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    from .capacitance import result_record, solve_scene
    from .geometry import TWO_INCLUSIONS, scene_from_json, validate_assumptions
    from .mesh import triangulate_scene

    d = _read_scene_json(cfg.scene)
    scene = scene_from_json(d)
    rep = validate_assumptions(scene)
    if not rep.ok:
        raise ValidationFailure("scene violates assumptions: " + ", ".join(rep.failures()))
    out = _out_dir(cfg)
    pol = _policy(d)
    mesh = triangulate_scene(scene, pol)
    sol = solve_scene(scene, pol, tol=cfg.tol, mesh=mesh)
    rec = result_record(scene, sol, mesh)
    rec["assumptions"] = rep.results
    with open(out / "result.json", "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True, default=_json_default)
    with open(out / "scene.json", "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)
    mesh.dump_csv(out)
    sol.u.dump_csv(out / "u.csv")
    sol.u.dump_gradient_csv(out / "grad_u.csv")
    names = ("v1", "v2", "v3") if scene.mode == TWO_INCLUSIONS else ("v1", "v0")
    for k in names:
        sol.components[k].dump_csv(out / f"{k}.csv")
    _log(f"solved: {mesh.n_vertices} vertices, a11={rec['a11']:.6g}, C1={rec['C1']:.6g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    from .asymptotics import DEFAULT_EPS_GRID, SweepPlan, run_sweep, summarize, write_fit_json, write_sweep_csv
    from .geometry import scene_from_json

    d = _read_scene_json(cfg.scene)
    scene_from_json(d)        # validate before any compute
    out = _out_dir(cfg)
    grid = cfg.eps_grid or DEFAULT_EPS_GRID
    try:
        plan = SweepPlan(d, grid, policy=d.get("policy"), tol=cfg.tol, workers=cfg.workers)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    t0 = time.perf_counter()
    rec = run_sweep(plan)
    write_sweep_csv(rec, out / "sweep.csv")
    summ = summarize(rec)
    write_fit_json(summ, out / "fits.json")
    for r in rec.rows:
        status = r["status"] if r["status"] == "ok" else f"FAILED ({r['error']})"
        _log(f"eps={r['epsilon']:.4g}: {status}")
    for f in summ["fits"]:
        if "slope" in f:
            _log(f"slope[{f['observable']}] = {f['slope']:.4f} (rms residual {f['residual']:.2g})")
    _log(f"sweep finished in {time.perf_counter() - t0:.1f}s")
    if not rec.ok_rows():
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    from .asymptotics import DEFAULT_EPS_GRID, capacitance_oracle, fit_power

    d = _read_scene_json(cfg.scene)
    prof = d.get("profile", {})
    try:
        m, R0, R1 = int(prof["m"]), float(prof["R0"]), float(prof["R1"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("scene profile needs m, R0 and R1") from exc
    grid = cfg.eps_grid or DEFAULT_EPS_GRID
    rows = []
    for e in grid:
        r = capacitance_oracle(cfg.dim, m, R0, R1, e)
        rows.append({"epsilon": e, "off_sigma": r.off_sigma, "sigma_block": r.sigma_block,
                     "total": r.total, "evaluations": r.evaluations})
    lines = ["epsilon,off_sigma,sigma_block,total,evaluations"]
    lines += [f"{r['epsilon']!r},{r['off_sigma']!r},{r['sigma_block']!r},{r['total']!r},{r['evaluations']}"
              for r in rows]
    text = "\n".join(lines) + "\n"
    if cfg.out is not None:
        out = _out_dir(cfg)
        (out / "oracle.csv").write_text(text)
        if len(grid) >= 3:
            fit = fit_power([r["epsilon"] for r in rows], [r["total"] for r in rows], "oracle_total")
            with open(out / "oracle_fit.json", "w") as fh:
                json.dump(fit.to_json(), fh, indent=2, sort_keys=True)
    sys.stdout.write(text)
    return EXIT_OK


def _read_field(out: Path, name: str, mesh):
    """Per-triangle values of a stored field: ``grad_<f>`` gives |grad f|."""
    if name.startswith("grad_"):
        path = out / f"{name}.csv"
        if not path.exists():
            raise InputError(f"missing gradient file {path}")
        g = np.zeros((mesh.n_triangles, 2))
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                g[int(r["triangle_id"])] = (float(r["gx"]), float(r["gy"]))
        return np.hypot(g[:, 0], g[:, 1]), "log"
    path = out / f"{name}.csv"
    if not path.exists():
        raise InputError(f"missing field file {path}")
    v = np.zeros(mesh.n_vertices)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            v[int(r["vertex_id"])] = float(r["value"])
    return v[mesh.triangles].mean(axis=1), "linear"


def plot_region_mask(mesh, region: str, R0: float):
    from .mesh import REGION_EXTERIOR, REGION_GAP

    gap = mesh.regions == REGION_GAP
    if region == "all":
        return np.ones(mesh.n_triangles, dtype=bool)
    if region == "gap":
        return gap
    if region == "sigma":
        return gap & (np.abs(mesh.centroids()[:, 0]) < R0)
    if region in ("far", "exterior"):
        return mesh.regions == REGION_EXTERIOR
    raise InputError(f"unknown region {region!r}")


def cmd_plot(cfg: RunConfig) -> int:
    from .mesh import Mesh
    from .svg import render_svg

    if cfg.out is None:
        raise InputError("--out (a solve output directory) is required")
    out = cfg.out
    if not (out / "vertices.csv").exists() or not (out / "triangles.csv").exists():
        raise InputError(f"no mesh CSVs in {out}")
    mesh = Mesh.load_csv(out)
    R0 = 0.0
    if (out / "scene.json").exists():
        R0 = float(json.loads((out / "scene.json").read_text())["profile"]["R0"])
    vals, default_scale = _read_field(out, cfg.field, mesh)
    mask = plot_region_mask(mesh, cfg.region, R0)
    if not np.any(mask):
        raise InputError(f"region {cfg.region!r} is empty")
    scale = default_scale if cfg.scale == "auto" else cfg.scale
    svg = render_svg(mesh.vertices, mesh.triangles[mask], vals[mask],
                     title=f"{cfg.field} ({cfg.region})", scale=scale)
    suffix = "" if cfg.region == "all" else f"_{cfg.region}"
    path = out / f"{cfg.field}{suffix}.svg"
    path.write_text(svg)
    _log(f"wrote {path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_checks

    results = run_checks()
    ok = True
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
        ok &= r.passed
    if cfg.out is not None:
        out = _out_dir(cfg)
        with open(out / "verify.json", "w") as fh:
            json.dump([r.__dict__ for r in results], fh, indent=2, default=_json_default)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "oracle": cmd_oracle,
            "plot": cmd_plot}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="narrowgap",
                                 description="Perfect-conductor fields between nearly touching inclusions.")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, scene=True):
        if scene:
            p.add_argument("--scene", type=Path, help="scene JSON file")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $NARROWGAP_WORKERS or 1)")
        p.add_argument("--tol", type=float, default=1e-10, help="relative solver tolerance")
        p.add_argument("--eps-grid", dest="eps_grid", default=None,
                       help="comma-separated epsilon values, decreasing")
        p.add_argument("--field", default="grad_u", help="field to plot (grad_u, u, v1, ...)")
        p.add_argument("--region", default="all", help="all | gap | sigma | far")
        return p

    common(sub.add_parser("solve", help="single-epsilon solve"))
    common(sub.add_parser("sweep", help="epsilon sweep with rate fits"))
    common(sub.add_parser("verify", help="invariant checks on small meshes"), scene=False)
    p = common(sub.add_parser("oracle", help="radial quadrature oracle"))
    p.add_argument("--dim", type=int, default=2, help="space dimension n")
    p = common(sub.add_parser("plot", help="SVG heatmap of a stored field"), scene=False)
    p.add_argument("--scale", default="auto", choices=("auto", "log", "linear"))
    return ap


def config_from_args(ns) -> RunConfig:
    from .asymptotics import default_workers

    workers = ns.workers if ns.workers is not None else default_workers()
    if workers < 1:
        raise InputError("--workers must be >= 1")
    if not (ns.tol > 0):
        raise InputError("--tol must be positive")
    return RunConfig(ns.subcommand, getattr(ns, "scene", None), ns.out, workers, ns.tol,
                     _parse_grid(ns.eps_grid), ns.field, ns.region,
                     getattr(ns, "scale", "auto"), getattr(ns, "dim", 2))


def main(argv=None) -> int:
    from .asymptotics import QuadratureError, RateDomainError, WorkerConfigError
    from .capacitance import ConductorError
    from .geometry import CoefficientError, GeometryError
    from .harmonic import SolverError
    from .mesh import MeshError

    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.subcommand](cfg)
    except (InputError, ValidationFailure, GeometryError, CoefficientError, RateDomainError,
            WorkerConfigError) as exc:
        _log(f"error: {exc}")
        return EXIT_INPUT
    except (SolverError, ConductorError, MeshError, QuadratureError, FloatingPointError) as exc:
        _log(f"numerical failure: {exc}")
        diag = getattr(exc, "diagnostics", None)
        if diag:
            _log(f"diagnostics: {diag}")
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001
        _log(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
