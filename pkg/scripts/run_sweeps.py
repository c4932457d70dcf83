"""Run the reference epsilon sweeps and write sweep.csv / fits.json per case."""
import argparse
import time
from pathlib import Path

from narrowgap.asymptotics import (DEFAULT_EPS_GRID, SweepPlan, default_workers, run_sweep, summarize,
                                   write_fit_json, write_sweep_csv)
from narrowgap.geometry import BOUNDARY
from narrowgap.scenes import ANISO, canonical_scene_json

CASES = {
    "strict": ("strict", {}),
    "m4": ("m4", {}),
    "flat": ("flat", {}),
    "flat_boundary": ("flat", dict(mode=BOUNDARY)),
    "strict_aniso": ("strict", dict(A=ANISO)),
    "flat_aniso": ("flat", dict(A=ANISO)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--cases", nargs="*", default=list(CASES), choices=list(CASES))
    ap.add_argument("--eps-grid", default=None, help="comma-separated, decreasing")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()
    grid = tuple(float(e) for e in args.eps_grid.split(",")) if args.eps_grid else DEFAULT_EPS_GRID
    workers = args.workers or default_workers()
    for key in args.cases:
        name, kw = CASES[key]
        d = canonical_scene_json(name, grid[0], **kw)
        policy = d.pop("policy")
        t0 = time.perf_counter()
        rec = run_sweep(SweepPlan(d, grid, policy, workers=workers))
        out = args.out / key
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rec, out / "sweep.csv")
        summ = summarize(rec)
        write_fit_json(summ, out / "fits.json")
        slopes = ", ".join(f"{f['observable']} {f['slope']:+.4f}" for f in summ["fits"] if "slope" in f)
        print(f"{key:14s} {time.perf_counter() - t0:6.1f}s  {slopes}  failures: {len(rec.failures)}")


if __name__ == "__main__":
    main()
