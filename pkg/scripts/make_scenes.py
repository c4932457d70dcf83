"""Write the canonical scene JSON files used by the sweeps and the README examples."""
import argparse
import json
from pathlib import Path

from narrowgap.geometry import BOUNDARY
from narrowgap.scenes import ANISO, NAMES, canonical_scene_json

VARIANTS = {
    "": {},
    "_boundary": dict(mode=BOUNDARY),
    "_aniso": dict(A=ANISO),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("scenes"))
    ap.add_argument("--eps", type=float, default=1e-2)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        for suffix, kw in VARIANTS.items():
            path = args.out / f"{name}{suffix}.json"
            path.write_text(json.dumps(canonical_scene_json(name, args.eps, **kw), indent=2, sort_keys=True) + "\n")
            print(path)


if __name__ == "__main__":
    main()
