#!/usr/bin/env python3
"""Regenerate the benchmark reference sets in src/chebmin/data/references.json.

Minimizers come from dense-grid seeding plus a derivative-free sphere
search; full critical-point sets of 2-D functions come
from sign changes of a finite-difference gradient plus damped Newton. The 4-D
composite set is the tensor product of the 2-D critical points on the two
factor boxes, without the central saddle at the origin.

Usage:
    python3 scripts/make_references.py [--out PATH]
"""

from __future__ import annotations

import argparse
import itertools
import json
import time
from pathlib import Path

import numpy as np

from chebmin.bruteforce import function_critical_points_2d, function_minimizers
from chebmin.oracle import ORTHANT_4D, dejong5, deuflhard2d, holder_table2, trefethen

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "chebmin" / "data" / "references.json"


def _rows(a) -> list:
    return [[float(v) for v in x] for x in np.asarray(a)]


def _sorted(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.size == 0:
        return a
    return a[np.lexsort(a.T[::-1])]


def deuflhard_sets() -> dict:
    pts, kinds = function_critical_points_2d(deuflhard2d, [-1.1, -1.1], [1.1, 1.1], grid=801)
    by_kind = {k: _sorted(pts[[i for i, kk in enumerate(kinds) if kk == k]])
               for k in ("Minimizer", "Saddle", "Maximizer")}
    return {
        "domain": [[-1.1, 1.1], [-1.1, 1.1]],
        "minimizers": _rows(by_kind["Minimizer"]),
        "saddles": _rows(by_kind["Saddle"]),
        "maximizers": _rows(by_kind["Maximizer"]),
    }


def deuflhard4d_sets() -> dict:
    lo = [ORTHANT_4D[0][0], ORTHANT_4D[1][0]]
    hi = [ORTHANT_4D[0][1], ORTHANT_4D[1][1]]
    pts, kinds = function_critical_points_2d(deuflhard2d, lo, hi, grid=801)
    keep = [i for i in range(len(pts)) if np.linalg.norm(pts[i]) > 1e-6]
    pts = pts[keep]
    kinds = [kinds[i] for i in keep]
    mins, saddles = [], []
    for (a, ka), (b, kb) in itertools.product(zip(pts, kinds), repeat=2):
        x = np.concatenate([a, b])
        (mins if ka == kb == "Minimizer" else saddles).append(x)
    return {
        "domain": ORTHANT_4D,
        "factor_points": _rows(pts),
        "factor_kinds": kinds,
        "minimizers": _rows(_sorted(np.array(mins))),
        "saddles": _rows(_sorted(np.array(saddles))),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    t0 = time.time()
    refs = {
        "dejong5": {
            "domain": [[-50.0, 50.0], [-50.0, 50.0]],
            "minimizers": _rows(_sorted(function_minimizers(
                dejong5, [-50.0, -50.0], [50.0, 50.0], grid=801, radius=1e-3))),
        },
        "deuflhard2d": deuflhard_sets(),
        "deuflhard4d": deuflhard4d_sets(),
        "holder_table2": {
            "domain": [[-10.0, 10.0], [-10.0, 10.0]],
            "minimizers": _rows(_sorted(function_minimizers(
                holder_table2, [-10.0, -10.0], [10.0, 10.0], grid=801, radius=1e-3))),
        },
        "trefethen": {
            "domain": [[-0.375, 0.375], [-0.375, 0.375]],
            "minimizers": _rows(_sorted(function_minimizers(
                trefethen, [-0.375, -0.375], [0.375, 0.375], grid=1201, radius=1e-6))),
        },
    }
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(refs, indent=1, sort_keys=True) + "\n")
    for name, r in refs.items():
        print(f"{name}: {len(r['minimizers'])} minimizers")
    print(f"wrote {args.out} in {time.time() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
