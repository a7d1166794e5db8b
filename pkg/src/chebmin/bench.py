"""Benchmark suites producing capture tables.

Each suite fits the objective at one or more degrees, solves the gradient
system of the approximant and compares the result with a reference set
shipped in ``data/references.json`` (generated by
``scripts/make_references.py``) or, for random polynomials, computed on the
fly by the brute-force solver.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import bruteforce
from .driver import RunResult, capture_stats, minimizers_regular, polish
from .dlsp import discrete_l2_error
from .errors import BudgetExceeded, FailNonFinite, UnknownBenchmark
from .oracle import NoiseModel, make_benchmark, poly_oracle, random_poly, with_noise
from .planner import forced_plan
from .sampling import tensor_grid

SUITES = ("dejong", "deuflhard2d", "deuflhard4d", "holder", "trefethen", "polyrecover")

CSV_COLUMNS = (
    "degree", "captured", "max_err", "mean_err", "total", "threshold", "label",
    "saddles_captured", "saddles_total", "saddles_max_err", "critical_count",
    "l2_error", "l2_norm", "polished_max_err", "polish_grad_max",
    "refined_captured", "refined_max_err", "status",
)


@lru_cache(maxsize=1)
def load_references() -> dict:
    """Reference critical-point sets keyed by benchmark name."""
    text = resources.files("chebmin").joinpath("data/references.json").read_text()
    return json.loads(text)


@dataclass
class BenchRow:
    """One line of a capture table.

    ``max_err`` and ``mean_err`` are distances, in original coordinates, from
    each reference minimizer to the nearest critical point of the approximant
    (any kind); ``captured`` counts those within ``threshold``. The
    ``refined_*`` columns repeat the comparison after a local minimization
    of the objective started at every critical point, and ``polished_*``
    after polishing only the reported minimizers.
    """

    degree: int
    captured: int
    max_err: float
    mean_err: float
    total: int
    threshold: float
    label: str = ""
    saddles_captured: Optional[int] = None
    saddles_total: Optional[int] = None
    saddles_max_err: Optional[float] = None
    critical_count: Optional[int] = None
    l2_error: Optional[float] = None
    l2_norm: Optional[float] = None
    polished_max_err: Optional[float] = None
    polish_grad_max: Optional[float] = None
    refined_captured: Optional[int] = None
    refined_max_err: Optional[float] = None
    status: str = "Complete"
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("seconds")
        return d


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    """Serialize rows; missing values become empty cells, floats use %.6g."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        d = r.to_dict()
        out = []
        for c in CSV_COLUMNS:
            v = d[c]
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append("inf" if math.isinf(v) else f"{v:.6g}")
            else:
                out.append(str(v))
        w.writerow(out)
    return buf.getvalue()


def _run(o, d: int, eps: float, **kw) -> RunResult:
    # keep partial results on solver failure so the row can report them
    try:
        return minimizers_regular(o, forced_plan(o.dim, d, eps), **kw)
    except (FailNonFinite, BudgetExceeded) as exc:
        res = getattr(exc, "result", None)
        if res is None:
            raise
        return res


def _all_critical(result: RunResult) -> np.ndarray:
    pts = [c.location for c in result.all_critical]
    return np.array(pts) if pts else np.zeros((0, result.plan_used.n))


def minima_row(result: RunResult, reference: np.ndarray, d: int, tau: float, label: str,
               seconds: float = 0.0) -> BenchRow:
    """Capture row comparing ``reference`` with every critical point of a run."""
    st = capture_stats(_all_critical(result), reference, tau)
    return BenchRow(d, st.captured_count, st.max, st.mean, len(reference), tau, label,
                    critical_count=len(result.all_critical), status=result.status, seconds=seconds)


def _polish_columns(row: BenchRow, result: RunResult, reference: np.ndarray) -> None:
    if result.polished is None or not len(result.polished):
        return
    ps = capture_stats(result.polished, reference, row.threshold)
    row.polished_max_err = ps.max
    row.polish_grad_max = float(np.max(result.polish_gradients))


def refine_from_critical(o, result: RunResult) -> np.ndarray:
    """Local minimizers of the objective reached from every critical point of the approximant."""
    dom = o.domain
    out = [dom.to_original(polish(o, dom.to_unit(c.location))) for c in result.all_critical]
    return np.array(out) if out else np.zeros((0, o.dim))


def _refined_columns(row: BenchRow, o, result: RunResult, reference: np.ndarray) -> None:
    st = capture_stats(refine_from_critical(o, result), reference, row.threshold)
    row.refined_captured = st.captured_count
    row.refined_max_err = st.max


def _timed(fn: Callable[[], RunResult]):
    t0 = time.perf_counter()
    r = fn()
    return r, time.perf_counter() - t0


def bench_deuflhard2d(degrees: Sequence[int] = (18,), threshold: float = 1e-3,
                      polish: bool = True) -> List[BenchRow]:
    ref = np.array(load_references()["deuflhard2d"]["minimizers"])
    o = make_benchmark("deuflhard2d")
    rows = []
    for d in degrees:
        r, sec = _timed(lambda: _run(o, d, 1e-3, polish_points=polish))
        row = minima_row(r, ref, d, threshold, "deuflhard2d", sec)
        _polish_columns(row, r, ref)
        rows.append(row)
    return rows


def bench_dejong(degrees: Sequence[int] = (12, 20), threshold: Optional[float] = None,
                 refine: bool = True) -> List[BenchRow]:
    """De Jong 5 on [-50, 50]^2. Default thresholds: 2.0 below degree 20, else 0.5."""
    ref = np.array(load_references()["dejong5"]["minimizers"])
    o = make_benchmark("dejong5")
    rows = []
    for d in degrees:
        tau = threshold if threshold is not None else (0.5 if d >= 20 else 2.0)
        r, sec = _timed(lambda: _run(o, d, 1e-3))
        row = minima_row(r, ref, d, tau, "dejong5", sec)
        if refine:
            _refined_columns(row, o, r, ref)
        rows.append(row)
    return rows


def bench_holder(degrees: Sequence[int] = (19,), threshold: float = 0.2,
                 refine: bool = True) -> List[BenchRow]:
    ref = np.array(load_references()["holder_table2"]["minimizers"])
    o = make_benchmark("holder_table2")
    rows = []
    for d in degrees:
        r, sec = _timed(lambda: _run(o, d, 1e-3))
        row = minima_row(r, ref, d, threshold, "holder_table2", sec)
        if refine:
            _refined_columns(row, o, r, ref)
        rows.append(row)
    return rows


def bench_trefethen(degrees: Sequence[int] = (34,), threshold: float = 1e-2,
                    l2_grid: int = 120) -> List[BenchRow]:
    """Trefethen function on [-3/8, 3/8]^2.

    Besides minimizer capture, rows report the number of critical points in
    the domain and the discrete L2 error on an ``l2_grid``-point Chebyshev grid.
    """
    ref = np.array(load_references()["trefethen"]["minimizers"])
    o = make_benchmark("trefethen")
    G = tensor_grid(2, l2_grid)
    rows = []
    for d in degrees:
        r, sec = _timed(lambda: _run(o, d, 1e-3))
        row = minima_row(r, ref, d, threshold, "trefethen", sec)
        row.l2_error = float(discrete_l2_error(r.fit.poly, o, G))
        row.l2_norm = math.sqrt(row.l2_error)
        rows.append(row)
    return rows


def deuflhard4d_reference() -> Dict[str, np.ndarray]:
    refs = load_references()["deuflhard4d"]
    return {"minimizers": np.array(refs["minimizers"]), "saddles": np.array(refs["saddles"])}


def bench_deuflhard4d(degrees: Sequence[int] = range(3, 9), threshold: float = 0.1,
                      split: int = 2, solve_margin: float = 0.1, polish: bool = True) -> List[BenchRow]:
    """Composite 4-D Deuflhard on the stretched orthant, fitted per subdomain."""
    ref = deuflhard4d_reference()
    o = make_benchmark("deuflhard4d")
    rows = []
    for d in degrees:
        r, sec = _timed(lambda: _run(o, d, 1e-3, split=split, solve_margin=solve_margin,
                                     polish_points=polish))
        row = minima_row(r, ref["minimizers"], d, threshold, f"deuflhard4d split={split}", sec)
        ss = capture_stats(_all_critical(r), ref["saddles"], threshold)
        row.saddles_captured = ss.captured_count
        row.saddles_total = len(ref["saddles"])
        row.saddles_max_err = ss.max
        _polish_columns(row, r, ref["minimizers"])
        rows.append(row)
    return rows


def polyrecover_case(n: int, d: int, seed: int, noise: float = 0.0, threshold: Optional[float] = None,
                     ref_grid: Optional[int] = None) -> BenchRow:
    """Fit a random dense polynomial at its own degree and match all critical points.

    The reference is the brute-force critical set of the true polynomial;
    every interior reference point is matched against the found critical
    points (any kind). Samples form the default Chebyshev grid for ``(n, d)``,
    which has at least ``2(d+1)`` nodes per axis. The default threshold is 1e-8 without noise and 1e-2
    with noise.
    """
    p = random_poly(n, d, seed)
    tau = threshold if threshold is not None else (1e-8 if noise == 0.0 else 1e-2)
    grid = ref_grid if ref_grid is not None else (1201 if n == 2 else 161)
    ref = bruteforce.polynomial_critical_points(p.tensor, grid=grid, radius=1e-7)
    ref = ref[np.all(np.abs(ref) < 1.0 - 1e-9, axis=1)] if len(ref) else ref.reshape(0, n)
    o = poly_oracle(p)
    if noise:
        o = with_noise(o, NoiseModel("uniform", seed=seed))
    t0 = time.perf_counter()
    try:
        r = minimizers_regular(o, forced_plan(n, d, 1e-8, eta_bar=noise))
    except (FailNonFinite, BudgetExceeded) as exc:
        r = exc.result
    sec = time.perf_counter() - t0
    found = np.array([c.location for c in r.all_critical]).reshape(-1, n)
    label = f"n={n} seed={seed} noise={noise:g}"
    if not len(ref):
        return BenchRow(d, 0, 0.0, 0.0, 0, tau, label, critical_count=len(found),
                        status=r.status, seconds=sec)
    st = capture_stats(found, ref, tau)
    return BenchRow(d, st.captured_count, st.max, st.mean, len(ref), tau, label,
                    critical_count=len(found), status=r.status, seconds=sec)


def bench_polyrecover(dims: Sequence[int] = (2, 3), degrees: Sequence[int] = (4, 6, 8),
                      seeds: Sequence[int] = (0, 1, 2, 3), noises: Sequence[float] = (0.0, 0.1)
                      ) -> List[BenchRow]:
    return [polyrecover_case(n, d, s, eta)
            for eta in noises for n in dims for d in degrees for s in seeds]


_RUNNERS = {
    "dejong": bench_dejong,
    "deuflhard2d": bench_deuflhard2d,
    "deuflhard4d": bench_deuflhard4d,
    "holder": bench_holder,
    "trefethen": bench_trefethen,
    "polyrecover": bench_polyrecover,
}


def run_suite(name: str, degrees: Optional[Sequence[int]] = None, **kwargs) -> List[BenchRow]:
    """Run one named suite; ``degrees`` overrides the suite's default list."""
    if name not in _RUNNERS:
        raise UnknownBenchmark(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    if degrees is not None:
        kwargs["degrees"] = list(degrees)
    return _RUNNERS[name](**kwargs)


__all__ = ["BenchRow", "CSV_COLUMNS", "SUITES", "bench_dejong", "bench_deuflhard2d",
           "bench_deuflhard4d", "bench_holder", "bench_polyrecover", "bench_trefethen",
           "deuflhard4d_reference", "load_references", "minima_row", "polyrecover_case", "rows_to_csv",
           "run_suite"]
