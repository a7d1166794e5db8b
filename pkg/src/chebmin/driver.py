"""End-to-end pipelines: sample, fit, solve the gradient system, report minimizers."""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
import scipy.optimize

from . import planner as planner_mod
from .cheb_core import TensorPoly, basis_size, evaluate, to_text
from .dlsp import FitReport, fit
from .errors import BudgetExceeded, FailNonFinite, MaxRoundsExceeded
from .oracle import BoxDomain, Oracle, rescale
from .planner import Plan
from .psolve import (BUDGET_EXCEEDED, COMPLETE, FAIL_NON_FINITE, MINIMIZER, CriticalPoint, IntervalBox,
                     critical_points, dedupe)
from .sampling import SampleSet, default_grid_size, sample_iid, tensor_grid

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class CaptureStats:
    """Distances from each reference point to the nearest found point."""

    distances: np.ndarray
    max: float
    mean: float
    captured_count: int
    threshold: float

    @property
    def total(self) -> int:
        return int(self.distances.shape[0])

    def to_dict(self) -> dict:
        return {
            "distances": [float(v) for v in self.distances],
            "max": float(self.max),
            "mean": float(self.mean),
            "captured": int(self.captured_count),
            "total": self.total,
            "threshold": float(self.threshold),
        }


@dataclass
class RoundTrace:
    A1: float
    A2: float
    lam: float
    theta: float
    theta_prime: float
    d_planned: int
    d_used: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    """Output of a run.

    ``minimizers`` and the locations in ``all_critical`` are in the original
    coordinates of the oracle's domain; Hessian eigenvalues and certified radii
    refer to the unit cube of the fitted polynomial.
    """

    minimizers: np.ndarray
    all_critical: List[CriticalPoint]
    plan_used: Plan
    fit: Optional[FitReport]
    oracle_calls: int
    adaptive_trace: List[RoundTrace] = field(default_factory=list)
    status: str = COMPLETE
    samples_used: int = 0
    eps_ball_on_boundary: List[bool] = field(default_factory=list)
    polished: Optional[np.ndarray] = None
    polish_gradients: Optional[np.ndarray] = None
    domain: Optional[BoxDomain] = None

    def critical_of_kind(self, kind: str) -> np.ndarray:
        pts = [p.location for p in self.all_critical if p.kind == kind]
        return np.array(pts) if pts else np.zeros((0, self.plan_used.n))

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "minimizers": [[float(v) for v in x] for x in self.minimizers],
            "eps_ball_on_boundary": [bool(b) for b in self.eps_ball_on_boundary],
            "critical_points": [p.to_dict() for p in self.all_critical],
            "plan": self.plan_used.to_dict(),
            "fit": self.fit.to_dict() if self.fit is not None else None,
            "oracle_calls": int(self.oracle_calls),
            "samples_used": int(self.samples_used),
            "adaptive_trace": [r.to_dict() for r in self.adaptive_trace],
            "domain": self.domain.as_list() if self.domain is not None else None,
        }
        if self.polished is not None:
            out["polished"] = [[float(v) for v in x] for x in self.polished]
            out["polish_gradient_inf"] = [float(v) for v in self.polish_gradients]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def chop(p: TensorPoly, rel: float = 64 * _EPS) -> TensorPoly:
    """Zero out coefficients below ``rel`` times the coefficient 1-norm."""
    t = np.array(p.tensor)
    total = np.sum(np.abs(t))
    if total == 0:
        return p
    t[np.abs(t) <= rel * total] = 0.0
    return TensorPoly(p.dim, p.degree, t)


def grid_points_per_axis(n: int, d: int, k: Optional[int] = None) -> int:
    """Points per axis for a grid fit of degree ``d`` with ``k`` requested samples.

    A requested count is honoured (rounded up to a full grid), but never below
    ``d + 1`` per axis. Without one, :func:`default_grid_size` is used.
    """
    cap = default_grid_size(n, d)
    if k is None:
        return cap
    m = max(1, int(math.ceil(k ** (1.0 / n) - 1e-9)))
    while m ** n < k:
        m += 1
    return max(m, d + 1)


def draw_samples(n: int, d: int, k: Optional[int], mode: str, seed: int) -> SampleSet:
    """Sample set for a degree-``d`` fit; ``k`` is capped at the default grid size."""
    cap = default_grid_size(n, d)
    if mode == "grid":
        m = cap if k is None else min(grid_points_per_axis(n, d, k), cap)
        return tensor_grid(n, max(m, d + 1))
    if mode == "iid":
        kk = cap ** n if k is None else min(int(k), cap ** n)
        return sample_iid(n, max(kk, basis_size(n, d)), seed)
    raise ValueError(f"unknown sampling mode {mode!r}")


def error_check(w: TensorPoly, o: Oracle, samples: SampleSet, eta: float = 0.0) -> float:
    """Mean squared deviation between oracle values and ``w`` over ``samples``.

    For samples drawn from the Chebyshev measure this estimates the squared
    L2 error divided by the total mass of the measure.
    """
    if len(samples) == 0:
        raise ValueError("error check needs at least one sample")
    y = o.evaluate(samples.points, eta)
    return float(np.mean((y - evaluate(w, samples.points)) ** 2))


def capture_stats(found, reference, threshold: float) -> CaptureStats:
    """Nearest-found distance for each reference point and how many are within ``threshold``."""
    ref = np.asarray(reference, dtype=float)
    if ref.size == 0:
        raise ValueError("reference set is empty")
    ref = ref.reshape(ref.shape[0], -1)
    F = np.asarray(found, dtype=float)
    if F.size == 0:
        dist = np.full(ref.shape[0], np.inf)
    else:
        F = F.reshape(-1, ref.shape[1])
        dist = np.min(np.linalg.norm(ref[:, None, :] - F[None, :, :], axis=2), axis=1)
    return CaptureStats(dist, float(np.max(dist)), float(np.mean(dist)),
                        int(np.sum(dist <= threshold)), float(threshold))


def fd_gradient(o: Oracle, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of the exact oracle at a unit-cube point."""
    n = x.shape[0]
    E = h * np.eye(n)
    v = o.evaluate(np.concatenate([x + E, x - E]), 0.0)
    return (v[:n] - v[n:]) / (2 * h)


def polish(o: Oracle, x0, iters: int = 200, h: float = 1e-6, gtol: float = 1e-10) -> np.ndarray:
    """Refine a minimizer estimate by bound-constrained quasi-Newton descent.

    Works in the oracle's unit coordinates with L-BFGS-B (projected onto the
    cube) on exact oracle values and central finite-difference gradients.
    The starting point is returned if it is never improved upon.
    """
    x0 = np.clip(np.asarray(x0, dtype=float), -1.0, 1.0)
    f0 = o.evaluate(x0, 0.0)

    def fun(z):
        return float(o.evaluate(z, 0.0))

    def jac(z):
        zc = np.clip(z, -1.0 + h, 1.0 - h)
        return fd_gradient(o, zc, h)

    res = scipy.optimize.minimize(fun, x0, jac=jac, method="L-BFGS-B",
                                  bounds=[(-1.0, 1.0)] * x0.shape[0],
                                  options={"maxiter": iters, "gtol": gtol, "ftol": 1e-16,
                                           "maxcor": 20})
    x = np.asarray(res.x, dtype=float)
    if not np.isfinite(res.fun) or res.fun > f0:
        return x0
    return x


# ---------------------------------------------------------------------------
# regular run
# ---------------------------------------------------------------------------

def _solve_unit(p: TensorPoly, accuracy: float, budget: int, margin: float = 0.0):
    box = None
    if margin > 0.0:
        box = IntervalBox(-(1.0 + margin) * np.ones(p.dim), (1.0 + margin) * np.ones(p.dim))
    return critical_points(p, box, accuracy=accuracy, budget=budget)


def _single_run(o: Oracle, plan: Plan, mode: str, seed: int, samples: Optional[int],
                budget: int, method: str, margin: float = 0.0):
    S = draw_samples(plan.n, plan.d, samples if samples is not None else
                     (None if plan.forced else plan.k), mode, seed)
    y = o.evaluate(S.points, plan.eta_bar)
    rep = fit(S, y, plan.d, method=method)
    w = chop(rep.poly)
    outcome = _solve_unit(w, plan.eps / 2.0, budget, margin) if margin else \
        _solve_unit(w, plan.eps / 2.0, budget)
    return rep, w, outcome, len(S)


def minimizers_regular(o: Oracle, plan: Plan, sampling: str = "grid", seed: int = 0,
                       samples: Optional[int] = None, split: int = 1, polish_points: bool = False,
                       budget: int = 10 ** 7, method: str = "orthogonal",
                       solve_margin: float = 0.0) -> RunResult:
    """Sample, fit at the planned degree and return the approximant's minimizers.

    Parameters
    ----------
    o : Oracle
    plan : Plan
        Degree, noise bound and sample count. ``plan.eps`` is measured in the
        unit cube; the gradient system is solved at accuracy ``eps / 2``.
    sampling : {"grid", "iid"}
    samples : int, optional
        Requested sample count per (sub)domain; defaults to the plan's count,
        capped at :func:`default_grid_size` points per axis.
    split : int
        Number of equal pieces per axis. Each piece is fitted separately and
        the results are merged, with duplicates closer than ``eps / 4`` removed.
    solve_margin : float
        With ``split > 1``, each piece's gradient system is solved on the piece
        enlarged by this fraction of its half-width per side. Points found in
        the enlargement are kept only when no piece reports a point within the
        margin's width of them and they lie in the full box; this recovers
        critical points that sit on or near the cuts between pieces.
    polish_points : bool
        Refine every reported minimizer with :func:`polish`.

    Raises
    ------
    FailNonFinite, BudgetExceeded
        When the gradient solve does not complete; the partial result is
        attached as ``exc.result``.
    """
    if o.dim != plan.n:
        raise ValueError("oracle dimension does not match plan")
    n = plan.n
    start_calls = o.call_count
    crit_unit: List[CriticalPoint] = []
    status = COMPLETE
    last_fit = None
    used = 0
    edges = np.linspace(-1.0, 1.0, split + 1)
    margin = solve_margin if split > 1 else 0.0
    spill: List[CriticalPoint] = []
    for cell in itertools.product(range(split), repeat=n):
        sub = BoxDomain([edges[c] for c in cell], [edges[c + 1] for c in cell])
        so = rescale(o, sub) if split > 1 else o
        rep, w, outcome, k_used = _single_run(so, plan, sampling, seed, samples, budget, method, margin)
        last_fit = rep
        used += k_used
        if outcome.status != COMPLETE and status == COMPLETE:
            status = outcome.status
        for p in outcome.points:
            inside = bool(np.all(np.abs(p.location) <= 1.0 + 1e-12))
            if split > 1:
                p = CriticalPoint(sub.to_original(p.location), p.certified_radius, p.kind,
                                  p.hess_eigs, p.boundary_proximal, p.residual)
            if inside:
                crit_unit.append(p)
            elif np.all(np.abs(p.location) <= 1.0 + 1e-12):
                spill.append(p)
    if split > 1:
        crit_unit = dedupe(crit_unit, plan.eps / 4.0)
        reach = margin * 2.0 / split
        for p in dedupe(spill, reach):
            if all(np.linalg.norm(p.location - q.location) > reach for q in crit_unit):
                crit_unit.append(p)
    result = _package(o, plan, crit_unit, last_fit, o.call_count - start_calls, status, used)
    if polish_points and len(result.minimizers):
        _polish_result(o, result)
    result.oracle_calls = o.call_count - start_calls
    if status == FAIL_NON_FINITE:
        err = FailNonFinite("gradient system of the approximant has no isolated solution set")
        err.result = result
        raise err
    if status == BUDGET_EXCEEDED:
        err = BudgetExceeded("subdivision budget exhausted")
        err.result = result
        raise err
    return result


def _package(o: Oracle, plan: Plan, crit_unit: List[CriticalPoint], rep, calls: int,
             status: str, used: int) -> RunResult:
    dom = o.domain
    crit = []
    mins_unit = []
    for p in crit_unit:
        crit.append(CriticalPoint(dom.to_original(p.location), p.certified_radius, p.kind,
                                  p.hess_eigs, p.boundary_proximal, p.residual))
        if p.kind == MINIMIZER:
            mins_unit.append(p.location)
    mins_unit = np.array(mins_unit) if mins_unit else np.zeros((0, plan.n))
    flags = [bool(np.any(np.abs(x) + plan.eps > 1.0)) for x in mins_unit]
    mins = dom.to_original(mins_unit) if len(mins_unit) else mins_unit
    return RunResult(mins, crit, plan, rep, calls, [], status, used, flags, domain=dom)


def _polish_result(o: Oracle, result: RunResult) -> None:
    dom = o.domain
    out, grads = [], []
    for x in result.minimizers:
        t = polish(o, dom.to_unit(x))
        g = fd_gradient(o, np.clip(t, -1 + 1e-6, 1 - 1e-6)) / dom.scale
        out.append(dom.to_original(t))
        grads.append(float(np.max(np.abs(g))))
    result.polished = np.array(out)
    result.polish_gradients = np.array(grads)


def run_with_degree(o: Oracle, d: int, eps: float = 1e-3, **kwargs) -> RunResult:
    """Regular run at a fixed degree with exact oracle values."""
    return minimizers_regular(o, planner_mod.forced_plan(o.dim, d, eps), **kwargs)


# ---------------------------------------------------------------------------
# adaptive run
# ---------------------------------------------------------------------------

def minimizers_adaptive(o: Oracle, eps: float, alpha: float = 0.05, tol: Optional[float] = None,
                        max_rounds: int = 20, delta: float = 0.5, lam0: float = 2.0 ** -16,
                        A1_0: float = 2.0, A2_0: float = 2.0, m: Optional[float] = None,
                        sampling: str = "iid", seed: int = 0, max_degree: int = 30,
                        samples: Optional[int] = None, budget: int = 10 ** 7,
                        polish_points: bool = False) -> RunResult:
    """Adaptive search for the regularity constants.

    Each round plans with the current ``(lam, A1, A2)``, fits ``w`` at degree
    ``d`` and measures its mean squared error ``theta`` on fresh samples, then
    fits a degree ``d + 1`` approximant on ``2k`` fresh samples at half the
    noise bound and measures its error ``theta'`` on those samples. When both
    are below ``tol`` the critical points of ``w`` are returned; otherwise
    ``A1`` and ``A2`` double and ``lam`` halves.

    The planned degree is capped at ``max_degree``. Once the cap is reached,
    further rounds cannot change the fit, so a failed stop test there raises
    :class:`MaxRoundsExceeded` immediately.
    """
    n = o.dim
    tol = eps if tol is None else tol
    if not 0.0 < tol < 1.0:
        raise ValueError("tolerance must lie in (0, 1)")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    m = planner_mod.min_smoothness(n) if m is None else m
    start_calls = o.call_count
    lam, A1, A2 = lam0, A1_0, A2_0
    trace: List[RoundTrace] = []
    draw = itertools.count(seed)
    for _ in range(max_rounds):
        p = planner_mod.plan(n, m, eps, alpha, delta, lam, A1, A2)
        d = min(p.d, max_degree)
        eta = planner_mod.noise_bound(n, d, eps, lam, A2) if d < p.d else p.eta_bar
        k = p.k if samples is None else samples
        p_used = replace(p, d=d, eta_bar=eta, D=basis_size(n, d))
        S = draw_samples(n, d, k, sampling, next(draw))
        rep = fit(S, o.evaluate(S.points, eta), d)
        w = chop(rep.poly)
        S1 = draw_samples(n, d, k, sampling, next(draw))
        theta = error_check(w, o, S1, eta)
        k2 = None if k is None else 2 * k
        S2 = draw_samples(n, d + 1, k2, sampling, next(draw))
        if sampling == "iid" and len(S2) < 2 * len(S1):
            S2 = sample_iid(n, 2 * len(S1), int(S2.provenance["seed"]))
        rep2 = fit(S2, o.evaluate(S2.points, eta / 2.0), d + 1)
        theta2 = error_check(rep2.poly, o, S2, eta / 2.0)
        trace.append(RoundTrace(A1, A2, lam, theta, theta2, p.d, d))
        if theta < tol and theta2 < tol:
            outcome = _solve_unit(w, eps / 2.0, budget)
            status = outcome.status
            if status == FAIL_NON_FINITE:
                warnings.warn("approximant has a non-isolated critical set; no minimizers reported",
                              RuntimeWarning, stacklevel=2)
                pts = []
            else:
                pts = outcome.points
            result = _package(o, p_used, pts, rep, 0, status, len(S))
            result.adaptive_trace = trace
            if polish_points and len(result.minimizers):
                _polish_result(o, result)
            result.oracle_calls = o.call_count - start_calls
            if status == BUDGET_EXCEEDED:
                err = BudgetExceeded("subdivision budget exhausted")
                err.result = result
                raise err
            return result
        if d >= max_degree:
            err = MaxRoundsExceeded(
                f"stop test failed at the degree cap {max_degree} "
                f"(theta={theta:.3g}, theta'={theta2:.3g}, tol={tol:.3g})")
            err.trace = trace
            raise err
        A1, A2, lam = 2.0 * A1, 2.0 * A2, lam / 2.0
    err = MaxRoundsExceeded(f"no convergence within {max_rounds} rounds")
    err.trace = trace
    raise err


def merge_points(points: Sequence[np.ndarray], radius: float) -> np.ndarray:
    kept: List[np.ndarray] = []
    for x in points:
        if all(np.linalg.norm(x - y) > radius for y in kept):
            kept.append(np.asarray(x))
    return np.array(kept)
