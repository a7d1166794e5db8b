"""Real solutions of square polynomial systems in a box, and critical points.

The solver works on Chebyshev coefficients. Every cell of a subdivision is
re-expanded in local coordinates ``x = mid + half * s`` with ``s`` in
[-1, 1]^n. Because ``|T_k| <= 1`` there, the local constant coefficient plus
or minus the sum of the other coefficient magnitudes encloses the range of a
component, which gives a cheap exclusion test and interval enclosures of the
Jacobian for a Krawczyk step. A Krawczyk image strictly inside the cell proves
that the cell holds exactly one solution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cheb_core import TensorPoly, evaluate, gauss_chebyshev_nodes, partial, sup_norm_grid
from .errors import DimensionMismatch

_EPS = np.finfo(float).eps

COMPLETE = "Complete"
FAIL_NON_FINITE = "FailNonFinite"
BUDGET_EXCEEDED = "BudgetExceeded"

MINIMIZER = "Minimizer"
MAXIMIZER = "Maximizer"
SADDLE = "Saddle"
DEGENERATE = "Degenerate"


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IntervalBox:
    """Closed box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("lo and hi have different lengths")
        if np.any(lo > hi):
            raise ValueError("interval box needs lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n: int) -> "IntervalBox":
        return cls(-np.ones(n), np.ones(n))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def boundary_distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.min(np.minimum(x - self.lo, self.hi - x)))

    def to_list(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]


@dataclass
class CriticalPoint:
    """A located solution with its classification.

    ``certified_radius`` is the half-width of a cube around ``location`` on
    which a Krawczyk test proved a unique solution (0 when only the residual
    was checked).
    """

    location: np.ndarray
    certified_radius: float
    kind: str
    hess_eigs: np.ndarray
    boundary_proximal: bool = False
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "location": [float(v) for v in self.location],
            "kind": self.kind,
            "eigs": [float(v) for v in self.hess_eigs],
            "certified_radius": float(self.certified_radius),
            "residual": float(self.residual),
            "boundary_proximal": bool(self.boundary_proximal),
        }


@dataclass
class SolveOutcome:
    status: str
    points: List[CriticalPoint]
    unresolved_boxes: List[IntervalBox] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.status == COMPLETE

    def locations(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.stats.get("dim", 0)))
        return np.array([p.location for p in self.points])

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "points": [p.to_dict() for p in self.points],
            "unresolved_boxes": [b.to_list() for b in self.unresolved_boxes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# gradients, eigenvalues, classification
# ---------------------------------------------------------------------------

def gradient(p: TensorPoly) -> List[TensorPoly]:
    """Partial derivatives of ``p`` along every axis."""
    return [partial(p, i) for i in range(p.dim)]


def hessian_polys(p: TensorPoly) -> List[List[TensorPoly]]:
    g = gradient(p)
    return [[partial(gi, j) for j in range(p.dim)] for gi in g]


def jacobi_eigenvalues(A, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps stop once the off-diagonal Frobenius norm is below ``tol`` (times
    the norm of ``A`` when that exceeds one).
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.triu(A, 1) ** 2)) * 2.0)
        if off <= tol * scale * 1e-3:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def kind_from_eigs(eigs: np.ndarray, tol: float) -> str:
    if np.any(np.abs(eigs) <= tol):
        return DEGENERATE
    if np.all(eigs > 0):
        return MINIMIZER
    if np.all(eigs < 0):
        return MAXIMIZER
    return SADDLE


def classify(p: TensorPoly, x, classification_tol: float = 1e-8) -> Tuple[str, np.ndarray]:
    """Kind of the critical point ``x`` of ``p`` and its Hessian eigenvalues."""
    x = np.asarray(x, dtype=float)
    H = np.array([[evaluate(hij, x) for hij in row] for row in hessian_polys(p)])
    eigs = jacobi_eigenvalues(H)
    return kind_from_eigs(eigs, classification_tol), eigs


def dedupe(points: Sequence[CriticalPoint], radius: float) -> List[CriticalPoint]:
    """Greedy clustering: keep points in order of ascending residual, drop any
    point within ``radius`` of one already kept."""
    if radius <= 0:
        return list(points)
    order = sorted(range(len(points)), key=lambda i: points[i].residual)
    kept: List[CriticalPoint] = []
    for i in order:
        p = points[i]
        if all(np.linalg.norm(p.location - q.location) > radius for q in kept):
            kept.append(p)
    # restore input order for stable output
    pos = {id(p): i for i, p in enumerate(points)}
    return sorted(kept, key=lambda p: pos[id(p)])


# ---------------------------------------------------------------------------
# local re-expansion
# ---------------------------------------------------------------------------

class _System:
    """Padded coefficient tensors for a square system and its Jacobian."""

    def __init__(self, system: Sequence[TensorPoly]):
        n = system[0].dim
        self.n = n
        self.raw = list(system)
        self.raw_jac = [[partial(g, j) for j in range(n)] for g in system]
        deg = max(g.degree for g in system)
        self.m = deg + 1
        scales = np.array([np.sum(np.abs(g.tensor)) for g in system])
        self.scales = scales
        norm = [g * (1.0 / s) for g, s in zip(system, scales)]
        self.G = [g.with_degree(deg) for g in norm]
        self.H = [[partial(g, j).with_degree(deg) for j in range(n)] for g in norm]
        self.Gt = np.stack([g.tensor for g in self.G])
        self.Ht = np.stack([h.tensor for row in self.H for h in row])
        fac = 16.0 * _EPS * self.m ** 2 * (n + 1)
        self.pad_g = fac * np.sum(np.abs(self.Gt).reshape(n, -1), axis=1)
        self.pad_h = fac * np.sum(np.abs(self.Ht).reshape(n * n, -1), axis=1).reshape(n, n)
        j = np.arange(self.m)
        t = gauss_chebyshev_nodes(self.m)
        self._dct = (2.0 / self.m) * np.cos(np.outer(j, np.arccos(t)))
        self._dct[0] *= 0.5
        self._t = t
        t0 = np.zeros(self.m)
        t0[0::4] = 1.0
        t0[2::4] = -1.0
        self._t0 = t0

    # values and Jacobians of the normalized system at global points
    def values(self, X: np.ndarray) -> np.ndarray:
        return np.stack([evaluate(g, X) for g in self.G], axis=1)

    def jacobians(self, X: np.ndarray) -> np.ndarray:
        n = self.n
        J = np.empty((X.shape[0], n, n))
        for i in range(n):
            for j in range(n):
                J[:, i, j] = evaluate(self.H[i][j], X)
        return J

    def raw_values(self, X: np.ndarray) -> np.ndarray:
        return np.stack([evaluate(g, X) for g in self.raw], axis=1)

    def raw_jacobian(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        return np.array([[evaluate(self.raw_jac[i][j], x) for j in range(n)] for i in range(n)])

    def _axis_maps(self, mid: np.ndarray, half: np.ndarray) -> List[np.ndarray]:
        """Per-axis matrices ``M[b]`` sending global 1-D coefficients to local ones."""
        mats = []
        for axis in range(self.n):
            x = mid[:, axis, None] + half[:, axis, None] * self._t[None, :]   # (B, m)
            V = np.empty(x.shape + (self.m,))
            V[..., 0] = 1.0
            if self.m > 1:
                V[..., 1] = x
            for k in range(2, self.m):
                V[..., k] = 2.0 * x * V[..., k - 1] - V[..., k - 2]
            mats.append(np.einsum("ji,bik->bjk", self._dct, V))
        return mats

    def local(self, T: np.ndarray, mats: List[np.ndarray]) -> np.ndarray:
        """Local coefficients of every tensor in ``T`` (P, m, ..., m) for each cell."""
        B = mats[0].shape[0]
        n = self.n
        X = np.broadcast_to(T[None], (B,) + T.shape)
        for axis in range(n):
            X = np.moveaxis(X, 2 + axis, -1)
            M = mats[axis].reshape((B,) + (1,) * (X.ndim - 3) + (self.m, self.m))
            X = X @ np.swapaxes(M, -1, -2)
            X = np.moveaxis(X, -1, 2 + axis)
        return X

    def at_center(self, L: np.ndarray) -> np.ndarray:
        """Value of local expansions at ``s = 0``."""
        X = L
        for _ in range(self.n):
            X = X @ self._t0
        return X

    def krawczyk(self, lo: np.ndarray, hi: np.ndarray, check_range: bool = True):
        """Exclusion and Krawczyk tests on a batch of boxes.

        Returns boolean arrays ``(excluded, unique)`` and the Krawczyk center
        in local coordinates.
        """
        n = self.n
        B = lo.shape[0]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        mats = self._axis_maps(mid, half)
        excluded = np.zeros(B, dtype=bool)
        if check_range:
            Lg = self.local(self.Gt, mats).reshape(B, n, -1)
            c0 = Lg[:, :, 0]
            rest = np.sum(np.abs(Lg), axis=2) - np.abs(c0)
            excluded = np.any(np.abs(c0) > rest + self.pad_g[None], axis=1)
        unique = np.zeros(B, dtype=bool)
        center = np.zeros((B, n))
        live = np.nonzero(~excluded)[0]
        if live.size == 0:
            return excluded, unique, center
        sub = [M[live] for M in mats]
        hl = half[live]
        Lg = self.local(self.Gt, sub)
        f0 = self.at_center(Lg)                                       # (b, n)
        Lh_full = self.local(self.Ht, sub)
        Jmid = self.at_center(Lh_full).reshape(live.size, n, n) * hl[:, None, :]
        Lh = Lh_full.reshape(live.size, n, n, -1)
        Jc = Lh[..., 0]
        Jr = (np.sum(np.abs(Lh), axis=3) - np.abs(Jc) + self.pad_h[None]) * hl[:, None, :]
        Jc = Jc * hl[:, None, :]
        ok = np.abs(np.linalg.det(Jmid)) > 0
        idx = np.nonzero(ok)[0]
        if idx.size:
            Y = np.linalg.inv(Jmid[idx])
            aY = np.abs(Y)
            cen = -np.einsum("bij,bj->bi", Y, f0[idx])
            I = np.eye(n)[None]
            rad = (np.sum(np.abs(I - Y @ Jc[idx]), axis=2)
                   + np.sum(aY @ Jr[idx], axis=2)
                   + aY @ self.pad_g)
            inside = np.all(np.abs(cen) + rad < 1.0, axis=1)
            disjoint = np.any(np.abs(cen) - rad > 1.0, axis=1)
            finite = np.all(np.isfinite(rad), axis=1) & np.all(np.isfinite(cen), axis=1)
            unique[live[idx]] = inside & finite
            excluded[live[idx]] = disjoint & finite
            center[live[idx]] = np.where(np.isfinite(cen), cen, 0.0)
        return excluded, unique, center

    def newton(self, X0: np.ndarray, iters: int = 40) -> Tuple[np.ndarray, np.ndarray]:
        X = np.array(X0, dtype=float)
        active = np.ones(X.shape[0], dtype=bool)
        for _ in range(iters):
            if not active.any():
                break
            ia = np.nonzero(active)[0]
            F = self.values(X[ia])
            J = self.jacobians(X[ia])
            try:
                step = np.linalg.solve(J, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.stack([np.linalg.lstsq(Ji, Fi, rcond=None)[0] for Ji, Fi in zip(J, F)])
            step = np.where(np.isfinite(step), step, 0.0)
            X[ia] -= step
            done = np.max(np.abs(step), axis=1) <= 4 * _EPS * (1.0 + np.max(np.abs(X[ia]), axis=1))
            active[ia[done]] = False
        return X, ~active


def krawczyk_cube(system: Sequence[TensorPoly], center, radius: float) -> bool:
    """True when the Krawczyk image of the cube of half-width ``radius`` about
    ``center`` lies strictly inside it (a unique solution exists there)."""
    S = _System(system)
    c = np.asarray(center, dtype=float)[None]
    _, unique, _ = S.krawczyk(c - radius, c + radius, check_range=False)
    return bool(unique[0])


# ---------------------------------------------------------------------------
# main solver
# ---------------------------------------------------------------------------

def _bezout(system: Sequence[TensorPoly]) -> int:
    out = 1
    for g in system:
        out *= max(1, g.degree)
    return out


def solve_in_box(system: Sequence[TensorPoly], box: Optional[IntervalBox] = None,
                 accuracy: float = 1e-8, budget: int = 10 ** 7,
                 classification_tol: float = 1e-8, margin: float = 1e-9,
                 chunk: Optional[int] = None) -> SolveOutcome:
    """All real solutions of a square polynomial system inside ``box``.

    Parameters
    ----------
    system : list of TensorPoly
        ``n`` polynomials in ``n`` variables.
    box : IntervalBox, optional
        Search region inside [-1, 1]^n (default: the whole cube).
    accuracy : float
        Every solution in the box lies within ``accuracy`` of a returned point.
    budget : int
        Maximum number of cells examined before giving up.
    classification_tol : float
        Eigenvalues of the symmetrized Jacobian at most this in magnitude mark
        a point as degenerate.
    margin : float
        Points closer than this to the box boundary are flagged.

    Returns
    -------
    SolveOutcome
        ``Complete`` when every cell was resolved; ``FailNonFinite`` when a
        component vanishes identically or cells keep surviving below the
        accuracy (a sign of a non-isolated solution set); ``BudgetExceeded``
        when the cell budget ran out.
    """
    system = list(system)
    if not system:
        raise ValueError("empty system")
    n = system[0].dim
    if len(system) != n or any(g.dim != n for g in system):
        raise DimensionMismatch("system must have n polynomials in n variables")
    if accuracy <= 0:
        raise ValueError("accuracy must be positive")
    box = box if box is not None else IntervalBox.unit(n)
    if box.dim != n:
        raise DimensionMismatch("box dimension mismatch")
    stats = {"dim": n, "cells": 0, "levels": 0, "certified": 0, "heuristic": 0}

    if any(g.is_zero() for g in system):
        return SolveOutcome(FAIL_NON_FINITE, [], [box], stats)

    S = _System(system)
    res_tol = np.array([1e-8 * (1.0 + sup_norm_grid(g, 64)) for g in system])
    if chunk is None:
        chunk = max(16, int(2e7 // (8 * (n * n + n) * S.m ** n)))
    bw = box.width
    stall = accuracy / (2.0 * math.sqrt(n))
    floor = max(stall * 2.0 ** -16, 1e-14)
    growth_cap = 8 * 3 ** n * _bezout(system) + 1024

    roots: List[Tuple[np.ndarray, float]] = []         # (location, certified radius)
    heur: List[np.ndarray] = []
    unresolved: List[IntervalBox] = []

    def in_certified(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        keep = np.ones(lo.shape[0], dtype=bool)
        for x, r in roots:
            if r > 0:
                keep &= ~(np.all(lo >= x - r, axis=1) & np.all(hi <= x + r, axis=1))
        return ~keep

    def known(x: np.ndarray) -> bool:
        for y, r in roots:
            if np.all(np.abs(x - y) <= max(r, 1e-12 * (1 + np.max(np.abs(y))))):
                return True
        return False

    def certify(x: np.ndarray, start: float) -> float:
        r = start
        while r >= 1e-13:
            _, u, _ = S.krawczyk(x[None] - r, x[None] + r, check_range=False)
            if u[0]:
                return r
            r *= 0.25
        return 0.0

    lo = box.lo[None].copy()
    hi = box.hi[None].copy()
    status = COMPLETE
    level = 0
    while lo.shape[0]:
        if stats["cells"] + lo.shape[0] > budget:
            status = BUDGET_EXCEEDED
            unresolved.extend(IntervalBox(a, b) for a, b in zip(lo, hi))
            break
        width = np.max(hi[0] - lo[0])
        if lo.shape[0] > growth_cap and np.all((hi[0] - lo[0]) < bw * 2.0 ** -8):
            status = FAIL_NON_FINITE
            unresolved.extend(IntervalBox(a, b) for a, b in zip(lo, hi))
            break
        stats["cells"] += lo.shape[0]
        stats["levels"] = level
        drop = in_certified(lo, hi)
        lo, hi = lo[~drop], hi[~drop]
        next_lo, next_hi = [], []
        for s in range(0, lo.shape[0], chunk):
            clo, chi = lo[s:s + chunk], hi[s:s + chunk]
            w = chi - clo
            ilo = np.maximum(clo - 0.1 * w, box.lo - 1e-6 * bw)
            ihi = np.minimum(chi + 0.1 * w, box.hi + 1e-6 * bw)
            excl, uniq, cen = S.krawczyk(ilo, ihi)
            mid, half = 0.5 * (ilo + ihi), 0.5 * (ihi - ilo)
            retry = np.zeros(clo.shape[0], dtype=bool)
            iu = np.nonzero(uniq)[0]
            if iu.size:
                X, conv = S.newton(mid[iu] + half[iu] * cen[iu])
                for k, i in enumerate(iu):
                    x = X[k]
                    if not (conv[k] and np.all(np.abs(x - mid[i]) <= half[i] * (1 + 1e-9))):
                        retry[i] = True
                        continue
                    if known(x):
                        continue
                    r = certify(x, min(accuracy / math.sqrt(n), float(np.max(half[i]))))
                    roots.append((x, r))
            rest = ~excl & (~uniq | retry)
            if not rest.any():
                continue
            rlo, rhi = clo[rest], chi[rest]
            small = np.max(rhi - rlo, axis=1) <= stall
            if small.any():
                slo, shi = rlo[small], rhi[small]
                smid = 0.5 * (slo + shi)
                X, conv = S.newton(smid)
                sw = np.max(shi - slo, axis=1)
                for k in range(slo.shape[0]):
                    x = X[k]
                    near = np.all(np.abs(x - smid[k]) <= sw[k])
                    if conv[k] and near:
                        res = np.abs(S.raw_values(x[None])[0])
                        if np.all(res <= res_tol):
                            heur.append(x)
                            continue
                    if sw[k] <= floor:
                        unresolved.append(IntervalBox(slo[k], shi[k]))
                    else:
                        a, b = _bisect(slo[k:k + 1], shi[k:k + 1])
                        next_lo.append(a)
                        next_hi.append(b)
                rlo, rhi = rlo[~small], rhi[~small]
            if rlo.shape[0]:
                clo2, chi2 = _bisect(rlo, rhi)
                next_lo.append(clo2)
                next_hi.append(chi2)
        if next_lo:
            lo = np.concatenate(next_lo)
            hi = np.concatenate(next_hi)
        else:
            lo = np.zeros((0, n))
            hi = np.zeros((0, n))
        level += 1

    if status == COMPLETE and unresolved:
        status = FAIL_NON_FINITE

    points: List[CriticalPoint] = []
    tol_in = 1e-12 * (1.0 + np.max(np.abs(bw)))
    cands = [(x, r) for x, r in roots] + [(x, 0.0) for x in heur]
    for x, r in cands:
        if not box.contains(x, tol_in):
            continue
        if r == 0.0 and any(np.linalg.norm(x - p.location) <= accuracy for p in points):
            continue
        Jraw = S.raw_jacobian(x)
        eigs = jacobi_eigenvalues(0.5 * (Jraw + Jraw.T))
        res = float(np.max(np.abs(S.raw_values(x[None])[0])))
        points.append(CriticalPoint(
            location=x, certified_radius=float(r),
            kind=kind_from_eigs(eigs, classification_tol), hess_eigs=eigs,
            boundary_proximal=box.boundary_distance(x) < margin, residual=res))
    stats["certified"] = sum(1 for p in points if p.certified_radius > 0)
    stats["heuristic"] = len(points) - stats["certified"]
    order = np.lexsort(np.array([p.location for p in points]).T[::-1]) if points else []
    points = [points[i] for i in order]
    return SolveOutcome(status, points, unresolved, stats)


def _bisect(lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split every cell into 2^n children."""
    B, n = lo.shape
    mid = 0.5 * (lo + hi)
    out_lo, out_hi = [], []
    for corner in range(1 << n):
        bits = np.array([(corner >> j) & 1 for j in range(n)], dtype=bool)
        out_lo.append(np.where(bits, mid, lo))
        out_hi.append(np.where(bits, hi, mid))
    return np.concatenate(out_lo), np.concatenate(out_hi)


def critical_points(p: TensorPoly, box: Optional[IntervalBox] = None, accuracy: float = 1e-8,
                    budget: int = 10 ** 7, classification_tol: float = 1e-8,
                    margin: float = 1e-9) -> SolveOutcome:
    """Critical points of ``p`` in ``box`` (solutions of its gradient system)."""
    return solve_in_box(gradient(p), box, accuracy, budget, classification_tol, margin)
