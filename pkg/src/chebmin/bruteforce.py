"""Slow, independent reference solvers used to validate results.

Nothing here reuses the subdivision solver or the package's own Chebyshev
arithmetic: polynomials are handled through ``numpy.polynomial.chebyshev``,
and general functions through finite differences and derivative-free search.
"""

from __future__ import annotations

import itertools
from typing import Callable, List, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

Fn = Callable[[np.ndarray], np.ndarray]


def _cluster(points: Sequence[np.ndarray], radius: float) -> np.ndarray:
    kept: List[np.ndarray] = []
    for x in points:
        if all(np.linalg.norm(x - y) > radius for y in kept):
            kept.append(x)
    return np.array(kept) if kept else np.zeros((0, len(points[0]) if points else 0))


def _sign_change_cells(vals: Sequence[np.ndarray]) -> np.ndarray:
    """Indices of grid cells on which every component takes both signs (or zero)."""
    n = vals[0].ndim
    mask = None
    for V in vals:
        lo = V.copy()
        hi = V.copy()
        for corner in itertools.product((0, 1), repeat=n):
            sl = tuple(slice(c, V.shape[a] - 1 + c) for a, c in enumerate(corner))
            if corner == (0,) * n:
                lo = V[sl].copy()
                hi = V[sl].copy()
            else:
                lo = np.minimum(lo, V[sl])
                hi = np.maximum(hi, V[sl])
        m = (lo <= 0) & (hi >= 0)
        mask = m if mask is None else mask & m
    return np.argwhere(mask)


def _damped_newton(F: Fn, J: Fn, x0: np.ndarray, iters: int = 60, tol: float = 1e-14) -> tuple:
    x = np.array(x0, dtype=float)
    fx = F(x)
    for _ in range(iters):
        nf = np.linalg.norm(fx)
        if nf <= tol:
            return x, True
        try:
            step = np.linalg.solve(J(x), fx)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J(x), fx, rcond=None)[0]
        t = 1.0
        while t > 1e-6:
            y = x - t * step
            fy = F(y)
            if np.linalg.norm(fy) < nf:
                break
            t *= 0.5
        else:
            return x, nf <= 1e-10
        if np.max(np.abs(y - x)) <= 1e-15 * (1 + np.max(np.abs(x))):
            return y, True
        x, fx = y, fy
    return x, np.linalg.norm(fx) <= 1e-10


# ---------------------------------------------------------------------------
# polynomials given as dense Chebyshev coefficient tensors
# ---------------------------------------------------------------------------

def _cheb_eval(c: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Evaluate an n-d Chebyshev series at points X (k, n) with numpy only."""
    n = c.ndim
    if n == 1:
        return C.chebval(X[:, 0], c)
    if n == 2:
        return C.chebval2d(X[:, 0], X[:, 1], c)
    if n == 3:
        return C.chebval3d(X[:, 0], X[:, 1], X[:, 2], c)
    out = np.empty(X.shape[0])
    for i, x in enumerate(X):
        a = c
        for j in range(n - 1, -1, -1):
            a = C.chebval(x[j], np.moveaxis(a, -1, 0))
        out[i] = a
    return out


def _cheb_grid(c: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    n = c.ndim
    if n == 1:
        return C.chebval(nodes, c)
    if n == 2:
        return C.chebgrid2d(nodes, nodes, c)
    if n == 3:
        return C.chebgrid3d(nodes, nodes, nodes, c)
    raise ValueError("grid evaluation supports n <= 3")


def polynomial_roots(system: Sequence[np.ndarray], grid: int = 2001,
                     lo: Optional[Sequence[float]] = None,
                     hi: Optional[Sequence[float]] = None,
                     radius: float = 1e-7) -> np.ndarray:
    """Real roots of a square system of Chebyshev series in a box.

    Every cell of a uniform ``grid``-point lattice on which all components
    change sign seeds a damped Newton iteration.
    """
    system = [np.asarray(c, dtype=float) for c in system]
    n = system[0].ndim
    lo = -np.ones(n) if lo is None else np.asarray(lo, dtype=float)
    hi = np.ones(n) if hi is None else np.asarray(hi, dtype=float)
    jac = [[C.chebder(c, axis=j) for j in range(n)] for c in system]
    if not np.allclose(lo, lo[0]) or not np.allclose(hi, hi[0]):
        raise ValueError("brute-force grid needs a cube")
    nodes = np.linspace(lo[0], hi[0], grid)
    vals = [_cheb_grid(c, nodes) for c in system]
    cells = _sign_change_cells(vals)
    h = nodes[1] - nodes[0]

    def F(x):
        return np.array([_cheb_eval(c, x[None])[0] for c in system])

    def J(x):
        return np.array([[_cheb_eval(d, x[None])[0] for d in row] for row in jac])

    found = []
    for cell in cells:
        x0 = nodes[cell] + 0.5 * h
        x, ok = _damped_newton(F, J, x0)
        if ok and np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12):
            found.append(x)
    return _cluster(found, radius)


def polynomial_critical_points(tensor: np.ndarray, grid: int = 2001, radius: float = 1e-7,
                               lo=None, hi=None) -> np.ndarray:
    """Critical points of a Chebyshev series inside a cube (default [-1, 1]^n)."""
    c = np.asarray(tensor, dtype=float)
    grad = [C.chebder(c, axis=j) for j in range(c.ndim)]
    return polynomial_roots(grad, grid, lo, hi, radius)


def polynomial_hessian(tensor: np.ndarray, x: np.ndarray) -> np.ndarray:
    c = np.asarray(tensor, dtype=float)
    n = c.ndim
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            H[i, j] = _cheb_eval(C.chebder(C.chebder(c, axis=i), axis=j), x[None])[0]
    return H


# ---------------------------------------------------------------------------
# general functions
# ---------------------------------------------------------------------------

def fd_gradient(f: Fn, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Richardson-extrapolated central differences (fourth order)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    E = np.eye(n)
    pts = np.concatenate([x + h * E, x - h * E, x + 0.5 * h * E, x - 0.5 * h * E])
    v = f(pts)
    d1 = (v[:n] - v[n:2 * n]) / (2 * h)
    d2 = (v[2 * n:3 * n] - v[3 * n:]) / h
    return (4 * d2 - d1) / 3


def fd_hessian(f: Fn, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    n = len(x)
    H = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        H[:, j] = (fd_gradient(f, x + e, h) - fd_gradient(f, x - e, h)) / (2 * h)
    return 0.5 * (H + H.T)


def function_minimizers(f: Fn, lo: Sequence[float], hi: Sequence[float], grid: int = 401,
                        radius: float = 1e-5, interior: float = 1e-7) -> np.ndarray:
    """Interior local minimizers of a vectorized function on a box.

    Every discrete local minimum of a uniform grid seeds a derivative-free
    sphere search that starts at the grid spacing, so it stays inside the
    seed's basin. Results are clustered and kept only when strictly inside
    the box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    V = f(np.stack([m.reshape(-1) for m in mesh], axis=1)).reshape(mesh[0].shape)
    P = np.pad(V, 1, constant_values=np.inf)
    core = tuple(slice(1, -1) for _ in range(n))
    is_min = np.ones(V.shape, dtype=bool)
    for off in itertools.product((-1, 0, 1), repeat=n):
        if off == (0,) * n:
            continue
        sl = tuple(slice(1 + o, P.shape[a] - 1 + o) for a, o in enumerate(off))
        is_min &= P[core] <= P[sl]
    scale = float(np.max(hi - lo))
    step = float(np.max((hi - lo) / (grid - 1)))
    found = []
    for s in np.argwhere(is_min):
        x0 = np.array([axes[a][s[a]] for a in range(n)])
        x = _ring_descent(f, x0, scale, lo, hi, start=step)
        if x is None:
            continue
        if np.any(x - lo <= interior * (hi - lo)) or np.any(hi - x <= interior * (hi - lo)):
            continue
        found.append(x)
    pts = _cluster(found, radius) if found else np.zeros((0, n))
    return pts if len(pts) else np.zeros((0, n))


def _ring_descent(f: Fn, x: np.ndarray, scale: float, lo: np.ndarray, hi: np.ndarray,
                  start: float, directions: int = 64, max_steps: int = 5000) -> Optional[np.ndarray]:
    """Pattern search on spheres of shrinking radius around ``x``.

    Gradient-based runs stop early on wells that are flat to high order, where
    finite-difference gradients drown in rounding, and may jump basins on
    oscillatory functions. The search moves to the
    lowest sphere point while it improves and halves the radius otherwise;
    the final point is a minimizer to within ``1e-9 * scale``. Returns None if
    the search leaves the box.
    """
    n = x.shape[0]
    rng = np.random.default_rng(0)
    U = rng.standard_normal((directions, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    U = np.concatenate([U, np.eye(n), -np.eye(n)])
    x = np.array(x, dtype=float)
    fx = float(f(x[None])[0])
    r = start
    steps = 0
    while r > 1e-9 * scale and steps < max_steps:
        steps += 1
        cand = x + r * U
        vals = f(cand)
        j = int(np.argmin(vals))
        if vals[j] < fx - 1e-15 * (1.0 + abs(fx)):
            x, fx = cand[j], float(vals[j])
            if np.any(x < lo) or np.any(x > hi):
                return None
        else:
            r *= 0.5
    return x


def function_critical_points_2d(f: Fn, lo: Sequence[float], hi: Sequence[float],
                                grid: int = 801, radius: float = 1e-6) -> tuple:
    """All interior critical points of a smooth 2-D function with their kinds.

    Sign changes of a finite-difference gradient on a grid seed damped Newton
    iterations on the Richardson gradient.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    hx = 1e-5 * float(np.max(hi - lo))
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    gx = ((f(P + [hx, 0]) - f(P - [hx, 0])) / (2 * hx)).reshape(X.shape)
    gy = ((f(P + [0, hx]) - f(P - [0, hx])) / (2 * hx)).reshape(X.shape)
    cells = _sign_change_cells([gx, gy])
    step = np.array([xs[1] - xs[0], ys[1] - ys[0]])

    def F(z):
        return fd_gradient(f, z, hx)

    def J(z):
        return fd_hessian(f, z, 10 * hx)

    found = []
    for cell in cells:
        z0 = np.array([xs[cell[0]], ys[cell[1]]]) + 0.5 * step
        z, _ = _damped_newton(F, J, z0, tol=1e-11)
        if np.linalg.norm(F(z)) > 1e-7:
            continue
        if np.all(z > lo) and np.all(z < hi):
            found.append(z)
    pts = _cluster(found, radius)
    kinds = []
    for z in pts:
        eig = np.linalg.eigvalsh(J(z))
        kinds.append("Minimizer" if np.all(eig > 0) else "Maximizer" if np.all(eig < 0) else "Saddle")
    return pts, kinds
