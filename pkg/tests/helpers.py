"""Shared test utilities: brute-force references for random polynomials."""

from __future__ import annotations

import numpy as np

from chebmin.bruteforce import polynomial_critical_points, polynomial_hessian
from chebmin.cheb_core import TensorPoly, evaluate, partial, random_tensor_poly
from chebmin.dlsp import err_infty_estimate, fit
from chebmin.oracle import NoiseModel, poly_oracle, with_noise
from chebmin.psolve import MINIMIZER, critical_points
from chebmin.sampling import tensor_grid


def interior_minimizers(p: TensorPoly, grid: int = 1001, pad: float = 1e-6):
    """Brute-force interior minimizers of ``p`` and the smallest Hessian eigenvalue at them."""
    crit = polynomial_critical_points(p.tensor, grid=grid)
    mins, lam = [], np.inf
    for x in crit:
        if np.any(np.abs(x) >= 1 - pad):
            continue
        eig = np.linalg.eigvalsh(polynomial_hessian(p.tensor, x))
        if np.all(eig > 0):
            mins.append(x)
            lam = min(lam, float(eig[0]))
    return np.array(mins).reshape(-1, p.dim), lam


def third_derivative_bound(p: TensorPoly, res: int = 201) -> float:
    """Upper bound on the operator norm of the third derivative over the cube.

    Uses the Frobenius norm of the third-derivative tensor maximized over a
    dense grid, inflated by 10% for the gaps between grid points.
    """
    n = p.dim
    x = np.linspace(-1, 1, res)
    X = np.stack([a.ravel() for a in np.meshgrid(*([x] * n), indexing="ij")], axis=1)
    total = np.zeros(X.shape[0])
    for i in range(n):
        pi = partial(p, i)
        for j in range(n):
            pij = partial(pi, j)
            for k in range(n):
                total += evaluate(partial(pij, k), X) ** 2
    return 1.1 * float(np.sqrt(np.max(total)))


def morse_case(seed: int, n: int = 2, d: int = 4):
    """Random polynomial with a quadratic bowl added so it has interior minima."""
    rng = np.random.default_rng(seed)
    g = random_tensor_poly(n, d, rng, scale=0.3)
    bowl = {tuple(2 if j == i else 0 for j in range(n)): 0.5 for i in range(n)}
    return g + TensorPoly.from_coeffs(n, 2, bowl)


def capture_lemma_trial(seed: int):
    """One trial of the capture property.

    Returns ``None`` when the trial is vacuous (no interior minimizer, or the
    fitted approximant misses the sup-norm hypothesis); otherwise the number
    of reference minimizers that have no approximant minimizer within eps.
    """
    f = morse_case(seed)
    mins, lam = interior_minimizers(f)
    if len(mins) == 0:
        return None
    kappa = third_derivative_bound(f)
    boundary = float(np.min(1 - np.abs(mins)))
    eps = min(3 * lam / kappa, boundary, 0.2)
    rng = np.random.default_rng(seed + 10 ** 6)
    eta = float(rng.uniform(0.0, 0.5)) * lam * eps ** 2 / 4
    o = with_noise(poly_oracle(f), NoiseModel("uniform", seed))
    S = tensor_grid(f.dim, 2 * (f.degree + 1))
    w = fit(S, o.evaluate(S.points, eta), f.degree).poly
    if err_infty_estimate(w, poly_oracle(f), 512) > lam * eps ** 2 / 4:
        return None
    out = critical_points(w, accuracy=eps * 1e-3)
    found = np.array([p.location for p in out.points if p.kind == MINIMIZER]).reshape(-1, f.dim)
    misses = 0
    for x in mins:
        if len(found) == 0 or np.min(np.linalg.norm(found - x, axis=1)) > eps * (1 + 1e-9):
            misses += 1
    return misses


# acceptance summary lines, printed by the terminal-summary hook in conftest
ACCEPTANCE_LINES: list = []
