"""Discrete least-squares fitting in the tensorized Chebyshev basis."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cheb_core import (TensorPoly, _index_array, basis_size, cheb_vander_1d, evaluate,
                        lobatto_nodes, to_text)
from .errors import NonFiniteValues, RankDeficientError
from .oracle import Oracle
from .sampling import SampleSet

ILL_CONDITIONED = 1e10


@dataclass(frozen=True, eq=False)
class FitReport:
    """Outcome of a least-squares fit.

    ``residual_rms`` is ``||L x - F||_2 / sqrt(k)`` and
    ``gram_condition_estimate`` approximates the condition number of ``L^T L``.
    """

    poly: TensorPoly
    residual_rms: float
    gram_condition_estimate: float
    basis_size: int
    samples_used: int
    method: str = "orthogonal"

    def to_dict(self) -> dict:
        return {
            "degree": self.poly.degree,
            "dim": self.poly.dim,
            "residual_rms": self.residual_rms,
            "gram_condition_estimate": self.gram_condition_estimate,
            "basis_size": self.basis_size,
            "samples_used": self.samples_used,
            "method": self.method,
            "poly": to_text(self.poly),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def assemble_design(samples: SampleSet | np.ndarray, d: int) -> np.ndarray:
    """Matrix ``L[i, j] = psi_j(s_i)`` over graded-lex basis functions of degree ``<= d``."""
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    k, n = pts.shape
    D = basis_size(n, d)
    if k < D:
        raise RankDeficientError(f"{k} samples cannot determine {D} coefficients")
    idx = _index_array(n, d)
    V = cheb_vander_1d(pts, d)  # (k, n, d+1)
    L = np.ones((k, D))
    for axis in range(n):
        L *= V[:, axis, idx[:, axis]]
    return L


def _condition_from_r(R: np.ndarray) -> float:
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return 1.0
    lo = diag.min()
    if lo == 0.0:
        return float("inf")
    return float((diag.max() / lo) ** 2)


def fit(samples: SampleSet | np.ndarray, values, d: int,
        method: str = "orthogonal") -> FitReport:
    """Least-squares polynomial of total degree ``d`` through ``(samples, values)``.

    Parameters
    ----------
    method : {"orthogonal", "normal"}
        ``orthogonal`` solves the rectangular problem by a QR factorization.
        ``normal`` forms and solves ``L^T L x = L^T F`` with a Cholesky factor.
    """
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    F = np.asarray(values, dtype=float).reshape(-1)
    if F.shape[0] != pts.shape[0]:
        raise ValueError("values and samples differ in length")
    if not np.all(np.isfinite(F)):
        raise NonFiniteValues("oracle values contain NaN or infinity")
    n = pts.shape[1]
    L = assemble_design(pts, d)
    k, D = L.shape
    if method == "orthogonal":
        Q, R = scipy.linalg.qr(L, mode="economic", check_finite=False)
        cond = _condition_from_r(R)
        if not np.isfinite(cond):
            raise RankDeficientError("design matrix is rank deficient")
        x = scipy.linalg.solve_triangular(R, Q.T @ F, check_finite=False)
    elif method == "normal":
        G = L.T @ L
        try:
            c = scipy.linalg.cho_factor(G, check_finite=False)
        except np.linalg.LinAlgError:
            raise RankDeficientError("normal equations are singular") from None
        cond = _condition_from_r(c[0])
        x = scipy.linalg.cho_solve(c, L.T @ F, check_finite=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    if cond > ILL_CONDITIONED:
        warnings.warn(f"ill-conditioned least-squares problem (estimate {cond:.2e})",
                      RuntimeWarning, stacklevel=2)
    resid = L @ x - F
    rms = float(np.linalg.norm(resid) / np.sqrt(k))
    poly = TensorPoly.from_vector(n, d, x)
    return FitReport(poly, rms, cond, D, k, method)


def _cell_midpoints(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints and arcsine-measure volumes of the cells between sorted nodes."""
    x = np.sort(nodes)
    mids = 0.5 * (x[:-1] + x[1:])
    vol = np.arccos(x[:-1]) - np.arccos(x[1:])
    return mids, vol


def discrete_l2_error(p: TensorPoly, o: Oracle, grid: SampleSet) -> float:
    """Riemann sum of ``(f - p)^2`` against the Chebyshev measure over grid cells.

    Cells are the boxes between adjacent grid nodes on every axis. Each cell
    contributes its measure times the squared error at its midpoint. Exact
    (noise-free, uncounted) oracle values are used.
    """
    if not grid.is_grid:
        raise ValueError("discrete L2 error needs a tensor grid")
    mids, vol = _cell_midpoints(grid.axis_nodes())
    n = grid.dim
    mesh = np.meshgrid(*([mids] * n), indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
    W = np.ones(())
    for _ in range(n):
        W = np.multiply.outer(W, vol)
    err = o.exact(pts) - evaluate(p, pts)
    return float(np.sum(W.reshape(-1) * err ** 2))


def err_infty_estimate(p: TensorPoly, o: Oracle, res: int) -> float:
    """Largest ``|f - p|`` on a nested Chebyshev-Lobatto grid (a lower bound)."""
    x = lobatto_nodes(res)
    mesh = np.meshgrid(*([x] * p.dim), indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
    out = 0.0
    for start in range(0, pts.shape[0], 1 << 18):
        chunk = pts[start:start + (1 << 18)]
        out = max(out, float(np.max(np.abs(o.exact(chunk) - evaluate(p, chunk)))))
    return out
