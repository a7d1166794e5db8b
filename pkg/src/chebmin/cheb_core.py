"""Tensorized Chebyshev polynomials on the cube [-1, 1]^n.

A :class:`TensorPoly` stores the coefficients of

    p(x) = sum_nu c_nu T_{nu_1}(x_1) ... T_{nu_n}(x_n),    |nu| <= d,

as a dense ``(d+1,)*n`` array whose entries above total degree ``d`` are zero.
The public ``coeffs`` view exposes the nonzero entries keyed by multi-index in
graded-lexicographic order, which is also the column order of least-squares
design matrices and of the text serialization.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch

MultiIndex = Tuple[int, ...]


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _multi_indices(n: int, d: int) -> Tuple[MultiIndex, ...]:
    out: List[MultiIndex] = []
    for total in range(d + 1):
        level = [
            nu for nu in itertools.product(range(total + 1), repeat=n)
            if sum(nu) == total
        ]
        # graded-lex: within one total degree the first axis varies slowest,
        # largest exponent first, e.g. (2,0), (1,1), (0,2)
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


def multi_indices(n: int, d: int) -> List[MultiIndex]:
    """All multi-indices of length ``n`` and total degree ``<= d``, graded-lex."""
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    return list(_multi_indices(n, d))


def basis_size(n: int, d: int) -> int:
    """Dimension binom(n + d, n) of the space of n-variate polynomials of degree d."""
    return math.comb(n + d, n)


@lru_cache(maxsize=None)
def _index_array(n: int, d: int) -> np.ndarray:
    return np.array(_multi_indices(n, d), dtype=np.intp).reshape(-1, n)


def cheb_vander_1d(x: np.ndarray, d: int) -> np.ndarray:
    """Matrix ``V[..., k] = T_k(x)`` for ``k = 0..d`` via the three-term recurrence.

    The recurrence is valid outside [-1, 1] as well.
    """
    x = np.asarray(x, dtype=float)
    V = np.empty(x.shape + (d + 1,))
    V[..., 0] = 1.0
    if d >= 1:
        V[..., 1] = x
    for k in range(2, d + 1):
        V[..., k] = 2.0 * x * V[..., k - 1] - V[..., k - 2]
    return V


# ---------------------------------------------------------------------------
# TensorPoly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TensorPoly:
    """An n-variate polynomial in the tensorized Chebyshev basis.

    Parameters
    ----------
    dim : int
        Number of variables ``n``.
    degree : int
        Total-degree bound ``d``.
    tensor : ndarray
        Coefficient array of shape ``(d+1,)*n``. Entries whose multi-index has
        total degree above ``d`` must be zero.
    """

    dim: int
    degree: int
    tensor: np.ndarray

    def __post_init__(self):
        t = np.array(self.tensor, dtype=float)
        shape = (self.degree + 1,) * self.dim
        if t.shape != shape:
            raise DimensionMismatch(f"tensor shape {t.shape} != {shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("coefficients must be finite")
        mask = _total_degree_mask(self.dim, self.degree)
        if np.any(t[~mask] != 0.0):
            raise ValueError("coefficient above total degree bound")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    # -- constructors --------------------------------------------------------

    @classmethod
    def zeros(cls, dim: int, degree: int = 0) -> "TensorPoly":
        return cls(dim, degree, np.zeros((degree + 1,) * dim))

    @classmethod
    def constant(cls, dim: int, value: float) -> "TensorPoly":
        return cls(dim, 0, np.full((1,) * dim, float(value)))

    @classmethod
    def from_coeffs(cls, dim: int, degree: int,
                    coeffs: Mapping[Sequence[int], float]) -> "TensorPoly":
        t = np.zeros((degree + 1,) * dim)
        for nu, c in coeffs.items():
            nu = tuple(int(v) for v in nu)
            if len(nu) != dim:
                raise DimensionMismatch(f"multi-index {nu} has length != {dim}")
            if min(nu) < 0 or sum(nu) > degree:
                raise ValueError(f"multi-index {nu} outside degree bound {degree}")
            t[nu] += float(c)
        return cls(dim, degree, t)

    @classmethod
    def from_vector(cls, dim: int, degree: int, vec: Sequence[float]) -> "TensorPoly":
        """Build from a coefficient vector in graded-lex order."""
        idx = _index_array(dim, degree)
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (len(idx),):
            raise DimensionMismatch(f"expected {len(idx)} coefficients, got {vec.shape}")
        t = np.zeros((degree + 1,) * dim)
        t[tuple(idx.T)] = vec
        return cls(dim, degree, t)

    # -- views ---------------------------------------------------------------

    def to_vector(self) -> np.ndarray:
        """Coefficients in graded-lex order (length binom(n+d, n))."""
        idx = _index_array(self.dim, self.degree)
        return self.tensor[tuple(idx.T)].copy()

    @property
    def coeffs(self) -> Dict[MultiIndex, float]:
        """Nonzero coefficients keyed by multi-index, graded-lex ordered."""
        return {
            nu: float(self.tensor[nu])
            for nu in _multi_indices(self.dim, self.degree)
            if self.tensor[nu] != 0.0
        }

    def is_zero(self) -> bool:
        return not np.any(self.tensor)

    def with_degree(self, degree: int) -> "TensorPoly":
        """Same polynomial stored with another degree bound (must not truncate)."""
        if degree == self.degree:
            return self
        t = np.zeros((degree + 1,) * self.dim)
        m = min(degree, self.degree) + 1
        sl = (slice(0, m),) * self.dim
        t[sl] = self.tensor[sl]
        if degree < self.degree:
            kept = TensorPoly(self.dim, degree, t * _total_degree_mask(self.dim, degree))
            if not np.allclose(kept.with_degree(self.degree).tensor, self.tensor, rtol=0, atol=0):
                raise ValueError("lowering the degree bound would drop coefficients")
            return kept
        return TensorPoly(self.dim, degree, t)

    def truncate(self, degree: int) -> "TensorPoly":
        """Drop every coefficient of total degree above ``degree``."""
        degree = min(degree, self.degree)
        sl = (slice(0, degree + 1),) * self.dim
        t = self.tensor[sl] * _total_degree_mask(self.dim, degree)
        return TensorPoly(self.dim, degree, t)

    # -- arithmetic ------------------------------------------------------------

    def _aligned(self, other: "TensorPoly") -> Tuple[np.ndarray, np.ndarray, int]:
        if other.dim != self.dim:
            raise DimensionMismatch("dimension mismatch")
        d = max(self.degree, other.degree)
        return self.with_degree(d).tensor, other.with_degree(d).tensor, d

    def __add__(self, other: "TensorPoly") -> "TensorPoly":
        a, b, d = self._aligned(other)
        return TensorPoly(self.dim, d, a + b)

    def __sub__(self, other: "TensorPoly") -> "TensorPoly":
        a, b, d = self._aligned(other)
        return TensorPoly(self.dim, d, a - b)

    def __mul__(self, scalar: float) -> "TensorPoly":
        return TensorPoly(self.dim, self.degree, self.tensor * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "TensorPoly":
        return self * -1.0

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def __repr__(self) -> str:
        return f"TensorPoly(dim={self.dim}, degree={self.degree}, nnz={np.count_nonzero(self.tensor)})"


@lru_cache(maxsize=None)
def _total_degree_mask(n: int, d: int) -> np.ndarray:
    grids = np.indices((d + 1,) * n)
    mask = grids.sum(axis=0) <= d
    mask.setflags(write=False)
    return mask


def random_tensor_poly(n: int, d: int, rng: np.random.Generator,
                       scale: float = 1.0) -> TensorPoly:
    """Dense random polynomial with i.i.d. normal coefficients."""
    D = basis_size(n, d)
    return TensorPoly.from_vector(n, d, scale * rng.standard_normal(D))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _clenshaw_last_axis(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Reduce the last axis of ``A`` (Chebyshev coefficients) at points ``x``.

    ``A`` has shape ``(k, ..., m)`` or broadcasts against it; ``x`` has shape (k,).
    """
    m = A.shape[-1]
    xs = x.reshape((-1,) + (1,) * (A.ndim - 2))
    if m == 1:
        return np.broadcast_to(A[..., 0], np.broadcast_shapes(A.shape[:-1], xs.shape)).copy()
    b1 = np.zeros(())
    b2 = np.zeros(())
    two_x = 2.0 * xs
    for j in range(m - 1, 0, -1):
        b0 = A[..., j] + two_x * b1 - b2
        b2, b1 = b1, b0
    return A[..., 0] + xs * b1 - b2


def evaluate(p: TensorPoly, x, chunk: int = 65536) -> np.ndarray | float:
    """Evaluate ``p`` at one point (shape (n,)) or many points (shape (k, n)).

    Uses a Clenshaw recurrence nested over the axes, last axis first. Points
    outside [-1, 1]^n are accepted (extrapolation).
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != p.dim:
        raise DimensionMismatch(f"point dimension {pts.shape[-1]} != polynomial dim {p.dim}")
    out = np.empty(pts.shape[0])
    C = p.tensor[None, ...]
    for start in range(0, pts.shape[0], chunk):
        P = pts[start:start + chunk]
        A = C
        for axis in range(p.dim - 1, -1, -1):
            A = _clenshaw_last_axis(A, P[:, axis])
        out[start:start + chunk] = A.reshape(-1)
    return float(out[0]) if single else out


def eval_grid(p: TensorPoly, nodes: Sequence[np.ndarray]) -> np.ndarray:
    """Values of ``p`` on the tensor grid ``nodes[0] x ... x nodes[n-1]``.

    Returns an array of shape ``(len(nodes[0]), ..., len(nodes[n-1]))``.
    """
    if len(nodes) != p.dim:
        raise DimensionMismatch("need one node vector per axis")
    A = p.tensor
    for axis, xs in enumerate(nodes):
        V = cheb_vander_1d(np.asarray(xs, dtype=float), p.degree)  # (len, d+1)
        A = np.tensordot(A, V, axes=([0], [1]))  # contracted axis moves to the end
    return A


# ---------------------------------------------------------------------------
# calculus and norms
# ---------------------------------------------------------------------------

def derivative_matrix(m: int) -> np.ndarray:
    """Matrix ``M`` with ``M @ c`` the Chebyshev coefficients of the derivative.

    Both vectors have length ``m``; the top entry of the result is zero.
    """
    M = np.zeros((m, m))
    for j in range(1, m):
        # T_j' = 2j (T_{j-1} + T_{j-3} + ...), halved on T_0
        for k in range(j - 1, -1, -2):
            M[k, j] = 2.0 * j
        if (j - 1) % 2 == 0:
            M[0, j] = j
    return M


def _derive_axis(t: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(t, axis, 0)
    m = c.shape[0]
    out = np.zeros_like(c)
    if m >= 2:
        out[m - 2] = 2.0 * (m - 1) * c[m - 1]
        for k in range(m - 3, -1, -1):
            out[k] = out[k + 2] + 2.0 * (k + 1) * c[k + 1]
        out[0] *= 0.5
    return np.moveaxis(out, 0, axis)


def partial(p: TensorPoly, axis: int) -> TensorPoly:
    """Partial derivative of ``p`` along ``axis`` (degree drops by one)."""
    if not 0 <= axis < p.dim:
        raise IndexError(f"axis {axis} out of range for dim {p.dim}")
    if p.degree == 0:
        return TensorPoly.zeros(p.dim, 0)
    t = _derive_axis(p.tensor, axis)
    d = p.degree - 1
    t = t[(slice(0, d + 1),) * p.dim] * _total_degree_mask(p.dim, d)
    return TensorPoly(p.dim, d, t)


def _mu_weights_1d(m: int) -> np.ndarray:
    w = np.full(m, np.pi / 2)
    w[0] = np.pi
    return w


def l2_norm_mu(p: TensorPoly) -> float:
    """Norm of ``p`` in L^2 of the tensorized Chebyshev measure, from coefficients."""
    W = np.ones(())
    for _ in range(p.dim):
        W = np.multiply.outer(W, _mu_weights_1d(p.degree + 1))
    return float(np.sqrt(np.sum(W * p.tensor ** 2)))


def gauss_chebyshev_nodes(m: int) -> np.ndarray:
    """First-kind Chebyshev points cos((2j+1) pi / 2m), j = 0..m-1."""
    j = np.arange(m)
    return np.cos((2 * j + 1) * np.pi / (2 * m))


def quad_mu(g: Callable[[np.ndarray], np.ndarray], nodes_per_axis: int, dim: int = 1) -> float:
    """Tensor Gauss-Chebyshev approximation of the integral of ``g`` against mu.

    ``g`` receives a ``(k, dim)`` array of points and returns ``k`` values.
    Exact for polynomials of degree ``<= 2*nodes_per_axis - 1`` in each variable.
    """
    if nodes_per_axis < 1:
        raise ValueError("nodes_per_axis must be >= 1")
    x = gauss_chebyshev_nodes(nodes_per_axis)
    mesh = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
    vals = np.asarray(g(pts), dtype=float).reshape(-1)
    return float(vals.sum() * (np.pi / nodes_per_axis) ** dim)


def lobatto_nodes(res: int) -> np.ndarray:
    """Chebyshev-Lobatto points refined to the next nested level.

    ``res`` is rounded up to ``2**j + 1`` points so that the node sets are nested
    and grid maxima are monotone in ``res``.
    """
    if res < 2:
        raise ValueError("res must be >= 2")
    m = 1 << max(0, math.ceil(math.log2(res - 1)))
    return np.cos(np.pi * np.arange(m + 1) / m)


def sup_norm_grid(p: TensorPoly, res: int) -> float:
    """Largest ``|p|`` over a tensor Chebyshev-Lobatto grid (a lower bound of the sup norm)."""
    x = lobatto_nodes(res)
    if p.is_zero():
        return 0.0
    return float(np.max(np.abs(eval_grid(p, [x] * p.dim))))


# ---------------------------------------------------------------------------
# exact conversion to the monomial basis
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cheb_to_monomial_matrix(m: int) -> Tuple[Tuple[int, ...], ...]:
    """Integer matrix ``M[k][j]`` = coefficient of ``x^j`` in ``T_k``, k, j < m."""
    rows: List[List[int]] = [[1] + [0] * (m - 1)]
    if m > 1:
        rows.append([0, 1] + [0] * (m - 2))
    for k in range(2, m):
        prev, prev2 = rows[k - 1], rows[k - 2]
        row = [0] * m
        for j in range(m):
            row[j] = (2 * prev[j - 1] if j > 0 else 0) - prev2[j]
        rows.append(row)
    return tuple(tuple(r) for r in rows)


@dataclass(frozen=True)
class MonomialPolyExact:
    """Polynomial with rational coefficients in the monomial basis x^nu."""

    dim: int
    degree: int
    coeffs: Dict[MultiIndex, Fraction]

    def __call__(self, x: Sequence) -> Fraction:
        return self.evaluate(x)

    def evaluate(self, x: Sequence) -> Fraction:
        """Exact value at a point with rational (or float, converted exactly) coordinates."""
        if len(x) != self.dim:
            raise DimensionMismatch("point dimension mismatch")
        xs = [Fraction(v) for v in x]
        powers = [[Fraction(1)] for _ in xs]
        for j, v in enumerate(xs):
            for _ in range(self.degree):
                powers[j].append(powers[j][-1] * v)
        total = Fraction(0)
        for nu, c in self.coeffs.items():
            term = c
            for j, e in enumerate(nu):
                term *= powers[j][e]
            total += term
        return total


def to_monomial_exact(p: TensorPoly) -> MonomialPolyExact:
    """Expand ``p`` in the monomial basis in exact rational arithmetic.

    Each float coefficient is converted to the rational with the same binary value.
    """
    m = p.degree + 1
    M = cheb_to_monomial_matrix(m)
    cur: Dict[MultiIndex, Fraction] = {
        nu: Fraction(c) for nu, c in p.coeffs.items()
    }
    for axis in range(p.dim):
        nxt: Dict[MultiIndex, Fraction] = {}
        for nu, c in cur.items():
            row = M[nu[axis]]
            for j in range(nu[axis] + 1):
                if row[j] == 0:
                    continue
                key = nu[:axis] + (j,) + nu[axis + 1:]
                nxt[key] = nxt.get(key, Fraction(0)) + c * row[j]
        cur = nxt
    coeffs = {
        nu: cur[nu] for nu in _multi_indices(p.dim, p.degree)
        if nu in cur and cur[nu] != 0
    }
    return MonomialPolyExact(p.dim, p.degree, coeffs)


def clenshaw_exact(p: TensorPoly, x: Sequence) -> Fraction:
    """Nested Clenshaw evaluation of ``p`` in exact rational arithmetic."""
    if len(x) != p.dim:
        raise DimensionMismatch("point dimension mismatch")
    xs = [Fraction(v) for v in x]
    A = np.vectorize(Fraction, otypes=[object])(p.tensor)
    for axis in range(p.dim - 1, -1, -1):
        t = xs[axis]
        m = A.shape[-1]
        b1 = np.zeros(A.shape[:-1], dtype=object) + Fraction(0)
        b2 = np.zeros(A.shape[:-1], dtype=object) + Fraction(0)
        for j in range(m - 1, 0, -1):
            b0 = A[..., j] + 2 * t * b1 - b2
            b2, b1 = b1, b0
        A = A[..., 0] + t * b1 - b2
    return Fraction(A) if not isinstance(A, np.ndarray) else Fraction(A.item())


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

def to_text(p: TensorPoly) -> str:
    """Header ``n d`` then ``nu_1 ... nu_n c`` per nonzero coefficient, graded-lex."""
    lines = [f"{p.dim} {p.degree}"]
    for nu, c in p.coeffs.items():
        lines.append(" ".join(str(v) for v in nu) + " " + format(c, ".17g"))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> TensorPoly:
    rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError("missing 'n d' header")
    n, d = int(rows[0][0]), int(rows[0][1])
    coeffs: Dict[MultiIndex, float] = {}
    for r in rows[1:]:
        if len(r) != n + 1:
            raise ValueError(f"malformed coefficient line: {' '.join(r)}")
        coeffs[tuple(int(v) for v in r[:n])] = float(r[n])
    return TensorPoly.from_coeffs(n, d, coeffs)


def iter_points(points: Iterable[Sequence[float]]) -> np.ndarray:
    return np.asarray(list(points), dtype=float)
