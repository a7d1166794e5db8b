"""Evaluation oracles: benchmark objectives, box rescaling and bounded noise.

An :class:`Oracle` is evaluated at points of the unit cube [-1, 1]^n. Its
``domain`` records the affine map back to the coordinates in which the
objective was originally posed.
"""

from __future__ import annotations

import ast
import hashlib
import math
import re
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .cheb_core import TensorPoly, evaluate, random_tensor_poly
from .errors import ConfigError, DimensionMismatch, NonFiniteValues, UnknownBenchmark

VectorFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoxDomain:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_n, hi_n]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("lo and hi have different lengths")
        if not np.all(lo < hi):
            raise ValueError("degenerate box: need lo < hi on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n: int) -> "BoxDomain":
        return cls(-np.ones(n), np.ones(n))

    @classmethod
    def parse(cls, spec) -> "BoxDomain":
        """Accept ``[[lo, hi], ...]`` pairs."""
        arr = np.asarray(spec, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("domain must be a list of [lo, hi] pairs")
        return cls(arr[:, 0], arr[:, 1])

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def scale(self) -> np.ndarray:
        return (self.hi - self.lo) / 2.0

    @property
    def center(self) -> np.ndarray:
        return (self.hi + self.lo) / 2.0

    def to_original(self, t) -> np.ndarray:
        """Map unit-cube coordinates to box coordinates."""
        return self.center + self.scale * np.asarray(t, dtype=float)

    def to_unit(self, x) -> np.ndarray:
        """Map box coordinates to unit-cube coordinates."""
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def compose(self, inner: "BoxDomain") -> "BoxDomain":
        """Box obtained by placing ``inner`` (given in unit coordinates of self) in self."""
        return BoxDomain(self.to_original(inner.lo), self.to_original(inner.hi))

    def as_list(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass
class NoiseModel:
    """Bounded additive noise.

    ``kind`` is ``"none"`` or ``"uniform"``. Uniform noise at bound ``eta`` is
    ``eta * (2U - 1)`` where ``U`` in [0, 1) is derived by hashing the bytes of
    the point together with ``seed``, so a point always receives the same draw.
    The realized suprema are tracked for diagnostics.
    """

    kind: str = "none"
    seed: int = 0
    bar_eta_max: float = 0.0
    tilde_eta_max: float = 0.0
    _sum: float = field(default=0.0, repr=False)
    _count: int = field(default=0, repr=False)
    _lo: float = field(default=math.inf, repr=False)
    _hi: float = field(default=-math.inf, repr=False)

    def __post_init__(self):
        if self.kind not in ("none", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")

    def unit_draws(self, points: np.ndarray) -> np.ndarray:
        seed = int(self.seed).to_bytes(8, "little", signed=True)
        pts = np.ascontiguousarray(points, dtype=np.float64)
        out = np.empty(pts.shape[0])
        for i, row in enumerate(pts):
            h = hashlib.blake2b(row.tobytes(), digest_size=8, key=seed).digest()
            out[i] = int.from_bytes(h, "little") / 2.0 ** 64
        return out

    def draw(self, points: np.ndarray, eta: float) -> np.ndarray:
        if self.kind == "none" or eta <= 0.0:
            return np.zeros(points.shape[0])
        u = eta * (2.0 * self.unit_draws(points) - 1.0)
        if u.size:
            self._count += u.size
            self._sum += float(u.sum())
            self._lo = min(self._lo, float(u.min()))
            self._hi = max(self._hi, float(u.max()))
            self.bar_eta_max = max(abs(self._lo), abs(self._hi))
            mean = self._sum / self._count
            self.tilde_eta_max = max(abs(self._lo - mean), abs(self._hi - mean))
        return u


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

class Oracle:
    """Black-box objective on the unit cube with a call counter.

    Parameters
    ----------
    dim : int
        Number of variables.
    fn : callable
        Vectorized exact objective on unit-cube points, ``(k, n) -> (k,)``.
    domain : BoxDomain, optional
        Map from unit coordinates to original coordinates (identity if omitted).
    noise : NoiseModel, optional
    name : str
    """

    def __init__(self, dim: int, fn: VectorFn, domain: Optional[BoxDomain] = None,
                 noise: Optional[NoiseModel] = None, name: str = "custom"):
        self.dim = int(dim)
        self.fn = fn
        self.domain = domain if domain is not None else BoxDomain.unit(dim)
        if self.domain.dim != self.dim:
            raise DimensionMismatch("domain dimension does not match oracle dimension")
        self.noise = noise if noise is not None else NoiseModel()
        self.name = name
        self._lock = threading.Lock()
        self._calls = 0

    @property
    def call_count(self) -> int:
        return self._calls

    def reset_count(self) -> None:
        with self._lock:
            self._calls = 0

    def _points(self, x) -> tuple[np.ndarray, bool]:
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionMismatch(f"expected points of dimension {self.dim}")
        return pts, single

    def exact(self, x) -> np.ndarray | float:
        """Noise-free values; not counted (diagnostics and tests only)."""
        pts, single = self._points(x)
        vals = np.asarray(self.fn(pts), dtype=float).reshape(-1)
        return float(vals[0]) if single else vals

    def evaluate(self, x, eta: float = 0.0) -> np.ndarray | float:
        """Values at ``x`` within ``eta`` of the exact objective."""
        if eta < 0:
            raise ValueError("noise bound must be nonnegative")
        pts, single = self._points(x)
        vals = np.asarray(self.fn(pts), dtype=float).reshape(-1)
        with self._lock:
            self._calls += pts.shape[0]
            vals = vals + self.noise.draw(pts, eta)
        return float(vals[0]) if single else vals

    __call__ = evaluate

    def to_original(self, t) -> np.ndarray:
        return self.domain.to_original(t)

    def to_unit(self, x) -> np.ndarray:
        return self.domain.to_unit(x)

    def __repr__(self) -> str:
        return f"Oracle(name={self.name!r}, dim={self.dim})"


def rescale(o: Oracle, box: BoxDomain) -> Oracle:
    """Oracle ``g(t) = o(A t + b)`` where ``t -> A t + b`` maps [-1, 1]^n onto ``box``.

    ``box`` is given in the unit coordinates of ``o``.
    """
    if box.dim != o.dim:
        raise DimensionMismatch("box dimension does not match oracle dimension")
    inner = o.fn

    def fn(t: np.ndarray) -> np.ndarray:
        return inner(box.to_original(t))

    return Oracle(o.dim, fn, o.domain.compose(box), o.noise, o.name)


def with_noise(o: Oracle, model: Optional[NoiseModel]) -> Oracle:
    """Same objective with a different noise model."""
    return Oracle(o.dim, o.fn, o.domain, model if model is not None else NoiseModel(), o.name)


def from_function(dim: int, f: VectorFn, name: str = "custom") -> Oracle:
    """Oracle whose unit cube is the native coordinate system of ``f``."""
    return Oracle(dim, f, None, None, name)


def poly_oracle(p: TensorPoly, name: str = "poly") -> Oracle:
    """Exact oracle for a known Chebyshev polynomial on [-1, 1]^n."""
    return Oracle(p.dim, lambda x: evaluate(p, x), None, None, name)


# ---------------------------------------------------------------------------
# benchmark formulas (original coordinates)
# ---------------------------------------------------------------------------

def trefethen(x: np.ndarray) -> np.ndarray:
    a, b = x[:, 0], x[:, 1]
    return (np.exp(np.sin(50 * a)) + np.sin(60 * np.exp(b)) + np.sin(70 * np.sin(a))
            + np.sin(np.sin(80 * b)) - np.sin(10 * (a + b)) + (a ** 2 + b ** 2) / 4)


_FOXHOLES = np.array([(a1, a2) for a2 in (-32, -16, 0, 16, 32) for a1 in (-32, -16, 0, 16, 32)],
                     dtype=float)


def dejong5(x: np.ndarray) -> np.ndarray:
    """Shekel foxholes with the standard 5 x 5 grid of holes."""
    j = np.arange(1, 26, dtype=float)
    dx = x[:, 0:1] - _FOXHOLES[None, :, 0]
    dy = x[:, 1:2] - _FOXHOLES[None, :, 1]
    s = np.sum(1.0 / (j[None, :] + dx ** 6 + dy ** 6), axis=1)
    return 1.0 / (0.002 + s)


def _deuflhard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b
    return (np.exp(a ** 2 + b ** 2) - 3.0) ** 2 + (s - np.sin(3.0 * s)) ** 2


def deuflhard2d(x: np.ndarray) -> np.ndarray:
    return _deuflhard(x[:, 0], x[:, 1])


def deuflhard4d(x: np.ndarray) -> np.ndarray:
    return _deuflhard(x[:, 0], x[:, 1]) + _deuflhard(x[:, 2], x[:, 3])


def holder_table2(x: np.ndarray) -> np.ndarray:
    a, b = x[:, 0], x[:, 1]
    r = np.sqrt(a ** 2 + b ** 2)
    return -np.abs(np.sin(a) * np.cos(b) * np.exp(np.abs(1.0 - r / np.pi)))


ORTHANT_4D = [[-0.1, 1.1], [-1.1, 0.1], [-0.1, 1.1], [-1.1, 0.1]]

BENCHMARKS: Dict[str, tuple] = {
    # name: (formula, dimension, default domain)
    "trefethen": (trefethen, 2, [[-0.375, 0.375]] * 2),
    "dejong5": (dejong5, 2, [[-50.0, 50.0]] * 2),
    "deuflhard2d": (deuflhard2d, 2, [[-1.1, 1.1]] * 2),
    "deuflhard4d": (deuflhard4d, 4, ORTHANT_4D),
    "holder_table2": (holder_table2, 2, [[-10.0, 10.0]] * 2),
}


def random_poly(n: int, d: int, seed: int) -> TensorPoly:
    """Dense random polynomial with standard normal Chebyshev coefficients."""
    return random_tensor_poly(n, d, np.random.default_rng(seed))


_RANDOM_POLY = re.compile(r"^random_poly\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(-?\d+)\s*\)$")


def make_benchmark(name: str, domain: Optional[BoxDomain | Sequence] = None,
                   expression: Optional[str] = None, dim: Optional[int] = None,
                   noise: Optional[NoiseModel] = None) -> Oracle:
    """Build a benchmark oracle rescaled from ``domain`` to the unit cube.

    Parameters
    ----------
    name : str
        One of ``trefethen``, ``dejong5``, ``deuflhard2d``, ``deuflhard4d``,
        ``holder_table2``, ``random_poly(n,d,seed)`` or ``custom``.
    domain : BoxDomain or list of pairs, optional
        Box in original coordinates. Defaults to the benchmark's usual box.
    expression : str, optional
        Formula for ``custom`` (see :func:`compile_expression`).
    dim : int, optional
        Dimension for ``custom`` (inferred from ``domain`` when omitted).
    """
    if domain is not None and not isinstance(domain, BoxDomain):
        domain = BoxDomain.parse(domain)
    m = _RANDOM_POLY.match(name.replace(" ", ""))
    if m:
        n, d, seed = (int(g) for g in m.groups())
        p = random_poly(n, d, seed)
        raw = Oracle(n, lambda x: evaluate(p, x), None, None, name)
    elif name == "custom":
        if expression is None:
            raise ConfigError("custom oracle needs an expression")
        n = dim if dim is not None else (domain.dim if domain is not None else None)
        if n is None:
            raise ConfigError("custom oracle needs a dimension or a domain")
        raw = Oracle(n, compile_expression(expression, n), None, None, "custom")
    elif name in BENCHMARKS:
        f, n, default = BENCHMARKS[name]
        raw = Oracle(n, f, None, None, name)
        if domain is None:
            domain = BoxDomain.parse(default)
    else:
        raise UnknownBenchmark(name)
    if domain is None:
        domain = BoxDomain.unit(raw.dim)
    if domain.dim != raw.dim:
        raise DimensionMismatch(f"{name} has dimension {raw.dim}, domain has {domain.dim}")
    return with_noise(rescale(raw, domain), noise)


# ---------------------------------------------------------------------------
# expression grammar
# ---------------------------------------------------------------------------

_FUNCS = {
    "exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs, "sqrt": np.sqrt,
    "pow": np.power, "tan": np.tan, "log": np.log,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def compile_expression(text: str, dim: int) -> VectorFn:
    """Compile an arithmetic formula in ``x1..xn`` into a vectorized function.

    Allowed: numbers, ``+ - * / **``, unary minus, the functions
    ``exp sin cos abs sqrt pow tan log`` and the constants ``pi`` and ``e``.
    ``x``, ``y`` and ``z`` alias ``x1``, ``x2`` and ``x3``.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression: {exc.msg}") from None
    names = {f"x{i + 1}": i for i in range(dim)}
    for alias, i in (("x", 0), ("y", 1), ("z", 2)):
        if i < dim:
            names[alias] = i

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda X: v
        if isinstance(node, ast.Name):
            if node.id in names:
                i = names[node.id]
                return lambda X: X[:, i]
            if node.id in _CONSTS:
                v = _CONSTS[node.id]
                return lambda X: v
            raise ConfigError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, a, b = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda X: op(a(X), b(X))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            a = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda X: sign * a(X)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            fn = _FUNCS[node.func.id]
            args = [build(a) for a in node.args]
            return lambda X: fn(*(a(X) for a in args))
        raise ConfigError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")

    body = build(tree)

    def f(X: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            out = np.broadcast_to(np.asarray(body(X), dtype=float), (X.shape[0],)).copy()
        return out

    return f


# ---------------------------------------------------------------------------
# subprocess oracle
# ---------------------------------------------------------------------------

class SubprocessOracle(Oracle):
    """Oracle backed by a child process speaking a line protocol.

    For every point the parent writes ``xi_1 ... xi_n eta`` (original
    coordinates, 17 significant digits) and reads back one value per line.
    """

    def __init__(self, command: str | Sequence[str], domain: BoxDomain, name: str = "subprocess"):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                      text=True, bufsize=1)
        self._io = threading.Lock()
        self._eta = 0.0
        super().__init__(domain.dim, self._query, domain, None, name)

    def _query(self, t: np.ndarray) -> np.ndarray:
        x = self.domain.to_original(t)
        out = np.empty(x.shape[0])
        with self._io:
            for i, row in enumerate(x):
                line = " ".join(format(v, ".17g") for v in row) + " " + format(self._eta, ".17g")
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline()
                if not reply:
                    raise NonFiniteValues("subprocess oracle closed its output")
                out[i] = float(reply.strip())
        return out

    def evaluate(self, x, eta: float = 0.0):
        # the child is responsible for honouring the bound; it is forwarded as is
        self._eta = float(eta)
        try:
            return super().evaluate(x, 0.0)
        finally:
            self._eta = 0.0

    __call__ = evaluate

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
