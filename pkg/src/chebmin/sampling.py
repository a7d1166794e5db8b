"""Sample sets in [-1, 1]^n: i.i.d. arcsine draws and tensor Chebyshev grids."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .cheb_core import basis_size, gauss_chebyshev_nodes


@dataclass(frozen=True, eq=False)
class SampleSet:
    """An ordered point set together with the recipe that produced it.

    Parameters
    ----------
    dim : int
        Space dimension ``n``.
    points : ndarray
        Array of shape ``(k, n)`` with coordinates in [-1, 1].
    provenance : dict
        ``{"kind": "iid", "seed": s, "k": k}`` or
        ``{"kind": "grid", "points_per_axis": m}``.
    """

    dim: int
    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, self.dim)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_grid(self) -> bool:
        return self.provenance.get("kind") == "grid"

    def axis_nodes(self) -> np.ndarray:
        """1-D nodes of a tensor grid, in generation order (descending)."""
        if not self.is_grid:
            raise ValueError("sample set is not a tensor grid")
        return gauss_chebyshev_nodes(int(self.provenance["points_per_axis"]))

    # -- serialization ---------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(self.dim)])
        for row in self.points:
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"dim": self.dim, "count": len(self), "provenance": self.provenance}

    def save(self, path: str | Path) -> Tuple[Path, Path]:
        """Write ``path`` (CSV) and ``path.json`` (provenance)."""
        path = Path(path)
        path.write_text(self.to_csv())
        side = path.with_suffix(path.suffix + ".json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def load(cls, path: str | Path) -> "SampleSet":
        path = Path(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        rows = list(csv.reader(io.StringIO(path.read_text())))[1:]
        pts = np.array([[float(v) for v in r] for r in rows], dtype=float)
        return cls(int(meta["dim"]), pts.reshape(-1, int(meta["dim"])), meta["provenance"])


def sample_iid(n: int, k: int, seed: int) -> SampleSet:
    """``k`` i.i.d. points from the tensorized Chebyshev (arcsine) measure.

    Each coordinate is ``cos(pi * u)`` with ``u`` uniform on (0, 1).
    """
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    rng = np.random.default_rng(seed)
    u = rng.random((k, n))
    return SampleSet(n, np.cos(np.pi * u), {"kind": "iid", "seed": int(seed), "k": int(k)})


def tensor_grid(n: int, points_per_axis: int) -> SampleSet:
    """Tensor product of ``points_per_axis`` first-kind Chebyshev nodes per axis.

    Points are listed with the first axis varying slowest.
    """
    if n < 1 or points_per_axis < 1:
        raise ValueError("need n >= 1 and points_per_axis >= 1")
    x = gauss_chebyshev_nodes(points_per_axis)
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    pts = np.stack([a.reshape(-1) for a in mesh], axis=1)
    return SampleSet(n, pts, {"kind": "grid", "points_per_axis": int(points_per_axis)})


def grid_for_count(n: int, k: int) -> SampleSet:
    """Smallest tensor grid with at least ``k`` points (``ceil(k^(1/n))`` per axis)."""
    m = math.isqrt(k) if n == 2 else int(round(k ** (1.0 / n)))
    while m ** n < k:
        m += 1
    while m > 1 and (m - 1) ** n >= k:
        m -= 1
    return tensor_grid(n, max(m, 1))


def default_grid_size(n: int, d: int, max_design_entries: float = 2e7) -> int:
    """Points per axis used when fitting degree ``d`` on a grid.

    At least ``2(d+1)`` nodes per axis, matching the 120-per-axis grid of the
    2-D experiments when that is larger, and capped so the design matrix stays
    below ``max_design_entries`` entries (never below ``d + 2``).
    """
    if n <= 2:
        return max(120, 2 * (d + 1))
    m = max(2 * (d + 1), math.ceil(14400 ** (1.0 / n)))
    D = basis_size(n, d)
    while m > d + 2 and (m ** n) * D > max_design_entries:
        m -= 1
    return m


def sample_points(n: int, k: int, mode: str = "grid", seed: Optional[int] = None) -> SampleSet:
    """Dispatch on sampling mode: ``"grid"`` or ``"iid"``."""
    if mode == "grid":
        return grid_for_count(n, k)
    if mode == "iid":
        return sample_iid(n, k, 0 if seed is None else seed)
    raise ValueError(f"unknown sampling mode {mode!r}")
