"""Enumerate local minimizers of a black-box function on a box.

The pipeline samples the objective, fits a discrete least-squares polynomial
in a tensorized Chebyshev basis, and solves the approximant's gradient system
by certified subdivision.
"""

from .cheb_core import TensorPoly, evaluate, l2_norm_mu, partial, quad_mu, sup_norm_grid
from .dlsp import FitReport, fit
from .driver import RunResult, capture_stats, minimizers_adaptive, minimizers_regular, polish
from .oracle import BoxDomain, NoiseModel, Oracle, make_benchmark
from .planner import Plan, plan
from .psolve import CriticalPoint, SolveOutcome, critical_points, solve_in_box
from .sampling import SampleSet, sample_iid, tensor_grid

__all__ = [
    "BoxDomain", "CriticalPoint", "FitReport", "NoiseModel", "Oracle", "Plan", "RunResult",
    "SampleSet", "SolveOutcome", "TensorPoly", "capture_stats", "critical_points", "evaluate",
    "fit", "l2_norm_mu", "make_benchmark", "minimizers_adaptive", "minimizers_regular",
    "partial", "plan", "polish", "quad_mu", "sample_iid", "solve_in_box", "sup_norm_grid",
    "tensor_grid",
]

__version__ = "0.1.0"
