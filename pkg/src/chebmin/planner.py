"""Degree, noise and sample budgets for least-squares capture of minimizers.

With ``beta = ln 3 / (2 ln 2)`` and ``D = binom(n + d, n)`` a plan must satisfy

    (A1 / d^(2m-2) + A2 * eta^2) * d^(2 beta n) <= lam^2 eps^4        (degree)
    k / (ln k + ln(4 / alpha)) >= 2 D^(2 beta) / delta^2              (samples)
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass

from .cheb_core import basis_size
from .errors import PlanInfeasible

_REL_SLACK = 1e-12


def beta() -> float:
    """Exponent ``ln 3 / (2 ln 2)`` (half of log2 3)."""
    return math.log(3.0) / (2.0 * math.log(2.0))


def min_smoothness(n: int) -> float:
    """Smallest admissible regularity ``m = max(3, beta * n + 1)``."""
    return max(3.0, beta() * n + 1.0)


def default_constants(n: int, m: int, kappa: float, delta: float,
                      C_nm: float) -> tuple[float, float]:
    """Closed-form constants ``(A1, A2)`` from regularity data.

    ``kappa`` bounds the derivatives of the objective and ``C_nm`` is the
    Jackson approximation constant.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if kappa <= 0 or C_nm <= 0:
        raise ValueError("kappa and C_nm must be positive")
    pe = (math.pi * math.e) ** n
    A1 = 16.0 * (1.0 / math.pi ** n + 2.0 / (1.0 - delta)) * C_nm ** 2 * kappa ** 2 / pe
    A2 = (16.0 * (1.0 + delta) / (pe * (1.0 - delta) ** 2)
          * (8.0 * delta ** 2 * (1.0 - delta) ** 4 + 4.0))
    return A1, A2


@dataclass(frozen=True)
class Plan:
    """Parameter bundle of one regular run.

    ``d_formula`` is the degree given by the closed-form rule before the
    degree inequality is enforced; ``d`` is the degree actually used.
    """

    n: int
    m: float
    eps: float
    alpha: float
    delta: float
    lam: float
    A1: float
    A2: float
    d: int
    eta_bar: float
    k: int
    D: int
    d_formula: int = 0
    clamped: bool = False
    forced: bool = False

    def degree_lhs(self) -> float:
        b = beta()
        return (self.A1 / self.d ** (2 * self.m - 2) + self.A2 * self.eta_bar ** 2) \
            * self.d ** (2 * b * self.n)

    def degree_rhs(self) -> float:
        return self.lam ** 2 * self.eps ** 4

    def sample_ratio(self) -> float:
        return self.k / (math.log(self.k) + math.log(4.0 / self.alpha))

    def sample_rhs(self) -> float:
        return 2.0 * self.D ** (2.0 * beta()) / self.delta ** 2

    def check(self) -> None:
        """Raise :class:`PlanInfeasible` naming the first violated inequality."""
        if self.degree_lhs() > self.degree_rhs() * (1.0 + _REL_SLACK):
            raise PlanInfeasible(
                f"degree inequality violated: {self.degree_lhs():.6g} > {self.degree_rhs():.6g}",
                "degree")
        if self.sample_ratio() < self.sample_rhs():
            raise PlanInfeasible(
                f"sample inequality violated: {self.sample_ratio():.6g} < {self.sample_rhs():.6g}",
                "samples")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["beta"] = beta()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _validate(n, m, eps, alpha, delta, lam, A1, A2) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if lam <= 0 or A1 <= 0 or A2 <= 0:
        raise ValueError("lambda, A1 and A2 must be positive")
    if m < min_smoothness(n) - 1e-12:
        raise ValueError(f"m must be >= max(3, beta*n + 1) = {min_smoothness(n):.6g}")


def closed_form_degree(n: int, m: float, eps: float, lam: float, A1: float) -> int:
    """Closed-form degree ``ceil((A1 / (2 lam^2 eps^4))^(1 / (2 (m - beta n - 1))))``."""
    expo = 1.0 / (2.0 * (m - beta() * n - 1.0))
    return math.ceil((A1 / (2.0 * lam ** 2 * eps ** 4)) ** expo)


def sufficient_degree(n: int, m: float, eps: float, lam: float, A1: float) -> int:
    """Smallest degree with ``A1 d^(2 beta n - 2m + 2) <= 3/4 lam^2 eps^4``.

    Together with the noise bound below (which spends a quarter of the budget)
    this makes the degree inequality hold.
    """
    e = 2.0 * (m - beta() * n - 1.0)
    d = max(1, math.ceil((4.0 * A1 / (3.0 * lam ** 2 * eps ** 4)) ** (1.0 / e)))
    rhs = 0.75 * lam ** 2 * eps ** 4
    # the closed form is off by rounding only; a few unit steps settle it
    for _ in range(4):
        if d > 1 and A1 * float(d - 1) ** (-e) <= rhs:
            d -= 1
        elif A1 * float(d) ** (-e) > rhs:
            d += 1
        else:
            break
    return d


def noise_bound(n: int, d: int, eps: float, lam: float, A2: float) -> float:
    """``eta = lam eps^2 / (2 d^(beta n) sqrt(A2))``."""
    return lam * eps ** 2 / (2.0 * d ** (beta() * n) * math.sqrt(A2))


def sample_count(D: int, delta: float, alpha: float) -> int:
    """``k = ceil((2 D^(2 beta) / delta^2 * (1 + ln(4 / alpha)))^2)``."""
    return math.ceil((2.0 * D ** (2.0 * beta()) / delta ** 2 * (1.0 + math.log(4.0 / alpha))) ** 2)


def plan(n: int, m: float, eps: float, alpha: float, delta: float, lam: float,
         A1: float, A2: float) -> Plan:
    """Degree, noise bound and sample count satisfying both budget inequalities.

    The degree is the larger of the closed-form value and the smallest degree
    for which the approximation term fits into three quarters of the budget,
    then clamped to at least 2. The noise bound then spends the remaining
    quarter. Both inequalities are re-checked before returning.
    """
    _validate(n, m, eps, alpha, delta, lam, A1, A2)
    d_formula = closed_form_degree(n, m, eps, lam, A1)
    d = max(d_formula, sufficient_degree(n, m, eps, lam, A1))
    clamped = d < 2
    if clamped:
        warnings.warn(f"planned degree {d} raised to 2", RuntimeWarning, stacklevel=2)
        d = 2
    eta = noise_bound(n, d, eps, lam, A2)
    D = basis_size(n, d)
    k = sample_count(D, delta, alpha)
    p = Plan(n, float(m), float(eps), float(alpha), float(delta), float(lam), float(A1),
             float(A2), int(d), float(eta), int(k), int(D), int(d_formula), clamped)
    p.check()
    return p


def forced_plan(n: int, d: int, eps: float, eta_bar: float = 0.0, k: int | None = None,
                alpha: float = 0.05, delta: float = 0.5) -> Plan:
    """Plan with a user-chosen degree, bypassing the budget inequalities."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    D = basis_size(n, d)
    if k is None:
        k = D
    return Plan(n, min_smoothness(n), float(eps), float(alpha), float(delta), 1.0, 1.0, 1.0,
                int(d), float(eta_bar), int(k), int(D), int(d), False, True)


def growth_factor(n: int, m: float) -> float:
    """Asymptotic ratio ``d(eps / 2) / d(eps) = 4^(1 / (m - beta n - 1))``."""
    return 4.0 ** (1.0 / (m - beta() * n - 1.0))
