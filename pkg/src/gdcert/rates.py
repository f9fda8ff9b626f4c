"""Scalar sequences E_k, F_k, T_k, the exact rate tau, and the optimal stepsize.

Conventions: ``rho = 1 - gamma*L`` and ``eta = 1 - gamma*mu``.  ``E_k(0)`` is an
infinite value, represented by the :data:`INF` sentinel rather than a float
infinity so that it can only take part in comparisons.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Union

from scipy.optimize import brentq

__all__ = [
    "INF",
    "NEG_INF",
    "Infinite",
    "ExtendedReal",
    "UndefinedDifference",
    "RootNotBracketed",
    "ProblemSpec",
    "Branch",
    "RateResult",
    "Moved",
    "EffectiveParameters",
    "eval_E",
    "eval_F",
    "eval_T",
    "is_infinite",
    "tau",
    "gamma_star",
    "effective_parameters",
    "TIE_RTOL",
]

# |gamma - gamma*| <= TIE_RTOL * gamma* counts as the optimal stepsize.
TIE_RTOL = 1e-9
_BRACKET_GUARD = 1e-12
_MAX_DOUBLINGS = 60


class UndefinedDifference(ArithmeticError):
    """Raised for the indeterminate form inf - inf."""


class RootNotBracketed(ValueError):
    """Raised when a root-finding bracket shows no sign change."""


@functools.total_ordering
class Infinite:
    """Signed infinity for E_k(0) and differences involving it.

    Ordering against real numbers is total; arithmetic is deliberately absent.
    """

    __slots__ = ("sign",)

    def __init__(self, sign: int) -> None:
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        self.sign = sign

    def __repr__(self) -> str:
        return "INF" if self.sign > 0 else "-INF"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Infinite) and other.sign == self.sign

    def __hash__(self) -> int:
        return hash(("Infinite", self.sign))

    def __lt__(self, other: object) -> bool:
        if isinstance(other, Infinite):
            return self.sign < other.sign
        if isinstance(other, (int, float)):
            return self.sign < 0
        return NotImplemented

    def __neg__(self) -> "Infinite":
        return NEG_INF if self.sign > 0 else INF


INF = Infinite(1)
NEG_INF = Infinite(-1)

ExtendedReal = Union[float, Infinite]


def is_infinite(value: ExtendedReal) -> bool:
    return isinstance(value, Infinite)


def eval_E(k: int, x: float) -> ExtendedReal:
    """E_k(x) = sum_{j=1}^{2k} x^{-j}, with E_k(0) = INF.

    Consecutive terms are paired as x^{-2i}(1 + x), which keeps every summand
    of one sign and avoids cancellation for x in (-1, 0).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if x == 0:
        return INF
    inv2 = 1.0 / (x * x)
    terms, power = [], 1.0
    for _ in range(k):
        power *= inv2
        terms.append(power)
    return (1.0 + x) * math.fsum(terms)


def eval_F(k: int, x: float) -> float:
    """F_k(x) = sum_{j=1}^{k} x^j.  F_0 is the empty sum, 0."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    terms, power = [], 1.0
    for _ in range(k):
        power *= x
        terms.append(power)
    return math.fsum(terms)


def eval_T(k: int, rho: float, eta: float) -> ExtendedReal:
    """T_k(rho, eta) = E_k(eta) - E_k(rho)."""
    e_eta = eval_E(k, eta)
    e_rho = eval_E(k, rho)
    if is_infinite(e_eta) and is_infinite(e_rho):
        raise UndefinedDifference("T_k is undefined when rho = eta = 0")
    if is_infinite(e_eta):
        return INF
    if is_infinite(e_rho):
        return NEG_INF
    return e_eta - e_rho


def _scaled_E_sign(N: int, x: float, target: float) -> float:
    """A bounded function with the sign of E_N(x) - target.

    Uses x^{2N} E_N(x) = 1 + x + ... + x^{2N-1}, so the value at x = 0 is 1
    (E_N(0) is infinite) and nothing overflows near the pole.
    """
    return 1.0 + eval_F(2 * N - 1, x) - target * x ** (2 * N)


@dataclass(frozen=True)
class ProblemSpec:
    """Iteration count, curvature bounds and stepsize of a GD run."""

    N: int
    mu: float
    L: float
    gamma: float

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.mu < self.L:
            raise ValueError(f"mu must be < L, got mu={self.mu}, L={self.L}")
        if not 0 < self.gamma < 2 / self.L:
            raise ValueError(f"gamma must lie in (0, 2/L), got {self.gamma}")

    @property
    def rho(self) -> float:
        return 1.0 - self.gamma * self.L

    @property
    def eta(self) -> float:
        return 1.0 - self.gamma * self.mu

    @property
    def kappa(self) -> float:
        return self.mu / self.L

    @classmethod
    def at_optimal(cls, N: int, mu: float, L: float) -> "ProblemSpec":
        return cls(N, mu, L, gamma_star(N, mu, L))


class Branch(str, enum.Enum):
    ETA = "eta-branch"
    RHO = "rho-branch"
    TIE = "tie"


@dataclass(frozen=True)
class RateResult:
    tau: float
    branch: Branch
    eta_value: float
    rho_value: float
    rho_value_closed: float

    @property
    def f_bound(self) -> float:
        """Coefficient c in f(x_N) - f_* <= c * ||x_0 - x_*||^2."""
        return self.tau / 2


def _branch_value(gL: float, e: ExtendedReal) -> float:
    # 1 / (1 + gamma L E) with E = INF giving 0.
    if is_infinite(e):
        return 0.0
    return 1.0 / (1.0 + gL * e)


def tau(spec: ProblemSpec) -> RateResult:
    """Exact rate coefficient tau = L * max{1/(1+gL E_N(eta)), 1/(1+gL E_N(rho))}."""
    N, L, g = spec.N, spec.L, spec.gamma
    gL = g * L
    v_eta = _branch_value(gL, eval_E(N, spec.eta))
    v_rho = _branch_value(gL, eval_E(N, spec.rho))
    v_rho_closed = spec.rho ** (2 * N)
    g_opt = gamma_star(N, spec.mu, L)
    if abs(g - g_opt) <= TIE_RTOL * g_opt:
        branch = Branch.TIE
    elif v_eta >= v_rho:
        branch = Branch.ETA
    else:
        branch = Branch.RHO
    return RateResult(
        tau=L * max(v_eta, v_rho),
        branch=branch,
        eta_value=v_eta,
        rho_value=v_rho,
        rho_value_closed=v_rho_closed,
    )


def _root(f: Callable[[float], float], a: float, b: float) -> float:
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise RootNotBracketed(f"no sign change on [{a!r}, {b!r}]: f={fa!r}, {fb!r}")
    return brentq(f, a, b, xtol=1e-300, rtol=4 * 2.220446049250313e-16, maxiter=500)


def _polish(residual: Callable[[float], float], x: float) -> float:
    """Pick the float neighbour of x with the smallest |residual|."""
    best, best_r = x, abs(residual(x))
    for direction in (math.inf, -math.inf):
        y = x
        for _ in range(8):
            y = math.nextafter(y, direction)
            r = abs(residual(y))
            if r < best_r:
                best, best_r = y, r
    return best


def gamma_star(N: int, mu: float, L: float) -> float:
    """The stepsize in (0, 2/L) at which E_N(1 - gamma mu) = E_N(1 - gamma L).

    mu may be negative.  The returned gamma satisfies gamma*L in (1, 2).
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if not L > 0 or not mu < L:
        raise ValueError(f"need L > 0 and mu < L, got mu={mu}, L={L}")
    return _gamma_star_cached(int(N), float(mu), float(L))


@functools.lru_cache(maxsize=4096)
def _gamma_star_cached(N: int, mu: float, L: float) -> float:
    two_n = 2 * N

    def scaled(g: float) -> float:
        # rho^{2N} eta^{2N} (E_N(eta) - E_N(rho)), bounded on the bracket
        rho, eta = 1.0 - g * L, 1.0 - g * mu
        q_eta = 1.0 + eval_F(two_n - 1, eta)
        q_rho = 1.0 + eval_F(two_n - 1, rho)
        return rho**two_n * q_eta - eta**two_n * q_rho

    eps = _BRACKET_GUARD * L
    lo, hi = 1.0 / L + eps / L**2, 2.0 / L - eps / L**2
    g = _root(scaled, lo, hi)

    def residual(x: float) -> float:
        t = eval_T(N, 1.0 - x * L, 1.0 - x * mu)
        return math.inf if is_infinite(t) or math.isnan(t) else t

    return _polish(residual, g)


class Moved(str, enum.Enum):
    NONE = "none"
    L_RAISED = "L-raised"
    MU_LOWERED = "mu-lowered"


@dataclass(frozen=True)
class EffectiveParameters:
    """(mu', L') at which the given stepsize is optimal."""

    mu_eff: float
    L_eff: float
    which_moved: Moved
    gamma: float = field(default=math.nan)

    def spec(self, N: int) -> ProblemSpec:
        return ProblemSpec(N, self.mu_eff, self.L_eff, self.gamma)


def effective_parameters(spec: ProblemSpec) -> EffectiveParameters:
    """Move L up (gamma below gamma*) or mu down (gamma above gamma*) until
    gamma becomes the optimal stepsize.
    """
    N, mu, L, g = spec.N, spec.mu, spec.L, spec.gamma
    g_opt = gamma_star(N, mu, L)
    if abs(g - g_opt) <= TIE_RTOL * g_opt:
        return EffectiveParameters(mu, L, Moved.NONE, g)

    if g < g_opt:
        # E_N(eta) < E_N(rho): raise L until E_N(1 - g L') = E_N(eta).
        target = eval_E(N, spec.eta)
        if is_infinite(target):
            raise RootNotBracketed("E_N(eta) is infinite; cannot raise L")

        def f_L(Lp: float) -> float:
            return _scaled_E_sign(N, 1.0 - g * Lp, target)

        lo = max(L, 1.0 / g)
        L_eff = _root(f_L, lo, 2.0 / g)
        if not L_eff < 2.0 / g:
            raise RootNotBracketed("effective L reached 2/gamma")
        return EffectiveParameters(mu, L_eff, Moved.L_RAISED, g)

    # E_N(eta) > E_N(rho): lower mu until E_N(1 - g mu') = E_N(rho).
    target = eval_E(N, spec.rho)
    if is_infinite(target):
        raise RootNotBracketed("E_N(rho) is infinite; cannot lower mu")

    def f_mu(m: float) -> float:
        return _scaled_E_sign(N, 1.0 - g * m, target)

    # Stay on the eta' > 0 side of the pole of E_N at eta' = 0.
    hi = min(mu, 1.0 / g)
    width = L - mu
    lo = hi - width
    for _ in range(_MAX_DOUBLINGS):
        if f_mu(lo) < 0:
            break
        width *= 2.0
        lo = hi - width
    else:
        raise RootNotBracketed("no sign change after bracket expansion for mu'")
    mu_eff = _root(f_mu, lo, hi)
    return EffectiveParameters(mu_eff, L, Moved.MU_LOWERED, g)
