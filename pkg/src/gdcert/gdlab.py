"""Gradient descent on concrete functions: criteria, tight instances, stress tests."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .rates import ProblemSpec, tau
from .verifier import interpolation_gap

__all__ = [
    "FunctionOracle",
    "GDTrace",
    "run_gd",
    "quadratic_instance",
    "huber_tight_instance",
    "huber_slope",
    "huber_slope_numeric",
    "random_quadratic_instance",
    "membership_check",
    "criterion_g_bound",
    "baseline_f_bound",
    "polyak_factor",
    "tightness_summary",
    "stress_quadratics",
    "trace_to_csv",
]

MEMBERSHIP_ATOL = 1e-9


@dataclass(frozen=True)
class FunctionOracle:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    declared_mu: float
    declared_L: float
    minimizer: np.ndarray
    min_value: float
    name: str = "function"

    @property
    def dim(self) -> int:
        return len(self.minimizer)


@dataclass
class GDTrace:
    iterates: np.ndarray
    gradients: np.ndarray
    values: np.ndarray
    min_value: float
    minimizer: np.ndarray
    gamma: float

    @property
    def N(self) -> int:
        return len(self.iterates) - 1

    @property
    def criterion_f(self) -> Optional[float]:
        """(f(x_N) - f_*) / ||x_0 - x_*||^2, or None when x_0 is the minimizer."""
        dist2 = float(np.sum((self.iterates[0] - self.minimizer) ** 2))
        if dist2 == 0.0:
            return None
        return (self.values[-1] - self.min_value) / dist2

    @property
    def criterion_g(self) -> Optional[float]:
        """||grad f(x_N)||^2 / (f(x_0) - f_*), or None when f(x_0) = f_*."""
        gap0 = self.values[0] - self.min_value
        if gap0 == 0.0:
            return None
        return float(self.gradients[-1] @ self.gradients[-1]) / gap0


def run_gd(oracle: FunctionOracle, x0, gamma: float, N: int) -> GDTrace:
    if not 0 < gamma < 2.0 / oracle.declared_L:
        raise ValueError(f"gamma must lie in (0, 2/L), got {gamma}")
    x = np.array(x0, dtype=float).reshape(-1)
    xs, gs, fs = [x], [], []
    for _ in range(N):
        g = np.asarray(oracle.gradient(x), dtype=float)
        gs.append(g)
        fs.append(oracle.value(x))
        x = x - gamma * g
        xs.append(x)
    gs.append(np.asarray(oracle.gradient(x), dtype=float))
    fs.append(oracle.value(x))
    return GDTrace(
        iterates=np.array(xs),
        gradients=np.array(gs),
        values=np.array(fs, dtype=float),
        min_value=oracle.min_value,
        minimizer=np.asarray(oracle.minimizer, dtype=float),
        gamma=gamma,
    )


def quadratic_instance(L: float, d: int = 1, declared_mu: float = 0.0) -> FunctionOracle:
    """f(x) = (L/2)||x||^2, the extremal function for the rho-branch."""
    if not L > 0:
        raise ValueError("L must be positive")
    return FunctionOracle(
        value=lambda x: 0.5 * L * float(np.dot(x, x)),
        gradient=lambda x: L * np.asarray(x, dtype=float),
        declared_mu=declared_mu,
        declared_L=L,
        minimizer=np.zeros(d),
        min_value=0.0,
        name="quadratic",
    )


def huber_slope(N: int, gamma: float, L: float, x0_distance: float) -> float:
    """Slope s maximizing the final gap of GD started in the linear region."""
    return L * x0_distance / (2 * N * gamma * L + 1)


def huber_slope_numeric(N: int, gamma: float, L: float, x0_distance: float) -> float:
    """Bounded numeric maximization of R(s) = (s(x0 - N gamma s) - s^2/(2L)) / x0^2.

    The bracket keeps x_N = x0 - N gamma s inside the linear region |x| >= s/L.
    """
    x0 = x0_distance
    hi = L * x0 / (N * gamma * L + 1)

    def neg_ratio(s: float) -> float:
        return -(s * (x0 - N * gamma * s) - s * s / (2 * L)) / x0**2

    res = minimize_scalar(neg_ratio, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def _huber(s: float, L: float) -> FunctionOracle:
    kink = s / L

    def value(x):
        a = abs(float(np.asarray(x).reshape(-1)[0]))
        return s * a - s * s / (2 * L) if a >= kink else 0.5 * L * a * a

    def gradient(x):
        v = float(np.asarray(x).reshape(-1)[0])
        return np.array([s * math.copysign(1.0, v) if abs(v) >= kink else L * v])

    return FunctionOracle(value, gradient, 0.0, L, np.zeros(1), 0.0, name="huber")


def huber_tight_instance(N: int, gamma: float, L: float, x0_distance: float = 1.0) -> FunctionOracle:
    """One-dimensional Huber function on which GD from x0_distance attains L/(2(2N gamma L + 1))."""
    if not 0 < gamma < 2.0 / L:
        raise ValueError("gamma must lie in (0, 2/L)")
    if not x0_distance > 0:
        raise ValueError("x0_distance must be positive")
    s = huber_slope(N, gamma, L, x0_distance)
    x_final = x0_distance - N * gamma * s
    if x_final < s / L * (1 - 1e-12):
        raise ArithmeticError("iterates leave the linear region; slope derivation is wrong")
    return _huber(s, L)


def random_quadratic_instance(mu: float, L: float, d: int, seed=None) -> FunctionOracle:
    """f(x) = 0.5 <Q(x - x*), x - x*> + c with spectrum in [mu, L], endpoints included."""
    if not 0 <= mu < L:
        raise ValueError("need 0 <= mu < L")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eig = rng.uniform(mu, L, d)
    eig[0] = L
    if d > 1:
        eig[1] = mu
    Q0, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Q = (Q0 * eig) @ Q0.T
    Q = 0.5 * (Q + Q.T)
    x_star = rng.standard_normal(d)
    c = float(rng.standard_normal())

    def value(x):
        r = np.asarray(x, dtype=float) - x_star
        return 0.5 * float(r @ Q @ r) + c

    def gradient(x):
        return Q @ (np.asarray(x, dtype=float) - x_star)

    return FunctionOracle(value, gradient, mu, L, x_star, c, name="random-quadratic")


def membership_check(oracle: FunctionOracle, samples: int = 1000, seed=None, scale: float = 3.0) -> float:
    """Largest sampled interpolation gap (must be <= MEMBERSHIP_ATOL for members of F_{mu,L})."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(samples):
        p = oracle.minimizer + scale * rng.standard_normal(oracle.dim)
        q = oracle.minimizer + scale * rng.standard_normal(oracle.dim)
        gap = interpolation_gap(
            p, q, oracle.gradient(p), oracle.gradient(q), oracle.value(p), oracle.value(q),
            oracle.declared_mu, oracle.declared_L,
        )
        worst = max(worst, gap)
    return worst


def criterion_g_bound(spec: ProblemSpec) -> float:
    """Bound on ||grad f(x_N)||^2 / (f(x_0) - f_*): 2L times the rate factor, i.e. 2 tau."""
    return 2.0 * tau(spec).tau


def baseline_f_bound(N: int, L: float) -> float:
    """Classical bound 2L/(N+4) on (f(x_N) - f_*)/||x_0 - x_*||^2 at gamma = 1/L, mu = 0."""
    return 2.0 * L / (N + 4)


def polyak_factor(spec: ProblemSpec) -> float:
    return max(abs(1 - spec.gamma * spec.mu), abs(1 - spec.gamma * spec.L)) ** spec.N


def tightness_summary(N: int, gamma: float, L: float) -> dict:
    """Criterion f on the two extremal instances at mu = 0 against tau/2."""
    spec = ProblemSpec(N, 0.0, L, gamma)
    half_tau = tau(spec).f_bound
    huber = run_gd(huber_tight_instance(N, gamma, L), [1.0], gamma, N).criterion_f
    quad = run_gd(quadratic_instance(L), [1.0], gamma, N).criterion_f
    return {
        "N": N,
        "gamma": gamma,
        "L": L,
        "huber": huber,
        "huber_expected": L / (2 * (2 * N * gamma * L + 1)),
        "quadratic": quad,
        "quadratic_expected": 0.5 * L * spec.rho ** (2 * N),
        "half_tau": half_tau,
        "max_over_instances": max(huber, quad),
    }


def stress_quadratics(spec: ProblemSpec, count: int = 1000, d: int = 4, seed=None) -> dict:
    """Random members of F_{mu,L} never beat either criterion bound."""
    rng = np.random.default_rng(seed)
    f_bound = tau(spec).f_bound
    g_bound = criterion_g_bound(spec)
    worst_f = worst_g = worst_polyak = -math.inf
    for _ in range(count):
        oracle = random_quadratic_instance(spec.mu, spec.L, d, rng)
        x0 = oracle.minimizer + rng.standard_normal(d)
        tr = run_gd(oracle, x0, spec.gamma, spec.N)
        if tr.criterion_f is not None:
            worst_f = max(worst_f, tr.criterion_f / f_bound - 1.0)
        if tr.criterion_g is not None:
            worst_g = max(worst_g, tr.criterion_g / g_bound - 1.0)
        dist0 = np.linalg.norm(x0 - oracle.minimizer)
        distN = np.linalg.norm(tr.iterates[-1] - oracle.minimizer)
        worst_polyak = max(worst_polyak, distN / (polyak_factor(spec) * dist0) - 1.0)
    return {
        "count": count,
        "max_excess_f": worst_f,
        "max_excess_g": worst_g,
        "max_excess_polyak": worst_polyak,
        "passed": worst_f <= 1e-9 and worst_g <= 1e-9 and worst_polyak <= 1e-12,
    }


def trace_to_csv(trace: GDTrace) -> str:
    d = trace.iterates.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["k"] + [f"x{i}" for i in range(d)] + ["f", "grad_norm"]) + "\n")
    for k in range(trace.N + 1):
        row = [str(k)] + [format(v, ".17g") for v in trace.iterates[k]]
        row += [format(trace.values[k], ".17g"), format(float(np.linalg.norm(trace.gradients[k])), ".17g")]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
