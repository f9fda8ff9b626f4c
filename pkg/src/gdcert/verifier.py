"""Monte-Carlo checks of the multiplier inequalities and of auxiliary scalar facts.

All Monte-Carlo routines draw *arbitrary* families: points, gradients and
function values are independent Gaussians, linked only through the method's
update rule.  Because the multipliers satisfy the flow constraint, function
values cancel exactly and what remains is a quadratic form in the points and
gradients, so arbitrary sampling is the sharpest test available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lam import LambdaMultipliers, f1_residual
from .nu import NuMultipliers, flow_residual, flow_tolerance
from .rates import ProblemSpec, eval_E, tau

__all__ = [
    "SLACK_RTOL",
    "FlowViolation",
    "PsiDomainError",
    "PointFamily",
    "InequalityReport",
    "interpolation_gap",
    "pairwise_gaps",
    "sample_families",
    "link_iterates",
    "verify_F_inequality",
    "verify_G_inequality",
    "verify_G_modified",
    "strengthening_comparison",
    "inject_lambda_fault",
    "inject_nu_fault",
    "check_prop_trivial",
    "psi",
    "check_psi_convexity",
    "tau_gap_identity",
]

SLACK_RTOL = 1e-8
DEFAULT_DIM = 4
HEAVY_FRACTION = 0.1
HEAVY_SCALE = 100.0


class FlowViolation(ValueError):
    """Multipliers whose function-value coefficients do not cancel."""


class PsiDomainError(ValueError):
    pass


@dataclass
class PointFamily:
    """Points, gradients and values over indices 0..N (and optionally *, last).

    Arrays carry a leading trial axis: x and g have shape (T, n, d), f has (T, n).
    """

    x: np.ndarray
    g: np.ndarray
    f: np.ndarray

    @property
    def trials(self) -> int:
        return self.x.shape[0]


@dataclass
class InequalityReport:
    label: str
    trials: int
    min_slack: float
    passed: bool
    dim: int
    seed_entropy: Optional[int] = None
    worst_trial: int = -1
    raw_slacks: Optional[np.ndarray] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "trials": self.trials,
            "min_slack": self.min_slack,
            "pass": self.passed,
            "dim": self.dim,
            "seed_entropy": self.seed_entropy,
            "worst_trial": self.worst_trial,
        }


def _curvature_weight(mu: float, L: float) -> float:
    if not mu < L:
        raise ValueError(f"need mu < L, got mu={mu}, L={L}")
    return mu * L / (2.0 * (L - mu))


def interpolation_gap(p, q, gp, gq, fp, fq, mu: float, L: float) -> float:
    """Right-hand side of the smooth strongly convex interpolation inequality.

    Nonpositive for every pair of points of a function in F_{mu,L}.
    """
    p, q, gp, gq = (np.asarray(v, dtype=float) for v in (p, q, gp, gq))
    dg = gp - gq
    r = p - q - dg / L
    return float(
        fp - fq + gp @ (q - p) + dg @ dg / (2.0 * L) + _curvature_weight(mu, L) * (r @ r)
    )


def pairwise_gaps(x: np.ndarray, g: np.ndarray, f: np.ndarray, mu: float, L: float) -> np.ndarray:
    """G[t, i, j] = gap(p = x_j, q = x_i): the term multiplied by lambda_{i,j}."""
    c = _curvature_weight(mu, L)
    dx = x[:, :, None, :] - x[:, None, :, :]  # x_i - x_j
    dg = g[:, :, None, :] - g[:, None, :, :]
    inner = np.einsum("tjd,tijd->tij", g, dx)  # <g_j, x_i - x_j>
    r = dx - dg / L
    return (
        f[:, None, :]
        - f[:, :, None]
        + inner
        + np.einsum("tijd,tijd->tij", dg, dg) / (2 * L)
        + c * np.einsum("tijd,tijd->tij", r, r)
    )


def _rng(seed) -> tuple[np.random.Generator, Optional[int]]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.default_rng(ss), ss.entropy


def sample_families(rng: np.random.Generator, trials: int, n: int, dim: int) -> tuple:
    """Gaussian starting points, gradients and values with a heavy-scale mix.

    In a HEAVY_FRACTION of trials one of (points, gradients, values) is scaled
    up by HEAVY_SCALE, which exposes borderline indefiniteness better than
    unit-scale sampling alone.
    """
    x0 = rng.standard_normal((trials, dim))
    x_star = rng.standard_normal((trials, dim))
    g = rng.standard_normal((trials, n, dim))
    f = rng.standard_normal((trials, n))
    heavy = rng.random(trials) < HEAVY_FRACTION
    which = rng.integers(0, 3, trials)
    for k, arr in enumerate((None, g, f)):
        sel = heavy & (which == k)
        if k == 0:
            x0[sel] *= HEAVY_SCALE
            x_star[sel] *= HEAVY_SCALE
        else:
            arr[sel] *= HEAVY_SCALE
    return x0, x_star, g, f


def link_iterates(x0: np.ndarray, g: np.ndarray, H: np.ndarray, L: float) -> np.ndarray:
    """x_k = x_{k-1} - (1/L) sum_{j<k} H[k-1, j] g_j for k = 1..N."""
    N = H.shape[0]
    T, _, d = g.shape
    x = np.empty((T, N + 1, d))
    x[:, 0] = x0
    for k in range(1, N + 1):
        x[:, k] = x[:, k - 1] - np.einsum("j,tjd->td", H[k - 1, :k], g[:, :k]) / L
    return x


def _report(label: str, lhs: np.ndarray, weighted: np.ndarray, dim: int, entropy) -> InequalityReport:
    rhs = weighted.sum(axis=(1, 2))
    scale = 1.0 + np.abs(weighted).sum(axis=(1, 2))
    raw = rhs - lhs
    rel = raw / scale
    worst = int(np.argmin(rel)) if rel.size else -1
    min_slack = float(rel.min()) if rel.size else 0.0
    return InequalityReport(
        label=label,
        trials=len(rel),
        min_slack=min_slack,
        passed=min_slack >= -SLACK_RTOL,
        dim=dim,
        seed_entropy=entropy,
        worst_trial=worst,
        raw_slacks=raw,
    )


def _require_f1(lam: LambdaMultipliers) -> None:
    res = np.abs(f1_residual(lam.entries)).max()
    if res > 1e-10 * max(1.0, float(np.abs(lam.entries).max())):
        raise FlowViolation(f"lambda violates the flow condition (residual {res:.3e}); refusing to run")


def _require_flow(nu: NuMultipliers) -> None:
    res = np.abs(flow_residual(nu.entries)).max()
    if res > flow_tolerance(nu.entries):
        raise FlowViolation(f"nu violates the flow condition (residual {res:.3e}); refusing to run")


def verify_F_inequality(
    lam: LambdaMultipliers,
    spec: ProblemSpec,
    H: Optional[np.ndarray] = None,
    trials: int = 10_000,
    d: int = DEFAULT_DIM,
    seed=None,
    tau_value: Optional[float] = None,
) -> InequalityReport:
    """f_N - f_* - (tau/2)||x_0 - x_*||^2 <= sum lambda_ij * gap(x_j, x_i)."""
    _require_f1(lam)
    N = lam.N
    if H is None:
        H = spec.gamma * spec.L * np.eye(N)
    t = tau(spec).tau if tau_value is None else tau_value
    rng, entropy = _rng(seed)
    x0, x_star, g_it, f = sample_families(rng, trials, N + 2, d)
    g_it[:, N + 1] = 0.0
    x = np.concatenate([link_iterates(x0, g_it[:, : N + 1], H, spec.L), x_star[:, None]], axis=1)
    G = pairwise_gaps(x, g_it, f, spec.mu, spec.L)
    lhs = f[:, N] - f[:, N + 1] - 0.5 * t * np.sum((x[:, 0] - x[:, N + 1]) ** 2, axis=1)
    return _report("F", lhs, lam.entries[None] * G, d, entropy)


def _gd_family(rng, trials: int, N: int, gamma: float, d: int, with_star: bool):
    n = N + 2 if with_star else N + 1
    y0, y_star, g, f = sample_families(rng, trials, n, d)
    y = np.empty((trials, n, d))
    y[:, 0] = y0
    for k in range(1, N + 1):
        y[:, k] = y[:, k - 1] - gamma * g[:, k - 1]
    if with_star:
        y[:, N + 1] = y_star
        g[:, N + 1] = 0.0
    return y, g, f


def _g_lhs_coefficient(spec: ProblemSpec, tau_value: Optional[float]) -> float:
    t = tau(spec).tau if tau_value is None else tau_value
    return 1.0 / (2.0 * t) - 1.0 / (2.0 * spec.L)


def verify_G_inequality(
    nu: NuMultipliers,
    spec: ProblemSpec,
    trials: int = 10_000,
    d: int = DEFAULT_DIM,
    seed=None,
    tau_value: Optional[float] = None,
) -> InequalityReport:
    """(1/(2 tau) - 1/(2L))||g_N||^2 - f_0 + f_N <= sum nu_ij * gap(y_j, y_i), GD-linked."""
    _require_flow(nu)
    N = nu.N
    rng, entropy = _rng(seed)
    y, g, f = _gd_family(rng, trials, N, spec.gamma, d, with_star=False)
    G = pairwise_gaps(y, g, f, spec.mu, spec.L)
    coef = _g_lhs_coefficient(spec, tau_value)
    lhs = coef * np.sum(g[:, N] ** 2, axis=1) - f[:, 0] + f[:, N]
    return _report("G", lhs, nu.entries[None] * G, d, entropy)


def verify_G_modified(
    nu: NuMultipliers,
    spec: ProblemSpec,
    trials: int = 10_000,
    d: int = DEFAULT_DIM,
    seed=None,
    tau_value: Optional[float] = None,
) -> InequalityReport:
    """(1/(2 tau))||g_N||^2 - f_0 + f_* <= sum over 0..N and * with nu_{N,*} = 1."""
    _require_flow(nu)
    N = nu.N
    t = tau(spec).tau if tau_value is None else tau_value
    rng, entropy = _rng(seed)
    y, g, f = _gd_family(rng, trials, N, spec.gamma, d, with_star=True)
    full = np.zeros((N + 2, N + 2))
    full[: N + 1, : N + 1] = nu.entries
    full[N, N + 1] = 1.0
    G = pairwise_gaps(y, g, f, spec.mu, spec.L)
    lhs = np.sum(g[:, N] ** 2, axis=1) / (2.0 * t) - f[:, 0] + f[:, N + 1]
    return _report("G-modified", lhs, full[None] * G, d, entropy)


def strengthening_comparison(
    nu: NuMultipliers,
    spec: ProblemSpec,
    eff_spec: ProblemSpec,
    trials: int = 10_000,
    d: int = DEFAULT_DIM,
    seed=None,
    atol: float = 1e-10,
) -> dict:
    """Per-trial slack at the true (mu, L) must dominate the slack at (mu', L').

    Both runs use the same seed, hence the same families.  The left-hand side
    coefficient is identical at the two parameter pairs, so the comparison
    isolates the monotonicity of the interpolation gap in mu and L.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    true_rep = verify_G_inequality(nu, spec, trials, d, ss)
    eff_rep = verify_G_inequality(nu, eff_spec, trials, d, ss, tau_value=eff_spec.L * eff_spec.rho ** (2 * eff_spec.N))
    diff = true_rep.raw_slacks - eff_rep.raw_slacks
    scale = 1.0 + np.abs(eff_rep.raw_slacks)
    worst = float((diff / scale).min())
    return {
        "min_difference": worst,
        "passed": worst >= -atol,
        "true": true_rep,
        "eff": eff_rep,
    }


def _reverse_edge(e: np.ndarray, i: int, j: int, via: int) -> None:
    # Flip i -> j to j -> i and send twice its mass along i -> via -> j,
    # which leaves every column-minus-row sum unchanged.
    m = e[i, j]
    e[i, j] = 0.0
    e[j, i] += m
    e[i, via] += 2.0 * m
    e[via, j] += 2.0 * m


def inject_lambda_fault(lam: LambdaMultipliers) -> LambdaMultipliers:
    """Corrupt lambda without breaking the flow condition.

    The largest iterate-to-iterate entry is reversed and its mass rerouted
    through the star index.  Zeroing an entry instead would break the flow
    condition, which the verifier refuses outright.
    """
    e = lam.entries.copy()
    n = lam.N + 1
    block = e[:n, :n]
    i, j = (int(t) for t in np.unravel_index(np.argmax(block), block.shape))
    _reverse_edge(e, i, j, lam.star)
    return lam.with_entries(e)


def inject_nu_fault(nu: NuMultipliers) -> NuMultipliers:
    """Reverse the largest nu_{k,k+1}, rerouting through a third index (flow preserved)."""
    e = nu.entries.copy()
    N = nu.N
    if N < 2:
        # Only two indices: a heavy two-cycle is the only flow-neutral change.
        m = e[0, 1]
        e[0, 1] += 10.0 * m
        e[1, 0] += 10.0 * m
        return nu.with_entries(e)
    k = int(np.argmax([e[i, i + 1] for i in range(N)]))
    via = N if k + 1 < N else 0
    _reverse_edge(e, k, k + 1, via)
    return nu.with_entries(e)


def check_prop_trivial(L: float, trials: int = 1000, d: int = DEFAULT_DIM, seed=None) -> bool:
    """f(x) - ||grad f(x)||^2 / (2L) >= f_* on random convex quadratics with curvature in [0, L]."""
    if not L > 0:
        raise ValueError("L must be positive")
    rng, _ = _rng(seed)
    for _ in range(trials):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eig = rng.uniform(0.0, L, d)
        eig[0] = 0.0
        eig[-1] = L
        A = (Q * eig) @ Q.T
        x_star = rng.standard_normal(d)
        f_star = rng.standard_normal()
        x = rng.standard_normal(d) * (HEAVY_SCALE if rng.random() < HEAVY_FRACTION else 1.0)
        r = x - x_star
        grad = A @ r
        fx = 0.5 * r @ grad + f_star
        slack = fx - grad @ grad / (2 * L) - f_star
        if slack < -1e-12 * (1.0 + abs(fx) + abs(f_star)):
            return False
    return True


def psi(t, rho: float, eta: float, N: float):
    """The log-ratio function whose convexity on [0, N] underlies the step-size analysis."""
    t = np.asarray(t, dtype=float)
    if eta == 1.0:
        num = 1.0 + (1.0 - rho) * (N + t)
        den = 1.0 + (1.0 - rho) * (N - t)
    else:
        num = -(eta - rho) + (1.0 - rho) * eta ** (-t - N)
        den = -(eta - rho) + (1.0 - rho) * eta ** (t - N)
    ratio = num / den
    bad = ~(ratio > 0)
    if np.any(bad):
        first = float(np.atleast_1d(t)[np.argmax(np.atleast_1d(bad))])
        raise PsiDomainError(f"log argument is nonpositive at t={first!r}")
    return np.log(ratio)


def check_psi_convexity(rho: float, eta: float, N: float, grid_size: int = 200) -> bool:
    """Second differences of psi on a uniform grid of [0, N] are nonnegative."""
    if not -1.0 < rho < 0.0 or not eta > 0 or not N > 0:
        raise ValueError("need rho in (-1, 0), eta > 0, N > 0")
    t = np.linspace(0.0, N, grid_size + 1)
    v = psi(t, rho, eta, N)
    second = v[2:] - 2 * v[1:-1] + v[:-2]
    scale = 1.0 + float(np.abs(v).max())
    return bool(second.min() >= -1e-9 * scale)


def tau_gap_identity(spec: ProblemSpec) -> float:
    """Relative error of 1/(2 tau) - 1/(2L) = (gamma/2) min{E_N(eta), E_N(rho)}."""
    left = 1.0 / (2.0 * tau(spec).tau) - 1.0 / (2.0 * spec.L)
    e_eta, e_rho = eval_E(spec.N, spec.eta), eval_E(spec.N, spec.rho)
    right = 0.5 * spec.gamma * min(e_eta, e_rho)
    if not isinstance(right, float):
        raise ValueError("both E_N values are infinite")
    return abs(left - right) / max(abs(right), 1e-300)
