"""Dual multipliers nu for the gradient-norm criterion at the optimal stepsize.

Tables are dense (N+1)x(N+1) arrays over indices 0..N, entry [i, j] = nu_{i,j}.
The (N, *) multiplier is implicitly 1 and never stored here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rates import eval_E, eval_F, eval_T

__all__ = [
    "AlphaBeta",
    "NuMultipliers",
    "NuDiagnostics",
    "build_alpha_beta",
    "build_nu",
    "check_nu",
    "nu_pattern",
    "flow_residual",
    "proposition_checks",
    "remove_back_cycle",
    "NONNEG_SLACK",
    "FLOW_ATOL",
    "flow_tolerance",
]

log = logging.getLogger(__name__)

NONNEG_SLACK = 1e-12
FLOW_ATOL = 1e-10


@dataclass(frozen=True)
class AlphaBeta:
    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class NuMultipliers:
    N: int
    entries: np.ndarray
    built_at: tuple[float, float] = (float("nan"), float("nan"))

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (self.N + 1, self.N + 1):
            raise ValueError(f"expected {(self.N + 1,) * 2} table, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, ij: tuple[int, int]) -> float:
        return float(self.entries[ij])

    def with_entries(self, entries: np.ndarray) -> "NuMultipliers":
        return NuMultipliers(self.N, entries, self.built_at)


def _t(k: int, rho: float, eta: float) -> float:
    # T_0 = 0 by the empty-sum convention.
    return 0.0 if k == 0 else float(eval_T(k, rho, eta))


def _ratio(k: int, N: int, rho: float, eta: float) -> float:
    """T_k(rho, eta) / F_{N-k}(eta)."""
    if k == 0:
        return 0.0
    f = eval_F(N - k, eta)
    if f == 0:
        raise ZeroDivisionError(f"F_{N - k}(eta) = 0 at eta={eta}")
    return _t(k, rho, eta) / f


def build_alpha_beta(N: int, rho: float, eta: float) -> AlphaBeta:
    """The alpha_k, beta_k (k = 1..N-1) blocks of the multiplier construction."""
    if N < 2:
        raise ValueError(f"alpha/beta need N >= 2, got {N}")
    if rho == 0 or eta == 0:
        raise ZeroDivisionError("rho and eta must be nonzero")
    scale = (eta - rho) / eta
    if N == 2:
        r1 = _t(1, rho, eta) / eval_F(1, eta)
        alpha = [r1]
        beta = [scale * float(eval_E(1, rho)) - r1]
    else:
        r = [_ratio(k, N, rho, eta) for k in range(N)]
        alpha = []
        for k in range(1, N):
            if k == 1:
                a = r[1]
            elif k == 2:
                a = -r[1] / rho + (r[2] - r[1])
            else:
                a = -(r[k - 1] - r[k - 2]) / rho + (r[k] - r[k - 1])
            alpha.append(a)
        beta = [scale * float(eval_E(k, rho)) - r[k] for k in range(1, N)]
    return AlphaBeta(np.array(alpha), np.array(beta))


def _clamp(value: float, where: tuple[int, int]) -> float:
    if -NONNEG_SLACK <= value < 0:
        log.warning("clamping nu%s = %.3e to 0", where, value)
        return 0.0
    return value


def build_nu(N: int, rho: float, eta: float) -> NuMultipliers:
    """Multipliers nu_{i,j} for H = (1 - rho) I at an optimal-stepsize pair (rho, eta)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    nu = np.zeros((N + 1, N + 1))
    e_n = float(eval_E(N, rho))

    if N == 1:
        nu[1, 0] = -rho * e_n
        nu[0, 1] = 1.0 - rho * e_n
    elif N == 2:
        ab = build_alpha_beta(2, rho, eta)
        a1, b1 = ab.alpha[0], ab.beta[0]
        c = -eta * rho / (eta - rho)
        t1 = _t(1, rho, eta)
        tail = -rho * e_n + (1.0 + rho) / (eta - rho) * t1
        nu[1, 0] = c * b1
        nu[2, 0] = c * a1
        nu[0, 1] = 1.0 + c * (a1 + b1)
        nu[2, 1] = tail
        nu[1, 2] = 1.0 + c * a1 + tail
    else:
        ab = build_alpha_beta(N, rho, eta)
        alpha, beta = ab.alpha, ab.beta  # alpha[k-1] holds alpha_k
        c = -eta * rho / (eta - rho)
        for j in range(N - 1):
            nu[j + 1, j] = c * beta[j]
            nu[N, j] = c * alpha[j]
        for j in range(1, N):
            nu[j - 1, j] = 1.0 + c * (alpha[:j].sum() + beta[j - 1])
        r_last = _ratio(N - 1, N, rho, eta)
        r_prev = _ratio(N - 2, N, rho, eta)
        nu[N, N - 1] = eta / (eta - rho) * (r_last - r_prev) - rho * e_n - c * r_last
        nu[N - 1, N] = nu[N, N - 1] + c * alpha.sum() + 1.0

    for i, j in zip(*np.nonzero(nu)):
        nu[i, j] = _clamp(nu[i, j], (int(i), int(j)))
    return NuMultipliers(N, nu, (rho, eta))


def nu_pattern(N: int) -> np.ndarray:
    """Boolean mask of the allowed support: (k,k+1), (k+1,k), (N,k)."""
    mask = np.zeros((N + 1, N + 1), dtype=bool)
    for k in range(N):
        mask[k, k + 1] = mask[k + 1, k] = mask[N, k] = True
    return mask


def flow_tolerance(entries: np.ndarray, atol: float = FLOW_ATOL) -> float:
    """Flow tolerance scaled by the largest entry.

    Entries grow like rho^{-2N}, so a purely absolute tolerance cannot be met
    in double precision once they exceed about 1e6.
    """
    return atol * max(1.0, float(np.abs(entries).max(initial=0.0)))


def flow_residual(entries: np.ndarray) -> np.ndarray:
    """Column sum minus row sum minus the required source/sink vector."""
    n = entries.shape[0] - 1
    target = np.zeros(n + 1)
    target[n], target[0] = 1.0, -1.0
    return entries.sum(axis=0) - entries.sum(axis=1) - target


@dataclass
class NuDiagnostics:
    pattern_violations: list[tuple[int, int]] = field(default_factory=list)
    flow_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_flow_residual: float = 0.0
    flow_tol: float = FLOW_ATOL
    min_entry: float = 0.0
    diagonal_ok: bool = True

    @property
    def passed(self) -> bool:
        return (
            not self.pattern_violations
            and self.diagonal_ok
            and self.max_flow_residual <= self.flow_tol
            and self.min_entry >= -NONNEG_SLACK
        )


def check_nu(nu: NuMultipliers) -> NuDiagnostics:
    e = nu.entries
    bad = [(int(i), int(j)) for i, j in zip(*np.nonzero((e != 0) & ~nu_pattern(nu.N)))]
    res = flow_residual(e)
    return NuDiagnostics(
        pattern_violations=bad,
        flow_residuals=res,
        max_flow_residual=float(np.abs(res).max()),
        flow_tol=flow_tolerance(e),
        min_entry=float(e.min()),
        diagonal_ok=bool(np.all(np.diag(e) == 0)) and bool(np.all(np.isfinite(e))),
    )


def proposition_checks(N: int, rho: float, eta: float, slack: float = NONNEG_SLACK) -> dict:
    """Sign conditions behind the nonnegativity of the multipliers at gamma*.

    Returns the minimum of each family of quantities that must be >= 0, plus
    the relative size of T_N (which must vanish).
    """
    e_rho_n = float(eval_E(N, rho))
    t = [_t(k, rho, eta) for k in range(N + 1)]
    out: dict = {
        "rho_in_range": -1.0 < rho < 0.0,
        "eta_above_minus_rho": eta > -rho,
        "min_T": min(t[1:N], default=0.0),
        "T_N_rel": abs(t[N]) / max(1.0, abs(e_rho_n)),
    }
    ratios = [_ratio(k, N, rho, eta) for k in range(N)]
    out["min_for_alpha"] = min(
        (ratios[k + 1] - ratios[k] for k in range(1, N - 1)), default=0.0
    )
    out["min_for_beta"] = min(
        ((eta - rho) / eta * float(eval_E(k, rho)) - ratios[k] for k in range(1, N)),
        default=0.0,
    )
    if N >= 3:
        # Regrouped nu_{N,N-1}: every bracket is individually nonnegative.
        f1, f2 = eval_F(1, eta), eval_F(2, eta)
        regrouped = (
            -rho * eta / (eta - rho)
            * ((eta - rho) / eta * float(eval_E(N - 1, rho)) - t[N - 1] / f1)
            + eta / (eta - rho) * (t[N - 1] / f1 - t[N - 2] / f2)
            - rho * (rho ** (-2 * N + 1) + rho ** (-2 * N))
        )
        out["nu_N_Nm1"] = regrouped
    scale = 1.0 + abs(e_rho_n)
    out["passed"] = bool(
        out["rho_in_range"]
        and out["eta_above_minus_rho"]
        and out["min_T"] >= -slack * scale
        and out["T_N_rel"] <= 1e-10
        and out["min_for_alpha"] >= -slack * scale
        and out["min_for_beta"] >= -slack * scale
        and out.get("nu_N_Nm1", 0.0) >= -slack * scale
    )
    return out


def remove_back_cycle(nu: NuMultipliers) -> NuMultipliers:
    """Subtract the heaviest two-cycle nu_{k,k+1} / nu_{k+1,k} from the table.

    The result keeps the support pattern, the flow constraint and
    nonnegativity, but is no longer a valid certificate.  Used for fault
    injection.
    """
    e = nu.entries.copy()
    k = int(np.argmax([e[i + 1, i] for i in range(nu.N)]))
    m = e[k + 1, k]
    e[k, k + 1] -= m
    e[k + 1, k] -= m
    return nu.with_entries(e)
