"""Conversion of gradient-side multipliers nu into function-value-side multipliers lambda.

Lambda tables are dense (N+2)x(N+2) arrays.  Indices 0..N are the iterates and
index N+1 (``star_index(N)``) stands for the minimizer.  Nu tables keep their
(N+1)x(N+1) layout from :mod:`gdcert.nu` with the (N, *) entry fixed at 1.

The conversion goes through two sequences read off nu,

    A_k = 1 + sum_{j<k} nu_{N,j}   and   B_k = nu_{k,k-1}   (B_N = 0),

and the inverse of the upper-triangular matrix M that expresses the x-side
differences through the y-side differences.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .nu import NuMultipliers, nu_pattern

__all__ = [
    "NONNEG_SLACK",
    "F1_ATOL",
    "DISCREPANCY_TOL",
    "SingularM",
    "PatternViolation",
    "InconsistentSystem",
    "ConversionSequences",
    "LambdaMultipliers",
    "LambdaDiagnostics",
    "star_index",
    "conversion_sequences",
    "build_M",
    "build_M_inverse",
    "lambda_from_M_inverse",
    "nu_to_lambda",
    "nu_from_A",
    "lambda_from_A",
    "A_from_lambda",
    "A_from_nu",
    "restricted_round_trip",
    "f1_residual",
    "grimmer_violation",
    "nonnegativity_bounds",
    "check_lambda",
    "dual_map_equivalence",
    "lambda_to_csv",
    "lambda_pretty",
]

log = logging.getLogger(__name__)

NONNEG_SLACK = 1e-12
F1_ATOL = 1e-10
DISCREPANCY_TOL = 1e-11
GRIMMER_FLOOR = 1e-10
GRIMMER_RTOL = 1e-9


class SingularM(ZeroDivisionError):
    pass


class PatternViolation(ValueError):
    pass


class InconsistentSystem(ArithmeticError):
    pass


def star_index(N: int) -> int:
    return N + 1


@dataclass(frozen=True)
class ConversionSequences:
    A: np.ndarray  # A[k-1] holds A_k
    B: np.ndarray  # B[k-1] holds B_k, B_N = 0

    @property
    def N(self) -> int:
        return len(self.A)


@dataclass(frozen=True)
class LambdaMultipliers:
    N: int
    entries: np.ndarray
    # Largest gap between the two algebraically equal expressions for lambda.
    discrepancy: float = 0.0

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (self.N + 2, self.N + 2):
            raise ValueError(f"expected {(self.N + 2,) * 2} table, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def star(self) -> int:
        return self.N + 1

    def __getitem__(self, ij: tuple) -> float:
        i, j = (self.star if k == "*" else k for k in ij)
        return float(self.entries[i, j])

    def with_entries(self, entries: np.ndarray) -> "LambdaMultipliers":
        return LambdaMultipliers(self.N, entries, self.discrepancy)


def conversion_sequences(nu: NuMultipliers, check: bool = True) -> ConversionSequences:
    N, v = nu.N, nu.entries
    bad = np.argwhere((v != 0) & ~nu_pattern(N))
    if len(bad):
        raise PatternViolation(f"nu has entries outside the allowed support: {bad.tolist()}")
    A = 1.0 + np.cumsum(v[N, :N])
    B = np.array([v[k, k - 1] for k in range(1, N)] + [0.0])
    if check:
        if A[0] < 1.0 - NONNEG_SLACK or np.any(np.diff(A) < -NONNEG_SLACK * np.abs(A[1:])):
            raise ValueError("A_k must be nondecreasing and >= 1")
        if B.min() < -NONNEG_SLACK:
            raise ValueError("B_k must be nonnegative")
    return ConversionSequences(A, B)


def build_M(seq: ConversionSequences) -> np.ndarray:
    A, B, N = seq.A, seq.B, seq.N
    M = np.zeros((N, N))
    for i in range(N):
        M[i, i] = A[i] + B[i]
        if i + 1 < N:
            M[i, i + 1] = A[i] - A[i + 1] - B[i + 1]
            M[i, i + 2:] = A[i] - A[i + 1]
    return M


def build_M_inverse(seq: ConversionSequences) -> np.ndarray:
    """Closed-form inverse of M (0-based storage of the 1-based formula)."""
    A, B, N = seq.A, seq.B, seq.N
    D = A + B
    if np.any(D <= 0):
        raise SingularM("A_i + B_i must be positive")
    # q[k] = B_k / (A_{k+1} + B_{k+1}) in 0-based k
    q = np.zeros(N)
    q[: N - 1] = B[: N - 1] / D[1:]
    Minv = np.zeros((N, N))
    for i in range(N):
        Minv[i, i] = 1.0 / D[i]
        if i + 1 == N:
            continue
        lead = A[i] / (D[i] * D[i + 1])
        running, prod = 0.0, 1.0
        for j in range(i + 1, N):
            if j > i + 1:
                prod *= q[j - 1]
            running += lead * prod
            Minv[i, j] = 1.0 / D[i] - running
    return Minv


def lambda_from_M_inverse(Minv: np.ndarray) -> np.ndarray:
    """Lambda table read off M^{-1} entry by entry (before substituting its closed form)."""
    N = Minv.shape[0]
    s = star_index(N)

    def m(i: int, j: int) -> float:  # 1-based access
        return Minv[i - 1, j - 1]

    lam = np.zeros((N + 2, N + 2))
    for j in range(N):
        for i in range(j):
            lam[i, j] = m(N - j, N - i - 1) - m(N - j, N - i)
        lam[s, j] = m(N - j, N)
    for i in range(N):
        lam[i, N] = m(N - i, N - i) - sum(m(k, N - i - 1) - m(k, N - i) for k in range(1, N - i))
    lam[s, N] = 1.0 - lam[:N, N].sum()
    return lam


def _lambda_closed_form(seq: ConversionSequences) -> np.ndarray:
    A, B, N = seq.A, seq.B, seq.N
    D = A + B
    s = star_index(N)

    def a(k: int) -> float:
        return A[k - 1]

    def d(k: int) -> float:
        return D[k - 1]

    def tail(lo: int, hi: int) -> float:
        # prod_{k=lo}^{hi} B_k / (A_{k+1} + B_{k+1}); empty product is 1
        p = 1.0
        for k in range(lo, hi + 1):
            p *= B[k - 1] / D[k]
        return p

    lam = np.zeros((N + 2, N + 2))
    for j in range(N):
        base = 1.0 / d(N - j)
        lead = base * a(N - j) / d(N - j + 1) if j >= 1 else 0.0
        for i in range(j):
            lam[i, j] = lead * tail(N - j + 1, N - i - 1)
        lam[s, j] = base - sum(lead * tail(N - j + 1, N - l - 1) for l in range(j))
    for i in range(N):
        p = 1.0
        for k in range(1, N - i):
            p *= B[k - 1] / D[k - 1]
        lam[i, N] = p / d(N - i)
    lam[s, N] = 1.0 - lam[:N, N].sum()
    return lam


def nu_to_lambda(nu: NuMultipliers) -> LambdaMultipliers:
    """Lambda multipliers whose primal inequality is equivalent to nu's dual one.

    The closed-form expression is returned.  The entry-by-entry M^{-1}
    expression is computed alongside and any disagreement above
    DISCREPANCY_TOL is logged and recorded on the result.
    """
    seq = conversion_sequences(nu)
    closed = _lambda_closed_form(seq)
    via_inverse = lambda_from_M_inverse(build_M_inverse(seq))
    gap = float(np.abs(closed - via_inverse).max())
    if gap > DISCREPANCY_TOL * max(1.0, float(np.abs(closed).max())):
        log.warning("lambda expressions disagree by %.3e", gap)
    for idx in zip(*np.nonzero((closed < 0) & (closed >= -NONNEG_SLACK))):
        log.warning("clamping lambda%s = %.3e to 0", tuple(int(t) for t in idx), closed[idx])
        closed[idx] = 0.0
    return LambdaMultipliers(nu.N, closed, gap)


# Restricted patterns: nu on (k,k+1), (N,k); lambda on (k,k+1), (*,k), (*,N).


def _check_A(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 1 or A.size < 1:
        raise ValueError("A must be a nonempty sequence")
    if A[0] < 1.0 - NONNEG_SLACK or np.any(np.diff(A) < -NONNEG_SLACK):
        raise ValueError("A must be nondecreasing and >= 1")
    return A


def nu_from_A(A) -> NuMultipliers:
    A = _check_A(A)
    N = len(A)
    nu = np.zeros((N + 1, N + 1))
    for j in range(1, N + 1):
        nu[j - 1, j] = A[j - 1]
    nu[N, 0] = A[0] - 1.0
    for j in range(1, N):
        nu[N, j] = A[j] - A[j - 1]
    return NuMultipliers(N, nu)


def lambda_from_A(A) -> LambdaMultipliers:
    A = _check_A(A)
    N = len(A)
    s = star_index(N)

    def a(k: int) -> float:
        return A[k - 1]

    lam = np.zeros((N + 2, N + 2))
    for j in range(1, N + 1):
        lam[j - 1, j] = 1.0 / a(N - j + 1)
    lam[s, 0] = 1.0 / a(N)
    for j in range(1, N):
        lam[s, j] = 1.0 / a(N - j) - 1.0 / a(N - j + 1)
    lam[s, N] = 1.0 - 1.0 / a(1)
    return LambdaMultipliers(N, lam)


def _restricted_lambda_mask(N: int) -> np.ndarray:
    s = star_index(N)
    mask = np.zeros((N + 2, N + 2), dtype=bool)
    for k in range(N):
        mask[k, k + 1] = mask[s, k] = True
    mask[s, N] = True
    return mask


def _restricted_nu_mask(N: int) -> np.ndarray:
    mask = np.zeros((N + 1, N + 1), dtype=bool)
    for k in range(N):
        mask[k, k + 1] = mask[N, k] = True
    return mask


def A_from_lambda(lam: LambdaMultipliers) -> np.ndarray:
    N, e = lam.N, lam.entries
    if np.any((e != 0) & ~_restricted_lambda_mask(N)):
        raise PatternViolation("lambda is not on the restricted pattern")
    star_row = e[lam.star, : N + 1]
    return np.array([1.0 / star_row[: N - k + 1].sum() for k in range(1, N + 1)])


def A_from_nu(nu: NuMultipliers) -> np.ndarray:
    N, e = nu.N, nu.entries
    if np.any((e != 0) & ~_restricted_nu_mask(N)):
        raise PatternViolation("nu is not on the restricted pattern")
    return 1.0 + np.cumsum(e[N, :N])


def restricted_round_trip(direction: str, table):
    """nu -> lambda -> nu ("nu") or lambda -> nu -> lambda ("lambda")."""
    if direction == "nu":
        lam = lambda_from_A(A_from_nu(table))
        return nu_from_A(A_from_lambda(lam))
    if direction == "lambda":
        nu = nu_from_A(A_from_lambda(table))
        return lambda_from_A(A_from_nu(nu))
    raise ValueError(f"direction must be 'nu' or 'lambda', got {direction!r}")


def f1_residual(entries: np.ndarray) -> np.ndarray:
    """Column sum minus row sum minus (+1 at N, -1 at *)."""
    n = entries.shape[0] - 2
    target = np.zeros(n + 2)
    target[n], target[n + 1] = 1.0, -1.0
    return entries.sum(axis=0) - entries.sum(axis=1) - target


def grimmer_violation(entries: np.ndarray, floor: float = GRIMMER_FLOOR) -> float:
    """Largest relative defect of lam_ij lam_i'j' = lam_i'j lam_ij' over i, i' < min(j, j')."""
    n = entries.shape[0] - 2
    U = entries[: n + 1, : n + 1]
    worst = 0.0
    for j in range(1, n + 1):
        for jp in range(j + 1, n + 1):
            rows = [i for i in range(j) if U[i, j] > floor and U[i, jp] > floor]
            for a in range(len(rows)):
                for b in range(a + 1, len(rows)):
                    i, ip = rows[a], rows[b]
                    p1, p2 = U[i, j] * U[ip, jp], U[ip, j] * U[i, jp]
                    worst = max(worst, abs(p1 - p2) / max(p1, p2))
    return worst


def nonnegativity_bounds(seq: ConversionSequences, lam: LambdaMultipliers) -> dict:
    """Lower bounds on the star row used to argue lambda >= 0."""
    A, B, N = seq.A, seq.B, seq.N
    D = A + B
    star = lam.entries[lam.star]
    gaps = []
    for j in range(N):
        base_idx = N - j  # 1-based
        a0 = A[base_idx - 1]
        bound = 1.0 / D[base_idx - 1]
        for k in range(base_idx + 1, N + 1):
            bound *= B[k - 1] / (a0 + B[k - 1])
        gaps.append(star[j] - bound)
    tail = float(np.prod(B / (1.0 + B)))
    return {
        "star_row_min_gap": float(min(gaps)),
        "star_N_gap": float(star[N] - tail),
        "passed": min(gaps) >= -NONNEG_SLACK and star[N] - tail >= -NONNEG_SLACK,
    }


@dataclass
class LambdaDiagnostics:
    min_entry: float
    f1_residuals: np.ndarray
    max_f1_residual: float
    f1_tol: float
    grimmer: float
    diagonal_ok: bool
    bounds: Optional[dict] = field(default=None)

    @property
    def passed(self) -> bool:
        return (
            self.min_entry >= -NONNEG_SLACK
            and self.max_f1_residual <= self.f1_tol
            and self.grimmer <= GRIMMER_RTOL
            and self.diagonal_ok
            and (self.bounds is None or self.bounds["passed"])
        )


def check_lambda(lam: LambdaMultipliers, seq: Optional[ConversionSequences] = None) -> LambdaDiagnostics:
    e = lam.entries
    res = f1_residual(e)
    return LambdaDiagnostics(
        min_entry=float(e.min()),
        f1_residuals=res,
        max_f1_residual=float(np.abs(res).max()),
        f1_tol=F1_ATOL * max(1.0, float(np.abs(e).max())),
        grimmer=grimmer_violation(e),
        diagonal_ok=bool(np.all(np.diag(e) == 0)) and bool(np.all(np.isfinite(e))),
        bounds=None if seq is None else nonnegativity_bounds(seq, lam),
    )


def _y_from_x(lam: np.ndarray, x: np.ndarray, y_star: np.ndarray) -> np.ndarray:
    """Solve the x-to-y map for y_0^+..y_N^+ given a free choice of y_*^+.

    x has shape (N+2, d) with x[N+1] = x_*^+.
    """
    N = x.shape[0] - 2
    s = N + 1
    steps = np.empty((N, x.shape[1]))
    for k in range(1, N + 1):
        j = N - k
        steps[k - 1] = lam[:, j] @ (x - x[j])
    rhs = (x[N] - x[s]) / 2 + lam[:, s] @ (x - x[s])
    # (y_0 + y_*)/2 - (y_0 + sum steps) = rhs
    y0 = y_star - 2.0 * (rhs + steps.sum(axis=0))
    y = np.empty_like(x)
    y[0] = y0
    y[1 : N + 1] = y0 + np.cumsum(steps, axis=0)
    y[s] = y_star
    return y


def _x_map_residual(nu_full: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Largest residual of the y-to-x map equations, relative to the data scale."""
    N = x.shape[0] - 2
    s = N + 1
    res = []
    for k in range(1, N):
        j = N - k
        res.append(x[k] - x[k - 1] - nu_full[:, j] @ (y - y[j]))
    res.append(x[0] - x[s] - nu_full[:, N] @ (y - y[N]))
    res.append((x[s] - x[N]) / 2 - (y[s] - y[0]) / 2 - nu_full[:, s] @ (y - y[s]))
    scale = 1.0 + max(np.abs(x).max(), np.abs(y).max()) * max(1.0, np.abs(nu_full).max())
    return float(np.abs(np.array(res)).max() / scale)


def _nu_with_star(nu: NuMultipliers) -> np.ndarray:
    N = nu.N
    full = np.zeros((N + 2, N + 2))
    full[: N + 1, : N + 1] = nu.entries
    full[N, N + 1] = 1.0
    return full


def dual_map_equivalence(
    nu: NuMultipliers,
    lam: LambdaMultipliers,
    trials: int = 100,
    dim: int = 3,
    rng: Optional[np.random.Generator] = None,
    rtol: float = 1e-9,
) -> bool:
    """Random x-side points mapped to the y side must satisfy the y-to-x map."""
    if lam.N != nu.N:
        raise ValueError("nu and lambda have different N")
    rng = np.random.default_rng() if rng is None else rng
    nu_full = _nu_with_star(nu)
    for _ in range(trials):
        x = rng.standard_normal((nu.N + 2, dim))
        y = _y_from_x(lam.entries, x, rng.standard_normal(dim))
        if not np.all(np.isfinite(y)):
            raise InconsistentSystem("non-finite y-side solution")
        if _x_map_residual(nu_full, x, y) > rtol:
            return False
    return True


def _label(k: int, N: int) -> str:
    return "*" if k == N + 1 else str(k)


def _display_order(N: int) -> list[int]:
    return [N + 1] + list(range(N + 1))


def lambda_to_csv(lam: LambdaMultipliers) -> str:
    order = _display_order(lam.N)
    buf = io.StringIO()
    buf.write(",".join([""] + [_label(k, lam.N) for k in order]) + "\n")
    for i in order:
        row = [format(float(lam.entries[i, j]), ".17g") for j in order]
        buf.write(",".join([_label(i, lam.N)] + row) + "\n")
    return buf.getvalue()


def lambda_pretty(lam: LambdaMultipliers, decimals: int = 4) -> str:
    order = _display_order(lam.N)
    width = decimals + 3
    lines = [" " * 3 + "".join(f"{_label(k, lam.N):>{width}}" for k in order)]
    for i in order:
        vals = "".join(f"{lam.entries[i, j]:>{width}.{decimals}f}" for j in order)
        lines.append(f"{_label(i, lam.N):>3}" + vals)
    return "\n".join(lines)
