"""Method matrices, the certificate matrix S and its positive semidefiniteness.

A fixed-step first-order method is an N x N lower-triangular matrix H with
x_k - x_{k-1} = -(1/L) sum_j H[k-1, j] g_j.  Gradient descent is H = gamma L I.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .nu import NuMultipliers, build_nu, check_nu, nu_pattern
from .rates import (
    EffectiveParameters,
    ProblemSpec,
    effective_parameters,
    eval_F,
    eval_E,
    eval_T,
    tau,
)

__all__ = [
    "PSD_RTOL",
    "NotAtOptimalStepsize",
    "PatternViolation",
    "Decomposition",
    "Certificate",
    "gd_method",
    "lift",
    "anti_transpose",
    "reversal",
    "htilde_inv_at_gd",
    "build_A",
    "build_B",
    "build_S",
    "psd_verdict",
    "ldl_inertia_check",
    "closed_form_decomposition",
    "decomposition_scale",
    "certify",
    "certificate_document",
]

PSD_RTOL = 1e-9
DECOMP_RTOL = 1e-10


class NotAtOptimalStepsize(ValueError):
    pass


class PatternViolation(ValueError):
    pass


def gd_method(N: int, gamma: float, L: float) -> np.ndarray:
    return gamma * L * np.eye(N)


def lift(H: np.ndarray) -> np.ndarray:
    """The (N+1)x(N+1) matrix acting on x_k^+ = x_k - g_k / L."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if H.shape != (n, n):
        raise ValueError("H must be square")
    if np.any(np.triu(H, 1)):
        raise ValueError("H must be lower-triangular")
    Ht = np.eye(n + 1)
    Ht[1:, :n] += H - np.eye(n)
    return Ht


def reversal(n: int) -> np.ndarray:
    return np.eye(n)[::-1]


def anti_transpose(M: np.ndarray) -> np.ndarray:
    """Reflection over the anti-diagonal: M^A[i, j] = M[n-1-j, n-1-i]."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("anti_transpose needs a square matrix")
    return M[::-1, ::-1].T.copy()


def htilde_inv_at_gd(N: int, rho: float) -> np.ndarray:
    """Lower-triangular Toeplitz matrix with entries rho^{i-j}."""
    idx = np.arange(N + 1)
    diff = idx[:, None] - idx[None, :]
    out = np.zeros((N + 1, N + 1))
    lower = diff >= 0
    out[lower] = float(rho) ** diff[lower]
    return out


def _require_pattern(nu: NuMultipliers) -> None:
    bad = np.argwhere((nu.entries != 0) & ~nu_pattern(nu.N))
    if len(bad):
        raise PatternViolation(f"nu has entries outside the allowed support: {bad.tolist()}")


def build_A(nu: NuMultipliers) -> np.ndarray:
    """A with sum_ij nu_ij <g_j, y_i^+ - y_j^+> = -<g, A y>."""
    _require_pattern(nu)
    N, v = nu.N, nu.entries
    A = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        if k >= 1:
            A[k, k] = v[k - 1, k]
        if k <= N - 2:
            A[k, k + 1] = -v[k + 1, k] - v[N, k]
            A[k, k + 2:] = -v[N, k]
        elif k == N - 1:
            A[k, k + 1] = -v[N, N - 1]
    return A


def build_B(nu: NuMultipliers) -> np.ndarray:
    """B with sum_ij nu_ij ||y_i^+ - y_j^+||^2 = <B y, y>."""
    _require_pattern(nu)
    N, v = nu.N, nu.entries
    e = np.concatenate(([0.0], np.cumsum(v[N, :N])))  # e[k] = sum_{j<k} nu_{N,j}
    B = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        for m in range(1, N + 1):
            B[k, m] = e[min(k, m)]
    for k in range(1, N):
        B[k, k] = v[k - 1, k] + v[k, k - 1] + e[k]
    B[N, N] = v[N - 1, N] + e[N]
    return B


@dataclass(frozen=True)
class Decomposition:
    delta: np.ndarray
    v: np.ndarray  # row k-1 holds v_k
    scale: float

    def matrix(self) -> np.ndarray:
        return self.scale * (self.v.T * self.delta) @ self.v


@dataclass
class Certificate:
    spec: ProblemSpec
    eff: EffectiveParameters
    nu: NuMultipliers
    S: np.ndarray
    S_sym: np.ndarray
    min_eig: float
    psd: bool
    tau_true: float
    tau_eff: float
    psd_ldl: Optional[bool] = None
    decomposition: Optional[Decomposition] = None
    decomposition_error: Optional[float] = None
    verdicts: dict = field(default_factory=dict)


def psd_verdict(S_sym: np.ndarray, rtol: float = PSD_RTOL) -> tuple[float, bool]:
    """Smallest eigenvalue and whether it clears -rtol * (1 + ||S||_2)."""
    eig = np.linalg.eigvalsh(S_sym)
    norm = float(np.abs(eig).max()) if eig.size else 0.0
    min_eig = float(eig.min())
    return min_eig, min_eig >= -rtol * (1.0 + norm)


def ldl_inertia_check(S_sym: np.ndarray, rtol: float = PSD_RTOL) -> bool:
    """Second opinion from a Bunch-Kaufman factorization (Sylvester inertia)."""
    _, D, _ = scipy.linalg.ldl(S_sym, lower=True)
    norm = float(np.linalg.norm(S_sym, 2))
    d_eig = np.linalg.eigvalsh(D)  # D is block diagonal with 1x1/2x2 blocks
    return bool(d_eig.min() >= -rtol * (1.0 + norm))


def build_S(spec: ProblemSpec, eff: EffectiveParameters, nu: NuMultipliers) -> Certificate:
    """Certificate matrix at the effective parameters (mu', L')."""
    N = spec.N
    eff_spec = eff.spec(N)
    rho = eff_spec.rho
    kappa = eff_spec.kappa
    L = eff_spec.L
    tau_eff = L * rho ** (2 * N)
    Hinv = htilde_inv_at_gd(N, rho)
    h0, hN = Hinv[0], Hinv[N]
    S = (
        build_A(nu).T @ Hinv
        + kappa / (2.0 * (1.0 - kappa)) * build_B(nu)
        + 0.5 * np.outer(h0, h0)
        - L / (2.0 * tau_eff) * np.outer(hN, hN)
    )
    S_sym = 0.5 * (S + S.T)
    min_eig, psd = psd_verdict(S_sym)
    return Certificate(
        spec=spec,
        eff=eff,
        nu=nu,
        S=S,
        S_sym=S_sym,
        min_eig=min_eig,
        psd=psd,
        tau_true=tau(spec).tau,
        tau_eff=tau_eff,
        psd_ldl=ldl_inertia_check(S_sym),
    )


def decomposition_scale(rho: float, eta: float) -> float:
    return eta**2 * (1.0 - rho) / (2.0 * (eta - rho) ** 2)


def closed_form_decomposition(N: int, rho: float, eta: float, rtol: float = 1e-9) -> Decomposition:
    """S_sym = c * sum_k delta_k v_k v_k^T, valid when E_N(eta) = E_N(rho)."""
    e_rho = eval_E(N, rho)
    t_n = eval_T(N, rho, eta)
    if not abs(t_n) <= rtol * (1.0 + abs(e_rho)):
        raise NotAtOptimalStepsize(f"|T_N| = {t_n!r} is not zero; gamma is not optimal")
    # T_N vanishes at gamma*; its computed value is rounding noise of size ~eps * E_N(rho).
    T = [0.0] + [float(eval_T(k, rho, eta)) for k in range(1, N)] + [0.0]
    F = [eval_F(m, eta) for m in range(N + 1)]
    delta = np.empty(N)
    v = np.zeros((N, N + 1))
    for k in range(1, N + 1):
        if k == 1:
            delta[0] = T[1]
        else:
            delta[k - 1] = T[k] - F[N - k] ** 2 / F[N - k + 1] ** 2 * T[k - 1]
        v[k - 1, k] = 1.0
        if k < N:
            v[k - 1, k + 1:] = -1.0 / F[N - k]
    return Decomposition(delta, v, decomposition_scale(rho, eta))


def certify(spec: ProblemSpec, nu: Optional[NuMultipliers] = None) -> Certificate:
    """effective_parameters -> build_nu -> build_S -> closed form, with verdicts."""
    eff = effective_parameters(spec)
    eff_spec = eff.spec(spec.N)
    rho, eta = eff_spec.rho, eff_spec.eta
    if nu is None:
        nu = build_nu(spec.N, rho, eta)
    cert = build_S(spec, eff, nu)
    diag = check_nu(nu)
    verdicts: dict = {
        "psd": cert.psd,
        "psd_ldl_agrees": cert.psd_ldl == cert.psd,
        "nu_pattern": not diag.pattern_violations,
        "nu_flow": diag.max_flow_residual <= diag.flow_tol,
        "nu_nonnegative": diag.min_entry >= -1e-12,
    }
    try:
        dec = closed_form_decomposition(spec.N, rho, eta)
    except NotAtOptimalStepsize:
        dec = None
    if dec is not None:
        err = float(np.abs(cert.S_sym - dec.matrix()).max())
        cert.decomposition = dec
        cert.decomposition_error = err
        verdicts["decomposition_matches"] = err <= DECOMP_RTOL * (1.0 + np.abs(cert.S_sym).max())
        verdicts["delta_nonnegative"] = bool(dec.delta.min() >= -1e-12 * (1.0 + abs(eval_E(spec.N, rho))))
    # The gradient-norm coefficient 1/(2 tau) - 1/(2L) is what carries over
    # from the effective to the true parameters; tau itself may differ.
    coef_true = 1.0 / (2.0 * cert.tau_true) - 1.0 / (2.0 * spec.L)
    coef_eff = 1.0 / (2.0 * cert.tau_eff) - 1.0 / (2.0 * eff.L_eff)
    verdicts["coefficient_carries_over"] = math.isclose(coef_true, coef_eff, rel_tol=1e-9)
    cert.verdicts = verdicts
    return cert


def certificate_document(cert: Certificate) -> dict:
    """Plain-data view of a certificate, ready for serialization."""
    spec, eff = cert.spec, cert.eff
    dec = cert.decomposition
    return {
        "spec": {"N": spec.N, "mu": spec.mu, "L": spec.L, "gamma": spec.gamma},
        "eff": {"mu": eff.mu_eff, "L": eff.L_eff, "which_moved": eff.which_moved.value},
        "tau_true": cert.tau_true,
        "tau_eff": cert.tau_eff,
        "nu_entries": cert.nu.entries.tolist(),
        "S_sym": cert.S_sym.tolist(),
        "min_eig": cert.min_eig,
        "psd": cert.psd,
        "delta": None if dec is None else dec.delta.tolist(),
        "decomposition_error": cert.decomposition_error,
        "verdicts": {k: bool(v) for k, v in cert.verdicts.items()},
    }
