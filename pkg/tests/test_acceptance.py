"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from gdcert import gdlab, verifier
from gdcert.certificate import certify
from gdcert.cli import main
from gdcert.lam import (
    A_from_lambda,
    A_from_nu,
    check_lambda,
    conversion_sequences,
    dual_map_equivalence,
    grimmer_violation,
    lambda_from_A,
    nu_from_A,
    nu_to_lambda,
    restricted_round_trip,
)
from gdcert.nu import build_nu, proposition_checks
from gdcert.rates import ProblemSpec, effective_parameters, eval_E, eval_T, gamma_star, tau

N_GRID = range(1, 16)
KAPPAS = (0.0, 0.01, 0.1, 0.5, 0.9)
GAMMAS = (0.2, 0.6, 1.0, 1.4, 1.8)

GOLDEN = np.array([
    [0, 0.0384, 0.0621, 0.1063, 0.1873, 0.3342, 0.2718],
    [0, 0, 0.0182, 0.0119, 0.0060, 0.0020, 0.0003],
    [0, 0, 0, 0.0472, 0.0237, 0.0080, 0.0013],
    [0, 0, 0, 0, 0.1186, 0.0401, 0.0067],
    [0, 0, 0, 0, 0, 0.2876, 0.0479],
    [0, 0, 0, 0, 0, 0, 0.6719],
    [0, 0, 0, 0, 0, 0, 0],
])


def report(capsys, number, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {name}: {detail}")
    assert ok, detail


def pipeline(spec):
    es = effective_parameters(spec).spec(spec.N)
    nu = build_nu(spec.N, es.rho, es.eta)
    return es, nu, nu_to_lambda(nu)


def test_01_golden_lambda_table(capsys):
    start = time.perf_counter()
    code = main(["table", "--N", "5", "--mu", "0.1", "--L", "1", "--format", "csv"])
    elapsed = time.perf_counter() - start
    rows = capsys.readouterr().out.strip().splitlines()
    table = np.array([[float(v) for v in row.split(",")[1:]] for row in rows[1:]])
    err = float(np.abs(table - GOLDEN).max())
    pattern = bool(np.array_equal(table == 0, GOLDEN == 0))
    ok = code == 0 and err <= 5e-5 and pattern and elapsed < 1.0
    report(capsys, 1, "golden lambda table", ok, f"max |diff| {err:.2e}, zero pattern exact={pattern}, {elapsed:.3f}s")


def test_02_rate_closed_forms(capsys):
    start = time.perf_counter()
    worst = max(abs(tau(ProblemSpec(N, 0.0, 1.0, 1.0)).tau * (2 * N + 1) - 1.0) for N in range(1, 51))
    # Locate the branch switch by bisection on the sign of the branch difference.
    worst_cross = 0.0
    for N in (1, 2, 3, 5, 8):
        for kappa in (0.0, 0.1, 0.5, 0.9):
            lo, hi = 1.0 + 1e-9, 2.0 - 1e-9
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                r = tau(ProblemSpec(N, kappa, 1.0, mid))
                if r.eta_value >= r.rho_value:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-15:
                    break
            worst_cross = max(worst_cross, abs(0.5 * (lo + hi) - gamma_star(N, kappa, 1.0)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-14 and worst_cross <= 1e-9 and elapsed < 1.0
    report(capsys, 2, "rate closed forms", ok, f"max rel err {worst:.1e}, crossover offset {worst_cross:.1e}, {elapsed:.3f}s")


def test_03_optimal_stepsize(capsys):
    start = time.perf_counter()
    err_15 = abs(gamma_star(1, 0.0, 1.0) - 1.5)
    in_range, worst_rel, worst_abs = True, 0.0, 0.0
    for N in N_GRID:
        for kappa in KAPPAS:
            g = gamma_star(N, kappa, 1.0)
            in_range &= 1.0 < g < 2.0
            t_n = abs(eval_T(N, 1 - g, 1 - g * kappa))
            worst_abs = max(worst_abs, t_n)
            worst_rel = max(worst_rel, t_n / max(1.0, abs(eval_E(N, 1 - g))))
    elapsed = time.perf_counter() - start
    # The root residual is measured relative to max(1, |E_N(rho)|): E_N reaches 1e38 on
    # this grid, where the float spacing alone is far above 1e-12.
    ok = err_15 <= 1e-12 and in_range and worst_rel <= 1e-12 and elapsed < 1.0
    report(
        capsys, 3, "optimal stepsize", ok,
        f"|gamma*(1,0,1)-1.5| {err_15:.1e}, root residual rel {worst_rel:.1e} (abs {worst_abs:.1e}), {elapsed:.3f}s",
    )


def test_04_certificate_psd_sweep(capsys):
    start = time.perf_counter()
    failures, worst = [], np.inf
    for N in N_GRID:
        for kappa in KAPPAS:
            for gamma in GAMMAS:
                cert = certify(ProblemSpec(N, kappa, 1.0, gamma))
                bound = -1e-9 * (1.0 + np.linalg.norm(cert.S_sym, 2))
                worst = min(worst, cert.min_eig / (1.0 + np.linalg.norm(cert.S_sym, 2)))
                if not (cert.psd and cert.min_eig >= bound):
                    failures.append((N, kappa, gamma))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0
    report(capsys, 4, "certificate PSD sweep", ok, f"375 cases, failures {failures}, worst scaled min_eig {worst:.1e}, {elapsed:.2f}s")


def test_05_closed_form_decomposition(capsys):
    start = time.perf_counter()
    worst_err, worst_delta, failures = 0.0, np.inf, []
    for N in N_GRID:
        for kappa in KAPPAS:
            cert = certify(ProblemSpec.at_optimal(N, kappa, 1.0))
            dec = cert.decomposition
            scale = 1.0 + np.abs(cert.S_sym).max()
            err = float(np.abs(cert.S_sym - dec.matrix()).max()) / scale
            worst_err = max(worst_err, err)
            worst_delta = min(worst_delta, float(dec.delta.min()))
            if err > 1e-10 or dec.delta.min() < -1e-12:
                failures.append((N, kappa))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 5.0
    report(capsys, 5, "closed-form decomposition", ok, f"max scaled error {worst_err:.1e}, min delta {worst_delta:.2e}, {elapsed:.2f}s")


def test_06_monte_carlo_F(capsys):
    start = time.perf_counter()
    seeds = np.random.SeedSequence(6).spawn(5)
    slacks = {}
    for seed, gamma in zip(seeds, (None, 0.5, 1.0, 1.8)):
        spec = ProblemSpec.at_optimal(5, 0.1, 1.0) if gamma is None else ProblemSpec(5, 0.1, 1.0, gamma)
        _, _, lam = pipeline(spec)
        slacks["gamma*" if gamma is None else gamma] = verifier.verify_F_inequality(lam, spec, trials=10_000, seed=seed).min_slack
    spec = ProblemSpec.at_optimal(5, 0.1, 1.0)
    _, _, lam = pipeline(spec)
    fault = verifier.verify_F_inequality(verifier.inject_lambda_fault(lam), spec, trials=1000, seed=seeds[4])
    elapsed = time.perf_counter() - start
    ok = min(slacks.values()) >= -1e-8 and not fault.passed and elapsed < 10.0
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in slacks.items())
    report(capsys, 6, "Monte-Carlo F-side", ok, f"min slack {detail}; fault slack {fault.min_slack:.1e}, {elapsed:.2f}s")


def test_07_monte_carlo_G(capsys):
    start = time.perf_counter()
    seeds = np.random.SeedSequence(7).spawn(12)
    lines, ok = [], True
    for i, gamma in enumerate((None, 0.5, 1.0, 1.8)):
        spec = ProblemSpec.at_optimal(5, 0.1, 1.0) if gamma is None else ProblemSpec(5, 0.1, 1.0, gamma)
        es, nu, _ = pipeline(spec)
        g = verifier.verify_G_inequality(nu, spec, trials=10_000, seed=seeds[3 * i])
        gm = verifier.verify_G_modified(nu, spec, trials=10_000, seed=seeds[3 * i + 1])
        ok &= g.passed and gm.passed
        part = f"{'gamma*' if gamma is None else gamma}: G {g.min_slack:.1e} Gmod {gm.min_slack:.1e}"
        if gamma is not None:
            cmp = verifier.strengthening_comparison(nu, spec, es, trials=10_000, seed=seeds[3 * i + 2])
            ok &= bool(cmp["passed"])
            part += f" strengthen {cmp['min_difference']:.1e}"
        lines.append(part)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    report(capsys, 7, "Monte-Carlo G-side", ok, "; ".join(lines) + f", {elapsed:.2f}s")


def test_08_tightness_mu_zero(capsys):
    start = time.perf_counter()
    worst = 0.0
    for L in (1.0, 2.5):
        for gl in (0.3, 0.8, 1.0, 1.3, 1.7):
            for N in (1, 3, 8):
                t = gdlab.tightness_summary(N, gl / L, L)
                for got, want in (
                    (t["huber"], t["huber_expected"]),
                    (t["quadratic"], t["quadratic_expected"]),
                    (t["max_over_instances"], t["half_tau"]),
                ):
                    # At gamma = 1/L the quadratic reaches its minimum exactly: both sides are 0.
                    err = 0.0 if got == want else abs(got - want) / abs(want)
                    worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    report(capsys, 8, "tightness at mu=0", ok, f"max rel err {worst:.1e} over 30 cases, {elapsed:.3f}s")


def test_09_property_suites(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    # Restricted round trips on random nondecreasing A sequences.
    rt_err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 16))
        A = 1.0 + np.cumsum(np.concatenate(([rng.exponential()], rng.exponential(size=n - 1))))
        nu, lam = nu_from_A(A), lambda_from_A(A)
        rt_err = max(
            rt_err,
            float(np.abs(A_from_nu(nu) / A - 1).max()),
            float(np.abs(A_from_lambda(lam) / A - 1).max()),
            float(np.abs(restricted_round_trip("nu", nu).entries - nu.entries).max() / A.max()),
            float(np.abs(restricted_round_trip("lambda", lam).entries - lam.entries).max()),
        )
    # Dual maps, Grimmer ratios and sign propositions across the grid.
    spec = ProblemSpec.at_optimal(5, 0.1, 1.0)
    _, nu5, lam5 = pipeline(spec)
    maps_ok = dual_map_equivalence(nu5, lam5, trials=100, dim=3, rng=rng)
    grimmer, props_ok, lam_ok = 0.0, True, True
    for N in N_GRID:
        for kappa in KAPPAS:
            for gamma in (None,) + GAMMAS:
                s = ProblemSpec.at_optimal(N, kappa, 1.0) if gamma is None else ProblemSpec(N, kappa, 1.0, gamma)
                es, nu, lam = pipeline(s)
                grimmer = max(grimmer, grimmer_violation(lam.entries))
                lam_ok &= check_lambda(lam, conversion_sequences(nu)).passed
                props_ok &= bool(proposition_checks(N, es.rho, es.eta)["passed"])
    # psi convexity: 200 grid points for 20 (rho, eta, N) combinations.
    psi_ok, combos = True, 0
    for N in (1, 2, 4, 8, 15):
        for kappa in (0.0, 0.1, 0.5, 0.9):
            g = gamma_star(N, kappa, 1.0)
            psi_ok &= verifier.check_psi_convexity(1 - g, 1 - g * kappa, N, grid_size=199)
            combos += 1
    elapsed = time.perf_counter() - start
    ok = (
        rt_err <= 1e-12 and maps_ok and grimmer <= 1e-9 and lam_ok
        and psi_ok and combos == 20 and props_ok and elapsed < 20.0
    )
    report(
        capsys, 9, "property suites", ok,
        f"round trip {rt_err:.1e}, dual maps {maps_ok}, grimmer {grimmer:.1e}, lambda checks {lam_ok}, "
        f"psi {psi_ok} ({combos}), propositions {props_ok}, {elapsed:.2f}s",
    )


def test_10_upper_bound_stress(capsys):
    start = time.perf_counter()
    worst_f = worst_g = -np.inf
    ok = True
    seeds = np.random.SeedSequence(10).spawn(5)
    cases = [ProblemSpec.at_optimal(5, 0.1, 1.0)] + [ProblemSpec(5, 0.1, 1.0, g) for g in (0.5, 1.0, 1.8)]
    cases.append(ProblemSpec.at_optimal(4, 0.0, 1.0))
    for seed, spec in zip(seeds, cases):
        out = gdlab.stress_quadratics(spec, count=1000, d=4, seed=seed)
        worst_f, worst_g = max(worst_f, out["max_excess_f"]), max(worst_g, out["max_excess_g"])
        ok &= out["max_excess_f"] <= 1e-9 and out["max_excess_g"] <= 1e-9
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    report(capsys, 10, "upper-bound stress", ok, f"5 x 1000 quadratics, max excess f {worst_f:.1e}, g {worst_g:.1e}, {elapsed:.2f}s")
