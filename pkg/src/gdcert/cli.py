"""Command-line front end.

Exit codes: 0 success, 1 a verification failed, 2 invalid usage or parameters.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import gdlab, verifier
from .certificate import certificate_document, certify
from .lam import (
    check_lambda,
    conversion_sequences,
    dual_map_equivalence,
    lambda_pretty,
    lambda_to_csv,
    nu_to_lambda,
)
from .nu import build_nu, proposition_checks, remove_back_cycle
from .rates import ProblemSpec, effective_parameters, eval_T, gamma_star, tau
from .serialize import to_json

OUTPUT_DIR_ENV = "GDCERT_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _spec(args) -> ProblemSpec:
    try:
        if args.gamma is None:
            return ProblemSpec.at_optimal(args.N, args.mu, args.L)
        return ProblemSpec(args.N, args.mu, args.L, args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _spec_dict(spec: ProblemSpec) -> dict:
    return {"N": spec.N, "mu": spec.mu, "L": spec.L, "gamma": spec.gamma}


def _emit(args, doc: dict, pretty: str, csv: Optional[str] = None) -> None:
    if args.format == "json":
        text = to_json(doc)
    elif args.format == "csv":
        if csv is None:
            raise UsageError(f"--format csv is not available for '{args.command}'")
        text = csv
    else:
        text = pretty if pretty.endswith("\n") else pretty + "\n"
    if args.output:
        path = Path(args.output)
        base = os.environ.get(OUTPUT_DIR_ENV)
        if base and not path.is_absolute():
            path = Path(base) / path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def cmd_rate(args) -> int:
    spec = _spec(args)
    r = tau(spec)
    doc = {
        "spec": _spec_dict(spec),
        "tau": r.tau,
        "branch": r.branch.value,
        "f_bound": r.f_bound,
        "g_bound_factor": r.tau / spec.L,
        "criterion_g_bound": 2 * r.tau,
        "gamma_star": gamma_star(spec.N, spec.mu, spec.L),
    }
    pretty = "\n".join(
        [
            f"tau          {r.tau:.10g}  ({r.branch.value})",
            f"f bound      (f(x_N) - f*) <= {r.f_bound:.10g} * ||x0 - x*||^2",
            f"g bound      ||grad f(x_N)||^2 / (2L) <= {r.tau / spec.L:.10g} * (f(x0) - f*)",
            f"gamma*       {doc['gamma_star']:.10g}",
        ]
    )
    _emit(args, doc, pretty)
    return EXIT_OK


def cmd_gamma_star(args) -> int:
    try:
        g = gamma_star(args.N, args.mu, args.L)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rho, eta = 1 - g * args.L, 1 - g * args.mu
    doc = {"N": args.N, "mu": args.mu, "L": args.L, "gamma_star": g, "rho": rho, "eta": eta,
           "T_N": float(eval_T(args.N, rho, eta))}
    _emit(args, doc, f"gamma* = {g:.17g}  (gamma* L = {g * args.L:.10g})")
    return EXIT_OK


def _pipeline(spec: ProblemSpec):
    eff = effective_parameters(spec)
    es = eff.spec(spec.N)
    nu = build_nu(spec.N, es.rho, es.eta)
    return eff, es, nu


def cmd_certificate(args) -> int:
    spec = _spec(args)
    _, _, nu = _pipeline(spec)
    if args.inject_fault:
        nu = remove_back_cycle(nu)
    cert = certify(spec, nu)
    doc = certificate_document(cert)
    if spec.mu == 0:
        doc["tightness"] = gdlab.tightness_summary(spec.N, spec.gamma, spec.L)
    ok = all(cert.verdicts.values())
    lines = [
        f"N={spec.N} mu={spec.mu} L={spec.L} gamma={spec.gamma:.10g}",
        f"effective mu={cert.eff.mu_eff:.10g} L={cert.eff.L_eff:.10g} ({cert.eff.which_moved.value})",
        f"tau true={cert.tau_true:.10g} eff={cert.tau_eff:.10g}",
        f"min eigenvalue {cert.min_eig:.4e}  psd={cert.psd}",
    ]
    if cert.decomposition is not None:
        lines.append("delta " + " ".join(f"{d:.4f}" for d in cert.decomposition.delta))
    lines += [f"{k:24s} {'ok' if v else 'FAIL'}" for k, v in cert.verdicts.items()]
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _lambda(spec: ProblemSpec, inject: bool):
    _, _, nu = _pipeline(spec)
    lam = nu_to_lambda(nu)
    if inject:
        lam = verifier.inject_lambda_fault(lam)
    return nu, lam


def _lambda_doc(spec, lam) -> dict:
    labels = ["*"] + [str(k) for k in range(lam.N + 1)]
    order = [lam.star] + list(range(lam.N + 1))
    return {
        "spec": _spec_dict(spec),
        "labels": labels,
        "entries": lam.entries[np.ix_(order, order)].tolist(),
    }


def cmd_lambda(args) -> int:
    spec = _spec(args)
    nu, lam = _lambda(spec, args.inject_fault)
    diag = check_lambda(lam, conversion_sequences(nu))
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    maps_ok = dual_map_equivalence(nu, lam, trials=100, dim=3, rng=rng)
    doc = _lambda_doc(spec, lam)
    doc["checks"] = {
        "min_entry": diag.min_entry,
        "max_f1_residual": diag.max_f1_residual,
        "grimmer": diag.grimmer,
        "bounds_ok": bool(diag.bounds["passed"]),
        "dual_maps_equivalent": maps_ok,
        "formula_discrepancy": lam.discrepancy,
    }
    ok = diag.passed and maps_ok
    pretty = lambda_pretty(lam) + "\n" + "\n".join(f"{k}: {v}" for k, v in doc["checks"].items())
    _emit(args, doc, pretty, lambda_to_csv(lam))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_table(args) -> int:
    spec = _spec(args)
    _, lam = _lambda(spec, args.inject_fault)
    diag = check_lambda(lam)
    _emit(args, _lambda_doc(spec, lam), lambda_pretty(lam), lambda_to_csv(lam))
    return EXIT_OK if diag.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    spec = _spec(args)
    eff, es, nu = _pipeline(spec)
    lam = nu_to_lambda(nu)
    if args.inject_fault:
        nu = verifier.inject_nu_fault(nu)
        lam = verifier.inject_lambda_fault(lam)
    seeds = np.random.SeedSequence(args.seed).spawn(5)
    reports = [
        verifier.verify_F_inequality(lam, spec, trials=args.trials, d=args.dim, seed=seeds[0]),
        verifier.verify_G_inequality(nu, spec, trials=args.trials, d=args.dim, seed=seeds[1]),
        verifier.verify_G_modified(nu, spec, trials=args.trials, d=args.dim, seed=seeds[2]),
    ]
    checks = {r.label: r.passed for r in reports}
    if eff.which_moved.value != "none":
        cmp = verifier.strengthening_comparison(nu, spec, es, args.trials, args.dim, seeds[3])
        checks["strengthening"] = bool(cmp["passed"])
    checks["prop_trivial"] = verifier.check_prop_trivial(spec.L, 1000, args.dim, seeds[4])
    checks["tau_gap_identity"] = verifier.tau_gap_identity(spec) <= 1e-12
    if -1 < es.rho < 0 and es.eta > 0:
        checks["psi_convexity"] = verifier.check_psi_convexity(es.rho, es.eta, spec.N)
        checks["propositions"] = bool(proposition_checks(spec.N, es.rho, es.eta)["passed"])
    doc = {"spec": _spec_dict(spec), "reports": [r.as_dict() for r in reports], "checks": checks}
    lines = [f"{r.label:12s} min slack {r.min_slack: .3e}  {'ok' if r.passed else 'FAIL'}" for r in reports]
    lines += [f"{k:16s} {'ok' if v else 'FAIL'}" for k, v in checks.items() if k not in ("F", "G", "G-modified")]
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def cmd_simulate(args) -> int:
    spec = _spec(args)
    lines, doc = [], {"spec": _spec_dict(spec)}
    ok = True
    if spec.mu == 0:
        t = gdlab.tightness_summary(spec.N, spec.gamma, spec.L)
        ratio = t["max_over_instances"] / t["half_tau"]
        doc["tightness"] = t
        doc["tightness_ratio"] = ratio
        ok &= abs(ratio - 1) <= 1e-9
        lines.append(f"huber ratio / bound = {t['huber'] / t['half_tau']:.10f}")
        lines.append(f"quadratic ratio / bound = {t['quadratic'] / t['half_tau']:.10f}")
        lines.append(f"max / (tau/2) = {ratio:.10f}")
    else:
        doc["tightness"] = None
        lines.append("tightness: n/a (mu>0)")
    stress = gdlab.stress_quadratics(spec, count=min(args.trials, 1000), d=args.dim, seed=args.seed)
    doc["stress"] = stress
    ok &= bool(stress["passed"])
    lines.append(f"random quadratics: max excess f {stress['max_excess_f']:.3e}, g {stress['max_excess_g']:.3e}")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "rate": cmd_rate,
    "gamma-star": cmd_gamma_star,
    "certificate": cmd_certificate,
    "lambda": cmd_lambda,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "table": cmd_table,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdcert", description="Exact worst-case rates and certificates for gradient descent.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--N", type=int, required=True, help="number of iterations")
        p.add_argument("--mu", type=float, default=0.0, help="strong convexity parameter")
        p.add_argument("--L", type=float, default=1.0, help="smoothness parameter")
        if name != "gamma-star":
            p.add_argument("--gamma", type=float, default=None, help="stepsize (default: optimal)")
        p.add_argument("--trials", type=int, default=10_000)
        p.add_argument("--dim", type=int, default=verifier.DEFAULT_DIM)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", default=None, help=f"write here (relative paths resolve under ${OUTPUT_DIR_ENV})")
        default_format = "pretty" if name in ("table", "rate", "gamma-star", "simulate", "verify") else "json"
        p.add_argument("--format", choices=("json", "csv", "pretty"), default=default_format)
        p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.ERROR)
    args = build_parser().parse_args(argv)
    if args.N < 1 or args.trials < 1 or args.dim < 1:
        print("gdcert: N, trials and dim must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gdcert: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
