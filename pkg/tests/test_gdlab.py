import numpy as np
import pytest

from gdcert.gdlab import (
    baseline_f_bound,
    criterion_g_bound,
    huber_slope,
    huber_slope_numeric,
    huber_tight_instance,
    membership_check,
    polyak_factor,
    quadratic_instance,
    random_quadratic_instance,
    run_gd,
    stress_quadratics,
    tightness_summary,
    trace_to_csv,
)
from gdcert.rates import ProblemSpec, tau


def test_huber_single_step_value():
    # N = 1, gamma L = 1: slope 1/3, x_1 = 2/3, f(x_1) = 2/9 - 1/18 = 1/6.
    tr = run_gd(huber_tight_instance(1, 1.0, 1.0), [1.0], 1.0, 1)
    assert tr.criterion_f == pytest.approx(1 / 6, rel=1e-14)
    assert tr.iterates[-1, 0] == pytest.approx(2 / 3)


def test_quadratic_unit_step_reaches_minimum():
    tr = run_gd(quadratic_instance(1.0), [1.0], 1.0, 3)
    assert tr.criterion_f == 0.0 and tr.criterion_g == 0.0


def test_criteria_undefined_at_minimizer():
    tr = run_gd(quadratic_instance(1.0), [0.0], 0.5, 2)
    assert tr.criterion_f is None and tr.criterion_g is None


def test_run_gd_rejects_bad_step():
    with pytest.raises(ValueError):
        run_gd(quadratic_instance(1.0), [1.0], 2.0, 1)


@pytest.mark.parametrize("N", [1, 4, 10])
@pytest.mark.parametrize("gamma", [0.3, 1.0, 1.7])
def test_slope_matches_numeric_maximizer(N, gamma):
    assert huber_slope_numeric(N, gamma, 1.0, 1.0) == pytest.approx(huber_slope(N, gamma, 1.0, 1.0), rel=1e-6)


@pytest.mark.parametrize("N", [1, 3, 8])
@pytest.mark.parametrize("gamma", [0.3, 1.3])
def test_tightness_summary(N, gamma):
    t = tightness_summary(N, gamma / 2.0, 2.0)
    assert t["huber"] == pytest.approx(t["huber_expected"], rel=1e-9)
    assert t["quadratic"] == pytest.approx(t["quadratic_expected"], rel=1e-9)
    assert t["max_over_instances"] == pytest.approx(t["half_tau"], rel=1e-9)


def test_extremal_instances_are_members():
    assert membership_check(huber_tight_instance(4, 1.2, 1.0), samples=300, seed=0) <= 1e-9
    assert membership_check(quadratic_instance(1.0, d=3), samples=300, seed=0) <= 1e-9
    assert membership_check(random_quadratic_instance(0.2, 1.0, 4, seed=1), samples=300, seed=0) <= 1e-9


def test_non_member_is_flagged():
    # Curvature 2 exceeds the declared L = 1.
    q = quadratic_instance(2.0, d=2)
    fake = type(q)(q.value, q.gradient, 0.0, 1.0, q.minimizer, 0.0)
    assert membership_check(fake, samples=50, seed=0) > 1e-3


def test_random_quadratic_spectrum_hits_endpoints():
    rng = np.random.default_rng(3)
    inst = random_quadratic_instance(0.1, 1.0, 5, rng)
    # Recover Q from gradients.
    Q = np.array([inst.gradient(inst.minimizer + e) for e in np.eye(5)]).T
    eig = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    assert eig.min() == pytest.approx(0.1) and eig.max() == pytest.approx(1.0)


def test_bounds():
    spec = ProblemSpec(5, 0.0, 1.0, 1.0)
    assert criterion_g_bound(spec) == pytest.approx(2 * tau(spec).tau)
    # The exact rate improves on the classical bound at unit step.
    assert tau(spec).f_bound < baseline_f_bound(5, 1.0)
    assert polyak_factor(ProblemSpec(3, 0.5, 1.0, 1.0)) == pytest.approx(0.125)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 1.9])
def test_stress(gamma):
    out = stress_quadratics(ProblemSpec(4, 0.1, 1.0, gamma), count=200, d=3, seed=0)
    assert out["passed"], out


def test_trace_csv():
    tr = run_gd(quadratic_instance(1.0, d=2), [1.0, 2.0], 0.5, 2)
    lines = trace_to_csv(tr).splitlines()
    assert lines[0] == "k,x0,x1,f,grad_norm"
    assert lines[2].split(",")[1] == "0.5"
