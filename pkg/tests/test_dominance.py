import numpy as np
import pytest

from src.core.dominance import (
    DominanceProblem,
    QuadraticForm,
    extremal_point,
    extremizer,
    n_ellipsoid_diagnostic,
    phi,
    sdominance_solve,
    sprocedure_certify,
)
from src.core.errors import DegenerateParameters, Infeasible, PremiseViolated
from src.core.linalg import min_eig
from src.core.oracle import sup_quadratic_ellipsoids, sup_quadratic_grid, sup_quadratic_two_ellipsoids


def _spd(rng, p):
    G = rng.standard_normal((p, p))
    return G @ G.T + 0.1 * np.eye(p)


def test_scalar_instance_snaps_to_endpoint():
    cert = sdominance_solve(DominanceProblem(np.array([[1.0]]), np.array([[4.0]]), np.array([[1.0]])))
    assert cert.value == pytest.approx(0.25, abs=1e-12)
    assert cert.a == pytest.approx(0.0, abs=1e-12)
    assert cert.tau == 1.0


def test_zero_objective():
    cert = sdominance_solve(DominanceProblem(np.eye(2), np.eye(2), np.zeros((2, 2))))
    assert cert.a == 0.0 and cert.b == 0.0
    assert cert.tau == 0.5


def test_flat_phi_takes_midpoint():
    problem = DominanceProblem(np.eye(2), np.eye(2), np.diag([3.0, 1.0]))
    assert phi(problem, 0.2) == pytest.approx(3.0)
    cert = sdominance_solve(problem)
    assert cert.value == pytest.approx(3.0, rel=1e-10)
    assert cert.tau == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_certificate_is_feasible_and_tight(seed):
    rng = np.random.default_rng(seed)
    p = 3
    A, B = _spd(rng, p), _spd(rng, p)
    H = rng.standard_normal((p, p))
    C = H @ H.T
    problem = DominanceProblem(A, B, C)
    cert = sdominance_solve(problem)
    assert min_eig(cert.a * A + cert.b * B - C) >= -1e-8 * (1.0 + np.trace(C))
    report = sup_quadratic_two_ellipsoids(A, B, C, budget=4000, seed=seed)
    assert report.best_value <= cert.value * (1.0 + 1e-9)
    assert report.best_value >= cert.value * (1.0 - 1e-3)


def test_extremal_point_balances_multiple_eigenvalue():
    problem = DominanceProblem(np.diag([1.0, 3.0]), np.diag([3.0, 1.0]), np.eye(2))
    cert = sdominance_solve(problem)
    assert cert.a == pytest.approx(0.25, abs=1e-9)
    assert cert.b == pytest.approx(0.25, abs=1e-9)
    point = extremal_point(problem, cert)
    assert point.norms[0] == pytest.approx(1.0, abs=1e-6)
    assert point.norms[1] == pytest.approx(1.0, abs=1e-6)
    assert point.value == pytest.approx(0.5, abs=1e-6)
    np.testing.assert_allclose(np.abs(point.h), [0.5, 0.5], atol=1e-6)


def test_extremal_point_needs_both_parameters():
    problem = DominanceProblem(np.array([[1.0]]), np.array([[4.0]]), np.array([[1.0]]))
    cert = sdominance_solve(problem)
    with pytest.raises(DegenerateParameters):
        extremal_point(problem, cert)
    h = extremizer(problem, cert).h
    assert abs(h[0]) == pytest.approx(0.5, abs=1e-12)


def test_common_kernel_is_rejected():
    with pytest.raises(ValueError):
        DominanceProblem(np.diag([1.0, 0.0]), np.diag([2.0, 0.0]), np.eye(2))


def test_from_forms_compresses_common_kernel():
    problem = DominanceProblem.from_forms(np.diag([1.0, 0.0]), np.diag([2.0, 0.0]), np.diag([1.0, 0.0]))
    assert problem.p == 1
    assert sdominance_solve(problem).value == pytest.approx(0.5, abs=1e-12)


def test_from_forms_objective_on_kernel():
    with pytest.raises(Infeasible):
        DominanceProblem.from_forms(np.diag([1.0, 0.0]), np.diag([2.0, 0.0]), np.eye(2))


def test_non_psd_form_rejected():
    with pytest.raises(ValueError):
        DominanceProblem(np.diag([1.0, -1.0]), np.eye(2), np.eye(2))


def test_diagnostic_identity_forms_exact():
    forms = [np.eye(2)] * 3
    report = n_ellipsoid_diagnostic(forms, np.diag([2.0, 1.0]))
    assert report.verdict == "Exact"
    assert report.inf_value == pytest.approx(2.0, rel=1e-6)


def test_diagnostic_hexagon_not_exact():
    angles = [0.0, np.pi / 3, 2 * np.pi / 3]
    forms = [np.outer(u, u) for u in ([np.cos(t), np.sin(t)] for t in angles)]
    report = n_ellipsoid_diagnostic(forms, np.eye(2))
    sup = sup_quadratic_grid(forms, np.eye(2)).best_value
    assert sup == pytest.approx(4.0 / 3.0, rel=1e-4)
    assert report.verdict == "NotExact"
    assert report.inf_value > sup * (1.0 + 1e-3)


def test_diagnostic_two_forms_matches_solver():
    rng = np.random.default_rng(11)
    A, B = _spd(rng, 3), _spd(rng, 3)
    C = np.diag([1.0, 0.5, 0.0])
    report = n_ellipsoid_diagnostic([A, B], C)
    assert report.inf_value == pytest.approx(sdominance_solve(DominanceProblem(A, B, C)).value, rel=1e-9)


def test_sprocedure_certified():
    q1 = QuadraticForm(np.eye(3), -1.0)
    q2 = QuadraticForm(np.diag([1.0, 0.0, 0.0]), -4.0)
    result = sprocedure_certify(QuadraticForm(np.eye(3), -2.0), q1, q2)
    assert result.verdict == "Certified"
    assert result.matrix_residual >= -1e-8
    assert result.const_residual >= -1e-8
    assert not result.dimension_caveat


def test_sprocedure_refuted():
    q1 = QuadraticForm(np.eye(3), -1.0)
    q2 = QuadraticForm(np.diag([1.0, 0.0, 0.0]), -4.0)
    q0 = QuadraticForm(np.eye(3), -0.5)
    result = sprocedure_certify(q0, q1, q2)
    assert result.verdict == "Refuted"
    x = result.witness
    assert q1(x) <= 1e-9 and q2(x) <= 1e-9 and q0(x) > 0


def test_sprocedure_premise():
    q1 = QuadraticForm(np.eye(3), 1.0)
    q2 = QuadraticForm(np.diag([1.0, 0.0, 0.0]), 1.0)
    with pytest.raises(PremiseViolated):
        sprocedure_certify(QuadraticForm(np.eye(3), 0.0), q1, q2)


def test_sprocedure_low_dimension_caveat():
    q1 = QuadraticForm(np.eye(2), -1.0)
    q2 = QuadraticForm(np.diag([1.0, 0.0]), -4.0)
    result = sprocedure_certify(QuadraticForm(np.eye(2), -2.0), q1, q2)
    assert result.dimension_caveat


@pytest.mark.parametrize("seed", range(5))
def test_phi_is_convex_and_minimized(seed):
    rng = np.random.default_rng(40 + seed)
    A, B, C = _spd(rng, 4), _spd(rng, 4), _spd(rng, 4)
    problem = DominanceProblem(A, B, C)
    taus = np.linspace(0.0, 1.0, 200)
    values = np.array([phi(problem, t) for t in taus])
    second = values[:-2] + values[2:] - 2.0 * values[1:-1]
    assert np.all(second >= -1e-9 * (1.0 + values[1:-1]))
    cert = sdominance_solve(problem)
    assert cert.value <= values.min() + 1e-9 * (1.0 + values.min())
    assert phi(problem, cert.tau) == pytest.approx(cert.lam, rel=1e-9)


def test_sprocedure_recovers_e1_multipliers():
    q0 = QuadraticForm(np.diag([0.0, 1.0, 0.0]), -0.25)
    q1 = QuadraticForm(np.eye(3), -1.0)
    q2 = QuadraticForm(np.diag([1.0, 4.0, 0.0]), -1.0)
    result = sprocedure_certify(q0, q1, q2)
    assert result.verdict == "Certified"
    assert result.a1 == pytest.approx(0.0, abs=1e-9)
    assert result.a2 == pytest.approx(0.25, abs=1e-9)


def test_sprocedure_refuted_by_vacuous_constraints():
    q = QuadraticForm(-np.eye(3), -1.0)
    result = sprocedure_certify(QuadraticForm(np.eye(3), 0.0), q, q)
    assert result.verdict == "Refuted"
    x = result.witness
    assert np.linalg.norm(x) > 0
    assert q(x) <= 0 and x @ x > 0


def _dominated_forms(rng, p, count):
    """A plus forms L M L^T with 0 < M < I, hence below A."""
    A = _spd(rng, p)
    L = np.linalg.cholesky(A)
    forms = [A]
    for _ in range(count - 1):
        U = np.linalg.qr(rng.standard_normal((p, p)))[0]
        forms.append(L @ U @ np.diag(rng.uniform(0.1, 0.9, p)) @ U.T @ L.T)
    return forms


@pytest.mark.parametrize("seed", range(5))
def test_diagnostic_exact_with_dominated_forms(seed):
    rng = np.random.default_rng(seed)
    forms = _dominated_forms(rng, 3, 3)
    C = _spd(rng, 3)
    report = n_ellipsoid_diagnostic(forms, C)
    lam = np.linalg.eigvals(np.linalg.solve(forms[0], C)).real.max()
    assert report.verdict == "Exact"
    assert report.inf_value == pytest.approx(lam, rel=1e-6)
    assert report.sup_candidate == pytest.approx(lam, rel=1e-6)
    assert np.all(report.form_values <= 1.0 + 1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_diagnostic_three_forms_agrees_with_oracle(seed):
    rng = np.random.default_rng(seed)
    forms = [_spd(rng, 3) for _ in range(3)]
    C = _spd(rng, 3)
    report = n_ellipsoid_diagnostic(forms, C)
    sup = sup_quadratic_ellipsoids(forms, C, budget=10_000, seed=seed).best_value
    assert sup <= report.inf_value * (1.0 + 1e-7)
    assert report.sup_candidate <= report.inf_value * (1.0 + 1e-7)
    if sup >= report.inf_value * (1.0 - 1e-8):
        assert report.verdict == "Exact"
    if report.verdict == "Exact":
        assert report.sup_candidate >= report.inf_value - 1e-6 * (1.0 + report.inf_value)
