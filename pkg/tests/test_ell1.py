import logging

import numpy as np
import pytest

from src.core import ell1
from src.core.ell1 import (
    BEST_EFFORT,
    HOLDS,
    axis_map,
    build_axis,
    compute_M_table,
    l1_optimal_solve,
    l1_worst_case,
    minimax_linear,
    solve_lb_all,
)
from src.core.errors import Unbounded
from src.core.oracle import l1_worstcase_vertex
from src.core.recovery import ZERO_RADIUS, ProblemSpec, Scenario, constrained_lsq, solve_radius
from src.core.scenarios import solve_l2_inaccurate

logger = logging.getLogger(__name__)


def _l1_spec(Lambda, epsilon=1.0, eta=1.0, R=None, Q=None):
    Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
    n = Lambda.shape[1]
    return ProblemSpec(
        Lambda=Lambda,
        Q=np.eye(n) if Q is None else Q,
        R=np.eye(n) if R is None else R,
        S=np.zeros((0, n)),
        epsilon=epsilon,
        eta=eta,
        scenario=Scenario.L1,
    )


def _seeded(seed, eta_ratio):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, min(4, n - 1) + 1))
    epsilon = float(rng.uniform(0.5, 2.0))
    return _l1_spec(
        rng.standard_normal((m, n)),
        epsilon=epsilon,
        eta=eta_ratio * epsilon,
        R=rng.standard_normal((n, n)) + 2 * np.eye(n),
        Q=rng.standard_normal((n, n)),
    )


def test_build_axis_blocks():
    spec = _l1_spec([[1.0, 0.0]], eta=0.5)
    axis = build_axis(spec, 0)
    np.testing.assert_allclose(axis.Gamma, [[1.0, 0.0, 0.0]])
    np.testing.assert_allclose(axis.S, [[0.0, 0.0, 2.0]])
    np.testing.assert_allclose(axis.R @ np.array([0.3, -0.7, 0.0]), [0.3, -0.7], atol=1e-15)


def test_build_axis_with_q_equal_lambda():
    rng = np.random.default_rng(2)
    Lambda = rng.standard_normal((2, 4))
    spec = _l1_spec(Lambda, Q=Lambda, R=np.eye(4))
    for j in range(2):
        expected = np.hstack([Lambda, -np.eye(2)[:, j:j + 1]])
        np.testing.assert_allclose(build_axis(spec, j).Q, expected, atol=1e-12)


def test_single_observation_matches_l2():
    rng = np.random.default_rng(5)
    Lambda, R = rng.standard_normal((1, 3)), rng.standard_normal((3, 3)) + 2 * np.eye(3)
    spec = _l1_spec(Lambda, epsilon=0.8, eta=0.3, R=R)
    verdict, cert = l1_optimal_solve(spec)
    l2 = solve_l2_inaccurate(ProblemSpec(Lambda, np.eye(3), R, np.eye(1), 0.8, 0.3, Scenario.L2))
    assert verdict == HOLDS
    assert cert.radius_sq == pytest.approx(l2.radius_sq, rel=1e-8)


def test_symmetric_axes_tie_to_first():
    ws = solve_lb_all(_l1_spec(np.eye(2), epsilon=1.0, eta=0.1))
    np.testing.assert_allclose(ws.lb, [0.01, 0.01], rtol=1e-10)
    assert ws.k == 0


def test_small_eta_approaches_exact_data():
    rng = np.random.default_rng(9)
    Lambda, R = rng.standard_normal((2, 4)), rng.standard_normal((4, 4)) + 2 * np.eye(4)
    ws = solve_lb_all(_l1_spec(Lambda, epsilon=1.0, eta=1e-7, R=R))
    exact = solve_radius(ProblemSpec(Lambda, np.eye(4), R, np.zeros((0, 4))))
    np.testing.assert_allclose(ws.lb, exact.radius_sq, rtol=1e-4)


def test_axis_map_single_observation():
    spec = _l1_spec([[1.0, 0.0]])
    rmap = axis_map(spec, 0, 1.0, 1.0)
    np.testing.assert_allclose(rmap.D, [[0.5], [0.0]], atol=1e-14)


def test_axis_map_keeps_other_observations():
    rng = np.random.default_rng(1)
    spec = _l1_spec(rng.standard_normal((3, 5)), R=rng.standard_normal((5, 5)) + 2 * np.eye(5))
    for c, d in [(1.0, 2.0), (1.0, 0.0), (0.0, 1.0)]:
        D = axis_map(spec, 1, c, d).D
        np.testing.assert_allclose((spec.Lambda @ D)[[0, 2]], np.eye(3)[[0, 2]], atol=1e-10)


def test_axis_map_large_data_weight_interpolates():
    rng = np.random.default_rng(3)
    spec = _l1_spec(rng.standard_normal((2, 4)), R=rng.standard_normal((4, 4)) + 2 * np.eye(4))
    D = axis_map(spec, 0, 1.0, 1e8).D
    interp = constrained_lsq(spec.R, np.zeros((4, 2)), spec.Lambda, np.eye(2))
    np.testing.assert_allclose(D, interp, atol=1e-6)


def test_non_injective_regularizer_unbounded():
    with pytest.raises(Unbounded):
        solve_lb_all(_l1_spec([[1.0, 0.0]], R=np.diag([1.0, 0.0])))


def test_wrong_scenario(e1_spec):
    with pytest.raises(ValueError):
        solve_lb_all(e1_spec)


@pytest.mark.parametrize("seed", range(30))
def test_diagonal_identity(seed):
    spec = _seeded(seed, eta_ratio=0.5)
    ws = solve_lb_all(spec)
    M = compute_M_table(spec, ws)
    np.testing.assert_allclose(np.diag(M), ws.lb, rtol=1e-7, atol=1e-12)


def test_small_eta_condition_and_optimality():
    holds = 0
    for seed in range(30):
        spec = _seeded(100 + seed, eta_ratio=1e-3)
        solution = l1_optimal_solve(spec)
        ws = solution.workspace
        lb_k = float(ws.lb[ws.k])
        if solution.verdict != HOLDS:
            continue
        holds += 1
        value, _ = l1_worst_case(spec, solution.result.map.QD)
        assert value == pytest.approx(lb_k, rel=1e-7)
        result = minimax_linear(spec, ws, iters=20)
        assert result.value == pytest.approx(lb_k, rel=1e-3)
        assert result.iterations == 0
        if seed < 5:
            report = l1_worstcase_vertex(solution.result.map.QD, spec)
            assert lb_k * (1 - 2e-3) <= report.best_value <= lb_k + 1e-7 * (1 + lb_k)
    logger.info(f"condition held on {holds}/30 instances")


@pytest.mark.parametrize("seed", range(10))
def test_any_linear_map_is_bounded_below(seed):
    spec = _seeded(200 + seed, eta_ratio=0.5)
    ws = solve_lb_all(spec)
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((spec.Q.shape[0], spec.m))
    value, per_axis = l1_worst_case(spec, L)
    assert value >= ws.lb[ws.k] * (1 - 1e-8) - 1e-12
    assert value == pytest.approx(per_axis.max())


def test_large_eta_brackets():
    for seed in range(10):
        spec = _seeded(300 + seed, eta_ratio=5.0)
        solution = l1_optimal_solve(spec)
        ws = solution.workspace
        if solution.verdict != BEST_EFFORT:
            assert ws.margin <= 1e-8 * (1 + ws.M[ws.k, ws.k])
            continue
        bracket = solution.result
        assert bracket.lower <= bracket.upper
        result = minimax_linear(spec, ws, iters=15)
        assert bracket.lower * (1 - 1e-6) <= result.value <= bracket.upper
        assert all(a >= b for a, b in zip(result.history, result.history[1:]))


def test_l1_worst_case_checks_shape():
    spec = _l1_spec([[1.0, 0.0]])
    with pytest.raises(ValueError):
        l1_worst_case(spec, np.zeros((1, 1)))


def test_zero_quantity_holds_with_zero_radius():
    rng = np.random.default_rng(6)
    spec = _l1_spec(rng.standard_normal((2, 4)), epsilon=0.7, eta=0.2,
                    R=rng.standard_normal((4, 4)) + 2 * np.eye(4), Q=np.zeros((3, 4)))
    solution = l1_optimal_solve(spec, full_table=True)
    assert solution.verdict == HOLDS
    assert solution.result.radius_sq == 0.0
    assert solution.result.map.limit_case == ZERO_RADIUS
    np.testing.assert_array_equal(solution.workspace.M, np.zeros((2, 2)))
    result = minimax_linear(spec, solution.workspace, iters=5)
    assert result.converged
    assert result.iterations == 0


def test_workers_reach_every_axis_pool(monkeypatch):
    seen = []
    pool = ell1.map_ordered

    def spy(fn, items, max_workers=None):
        seen.append(max_workers)
        return pool(fn, items, max_workers)

    monkeypatch.setattr(ell1, "map_ordered", spy)
    spec = _seeded(3, 0.5)
    solution = l1_optimal_solve(spec, full_table=True, workers=2)
    minimax_linear(spec, solution.workspace, iters=2)
    l1_worst_case(spec, solution.result.map.QD, workers=2)
    assert solution.workspace.workers == 2
    assert seen and set(seen) == {2}
