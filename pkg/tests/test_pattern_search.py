import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safeopt_ps.pattern_search import (
    MeshState,
    Pattern,
    PsConfig,
    PsProblem,
    Status,
    maximize,
    poll_points,
    poll_step,
    positively_spans,
)


def test_poll_points_three_direction_pattern():
    pat = Pattern.three_direction()
    s = MeshState(np.zeros(2), 1.0, 0.0)
    assert np.array_equal(poll_points(s, pat), [[0, 1], [1, 0], [-1, -1]])
    s = MeshState(np.zeros(2), 0.5, 0.0)
    assert np.array_equal(poll_points(s, pat), [[0, 0.5], [0.5, 0], [-0.5, -0.5]])


def test_zero_mesh_rejected():
    with pytest.raises(ValueError):
        MeshState(np.zeros(2), 0.0, 0.0)


@pytest.mark.parametrize("D, ok", [
    ([[1, 0], [0, 1], [-1, -1]], True),
    ([[1, 0], [-1, 0], [0, 1], [0, -1]], True),
    ([[1, 0], [0, 1]], False),
    ([[1, 0], [-1, 0], [0, 1]], False),
    ([[1, 1], [-1, -1], [2, 2]], False),
])
def test_positive_spanning(D, ok):
    assert positively_spans(np.array(D, dtype=float)) is ok


def test_pattern_validation():
    with pytest.raises(ValueError):
        Pattern(np.array([[1, 0], [0, 1]]))
    with pytest.raises(ValueError):
        Pattern(np.array([[0.5, 0], [-1, 0], [0, 1], [0, -1]]))
    assert len(Pattern.coordinate(3)) == 6
    assert len(Pattern.minimal(4)) == 5
    assert Pattern.named("coordinate", 2) is Pattern.named("coordinate", 2)
    with pytest.raises(ValueError):
        Pattern.named("three_direction", 3)


def test_config_validation():
    with pytest.raises(ValueError):
        PsConfig(initial_mesh=1.0, mesh_tolerance=1.0)
    with pytest.raises(ValueError):
        PsConfig(max_evaluations=0)


def _line(f, lo=-10.0, hi=10.0, **kw):
    return PsProblem(f, np.array([lo]), np.array([hi]), **kw)


def test_poll_at_optimum_contracts():
    prob = _line(lambda x: -x[0] ** 2)
    s, moved = poll_step(prob, MeshState(np.zeros(1), 1.0, 0.0), Pattern.coordinate(1))
    assert not moved and s.mesh_size == 0.5 and s.exponent == -1


def test_successful_poll_expands():
    prob = _line(lambda x: -(x[0] - 1) ** 2)
    s, moved = poll_step(prob, MeshState(np.zeros(1), 1.0, -1.0), Pattern.coordinate(1))
    assert moved and s.incumbent[0] == 1.0 and s.mesh_size == 2.0 and s.incumbent_value == 0.0


def test_out_of_box_candidate_never_accepted():
    prob = _line(lambda x: x[0], lo=0.0, hi=1.0)
    s, moved = poll_step(prob, MeshState(np.array([0.9]), 1.0, 0.9), Pattern.coordinate(1))
    assert not moved and s.incumbent[0] == 0.9


def test_ties_go_to_lowest_pattern_index():
    prob = _line(lambda x: abs(x[0]))
    s, _ = poll_step(prob, MeshState(np.zeros(1), 1.0, 0.0), Pattern.coordinate(1))
    assert s.incumbent[0] == 1.0


def test_two_dimensional_quadratic():
    prob = PsProblem(lambda x: -(x[0] - 1) ** 2 - (x[1] + 2) ** 2, -5 * np.ones(2), 5 * np.ones(2))
    res = maximize(prob, np.zeros(2), PsConfig(1.0, 1e-6), Pattern.coordinate(2))
    assert np.linalg.norm(res.best_point - [1, -2]) < 1e-4
    assert res.status is Status.MESH_CONVERGED


def test_infeasible_start():
    prob = _line(lambda x: x[0], hard_constraints=[lambda x: x[0]])
    res = maximize(prob, np.array([-1.0]), PsConfig(), Pattern.coordinate(1))
    assert res.status is Status.INFEASIBLE_START


def test_hard_constraint_is_a_barrier():
    prob = _line(lambda x: -x[0], hard_constraints=[lambda x: x[0] - 0.3])
    res = maximize(prob, np.array([2.0]), PsConfig(1.0, 1e-8), Pattern.coordinate(1))
    assert 0.3 <= res.best_point[0] < 0.3 + 1e-6


def test_evaluation_budget():
    prob = _line(lambda x: -(x[0] - 7) ** 2)
    res = maximize(prob, np.zeros(1), PsConfig(1e-3, 1e-9, max_evaluations=10),
                   Pattern.coordinate(1))
    assert res.status is Status.EVAL_BUDGET
    assert res.evaluations <= 12


def test_multistart_keeps_best_run():
    f = lambda x: np.where(x[0] < 0, -(x[0] + 3) ** 2, 5 - (x[0] - 3) ** 2)
    prob = _line(f)
    cfg = PsConfig(0.25, 1e-6, multistart_count=1)
    res = maximize(prob, np.array([-3.0]), cfg, Pattern.coordinate(1), [np.array([2.0])])
    assert res.start_index == 1 and abs(res.best_point[0] - 3) < 1e-5


def test_joint_oracle_matches_separate_oracles():
    f = lambda x: -np.sum((x - 0.3) ** 2)
    c = lambda x: 0.5 - x[0]

    def joint(X):
        return -np.sum((X - 0.3) ** 2, axis=1), (0.5 - X[:, 0])[:, None]

    a = PsProblem(f, np.zeros(2), np.ones(2), [c])
    b = PsProblem(lower=np.zeros(2), upper=np.ones(2), joint=joint)
    cfg = PsConfig(0.5, 1e-6)
    ra = maximize(a, np.array([0.1, 0.1]), cfg, Pattern.coordinate(2))
    rb = maximize(b, np.array([0.1, 0.1]), cfg, Pattern.coordinate(2))
    assert np.array_equal(ra.best_point, rb.best_point)


def test_problem_needs_one_oracle():
    with pytest.raises(ValueError):
        PsProblem(lower=np.zeros(1), upper=np.ones(1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_mesh_sizes_are_powers_of_two_and_values_monotone(seed, n):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, size=n)
    prob = PsProblem(lambda x: -np.sum((x - c) ** 2), -2 * np.ones(n), 2 * np.ones(n))
    d0 = float(rng.uniform(0.1, 1.0))
    res = maximize(prob, np.zeros(n), PsConfig(d0, 1e-5), Pattern.coordinate(n))
    for d in res.mesh_history:
        z = np.log2(d / d0)
        assert abs(z - round(z)) < 1e-12
    assert all(b >= a for a, b in zip(res.value_history, res.value_history[1:]))
