import numpy as np
import pytest

from oracles import dense_from_posterior, loop_expanders, loop_maximizers, loop_safe_set
from safeopt_ps.errors import NoCandidates, SafeSetEmpty
from safeopt_ps.gp import KernelSpec
from safeopt_ps.grid import (
    ExpanderStats,
    Grid,
    IterationSets,
    best_estimate,
    expanders,
    grid_step,
    iteration_sets,
    maximizers,
    recommend,
    run_grid,
    safe_set,
)
from safeopt_ps.model import GpConfig, ModelConfig, Source


def _model(X, Y, ls=0.3, sf2=1.0, noise=1e-6, beta=2.0, j_min=0.0):
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    Y = np.asarray(Y, dtype=float)
    cfg = ModelConfig(tuple(GpConfig(KernelSpec([ls] * n, sf2), noise) for _ in range(Y.shape[1])),
                      beta, j_min)
    return cfg.build(X, Y)


def test_grid_order_is_row_major():
    g = Grid.from_box([0, 0], [1, 2], [2, 3])
    assert len(g) == 6 and g.dim == 2 and g.per_axis_counts == (2, 3)
    assert np.array_equal(g.points[:3], [[0, 0], [0, 1], [0, 2]])
    with pytest.raises(ValueError):
        Grid.from_box([0], [1], [0])


def test_safe_set_contains_datum_with_clear_margin():
    m = _model([[0.5]], [[0.0, 1.0]])
    g = Grid.from_box([0], [1], [11])
    assert 5 in safe_set(m, g)


def test_safe_set_empty():
    m = _model([[0.5]], [[0.0, -1.0]])
    with pytest.raises(SafeSetEmpty):
        safe_set(m, Grid.from_box([0], [1], [11]))


def test_safe_set_matches_loop_oracle_on_five_points():
    m = _model([[0.2], [0.45]], [[0.1, 1.2], [0.3, 0.9]], ls=0.2, noise=1e-4)
    g = Grid.from_box([0], [1], [5])
    gps = [dense_from_posterior(p) for p in m.posteriors]
    assert safe_set(m, g).tolist() == loop_safe_set(gps, 2.0, 0.0, g.points)


def test_single_safe_point_is_maximizer():
    m = _model([[0.5]], [[0.0, 1.0]], ls=0.01)
    g = Grid.from_box([0], [1], [3])
    s = safe_set(m, g)
    assert s.tolist() == [1]
    assert maximizers(m, g, s).tolist() == [1]


def test_maximizers_by_bounds():
    # two far-apart noise-free data; the objective band at each is a point
    m = _model([[0.0], [1.0]], [[4.5, 1.0], [2.5, 1.0]], ls=0.01)
    g = Grid(np.array([[0.0], [1.0]]))
    assert maximizers(m, g, np.array([0, 1])).tolist() == [0]


def test_identical_bounds_all_maximizers():
    m = _model([[0.0], [1.0]], [[1.0, 1.0], [1.0, 1.0]], ls=0.01)
    g = Grid(np.array([[0.0], [1.0]]))
    assert maximizers(m, g, np.array([0, 1])).tolist() == [0, 1]


def test_no_outside_points_no_expanders():
    m = _model([[0.5]], [[0.0, 5.0]], ls=5.0)
    g = Grid.from_box([0], [1], [5])
    s = safe_set(m, g)
    assert len(s) == 5
    assert expanders(m, g, s).size == 0


def test_boundary_point_expands_and_far_interior_point_does_not():
    g = Grid.from_box([0], [1], [10])
    X = g.points[[0, 1, 2, 3]]
    m = _model(X, np.column_stack([np.zeros(4), np.full(4, 0.5)]), ls=0.3, noise=1e-4)
    s = safe_set(m, g)
    G = expanders(m, g, s)
    gps = [dense_from_posterior(p) for p in m.posteriors]
    assert G.tolist() == loop_expanders(gps, 2.0, 0.0, g.points, s.tolist())
    assert s.max() in G
    assert 0 not in G


def test_expander_stats_and_full_scan_agree():
    g = Grid.from_box([0, 0], [1, 1], [8, 8])
    rng = np.random.default_rng(4)
    X = rng.uniform(0.4, 0.6, size=(4, 2))
    m = _model(X, np.column_stack([rng.normal(size=4), np.full(4, 0.8)]), ls=0.25, noise=1e-4)
    s = safe_set(m, g)
    st1, st2 = ExpanderStats(), ExpanderStats()
    a = expanders(m, g, s, st1)
    b = expanders(m, g, s, st2, short_circuit=False)
    assert a.tolist() == b.tolist()
    assert st1.bound_evals <= st2.bound_evals
    assert set(st1.certified) == set(a.tolist())


def test_recommend_picks_widest():
    # a stand-in model with fixed bands of width 0.1, 0.7 and 0.3
    g = Grid(np.array([[0.0], [0.5], [1.0]]))

    class Fixed:
        width_indices = (0,)

        def bounds(self, X):
            w = np.array([0.1, 0.7, 0.3])
            return np.vstack([-w / 2, -w / 2]), np.vstack([w / 2, w / 2])

    sets = IterationSets(np.arange(3), np.arange(3), np.zeros(0, dtype=int))
    rec = recommend(Fixed(), g, sets)
    assert rec.point[0] == 0.5 and rec.source is Source.MAXIMIZER
    assert rec.width == pytest.approx(0.7)


def test_point_in_both_sets_is_labelled_maximizer():
    m = _model([[0.5]], [[0.0, 1.0]], ls=0.01)
    g = Grid.from_box([0], [1], [3])
    rec = recommend(m, g, IterationSets(np.array([1]), np.array([1]), np.array([1])))
    assert rec.source is Source.MAXIMIZER


def test_no_candidates():
    m = _model([[0.5]], [[0.0, 1.0]])
    g = Grid.from_box([0], [1], [3])
    empty = np.zeros(0, dtype=int)
    with pytest.raises(NoCandidates):
        recommend(m, g, IterationSets(np.array([1]), empty, empty))


def test_best_estimate():
    m = _model([[0.0], [1.0]], [[1.0, 1.0], [2.5, 1.0]], ls=0.01)
    g = Grid(np.array([[0.0], [1.0]]))
    x, v = best_estimate(m, g, np.array([0, 1]))
    assert x[0] == 1.0 and v == pytest.approx(2.5, abs=1e-2)
    m = _model([[0.0], [1.0]], [[1.0, 1.0], [1.0, 1.0]], ls=0.01)
    assert best_estimate(m, g, np.array([0, 1]))[0][0] == 0.0


def test_step_adds_one_datum_and_stays_safe():
    m = _model([[0.5]], [[0.0, 1.0]], ls=0.2, noise=1e-4)
    g = Grid.from_box([0], [1], [21])
    rec, m2 = grid_step(m, g, lambda x: np.array([-(x[0] - 0.7) ** 2, 1.0]))
    assert all(len(b.data) == len(a.data) + 1 for a, b in zip(m.posteriors, m2.posteriors))
    assert rec.lower[1] >= 0.0


def test_run_grid_golden_trace():
    cfg = ModelConfig((GpConfig(KernelSpec([0.2], 1.0), 1e-4),
                       GpConfig(KernelSpec([0.2], 1.0), 1e-4)), 2.0, 0.0)
    oracle = lambda x: np.array([-(x[0] - 0.7) ** 2, 0.9 - x[0]])
    g = Grid.from_box([0], [1], [21])
    res = run_grid(oracle, [[0.3]], cfg, g, 6)
    assert len(res.trace) == 6
    assert all(r.safety_margin >= 0 for r in res.trace.records)
    # recorded from a validated run of this exact configuration
    golden = [0.35, 0.2, 0.1, 0.0, 0.45, 0.55]
    assert np.allclose(res.trace.points[:, 0], golden)


def test_iteration_sets_match_oracles_on_small_instance():
    g = Grid.from_box([0, 0], [1, 1], [6, 6])
    rng = np.random.default_rng(11)
    X = rng.uniform(0.3, 0.7, size=(3, 2))
    m = _model(X, np.column_stack([rng.normal(size=3), np.abs(rng.normal(size=3)) + 0.5,
                                   np.abs(rng.normal(size=3)) + 0.5]), ls=0.3, noise=1e-4)
    sets = iteration_sets(m, g)
    gps = [dense_from_posterior(p) for p in m.posteriors]
    safe = loop_safe_set(gps, 2.0, 0.0, g.points)
    assert sets.safe.tolist() == safe
    assert sets.maximizers.tolist() == loop_maximizers(gps, 2.0, g.points, safe)
    assert sets.expanders.tolist() == loop_expanders(gps, 2.0, 0.0, g.points, safe)
