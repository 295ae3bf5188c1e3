import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import peak_slope_ls
from safeopt_ps.benchmarks import pid, quadratic
from safeopt_ps.benchmarks.pid import (
    CascadeController,
    PidProblem,
    PlantModel,
    SimResult,
    TuningSpec,
    peak_slope,
    simulate,
    stability_oracle,
    stability_value,
    tuning_objective,
)
from safeopt_ps.benchmarks.quadratic import (
    QuadraticProblem,
    is_feasible,
    quad_constraints,
    quad_objective,
    true_feasibility_audit,
)
from safeopt_ps.errors import UnstableBlowUp
from safeopt_ps.trace import IterationRecord, RunTrace


@pytest.mark.parametrize("x, f", [((-1, -0.5), 0.0), ((0, 0), -1.25), ((-0.51, -0.5), -0.2401)])
def test_quad_objective(x, f):
    assert quad_objective(x) == pytest.approx(f, abs=1e-12)


def test_quad_constraints():
    g1, g2 = quad_constraints((-1, -0.5))
    assert g2 == pytest.approx(-0.2) and not is_feasible((-1, -0.5))
    g1, g2 = quad_constraints((-0.51, -0.5))
    assert g1 == pytest.approx(1.3599) and g2 == pytest.approx(0.0401)
    assert is_feasible((-0.51, -0.5))
    assert not is_feasible((10, 10))


def test_audit():
    assert true_feasibility_audit(np.zeros((0, 2))).violations == 0
    rep = true_feasibility_audit(np.array([[-1, -0.5], [-0.3, 0.2]]))
    assert rep.checked == 2 and rep.violations == 1
    assert rep.worst_margin == pytest.approx(-0.2)
    tr = RunTrace(2, 3)
    tr.append(IterationRecord(1, np.array([-0.3, 0.2]), "Maximizer", 0, 0.1, 0.0, np.zeros(3)))
    assert true_feasibility_audit(tr).violations == 0


def test_initial_safe_sets_are_feasible():
    assert np.all(is_feasible(quadratic.initial_safe_set()))
    for seed in range(5):
        X = quadratic.initial_safe_set(seed)
        assert np.all(np.minimum(*quad_constraints(X)) >= 0.2)


def test_quadratic_noise_is_seeded():
    a = QuadraticProblem(0.1, seed=3)([0, 0])
    b = QuadraticProblem(0.1, seed=3)([0, 0])
    assert np.array_equal(a, b)
    assert np.array_equal(QuadraticProblem()([0, 0]), [-1.25, *quad_constraints((0, 0))])


def test_zero_gains_do_nothing():
    r = simulate(PlantModel(), CascadeController(0, 0, 0), TuningSpec())
    assert np.all(r.speed == 0) and np.all(r.position == 0)


def test_equilibrium_reference():
    r = simulate(PlantModel(), CascadeController(10, 0, 5), TuningSpec(reference="zero"))
    assert np.all(r.position == r.position_setpoint) and np.all(r.speed == 0)
    assert tuning_objective(r, TuningSpec()) == 0.0


def test_time_grid():
    plant = PlantModel(t_f=0.5)
    r = simulate(plant, CascadeController(10, 0, 5), TuningSpec())
    assert len(r) == plant.n_samples
    assert np.allclose(np.diff(r.time), plant.sample_time)


def test_witness_diverges_and_strict_raises():
    r = simulate(PlantModel(), CascadeController.from_array(pid.WITNESS_GAINS), TuningSpec())
    assert peak_slope(r) > 0
    with pytest.raises(UnstableBlowUp) as err:
        simulate(PlantModel(), CascadeController.from_array(pid.WITNESS_GAINS), TuningSpec(),
                 strict=True)
    assert len(err.value.result) > 0


def test_table_safe_and_unsafe_points():
    prob = PidProblem()
    assert len(pid.initial_safe_set("pid")) == 4
    assert np.array_equal(pid.SAFE_GAINS[0], [10, 0, 5])
    for g in pid.SAFE_GAINS:
        assert prob(g)[1] >= 0
    assert prob(pid.UNSAFE_GAINS)[1] < 0


def test_gains_outside_box_rejected():
    with pytest.raises(ValueError):
        CascadeController(200, 0, 0)


def test_peak_slope_trivial_and_synthetic():
    t = np.arange(2001) * 1e-3
    mono = SimResult(t, t.copy(), t, t, t)
    assert peak_slope(mono) == 0.0
    decay = np.exp(-0.5 * t) * np.sin(10 * t)
    p = peak_slope(SimResult(t, decay, t, t, t))
    assert p < 0 and p == pytest.approx(peak_slope_ls(t, decay), abs=1e-9)
    grow = np.exp(0.5 * t) * np.sin(10 * t)
    p = peak_slope(SimResult(t, grow, t, t, t))
    assert p > 0 and p == pytest.approx(peak_slope_ls(t, grow), abs=1e-9)


def test_tuning_objective_closed_form():
    t = np.linspace(0, 1, 1001)
    r = SimResult(t, np.zeros_like(t), t + 0.001, np.zeros_like(t), t)
    assert tuning_objective(r, TuningSpec(gamma=1000)) == pytest.approx(1.0, rel=1e-12)
    r2 = SimResult(t, np.full_like(t, 0.3), t + 0.001, t, t)
    assert tuning_objective(r2, TuningSpec(gamma=2000)) == pytest.approx(2.0 + 0.3, rel=1e-12)


@pytest.mark.parametrize("p1, v", [(0.0, 0.005), (0.05, -0.045), (-0.04, 0.045)])
def test_stability_value(p1, v):
    assert stability_value(p1, TuningSpec()) == pytest.approx(v, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_stability_is_antitone(a, b):
    spec = TuningSpec()
    lo, hi = min(a, b), max(a, b)
    assert stability_value(lo, spec) >= stability_value(hi, spec)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=0, max_size=40))
def test_few_peaks_give_zero_slope(vals):
    s = np.array(vals, dtype=float)
    t = np.arange(len(s), dtype=float)
    mid = s[1:-1] if len(s) > 2 else np.zeros(0)
    peaks = np.sum((mid > s[:-2]) & (mid >= s[2:])) if len(s) > 2 else 0
    if peaks < 2:
        assert peak_slope(SimResult(t, s, t, t, t)) == 0.0


def test_stability_oracle_on_result():
    r = simulate(PlantModel(), CascadeController(10, 0, 5), TuningSpec())
    assert stability_oracle(r, TuningSpec()) == pytest.approx(0.005 - peak_slope(r))


def test_spec_validation():
    with pytest.raises(ValueError):
        TuningSpec(gamma=0)
    with pytest.raises(ValueError):
        TuningSpec(stability_margin=0)
    with pytest.raises(ValueError):
        TuningSpec(reference="square")
    with pytest.raises(ValueError):
        PlantModel(zeta=-0.1)
    with pytest.raises(KeyError):
        pid.initial_safe_set("nope")
