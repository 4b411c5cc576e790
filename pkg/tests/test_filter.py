import numpy as np
import pytest

from minplus_filter import (
    MeasurementFrame,
    PruneConfig,
    SensorModel,
    SensorSuite,
    ForwardSystem,
    global_argmin,
    load_scenario,
    new_filter,
    open_loop_prior,
    run,
    run_with_state,
    simulate,
    step,
)
from minplus_filter.errors import SequencingError
from minplus_filter.oracle import rls_reference

from builders import config_path, random_dict, scalar_dict, scenario


def filter_for(sc, prune=None):
    return new_filter(sc.system, sc.sensors, sc.L, sc.x0_assumed, prune or sc.prune)


def test_out_of_order_frame_rejected():
    sc = scenario(scalar_dict())
    trace = simulate(sc)
    state = filter_for(sc)
    with pytest.raises(SequencingError):
        step(state, trace.frames[1])
    state, _ = step(state, trace.frames[0])
    with pytest.raises(SequencingError):
        step(state, trace.frames[0])


def test_empty_trace_gives_no_reports():
    sc = scenario(scalar_dict())
    assert run(filter_for(sc), []) == []


def test_initial_estimate_is_assumed_state():
    sc = scenario(scalar_dict(x0_true=[0.0], x0_assumed=[0.5]))
    x, v, tag = global_argmin(filter_for(sc).V)
    assert x == pytest.approx([0.5]) and v == 0.0 and tag == ()
    assert abs(x[0] - sc.x0_true[0]) == pytest.approx(0.5)


def test_report_fields():
    sc = load_scenario(config_path("failure"))
    reports = run(filter_for(sc), simulate(sc))
    assert [r.k for r in reports] == [1, 2, 3, 4, 5]
    assert [r.term_count_pre_prune for r in reports[:2]] == [5, 25]
    for r in reports:
        assert r.active_sensor == r.tag[-1] and len(r.tag) == r.k
        assert r.term_count_post_prune <= r.term_count_pre_prune
    d = reports[0].to_dict()
    assert set(d) == {"k", "x_est", "v_min", "active_sensor", "terms_pre", "terms_post", "lineage"}


@pytest.mark.parametrize("n, seed", [(1, 0), (2, 1), (3, 2)])
def test_single_sensor_matches_batch_least_squares(n, seed):
    sc = scenario(random_dict(np.random.default_rng(seed), n, 1, 10))
    trace = simulate(sc)
    state, reports = run_with_state(filter_for(sc), trace)
    assert len(state.V) == 1
    ref = rls_reference(sc.system, sc.sensors[1].C_nominal, sc.sensors.weight(1), sc.L, sc.x0_assumed, trace.frames)
    est = np.array([r.x_est for r in reports])
    assert np.max(np.abs(est - ref)) <= 1e-7


def test_vanishing_measurement_weight_follows_open_loop_prior():
    for H in (0.0, 1e-10):
        sc = scenario(scalar_dict(weights={"L": 5.0, "H": H}, x0_assumed=[0.5], u=[[1.0], [-1.0], [0.5], [0.0], [2.0]]))
        est = np.array([r.x_est for r in run(filter_for(sc), simulate(sc))])
        assert np.max(np.abs(est - open_loop_prior(sc)[1:])) <= 1e-8


@pytest.mark.parametrize("name", ["failure", "failure_init_error", "failure_spike", "failure_init_error_spike"])
def test_exact_pruning_is_transparent(name):
    sc = load_scenario(config_path(name))
    trace = simulate(sc)
    exact = run(filter_for(sc, PruneConfig("exact")), trace)
    off = run(filter_for(sc, PruneConfig("off")), trace)
    for a, b in zip(exact, off):
        assert np.max(np.abs(a.x_est - b.x_est)) <= 1e-9
        assert a.active_sensor == b.active_sensor
        assert a.v_min == pytest.approx(b.v_min, abs=1e-9)


def test_runs_are_deterministic():
    sc = load_scenario(config_path("failure_init_error_spike"))
    r1 = run(filter_for(sc), simulate(sc))
    r2 = run(filter_for(sc), simulate(sc))
    for a, b in zip(r1, r2):
        assert np.array_equal(a.x_est, b.x_est) and a.v_min == b.v_min and a.tag == b.tag


@pytest.mark.parametrize("seed", range(5))
def test_minimum_cost_is_nonnegative_and_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    sc = scenario(random_dict(rng, 2, 3, 5))
    v = [r.v_min for r in run(filter_for(sc), simulate(sc))]
    assert min(v) >= -1e-9
    assert np.all(np.diff(v) >= -1e-9)


def test_unobservable_sensor_warns():
    # with a shear, x_2 alone cannot recover x_1 but x_1 sees both
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    suite = SensorSuite((SensorModel([[1.0, 0.0]]), SensorModel([[0.0, 1.0]])), 1.0)
    with pytest.warns(UserWarning, match=r"sensors \[2\]"):
        new_filter(ForwardSystem(A, np.zeros((2, 1)), -np.eye(2)), suite, np.eye(2), [0.0, 0.0])


def test_hand_built_frames():
    sc = scenario(scalar_dict(x0_assumed=[0.0]))
    state = filter_for(sc)
    frames = [MeasurementFrame(k, [[0.0]], [0.0]) for k in (1, 2, 3)]
    reports = run(state, frames)
    # zero data with a zero prior keeps the estimate at the origin
    assert all(abs(r.x_est[0]) <= 1e-12 and abs(r.v_min) <= 1e-12 for r in reports)
