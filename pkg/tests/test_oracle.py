import numpy as np
import pytest

from minplus_filter import (
    MinPlusValueFunction,
    QuadraticForm,
    ReversedSystem,
    dp_step,
    evaluate_min,
    init_value,
    load_scenario,
    new_filter,
    reverse_dynamics,
    run,
    simulate,
)
from minplus_filter.errors import OracleRangeError
from minplus_filter.oracle import (
    certify,
    grid_value_function,
    numeric_min_over_w,
    rel_error,
    rls_reference,
    zoom_minimize,
)

from builders import config_dict, config_path, random_dict, scalar_dict, scenario

SCALAR_ID = ReversedSystem(np.eye(1), np.zeros((1, 1)), np.eye(1))


def test_rel_error_has_unit_floor():
    assert rel_error(1.5, 1.0) == 0.5
    assert rel_error(1e-3, 0.0) == 1e-3
    assert rel_error(110.0, 100.0) == pytest.approx(0.1)


def test_zoom_minimize_walks_out_of_a_missed_box():
    w, v = zoom_minimize(lambda W: np.sum((W - [40.0, -3.0]) ** 2, axis=1) + 1.0, 2)
    assert w == pytest.approx([40.0, -3.0], abs=1e-6) and v == pytest.approx(1.0)


def test_numeric_min_over_w_examples():
    assert numeric_min_over_w(QuadraticForm(1, 0, 0), SCALAR_ID, None, [2.0]) == pytest.approx(2.0, abs=1e-10)
    assert numeric_min_over_w(QuadraticForm(0, 0, 3.7), SCALAR_ID, None, [-5.0]) == pytest.approx(3.7, abs=1e-10)
    assert numeric_min_over_w(QuadraticForm(1, 0, 0), SCALAR_ID, None, [0.0]) == pytest.approx(0.0, abs=1e-12)


def kalman_filter(A, B, Bw, C, H, L, x0, frames):
    """Textbook covariance recursion; the deterministic costs map to unit disturbance covariance."""
    x, P = np.array(x0, dtype=float), np.linalg.inv(L)
    Q, R = Bw @ Bw.T, np.linalg.inv(H)
    out = []
    for f in frames:
        x = A @ x + B @ f.u
        P = A @ P @ A.T + Q
        K = P @ C.T @ np.linalg.inv(C @ P @ C.T + R)
        x = x + K @ (f.y[0] - C @ x)
        P = (np.eye(len(x)) - K @ C) @ P
        out.append(x)
    return np.array(out)


@pytest.mark.parametrize("n, seed", [(1, 3), (2, 4)])
def test_batch_reference_matches_kalman_recursion(n, seed):
    sc = scenario(random_dict(np.random.default_rng(seed), n, 1, 10))
    tr = simulate(sc)
    s = sc.system
    C, H = sc.sensors[1].C_nominal, sc.sensors.weight(1)
    ref = rls_reference(s, C, H, sc.L, sc.x0_assumed, tr.frames)
    kf = kalman_filter(s.A_f, s.B_f, s.B_wf, C, H, sc.L, sc.x0_assumed, tr.frames)
    assert np.max(np.abs(ref - kf)) <= 1e-9


def test_filter_with_only_the_healthy_sensor_matches_batch_reference():
    d = config_dict("failure")
    d["sensors"] = d["sensors"][4:]
    sc = scenario(d)
    tr = simulate(sc)
    est = np.array([r.x_est for r in run(new_filter(sc.system, sc.sensors, sc.L, sc.x0_assumed), tr)])
    ref = rls_reference(sc.system, 1.0, 3.0, sc.L, sc.x0_assumed, tr.frames)
    assert np.max(np.abs(est - ref)) <= 1e-8


def test_grid_oracle_without_measurements():
    # H = 0 leaves only prior plus disturbance: V_1(x) = L / (1 + L) (A_r x + s - x0)^2
    sc = scenario(scalar_dict(weights={"L": 5.0, "H": 0.0}, u=[[1.0]] * 5))
    table = grid_value_function(sc, (-3, 3), (-3, 3), (1201, 1201), steps=1)
    rs = reverse_dynamics(sc.system)
    X = table.nodes()[:, 0]
    exact = 5.0 / 6.0 * (rs.A_r[0, 0] * X + rs.B_r[0, 0] * 1.0 - 1.0) ** 2
    mask = table.valid[1]
    assert mask.sum() > 100
    assert np.max(rel_error(table.values[1][mask], exact[mask])) <= 1e-3


def test_grid_oracle_matches_single_sensor_expansion():
    sc = scenario(scalar_dict())
    tr = simulate(sc)
    table = grid_value_function(sc, (-3, 3), (-3, 3), (1201, 1201), frames=tr.frames[:2])
    st = new_filter(sc.system, sc.sensors, sc.L, sc.x0_assumed)
    V = st.V
    for k in (1, 2):
        V = dp_step(V, tr.frames[k - 1], st.sys, st.sensors)
        mask = table.valid[k].reshape(-1)
        err = rel_error(table.values[k].reshape(-1)[mask], evaluate_min(V, table.nodes()[mask]))
        assert err.max() <= max(1e-3, 2 * table.error_bound[k])


def test_grid_refinement_reduces_error():
    sc = load_scenario(config_path("failure"))
    rs = reverse_dynamics(sc.system)
    frame = simulate(sc).frames[0]
    V1 = dp_step(init_value(sc.L, sc.x0_assumed), frame, rs, sc.sensors)
    errs = []
    for nodes in (101, 401, 1601):
        t = grid_value_function(sc, (-4, 4), (-4, 4), (nodes, nodes), frames=[frame])
        mask = t.valid[1]
        errs.append(np.max(rel_error(t.values[1][mask], evaluate_min(V1, t.nodes()[mask.reshape(-1)]))))
    assert errs[0] > errs[1] > errs[2]


def test_grid_oracle_rejects_bad_ranges():
    sc = scenario(scalar_dict())
    with pytest.raises(OracleRangeError):
        grid_value_function(sc, (-3, 3), (0.5, 3), (51, 51), steps=1)


def test_certify_passes_on_shipped_scenario():
    certs = certify(load_scenario(config_path("failure")))
    names = {c.name for c in certs}
    assert {"structure_preservation", "numerical_hygiene", "grid_dp_step1"} <= names
    assert all(c.passed for c in certs), [c.to_dict() for c in certs]


def test_certify_single_sensor_includes_batch_check():
    certs = certify(scenario(scalar_dict()))
    batch = [c for c in certs if c.name == "batch_equivalence"]
    assert batch and batch[0].passed


def test_certify_catches_a_corrupted_step():
    def bad_step(V, frame, sys, sensors):
        V1 = dp_step(V, frame, sys, sensors)
        return MinPlusValueFunction(V1.a * 1.01, V1.b, V1.c, V1.tags, V1.k)

    certs = {c.name: c for c in certify(load_scenario(config_path("failure")), step_fn=bad_step)}
    assert not certs["structure_preservation"].passed
    assert not certs["grid_dp_step1"].passed
