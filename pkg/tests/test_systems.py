"""Plant dynamics against hand oracles, control-affinity, observation
round-trips, and controller schedules."""

import numpy as np
import pytest

from reachsafe.nets import forward
from reachsafe.systems import (
    ControlBoundsError,
    DoubleIntParams,
    ObservationDomainError,
    ScalarParams,
    SQUARE_LANDMARKS,
    TRIANGULAR_LANDMARKS,
    TaxiParams,
    circle_reference,
    double_integrator_axis,
    double_integrator_system,
    landmark_history,
    landmark_ranges,
    scalar_estimator,
    scalar_system,
    taxi_rudder_to_turn_rate,
    taxi_safety_system,
    taxi_system,
    taxi_turn_rate_limit,
    taxi_turn_rate_to_rudder,
)

ALL_SCALAR_CONTROL = [
    scalar_system(),
    taxi_system(),
    taxi_safety_system(),
    double_integrator_axis(),
]


def test_scalar_step_oracle():
    sys = scalar_system()
    x1 = sys.step(np.array([0.0]), 1.0, np.array([0.0]))
    np.testing.assert_allclose(x1, [0.1])


def test_double_integrator_axis_step_oracle():
    # hand evaluation with the half-step acceleration term
    sys = double_integrator_axis()
    x1 = sys.step(np.array([0.0, 1.0]), 5.0, np.zeros(2))
    np.testing.assert_allclose(x1, [0.125, 1.5])


def test_full_double_integrator_matches_axes():
    p = DoubleIntParams()
    full = double_integrator_system(p)
    axis = double_integrator_axis(p)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=4)
        u = rng.uniform(-5, 5, size=2)
        d = rng.uniform(-1e-5, 1e-5, size=4)
        nxt = full.step(x, u, d)
        nx = axis.step(x[[0, 2]], u[0], d[[0, 2]])
        ny = axis.step(x[[1, 3]], u[1], d[[1, 3]])
        np.testing.assert_allclose(nxt[[0, 2]], nx)
        np.testing.assert_allclose(nxt[[1, 3]], ny)


def test_taxi_straight_roll():
    sys = taxi_system()
    x1 = sys.step(np.array([0.0, 2.0, 0.0]), 0.0, np.zeros(3))
    np.testing.assert_allclose(x1, [0.5, 2.0, 0.0])


def test_taxi_rudder_map_round_trip():
    p = TaxiParams()
    for phi in [-12.0, -5.0, 0.0, 3.3, 12.0]:
        u = taxi_rudder_to_turn_rate(phi, p)
        np.testing.assert_allclose(taxi_turn_rate_to_rudder(u, p), phi, atol=1e-12)
    assert taxi_turn_rate_limit(p) == taxi_rudder_to_turn_rate(12.0, p)


def test_control_bounds_rejected_not_clamped():
    sys = scalar_system()
    with pytest.raises(ControlBoundsError):
        sys.step(np.array([0.0]), 5.0, np.array([0.0]))


def test_control_affinity_three_point_collinearity():
    rng = np.random.default_rng(1)
    for sys in ALL_SCALAR_CONTROL:
        lo, hi = sys.control_bounds
        mid = 0.5 * (lo + hi)
        for _ in range(100):
            x = rng.normal(size=sys.state_dim)
            d = sys.disturbance_box.sample(rng, 1)[0]
            f_lo = sys.step(x, lo, d)
            f_hi = sys.step(x, hi, d)
            f_mid = sys.step(x, mid, d)
            residual = np.max(np.abs(f_mid - 0.5 * (f_lo + f_hi)))
            assert residual <= 1e-10


def test_control_column_is_exact():
    rng = np.random.default_rng(2)
    for sys in ALL_SCALAR_CONTROL:
        lo, hi = sys.control_bounds
        for _ in range(10):
            x = rng.normal(size=sys.state_dim)
            u = rng.uniform(lo, hi)
            d = sys.disturbance_box.sample(rng, 1)[0]
            g = sys.control_column(x)
            np.testing.assert_allclose(
                sys.step(x, u, d), sys.step(x, 0.0, d) + g * u, atol=1e-12
            )


def test_disturbance_monotone_containment():
    # the zero-disturbance step lies inside the box hull of vertex steps
    rng = np.random.default_rng(3)
    for sys in ALL_SCALAR_CONTROL:
        lo, hi = sys.control_bounds
        verts = sys.disturbance_vertices(include_center=False)
        for _ in range(30):
            x = rng.normal(size=sys.state_dim)
            u = rng.uniform(lo, hi)
            stepped = np.array([sys.step(x, u, d) for d in verts])
            center = sys.step(x, u, np.zeros(sys.disturbance_box.dim))
            assert np.all(center >= stepped.min(axis=0) - 1e-12)
            assert np.all(center <= stepped.max(axis=0) + 1e-12)


def test_landmark_ranges_square_centroid_symmetry():
    r = landmark_ranges(np.zeros(2), SQUARE_LANDMARKS)
    assert np.all(np.abs(r - r[0]) < 1e-12)


def test_scalar_observe_closed_form():
    sys = scalar_system()
    y = sys.observe(np.array([-1.0]), np.zeros(1))
    np.testing.assert_allclose(y, [0.0], atol=1e-15)


def test_scalar_estimator_round_trip():
    sys = scalar_system()
    est = scalar_estimator()
    xs = np.linspace(-2.9, 0.9, 100)
    for x in xs:
        y = sys.observe(np.array([x]), np.zeros(1))
        np.testing.assert_allclose(forward(est, y), [x], atol=1e-9)


def test_scalar_observe_domain_error():
    sys = scalar_system()
    with pytest.raises(ObservationDomainError):
        sys.observe(np.array([1.0]), np.zeros(1))
    with pytest.raises(ObservationDomainError):
        sys.observe(np.array([-3.0]), np.zeros(1))


def test_constraint_margins():
    s = scalar_system()
    assert s.constraint(np.array([0.0])) == 1.0
    assert s.constraint(np.array([1.0])) == 0.0
    assert s.constraint(np.array([-1.0])) == 0.0
    t = taxi_system()
    np.testing.assert_allclose(t.constraint(np.array([123.0, 9.5, 0.2])), 0.5)
    d = double_integrator_system()
    np.testing.assert_allclose(d.constraint(np.array([4.0, -4.5, 0, 0])), 0.5)


def test_taxi_controller_centerline_zero():
    sys = taxi_system()
    u = sys.nominal_control(np.array([0.0, 0.0]), 0.0)
    np.testing.assert_allclose(u, [0.0])


def test_taxi_controller_clamps_to_rudder_limit():
    sys = taxi_system()
    u = sys.nominal_control(np.array([50.0, 0.0]), 0.0)
    np.testing.assert_allclose(u, [taxi_rudder_to_turn_rate(-12.0)])


def test_scalar_reference_schedule():
    sys = scalar_system()
    np.testing.assert_allclose(sys.nominal_control(np.array([0.0]), 0.0), [-0.95])
    np.testing.assert_allclose(sys.nominal_control(np.array([0.0]), 10.0), [0.95])


def test_circle_reference_consistency():
    p = DoubleIntParams()
    ts = np.linspace(0, 10, 200)
    pos, vel, acc = circle_reference(ts, p)
    # numerical derivative check
    dt = ts[1] - ts[0]
    v_num = np.gradient(pos, dt, axis=0)
    np.testing.assert_allclose(v_num[2:-2], vel[2:-2], atol=2e-2)
    # the reference stays strictly inside the workspace with headroom
    assert np.max(np.abs(pos)) <= p.ref_radius + 1e-12
    # and tracking accelerations are feasible
    assert np.max(np.abs(acc)) < p.u_max


def test_landmark_history_stacking_order():
    p = DoubleIntParams(landmarks=TRIANGULAR_LANDMARKS.copy())
    state = np.array([1.0, -2.0, 0.5, 0.25])
    h = landmark_history(p, state)
    assert h.shape == (12,)
    pos, vel = state[0:2], state[2:4]
    np.testing.assert_allclose(h[0:4], landmark_ranges(pos, p.landmarks))
    np.testing.assert_allclose(
        h[4:8], landmark_ranges(pos - p.dt * vel, p.landmarks)
    )
    np.testing.assert_allclose(
        h[8:12], landmark_ranges(pos - 2 * p.dt * vel, p.landmarks)
    )


def test_taxi_observation_dim_and_noise_box():
    sys = taxi_system()
    y = sys.observe(np.array([0.0, 1.0, 0.1]), np.zeros(16))
    assert y.shape == (16,)
    assert sys.obs_noise_box.dim == 16
