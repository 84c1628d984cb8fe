"""Set-valued filter: worst-case value oracle checks, cone classification,
switch semantics, the monotone-improvement property, and exact reduction to
the point-state filter."""

import numpy as np
import pytest

from reachsafe.bounds import Box
from reachsafe.hjgrid import (
    GridSpec,
    control_samples,
    interp_value,
    nominal_filter,
    value_iteration,
)
from reachsafe.robust import (
    CONE_ALL,
    CONE_EMPTY,
    CONE_NA,
    CONE_NONNEG,
    CONE_NONPOS,
    NeighborhoodSpec,
    box_lattice,
    check_safe_cone,
    check_uncertainty_bound,
    delta_band_from_cells,
    phi,
    robust_control,
    robust_filter,
)
from reachsafe.systems import ScalarParams, scalar_system

from test_hjgrid import static_system


@pytest.fixture(scope="module")
def scalar_grid():
    spec = GridSpec(np.array([-1.5]), np.array([1.5]), (301,), n_u=41)
    return value_iteration(scalar_system(), spec, tol=1e-4, max_iters=500)


WIDE_BAND = NeighborhoodSpec(delta_band=1.0)


def test_box_lattice_degenerate_is_single_point():
    box = Box(np.array([0.3, -0.2]), np.array([0.3, -0.2]))
    pts = box_lattice(box, 5)
    np.testing.assert_array_equal(pts, [[0.3, -0.2]])


def test_box_lattice_includes_vertices():
    box = Box(np.array([0.0, 1.0]), np.array([1.0, 2.0]))
    pts = box_lattice(box, 3)
    assert pts.shape == (9, 2)
    for vx in (0.0, 1.0):
        for vy in (1.0, 2.0):
            assert any(np.all(p == [vx, vy]) for p in pts)


def test_phi_degenerate_point_no_disturbance(scalar_grid):
    # reduces to the interpolated value of the single next state
    sys = scalar_system(ScalarParams(d_max=0.0))
    x = np.array([0.4])
    u = 1.0
    val = phi(scalar_grid, sys, Box(x, x.copy()), u)
    nxt = sys.step(x, u, np.zeros(1))
    assert val == interp_value(scalar_grid, nxt)


def test_phi_nested_boxes_monotone_scalar(scalar_grid):
    # the scalar value surface is concave, so lattice minima are exact and
    # subset boxes can only raise the worst case
    sys = scalar_system()
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = rng.uniform(-1.2, 1.2)
        r2 = rng.uniform(0.05, 0.3)
        r1 = r2 * rng.uniform(0.1, 0.9)
        off = rng.uniform(-1, 1) * (r2 - r1)
        u = float(rng.uniform(-2, 2))
        inner = Box(np.array([c + off - r1]), np.array([c + off + r1]))
        outer = Box(np.array([c - r2]), np.array([c + r2]))
        assert phi(scalar_grid, sys, inner, u) >= phi(scalar_grid, sys, outer, u) - 1e-12


def test_phi_matches_dense_sampling_oracle(scalar_grid):
    sys = scalar_system()
    xbar = Box(np.array([0.8]), np.array([0.95]))
    u = 2.0
    val = phi(scalar_grid, sys, xbar, u)
    assert val < 0.0
    rng = np.random.default_rng(1)
    ss = rng.uniform(0.8, 0.95, size=10_000)
    dd = rng.uniform(-0.02, 0.02, size=10_000)
    nxt = (ss + 0.1 * (u + dd))[:, None]
    brute = float(np.min(interp_value(scalar_grid, nxt)))
    # lattice includes the decisive vertex, so phi lower-bounds the sampled
    # minimum and sits within one lattice gap of it
    gap = 0.15 / 4
    assert val <= brute + 1e-9
    assert val >= brute - gap


def test_robust_control_pushes_inward_at_boundary(scalar_grid):
    sys = scalar_system()
    xbar = Box(np.array([0.7]), np.array([1.02]))
    u = robust_control(scalar_grid, sys, xbar)
    assert u == -2.0
    # exhaustive-scan oracle
    us = control_samples(sys, scalar_grid.spec.n_u)
    scores = [phi(scalar_grid, sys, xbar, uu) for uu in us]
    assert us[int(np.argmax(scores))] == -2.0


def test_robust_control_tie_break_interior_flat():
    sys = static_system(lambda x: np.minimum(1.0, 2.0 - np.abs(x[..., 0])))
    spec = GridSpec(np.array([-3.0]), np.array([3.0]), (121,))
    grid = value_iteration(sys, spec)
    xbar = Box(np.array([-0.4]), np.array([0.4]))
    assert robust_control(grid, sys, xbar) == 0.0


def test_filter_passthrough_inclusive_at_zero():
    # static system at the boundary node: phi is exactly zero
    sys = static_system(lambda x: 1.0 - np.abs(x[..., 0]))
    spec = GridSpec(np.array([-2.0]), np.array([2.0]), (81,))
    grid = value_iteration(sys, spec)
    xbar = Box(np.array([1.0]), np.array([1.0]))
    dec = robust_filter(grid, sys, xbar, 0.3)
    assert dec.phi_nominal == 0.0
    assert not dec.active
    assert dec.u_applied == 0.3
    assert dec.cone == CONE_NA


def test_filter_switch_consistency(scalar_grid):
    sys = scalar_system()
    rng = np.random.default_rng(2)
    for _ in range(100):
        c = rng.uniform(-1.1, 1.1)
        r = rng.uniform(0.0, 0.25)
        u_nom = float(rng.uniform(-2, 2))
        xbar = Box(np.array([c - r]), np.array([c + r]))
        dec = robust_filter(scalar_grid, sys, xbar, u_nom)
        assert dec.active == (dec.phi_nominal < 0.0)
        assert dec.phi_applied >= dec.phi_nominal
        if dec.active:
            # applied beats every sampled candidate
            for uu in control_samples(sys, scalar_grid.spec.n_u):
                assert dec.phi_applied >= phi(scalar_grid, sys, xbar, uu) - 1e-12
        else:
            assert dec.u_applied == u_nom


def test_degenerate_reduction_matches_nominal_filter(scalar_grid):
    # eps = 0 and zero estimator error: decisions equal the point-state
    # filter's, bit for bit
    sys = scalar_system()
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = rng.uniform(-1.2, 1.2, size=1)
        u_nom = float(rng.uniform(-2, 2))
        dec = robust_filter(scalar_grid, sys, Box(x, x.copy()), u_nom)
        u_ref, active_ref = nominal_filter(scalar_grid, sys, x, u_nom)
        assert dec.active == active_ref
        assert dec.u_applied == u_ref


def test_cone_classification_scalar(scalar_grid):
    sys = scalar_system()
    band = NeighborhoodSpec(delta_band=1.0)
    # near the upper boundary V falls with x and g = dt > 0: nonpos
    assert (
        check_safe_cone(scalar_grid, sys, Box(np.array([0.8]), np.array([0.95])), band)
        == CONE_NONPOS
    )
    # mirror case
    assert (
        check_safe_cone(
            scalar_grid, sys, Box(np.array([-0.95]), np.array([-0.8])), band
        )
        == CONE_NONNEG
    )
    # spanning both boundaries the sign flips
    assert (
        check_safe_cone(
            scalar_grid, sys, Box(np.array([-0.95]), np.array([0.95])), band
        )
        == CONE_EMPTY
    )


def test_cone_oracle_finite_difference_sign(scalar_grid):
    # oracle: sign of dV/dx times dt over dense samples
    xs = np.linspace(0.8, 0.95, 200)[:, None]
    h = 0.01
    dv = (interp_value(scalar_grid, xs + h) - interp_value(scalar_grid, xs - h)) / (
        2 * h
    )
    assert np.all(dv * 0.1 <= 1e-9)


def test_cone_not_applicable_outside_band(scalar_grid):
    sys = scalar_system()
    tight = NeighborhoodSpec(delta_band=delta_band_from_cells(scalar_grid, 3.0))
    # deep interior values exceed a 3-cell band
    assert (
        check_safe_cone(scalar_grid, sys, Box(np.array([0.0]), np.array([0.1])), tight)
        == CONE_NA
    )


def test_cone_all_on_flat_region():
    sys = static_system(lambda x: np.minimum(1.0, 2.0 - np.abs(x[..., 0])))
    spec = GridSpec(np.array([-3.0]), np.array([3.0]), (121,))
    grid = value_iteration(sys, spec)
    band = NeighborhoodSpec(delta_band=2.0)
    assert (
        check_safe_cone(grid, sys, Box(np.array([-0.3]), np.array([0.3])), band)
        == CONE_ALL
    )


def test_uncertainty_bound_small_box_true(scalar_grid):
    sys = scalar_system()
    nbhd = NeighborhoodSpec(delta_band=delta_band_from_cells(scalar_grid, 4.0))
    xbar = Box(np.array([0.99]), np.array([1.01]))
    ok = check_uncertainty_bound(
        scalar_grid, sys, xbar, nbhd, u_range=np.array([-0.1, 0.0, 0.1])
    )
    assert ok


def test_uncertainty_bound_huge_box_false(scalar_grid):
    sys = scalar_system()
    nbhd = NeighborhoodSpec(delta_band=delta_band_from_cells(scalar_grid, 4.0))
    xbar = Box(np.array([-1.5]), np.array([1.5]))
    assert not check_uncertainty_bound(scalar_grid, sys, xbar, nbhd)


def _band_boxes(grid, rng, lo, hi, n):
    boxes = []
    while len(boxes) < n:
        c = rng.uniform(lo, hi)
        r = rng.uniform(0.01, 0.08)
        boxes.append(Box(np.array([c - r]), np.array([c + r])))
    return boxes


def test_monotone_improvement_and_extreme_control(scalar_grid):
    # cone-uniform boxes: phi is monotone along the cone direction across the
    # control grid, and when even the best phi is negative the maximizer sits
    # at the corresponding control extreme
    sys = scalar_system()
    rng = np.random.default_rng(4)
    band = NeighborhoodSpec(delta_band=1.0)
    us = control_samples(sys, scalar_grid.spec.n_u)
    checked = 0
    for side in (+1, -1):
        for box in _band_boxes(scalar_grid, rng, 0.85, 1.1, 100):
            if side < 0:
                box = Box(-box.upper, -box.lower)
            cone = check_safe_cone(scalar_grid, sys, box, band)
            if cone not in (CONE_NONNEG, CONE_NONPOS):
                continue
            vals = np.array([phi(scalar_grid, sys, box, u) for u in us])
            diffs = np.diff(vals)
            tol = 1e-9
            if cone == CONE_NONNEG:
                assert np.all(diffs >= -tol)
            else:
                assert np.all(diffs <= tol)
            u_star = robust_control(scalar_grid, sys, box)
            if phi(scalar_grid, sys, box, u_star) < 0.0:
                expect = sys.control_bounds[1] if cone == CONE_NONNEG else sys.control_bounds[0]
                assert u_star == expect
            checked += 1
    assert checked >= 100
