import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axiflow.errors import ZeroLengthElement
from axiflow.harness.geometries import circle, semicircle_nonuniform
from axiflow.mesh import (
    BoundaryKind,
    DiscreteCurve,
    ElementField,
    EndpointField,
    check_assumptions,
    curve_from_text,
    curve_to_text,
    element_lengths,
    element_ratio,
    element_tangents_normals,
    free_translations,
    ip_exact,
    ip_lumped,
    lumped_mass,
    span_ratio,
    vertex_normals,
)

AXIS, FIXED = BoundaryKind.axis(), BoundaryKind.fixed()


def polyline(points, start=FIXED, end=FIXED):
    return DiscreteCurve(np.array(points, dtype=float), False, start, end)


def regular_polygon(J, radius=1.0, center=(2.0, 0.0), phase=0.0):
    t = 2 * np.pi * np.arange(J) / J + phase
    return DiscreteCurve(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]), True)


# -- construction -------------------------------------------------------------

def test_open_curve_needs_boundary_kinds():
    with pytest.raises(ValueError):
        DiscreteCurve(np.zeros((5, 2)) + 1, False)


def test_closed_curve_rejects_endpoint_kinds():
    with pytest.raises(ValueError):
        DiscreteCurve(np.ones((4, 2)), True, AXIS, AXIS)


def test_minimum_three_elements():
    with pytest.raises(ValueError):
        polyline([[1, 0], [1, 1], [1, 2]])


def test_axis_endpoint_must_sit_on_axis():
    with pytest.raises(ValueError):
        polyline([[0.1, 0], [1, 1], [1, 2], [0, 3]], AXIS, AXIS)


def test_contact_density_bounded():
    with pytest.raises(ValueError):
        BoundaryKind.plane(1.5)
    with pytest.raises(ValueError):
        BoundaryKind("axis", 0.2)


def test_nodes_are_read_only():
    c = regular_polygon(6)
    with pytest.raises(ValueError):
        c.nodes[0, 0] = 5.0


def test_constrained_components():
    assert AXIS.constrained() == (True, False)
    assert FIXED.constrained() == (True, True)
    assert BoundaryKind.cylinder(0.2).constrained() == (True, False)
    assert BoundaryKind.plane(0.2).constrained() == (False, True)


# -- tangents, normals --------------------------------------------------------

def test_vertical_segment_tangent_and_normal():
    c = polyline([[1, 0], [1, 1], [1, 2], [1, 3]])
    tau, nu = element_tangents_normals(c)
    np.testing.assert_allclose(tau[0], [0, 1])
    np.testing.assert_allclose(nu[0], [1, 0])


def test_horizontal_segment_normal_points_down():
    c = polyline([[0, 0], [1, 0], [2, 0], [3, 0]], AXIS)
    _, nu = element_tangents_normals(c)
    np.testing.assert_allclose(nu[0], [0, -1])


def test_square_normals_point_outward():
    c = DiscreteCurve(np.array([[2, 0], [3, 1], [2, 2], [1, 1]], float), True)
    _, nu = element_tangents_normals(c)
    np.testing.assert_allclose(nu[0], np.array([1, -1]) / math.sqrt(2))
    mids = 0.5 * (c.nodes + np.roll(c.nodes, -1, axis=0))
    assert np.all(np.einsum("ij,ij->i", nu, mids - [2, 1]) > 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 5), st.floats(-5, 5)), min_size=4, max_size=12, unique=True))
def test_tangent_normal_orthonormal(points):
    c = polyline(points)
    try:
        tau, nu = element_tangents_normals(c)
    except ZeroLengthElement:
        return
    np.testing.assert_allclose(np.hypot(*tau.T), 1, atol=1e-14)
    np.testing.assert_allclose(np.hypot(*nu.T), 1, atol=1e-14)
    np.testing.assert_allclose(np.einsum("ij,ij->i", tau, nu), 0, atol=1e-14)


def test_parallel_elements_vertex_normal_is_unit():
    c = polyline([[1, 0], [1, 0.5], [1, 2], [1, 3]])
    omega = vertex_normals(c)
    np.testing.assert_allclose(omega, np.tile([1.0, 0.0], (4, 1)))


@pytest.mark.parametrize("J", [5, 8, 33])
def test_regular_polygon_vertex_normal_length(J):
    omega = vertex_normals(regular_polygon(J))
    np.testing.assert_allclose(np.hypot(*omega.T), math.cos(math.pi / J), rtol=1e-13)


def test_open_endpoint_normal_equals_first_element_normal():
    c = semicircle_nonuniform(10)
    _, nu = element_tangents_normals(c)
    omega = vertex_normals(c)
    np.testing.assert_allclose(omega[0], nu[0])
    np.testing.assert_allclose(omega[-1], nu[-1])


def test_vertex_normals_satisfy_lumped_projection_identity():
    # (omega, phi |X_rho|)^h = (nu, phi |X_rho|) for every basis field phi
    c = semicircle_nonuniform(12)
    omega = vertex_normals(c)
    _, nu = element_tangents_normals(c)
    L = c.raw_lengths()
    J = c.n_elements
    for k in range(c.n_nodes):
        for comp in range(2):
            phi = np.zeros((c.n_nodes, 2))
            phi[k, comp] = 1.0
            lhs = ip_lumped(omega, phi, weight=L * J)
            rhs = ip_exact(ElementField(nu), phi, weight=L * J)
            assert abs(lhs - rhs) < 1e-12


# -- inner products -----------------------------------------------------------

@pytest.mark.parametrize("J", [1, 3, 10])
def test_ip_lumped_of_ones_is_one(J):
    assert ip_lumped(np.ones(J + 1), np.ones(J + 1)) == pytest.approx(1.0)


def test_ip_lumped_hat_function():
    J = 6
    hat = np.zeros(J + 1)
    hat[3] = 1.0
    assert ip_lumped(hat, hat) == pytest.approx(1 / J)


def test_ip_lumped_identity_on_two_elements():
    rho = np.array([0.0, 0.5, 1.0])
    assert ip_lumped(rho, rho) == pytest.approx(0.375)


def test_ip_exact_examples():
    rho = np.array([0.0, 1.0])
    assert ip_exact(np.ones(2), np.ones(2)) == pytest.approx(1.0)
    assert ip_exact(rho, rho) == pytest.approx(1 / 3)
    assert ip_exact(rho, 1 - rho) == pytest.approx(1 / 6)


def test_ip_agree_for_piecewise_constant_products():
    rng = np.random.default_rng(3)
    f = ElementField(rng.normal(size=7))
    g = ElementField(rng.normal(size=7))
    w = rng.uniform(0.5, 2, size=7)
    assert ip_lumped(f, g, w) == pytest.approx(ip_exact(f, g, w), rel=1e-14)


def test_endpoint_field_jumps_are_respected():
    # a field that is 1 at the left end of each element and 0 at the right end
    f = EndpointField(np.tile([1.0, 0.0], (4, 1)))
    assert ip_lumped(f, np.ones(5)) == pytest.approx(0.5)
    assert ip_exact(f, np.ones(5)) == pytest.approx(0.5)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 20).flatmap(lambda J: st.lists(st.floats(-10, 10), min_size=J, max_size=J)))
def test_norm_equivalence_for_closed_curves(values):
    eta = np.array(values)
    J = len(eta)
    exact = ip_exact(eta, eta, closed=True)
    lumped = ip_lumped(eta, eta, closed=True)
    assert exact <= lumped * (1 + 1e-12) + 1e-300
    assert lumped <= 3 * exact * (1 + 1e-12) + 1e-12 * J


def test_nodal_field_length_checked():
    with pytest.raises(ValueError):
        ip_lumped(np.ones(4), np.ones(5))


def test_lumped_mass_is_half_adjacent_lengths():
    c = polyline([[1, 0], [1, 1], [1, 3], [1, 7]])
    np.testing.assert_allclose(lumped_mass(c), [0.5, 1.5, 3.0, 2.0])


# -- lengths, ratio -----------------------------------------------------------

def test_element_ratio_examples():
    assert element_ratio(regular_polygon(9)) == pytest.approx(1.0)
    assert element_ratio(polyline([[1, 0], [1, 1], [1, 3], [1, 7]])) == pytest.approx(4.0)


def test_semicircle_initial_ratio():
    assert element_ratio(semicircle_nonuniform(64)) == pytest.approx(1.22, abs=0.005)


def test_zero_length_element_raises():
    c = polyline([[1, 0], [1, 1], [1, 1], [1, 2]])
    with pytest.raises(ZeroLengthElement) as info:
        element_lengths(c)
    assert info.value.index == 1


def test_tiny_curve_is_not_degenerate():
    # a scaled-down circle far from the origin stays resolvable
    c = regular_polygon(16, radius=1e-6, center=(1e-3, 0.0))
    assert np.all(element_lengths(c) > 0)


# -- assumptions --------------------------------------------------------------

def test_circle_off_axis_passes():
    rep = check_assumptions(circle(16, 1.0, 0.5))
    assert rep.ok and rep.weighted_span_ok


def test_straight_segment_fails_span_when_both_directions_free():
    c = DiscreteCurve(np.array([[1.0, 0], [1, 1], [1, 2], [1, 3]]), False,
                      BoundaryKind.cylinder(), BoundaryKind.cylinder())
    rep = check_assumptions(c)
    assert not rep.normals_span_ok
    assert rep.normals_sv_ratio == 0.0


def test_semicircle_attached_to_axis_passes():
    rep = check_assumptions(semicircle_nonuniform(16))
    assert rep.ok


def test_negative_radius_reported():
    c = polyline([[1, 0], [-0.5, 1], [1, 2], [1, 3]])
    rep = check_assumptions(c)
    assert not rep.radius_ok and rep.bad_node == 1


def test_free_translations():
    assert free_translations(circle(8)) == (True, True)
    assert free_translations(semicircle_nonuniform(8)) == (False, True)
    c = DiscreteCurve(np.array([[0.0, 0], [1, 0], [2, 0], [3, 0]]), False, AXIS, BoundaryKind.plane())
    assert free_translations(c) == (False, False)


def test_span_ratio_cases():
    assert span_ratio([[1, 0], [0, 1]]) == pytest.approx(1.0)
    assert span_ratio([[1, 0], [2, 0]]) == 0.0
    assert span_ratio([[1, 0], [2, 0]], (False, True)) == 0.0
    assert span_ratio([[0, 1], [0, 2]], (False, True)) == pytest.approx(1.0)
    assert span_ratio([[1, 0]], (False, False)) == 1.0


def test_span_ratio_matches_singular_values():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(9, 2))
    s = np.linalg.svd(v, compute_uv=False)
    assert span_ratio(v) == pytest.approx(s[1] / s[0], rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 20), st.floats(0.1, 3.0))
def test_refining_a_passing_curve_keeps_it_passing(J, radius):
    c = regular_polygon(J, radius=radius, center=(radius + 1.0, 0.0))
    assert check_assumptions(c).ok
    mids = 0.5 * (c.nodes + np.roll(c.nodes, -1, axis=0))
    refined = np.empty((2 * J, 2))
    refined[0::2], refined[1::2] = c.nodes, mids
    assert check_assumptions(DiscreteCurve(refined, True)).ok


# -- serialization ------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3)), min_size=4, max_size=10),
       st.sampled_from(["fixed", "cylinder:0.25", "plane:-0.5"]))
def test_text_round_trip_is_bit_exact(points, end):
    c = DiscreteCurve(np.array(points), False, FIXED, BoundaryKind.from_token(end))
    back = curve_from_text(curve_to_text(c))
    assert np.array_equal(back.nodes, c.nodes)
    assert back.end == c.end and back.start == c.start


def test_closed_round_trip():
    c = regular_polygon(7)
    text = curve_to_text(c)
    assert text.splitlines()[0] == "closed"
    assert curve_from_text(text) == c


def test_bad_header():
    with pytest.raises(ValueError):
        curve_from_text("open axis\n1 2\n")
