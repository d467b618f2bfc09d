import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from qconnlab.errors import BaseMismatch, GroupMismatch, UnsupportedGraph
from qconnlab.gauge import GaugeField
from qconnlab.group import SU2, U1, dagger
from qconnlab.holonomy import (
    HolonomyAssignment,
    SmoothConnection,
    gauge_transform,
    geodesic_holonomies,
    hol_graph,
    holonomy,
    surjectivity_construct,
)
from qconnlab.torus import Geodesic, Sampled, TangentVector, TorusPoint, lattice_system, triangulation_system


def ode_holonomy(A, curve, rtol=1e-12):
    """Independent oracle: integrate U' = U A(gamma(t)) gamma'(t) with an adaptive RK."""
    N = A.group.matrix_dim

    def rhs(t, y):
        U = y.reshape(N, N)
        a = A.pair(curve.position(t)[None], curve.velocity(t)[None])[0]
        return (U @ a).ravel()

    sol = solve_ivp(rhs, (0, 1), np.eye(N, dtype=complex).ravel(), rtol=rtol, atol=1e-13, method="DOP853")
    return sol.y[:, -1].reshape(N, N)


def test_zero_connection_has_trivial_holonomy():
    A = SmoothConnection.zero(SU2, 2)
    assert np.array_equal(holonomy(A, Geodesic([0.1, 0.2], [0.3, 0.4])).m, np.eye(2))


def test_constant_u1_holonomy_closed_form():
    A = SmoothConnection.constant(U1, 2, [[0.7], [-1.3]])
    v = np.array([0.25, 0.5])
    got = holonomy(A, Geodesic([0.3, 0.1], v), steps=3).m[0, 0]
    assert abs(got - np.exp(1j * (0.7 * v[0] - 1.3 * v[1]))) <= 1e-14


def test_constant_su2_holonomy_closed_form():
    c = np.array([[0.4, -1.0, 0.3], [1.1, 0.2, -0.6]])
    A = SmoothConnection.constant(SU2, 2, c)
    v = np.array([0.3, -0.2])
    expect = expm(SU2.from_components(c.T @ v))
    assert np.max(np.abs(holonomy(A, Geodesic([0.0, 0.0], v), steps=5).m - expect)) <= 1e-13


@pytest.mark.parametrize(
    "curve",
    [Geodesic([0.1, 0.2], [0.35, 0.0]), Geodesic([0.1, 0.2], [0.3, -0.45]), Sampled([[0.1, 0.2], [0.3, 0.25], [0.2, 0.6]])],
)
def test_holonomy_matches_ode_oracle(curve):
    A = SmoothConnection.random(SU2, 2, band=2, scale=1.5, seed=3)
    got = holonomy(A, curve, steps=2048).m
    assert np.max(np.abs(got - ode_holonomy(A, curve))) <= 1e-6


def test_midpoint_rule_is_second_order():
    A = SmoothConnection.random(SU2, 2, band=2, scale=1.5, seed=4)
    c = Geodesic([0.1, 0.7], [0.4, 0.3])
    ref = ode_holonomy(A, c)
    errs = [np.max(np.abs(holonomy(A, c, steps=n).m - ref)) for n in (32, 64, 128)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_holonomy_of_concatenation_is_product_in_path_order():
    A = SmoothConnection.random(SU2, 1, band=2, scale=2.0, seed=5)
    c1, c2 = Geodesic([0.1], [0.3]), Geodesic([0.4], [0.2])
    # midpoint nodes line up when the step size is shared
    parent = holonomy(A, Geodesic([0.1], [0.5]), steps=500).m
    kids = holonomy(A, c1, steps=300).m @ holonomy(A, c2, steps=200).m
    assert np.max(np.abs(parent - kids)) <= 1e-13
    wrong = holonomy(A, c2, steps=200).m @ holonomy(A, c1, steps=300).m
    assert np.max(np.abs(parent - wrong)) > 1e-3


def test_reversed_curve_has_inverse_holonomy():
    A = SmoothConnection.random(SU2, 2, band=1, seed=6)
    c = Geodesic([0.2, 0.3], [0.3, 0.1])
    h, r = holonomy(A, c, steps=64).m, holonomy(A, c.reversed(), steps=64).m
    assert np.max(np.abs(h @ r - np.eye(2))) <= 1e-13


def test_batched_geodesics_match_single_curves():
    A = SmoothConnection.random(SU2, 2, band=2, seed=7)
    rng = np.random.default_rng(0)
    s, d = rng.uniform(size=(5, 2)), rng.uniform(-0.3, 0.3, size=(5, 2))
    batch = geodesic_holonomies(A, s, d, steps=64)
    for i in range(5):
        assert np.max(np.abs(batch[i] - holonomy(A, Geodesic(s[i], d[i]), steps=64).m)) <= 1e-13


def test_evaluate_pairs_with_tangent_vector():
    A = SmoothConnection.constant(SU2, 2, [[1, 0, 0], [0, 2, 0]])
    x = TorusPoint([0.1, 0.2])
    X = A.evaluate(x, TangentVector(x, [0.5, 1.0]))
    assert np.allclose(SU2.components(X.x), [0.5, 2.0, 0.0])
    with pytest.raises(BaseMismatch):
        A.evaluate(x, TangentVector(TorusPoint([0.3, 0.3]), [1.0, 0.0]))


def test_connection_addition_and_mismatch():
    a = SmoothConnection.constant(U1, 1, [[1.0]])
    b = SmoothConnection.constant(U1, 1, [[2.0]])
    assert np.isclose(holonomy(a + b, Geodesic([0.0], [0.5])).m[0, 0], np.exp(1.5j))
    with pytest.raises(GroupMismatch):
        a + SmoothConnection.zero(SU2, 1)


def test_connection_and_assignment_json_roundtrip():
    A = SmoothConnection.random(SU2, 2, band=1, seed=8)
    B = SmoothConnection.from_dict(json.loads(json.dumps(A.to_dict())))
    assert np.array_equal(A.field.coeffs, B.field.coeffs)
    g = lattice_system(2, 1).graphs[0]
    h = hol_graph(A, g, steps=16)
    back = HolonomyAssignment.from_dict(g, json.loads(json.dumps(h.to_dict())))
    assert np.array_equal(back.values, h.values)


# gauge covariance of holonomy


@pytest.mark.parametrize(
    "group,gauge",
    [
        (U1, lambda: GaugeField.winding(2, [1, -2]) * GaugeField.random(U1, 2, seed=1)),
        (SU2, lambda: GaugeField.random(SU2, 2, band=1, scale=0.8, seed=2)),
    ],
)
def test_gauge_transformed_holonomy_is_conjugated_at_endpoints(group, gauge):
    A = SmoothConnection.random(group, 2, band=1, seed=9)
    g = gauge()
    B = gauge_transform(A, g)
    c = Geodesic([0.15, 0.6], [0.3, -0.2])
    steps = 2048
    lhs = holonomy(B, c, steps).m
    gt, gh = g(c.start[None])[0], g(c.end[None])[0]
    rhs = gt @ holonomy(A, c, steps).m @ dagger(gh)
    assert np.max(np.abs(lhs - rhs)) <= 1e-6


def test_gauge_action_composes():
    A = SmoothConnection.random(SU2, 1, band=1, seed=10)
    g = GaugeField.random(SU2, 1, band=1, scale=0.5, seed=11)
    h = GaugeField.random(SU2, 1, band=1, scale=0.5, seed=12)
    lhs = gauge_transform(gauge_transform(A, h), g)
    rhs = gauge_transform(A, g * h)
    x = np.linspace(0, 1, 17)[:, None]
    assert np.max(np.abs(lhs.field(x) - rhs.field(x))) <= 1e-8


def test_gauge_group_mismatch():
    with pytest.raises(GroupMismatch):
        gauge_transform(SmoothConnection.zero(SU2, 1), GaugeField.identity(U1, 1))


# surjectivity


@settings(deadline=None, max_examples=5)
@given(st.integers(0, 10**6))
def test_surjectivity_hits_random_targets_su2(seed):
    g = lattice_system(2, 1).graphs[0]
    targets = HolonomyAssignment(g, SU2.haar(np.random.default_rng(seed), len(g)), SU2)
    A = surjectivity_construct(g, targets, steps=512)
    H = hol_graph(A, g, steps=512).values
    assert np.max(np.abs(H - targets.values)) <= 1e-10


def test_surjectivity_u1_one_dimensional():
    g = lattice_system(1, 3).graphs[2]
    targets = HolonomyAssignment(g, U1.haar(np.random.default_rng(1), len(g)), U1)
    A = surjectivity_construct(g, targets, steps=512)
    assert np.max(np.abs(hol_graph(A, g, steps=512).values - targets.values)) <= 1e-10


def test_surjectivity_rejects_non_lattice_graph():
    g = triangulation_system(1).graphs[0]
    targets = HolonomyAssignment(g, SU2.identity((len(g),)), SU2)
    with pytest.raises(UnsupportedGraph):
        surjectivity_construct(g, targets)
