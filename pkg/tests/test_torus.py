import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qconnlab.errors import BaseMismatch, NotInvertible
from qconnlab.fields import BandField, fit_band_field, grid_points
from qconnlab.torus import (
    Edge,
    Geodesic,
    Graph,
    GraphSystem,
    Sampled,
    Shear,
    TangentVector,
    TorusPoint,
    Translation,
    apply_diffeo,
    geodesic_exp,
    identity_diffeo,
    lattice_system,
    shortest_displacement,
    triangulation_system,
    wrap,
)

coord = st.floats(-50, 50, allow_nan=False)


def test_wrap_examples():
    assert np.allclose(wrap([1.25, -0.25]), [0.25, 0.75])
    assert wrap(1.0) == 0.0
    assert wrap(-1e-18) == 0.0  # rounds to 1.0 in float, folded back to 0


@given(coord)
def test_wrap_lands_in_unit_interval(x):
    w = wrap(x)
    assert 0.0 <= w < 1.0
    assert abs((x - w) - round(x - w)) <= 1e-9


def test_shortest_displacement_antipodal_tie():
    assert shortest_displacement(0.0, 0.5) == 0.5
    assert shortest_displacement(0.5, 0.0) == 0.5
    assert np.isclose(shortest_displacement(0.9, 0.1), 0.2)


@given(coord, coord)
def test_shortest_displacement_range(x, y):
    d = shortest_displacement(x, y)
    assert -0.5 < d <= 0.5
    assert abs(wrap(x + d) - wrap(y)) % 1.0 <= 1e-9 or abs(abs(wrap(x + d) - wrap(y)) - 1) <= 1e-9


def test_torus_point_is_reduced_and_readonly():
    p = TorusPoint([1.5, -0.25])
    assert np.allclose(p.coords, [0.5, 0.75])
    with pytest.raises(ValueError):
        p.coords[0] = 0.1
    with pytest.raises(ValueError):
        TorusPoint([0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        TorusPoint([np.nan])


def test_tangent_vector_dimension_check():
    with pytest.raises(ValueError):
        TangentVector(TorusPoint([0.1, 0.2]), [1.0])


def test_geodesic_exp_example():
    x = TorusPoint([0.9, 0.0])
    y = geodesic_exp(x, TangentVector(x, [0.3, 0.5]), 1.0)
    assert np.allclose(y.coords, [0.2, 0.5])


def test_geodesic_exp_base_mismatch():
    x = TorusPoint([0.1])
    with pytest.raises(BaseMismatch):
        geodesic_exp(x, TangentVector(TorusPoint([0.2]), [1.0]), 0.5)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 1))
def test_geodesic_exp_is_additive_in_time(v, s, x0):
    x = TorusPoint([x0])
    V = TangentVector(x, [v])
    y = geodesic_exp(x, V, s)
    z = geodesic_exp(y, TangentVector(y, [v]), 1.0)
    assert geodesic_exp(x, V, s + 1.0).close_to(z, 1e-9)


def test_geodesic_curve_positions_and_reverse():
    g = Geodesic([0.9, 0.1], [0.2, -0.3])
    assert np.allclose(g.position(0.5), [1.0, -0.05])
    assert np.allclose(g.velocity(np.zeros(3)), [[0.2, -0.3]] * 3)
    r = g.reversed()
    assert np.allclose(r.position(0.25), g.position(0.75))


def test_sampled_unwraps_across_the_seam():
    s = Sampled([[0.9], [0.05], [0.2]])
    assert np.allclose(s.points[:, 0], [0.9, 1.05, 1.2])
    assert np.allclose(s.displacement, [0.3])
    assert np.allclose(s.velocity(0.1), [0.3])  # 2 segments of 0.15
    with pytest.raises(ValueError):
        Sampled([[0.0], [0.5]])


def test_graph_rejects_disconnected_edge():
    v = [TorusPoint([0.0]), TorusPoint([0.5])]
    with pytest.raises(ValueError):
        Graph(v, [Edge(0, 1, Geodesic([0.0], [0.25]))])


def test_lattice_system_sizes_and_edge_index():
    sys = lattice_system(2, 3)
    assert [g.level for g in sys.graphs] == [1, 2, 3]
    assert [len(g.vertices) for g in sys.graphs] == [4, 16, 64]
    assert [len(g) for g in sys.graphs] == [8, 32, 128]
    g = sys.graphs[1]
    for e, edge in enumerate(g.edges):
        v, mu = divmod(e, 2)
        assert edge.tail == v
        assert np.isclose(edge.curve.displacement[mu], 0.25)


@pytest.mark.parametrize("make", [lambda: lattice_system(1, 3), lambda: lattice_system(2, 3), lambda: triangulation_system(3)])
def test_refinement_concatenates_to_parent(make):
    sys = make()
    for n, rows in enumerate(sys.refinement):
        coarse, fine = sys.graphs[n], sys.graphs[n + 1]
        for e, kids in enumerate(rows):
            parent = coarse.edges[e]
            total = sum(fine.edges[k].curve.displacement for k in kids)
            assert np.allclose(total, parent.curve.displacement, atol=1e-12)
            assert np.allclose(shortest_displacement(fine.vertex_array()[fine.edges[kids[0]].tail], coarse.vertex_array()[parent.tail]), 0, atol=1e-12)
            assert np.allclose(shortest_displacement(fine.vertex_array()[fine.edges[kids[-1]].head], coarse.vertex_array()[parent.head]), 0, atol=1e-12)
            for a, b in zip(kids, kids[1:]):
                assert fine.edges[a].head == fine.edges[b].tail


def test_triangulation_counts():
    sys = triangulation_system(3)
    assert [len(g) for g in sys.graphs] == [12, 72, 432]
    assert sys.cell_counts == (8, 48, 288)
    # Euler characteristic of the torus: V - E + F = 0
    for g, f in zip(sys.graphs, sys.cell_counts):
        assert len(g.vertices) - len(g) + f == 0


def test_graph_system_json_roundtrip():
    sys = triangulation_system(2)
    back = GraphSystem.from_dict(json.loads(json.dumps(sys.to_dict())))
    assert back.refinement == sys.refinement
    for a, b in zip(sys.graphs, back.graphs):
        assert a.level == b.level
        assert np.array_equal(a.vertex_array(), b.vertex_array())
        assert [(e.tail, e.head) for e in a.edges] == [(e.tail, e.head) for e in b.edges]


def test_translation_pushforward():
    t = Translation([0.25, 0.5])
    p = apply_diffeo(t, TorusPoint([0.9, 0.9]))
    assert np.allclose(p.coords, [0.15, 0.4])
    v = apply_diffeo(t, TangentVector(TorusPoint([0.1, 0.1]), [1.0, 2.0]))
    assert np.allclose(v.v, [1.0, 2.0])
    g = apply_diffeo(t, Geodesic([0.0, 0.0], [0.1, 0.0]))
    assert isinstance(g, Geodesic)
    assert np.allclose(g.start, [0.25, 0.5])


def test_identity_diffeo_fixes_everything():
    p = TorusPoint([0.3, 0.7])
    assert apply_diffeo(identity_diffeo(2), p).close_to(p, 0)


def test_shear_jacobian_matches_finite_differences():
    s = Shear(0.05, [[1, 0], [0, 2]], [[0.0, 1.0], [1.0, 0.0]], [0.3, 1.1])
    x = np.array([0.37, 0.81])
    h = 1e-6
    fd = np.stack([(s(x + h * e) - s(x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
    assert np.max(np.abs(fd - s.jacobian(x))) <= 1e-8


def test_shear_tangent_pushforward_uses_jacobian():
    s = Shear(0.05, [[1, 0]], [[0.0, 1.0]])
    V = TangentVector(TorusPoint([0.2, 0.3]), [1.0, 0.0])
    W = apply_diffeo(s, V)
    assert np.allclose(W.v, s.jacobian(np.array([0.2, 0.3])) @ [1.0, 0.0])
    assert np.allclose(W.base.coords, wrap(s(np.array([0.2, 0.3]))))


def test_shear_too_strong_is_not_invertible():
    s = Shear(1.0, [[1, 0]], [[1.0, 0.0]])
    with pytest.raises(NotInvertible):
        apply_diffeo(s, TorusPoint([0.0, 0.0]))


def test_shear_maps_geodesic_to_sampled_with_matching_ends():
    s = Shear(0.05, [[1, 1]], [[0.5, 0.5]])
    g = Geodesic([0.1, 0.2], [0.3, 0.0])
    c = apply_diffeo(s, g, samples=32)
    assert isinstance(c, Sampled)
    assert np.allclose(wrap(c.start), wrap(s(g.start)))
    assert np.allclose(wrap(c.end), wrap(s(g.end)))


# band-limited fields


def test_band_field_evaluation_matches_closed_form():
    c = np.zeros(3, dtype=complex)
    c[0], c[2] = 0.5, 0.5  # cos(2 pi x)
    f = BandField(1, 1, c)
    x = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(f(x), np.cos(2 * np.pi * x[:, 0]))
    assert np.allclose(f.on_grid(8), np.cos(2 * np.pi * np.arange(8) / 8))


def test_band_field_fit_recovers_coefficients():
    rng = np.random.default_rng(0)
    f = BandField(2, 2, rng.normal(size=(3, 5, 5)) + 1j * rng.normal(size=(3, 5, 5)))
    n = 7
    g = fit_band_field(f(grid_points(n, 2)), n, 2, 2)
    assert np.allclose(g.coeffs, f.coeffs, atol=1e-12)


def test_band_field_derivative():
    rng = np.random.default_rng(1)
    f = BandField(1, 3, rng.normal(size=7) + 1j * rng.normal(size=7))
    x = np.array([[0.123]])
    h = 1e-6
    fd = (f(x + h) - f(x - h)) / (2 * h)
    assert np.allclose(f.derivative(0)(x), fd, atol=1e-6)
