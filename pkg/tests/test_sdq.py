import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qconnlab.errors import (
    BandOverflow,
    DegreeOverflow,
    HbarNotAdmissible,
    NonlinearSymbol,
    UnsupportedGroup,
    WidthTooSmallForGrid,
)
from qconnlab.group import SU2, U1
from qconnlab.holonomy import SmoothConnection
from qconnlab.oprep import Grid, GridFunction, apply, involution, operator_norm_exact
from qconnlab.qconn import exact_holonomy
from qconnlab.sdq import (
    CotangentTorus,
    DefectReport,
    DualAlgebra,
    MAX_DEGREE,
    ProductBase,
    Symbol,
    admissible_hbar,
    dirac_defect,
    dirac_operator,
    embed_qconnection,
    gaussian_envelope,
    kernel_to_mode,
    mode_to_kernel,
    norm_continuity,
    poisson_bracket,
    quantize_group,
    quantize_pair,
    quantize_product,
    random_symbol,
    su2_sector_dirac_defect,
    sup_norm,
    symbol_recovery_defect,
    symbol_samples_from_kernel,
)

T1 = CotangentTorus(1)
T2 = CotangentTorus(2)


def plane_wave(grid, k):
    return GridFunction(grid, np.exp(2j * np.pi * grid.points @ np.atleast_1d(k)))


def cos_symbol(base=T1):
    return (Symbol.x_mode(base, [1] * base.nx, 0.5) + Symbol.x_mode(base, [-1] * base.nx, 0.5)).with_name("cos")


# symbols and brackets


def test_symbol_evaluation():
    f = Symbol.momentum(T1) * Symbol.x_mode(T1, 2, 3.0)
    x, p = np.array([[0.1]]), np.array([[0.7]])
    assert np.allclose(f(x, p), 0.7 * 3.0 * np.exp(2j * np.pi * 0.2))


def test_gaussian_envelope_evaluates():
    g = gaussian_envelope(T2, 2.0)
    assert np.allclose(g(np.zeros((1, 2)), np.array([[1.0, 2.0]])), np.exp(-5 / 8))


def test_dp_of_envelope_symbol_matches_finite_difference():
    f = random_symbol(1, band=1, degree=2, width=1.5, seed=0)
    x, p, h = np.array([[0.3]]), np.array([[0.4]]), 1e-6
    fd = (f(x, p + h) - f(x, p - h)) / (2 * h)
    assert np.allclose(f.dp(0)(x, p), fd, atol=1e-8)


def test_degree_overflow():
    with pytest.raises(DegreeOverflow):
        Symbol(T1, {((0,), 0.0): {(MAX_DEGREE + 1,): 1.0}})


def test_symbol_json_roundtrip():
    f = random_symbol(2, band=1, degree=2, seed=1).with_name("r")
    g = Symbol.from_dict(json.loads(json.dumps(f.to_dict())))
    assert g.distance(f) == 0 and g.name == "r" and g.base == f.base


def test_bracket_of_momentum_and_mode_closed_form():
    # {p, e^{2 pi i q x}} = d_p p * d_x e = 2 pi i q e
    e = Symbol.x_mode(T1, 3)
    assert poisson_bracket(Symbol.momentum(T1), e).distance(e.scaled(2j * np.pi * 3)) <= 1e-14


def test_su2_dual_brackets_are_structure_constants():
    base = DualAlgebra(SU2)
    c = SU2.structure_constants
    mu = [Symbol.coordinate(base, i) for i in range(3)]
    for i in range(3):
        for j in range(3):
            expect = Symbol.zero(base)
            for k in range(3):
                expect = expect + mu[k].scaled(c[i, j, k])
            assert poisson_bracket(mu[i], mu[j]).distance(expect) <= 1e-14


small_syms = st.integers(0, 10**6).map(lambda s: random_symbol(1, band=1, degree=1, width=None, seed=s))


@settings(deadline=None, max_examples=25)
@given(small_syms, small_syms, small_syms)
def test_bracket_is_antisymmetric_and_satisfies_jacobi(f, g, h):
    assert (poisson_bracket(f, g) + poisson_bracket(g, f)).distance(Symbol.zero(T1)) <= 1e-12
    jac = (
        poisson_bracket(f, poisson_bracket(g, h))
        + poisson_bracket(g, poisson_bracket(h, f))
        + poisson_bracket(h, poisson_bracket(f, g))
    )
    assert jac.distance(Symbol.zero(T1)) <= 1e-9


@settings(deadline=None, max_examples=25)
@given(small_syms, small_syms, small_syms)
def test_bracket_leibniz(f, g, h):
    lhs = poisson_bracket(f, g * h)
    rhs = poisson_bracket(f, g) * h + g * poisson_bracket(f, h)
    assert lhs.distance(rhs) <= 1e-10


def test_product_base_bracket_splits():
    base = ProductBase(1, U1)
    # {p, mu} = 0 and {e_q, mu} = 0 over u(1)* which is abelian
    p, mu = Symbol.momentum(base), Symbol.coordinate(base, 0)
    assert poisson_bracket(p, mu).distance(Symbol.zero(base)) == 0


# quantisation


def test_admissible_hbar():
    assert admissible_hbar(0.25, 8) == 4
    for bad in (0.3, 1 / 5, 0.0, 1.5):
        with pytest.raises(HbarNotAdmissible):
            admissible_hbar(bad, 8)


def test_momentum_quantises_to_derivative():
    n, hbar = 16, 1 / 4
    K = quantize_pair(Symbol.momentum(T1), hbar, n)
    for k in (-3, 0, 5):
        out = apply(K, plane_wave(Grid(n, 1), k))
        assert np.allclose(out.values, 2 * np.pi * hbar * k * plane_wave(Grid(n, 1), k).values, atol=1e-12)


def test_x_mode_quantises_to_multiplication():
    n = 16
    K = quantize_pair(Symbol.x_mode(T1, 2), 1 / 2, n)
    out = apply(K, plane_wave(Grid(n, 1), 3))
    assert np.allclose(out.values, plane_wave(Grid(n, 1), 5).values, atol=1e-12)


def test_weyl_ordering_is_symmetric():
    # Q(e_q p) = (e_q Q(p) + Q(p) e_q) / 2, checked on a mode away from the edge
    n, hbar, q, k = 16, 1 / 4, 1, 2
    K = quantize_pair(Symbol.x_mode(T1, q) * Symbol.momentum(T1), hbar, n)
    out = apply(K, plane_wave(Grid(n, 1), k)).values
    expect = 0.5 * (2 * np.pi * hbar * k + 2 * np.pi * hbar * (k + q)) * plane_wave(Grid(n, 1), k + q).values
    assert np.allclose(out, expect, atol=1e-12)


def test_real_symbols_quantise_to_self_adjoint_kernels():
    f = random_symbol(1, band=2, degree=2, seed=3)
    K = quantize_pair(f, 1 / 4, 16)
    assert np.max(np.abs(involution(K).values - K.values)) <= 1e-12


def test_mode_kernel_roundtrip():
    rng = np.random.default_rng(4)
    T = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    assert np.allclose(kernel_to_mode(mode_to_kernel(T, 3, 2)), T, atol=1e-12)


@pytest.mark.parametrize("d,n", [(1, 16), (2, 8)])
def test_symbol_recovery(d, n):
    f = random_symbol(d, band=1, degree=2, seed=5)
    assert symbol_recovery_defect(f, 1 / 2, n) <= 1e-12


def test_symbol_samples_match_profile():
    f = random_symbol(1, band=1, degree=2, seed=6)
    p, vals = symbol_samples_from_kernel(quantize_pair(f, 1 / 4, 16), 1 / 4, 1)
    assert np.allclose(vals, f.mode_profile(1, p), atol=1e-12)


def test_band_overflow():
    with pytest.raises(BandOverflow):
        quantize_pair(Symbol.x_mode(T1, 4), 1 / 2, 8)


def test_quantize_group_u1_spectrum():
    hbar, n = 1 / 4, 8
    K = quantize_group(Symbol.coordinate(DualAlgebra(U1), 0), hbar, n)
    for k in (-2, 0, 3):
        out = apply(K, plane_wave(Grid(n, 1), k))
        assert np.allclose(out.values, hbar * k * plane_wave(Grid(n, 1), k).values, atol=1e-12)


def test_quantize_group_rejects_su2_and_nonlinear():
    with pytest.raises(UnsupportedGroup):
        quantize_group(Symbol.coordinate(DualAlgebra(SU2), 0), 0.5, 8)
    mu = Symbol.coordinate(DualAlgebra(U1), 0)
    with pytest.raises(NonlinearSymbol):
        quantize_group(mu * mu, 0.5, 8)


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.sampled_from([1.0, 0.5, 0.125]))
def test_su2_sector_dirac_condition_is_exact(a, b, hbar):
    base = DualAlgebra(SU2)

    def lin(c):
        s = Symbol.constant(base, c[0])
        for i in range(3):
            s = s + Symbol.coordinate(base, i, c[i + 1])
        return s

    assert su2_sector_dirac_defect(lin(a), lin(b), hbar) <= 1e-12 * (1 + np.abs(a).max() * np.abs(b).max())


def test_quantize_product_is_tensor():
    n, hbar = 8, 1 / 2
    f = Symbol.momentum(T1)
    h = Symbol.coordinate(DualAlgebra(U1), 0)
    K = quantize_product(f, h, hbar, n)
    g = Grid(n, 2)
    # e^{2 pi i (k x + j theta)} has eigenvalue (2 pi hbar k)(hbar j)
    phi = plane_wave(g, [2, -3])
    assert np.allclose(apply(K, phi).values, (2 * np.pi * hbar * 2) * (hbar * -3) * phi.values, atol=1e-11)


# Dirac condition


def test_dirac_defect_vanishes_for_momentum_and_cos():
    rep = dirac_defect(Symbol.momentum(T1).with_name("p"), cos_symbol(), [1 / 4, 1 / 8], 32, iters=50)
    assert max(rep.defects) <= 1e-10
    assert max(rep.adjoint_defects) <= 1e-12
    assert rep.symbol_ids == ("p", "cos")


def test_dirac_defect_for_quadratic_pair_is_exact():
    # Weyl quantisation is exact for brackets with symbols of degree <= 2 in p when the other is linear
    p2 = Symbol.momentum(T1) * Symbol.momentum(T1)
    D = dirac_operator(p2, cos_symbol(), 1 / 8, 32)
    assert operator_norm_exact(D) <= 1e-9


def test_dirac_defect_decreases_for_generic_symbols():
    f, g = random_symbol(1, 1, 2, 1.5, seed=7), random_symbol(1, 1, 2, 1.5, seed=8)
    rep = dirac_defect(f, g, [1 / 8, 1 / 16, 1 / 32], 128, iters=100)
    assert rep.defects[0] > rep.defects[1] > rep.defects[2]
    assert rep.fitted_slope >= 0.9


def test_dirac_operator_matches_direct_kernel_commutator_on_wide_grid():
    from qconnlab.sdq import kernel_commutator

    # away from the mode boundary the grid commutator agrees with the widened one
    f, g = Symbol.momentum(T1), cos_symbol()
    n, hbar = 32, 1 / 8
    Kf, Kg = quantize_pair(f, hbar, n), quantize_pair(g, hbar, n)
    C = kernel_commutator(Kf, Kg).scaled(1 / (1j * hbar)) - quantize_pair(poisson_bracket(f, g), hbar, n)
    T = kernel_to_mode(C)
    assert np.max(np.abs(T[2:-2, 2:-2])) <= 1e-10


def test_defect_report_serialisation():
    rep = DefectReport([0.5, 0.25], [0.1, 0.025], 2.0, ("a", "b"), [0.0, 0.0], 16, 10, 0)
    assert json.loads(rep.to_json())["symbol_ids"] == ["a", "b"]
    assert rep.to_csv().splitlines()[0] == "hbar,defect,adjoint_defect"
    with pytest.raises(ValueError):
        DefectReport([0.5], [-1.0], 0.0, ("a", "b"), [0.0], 16, 10, 0)


# norms


def test_norm_of_unimodular_symbols_is_one():
    for f in (Symbol.constant(T1, 1.0), Symbol.x_mode(T1, 1)):
        rep = norm_continuity(f, [1 / 4, 1 / 8], 32, iters=50)
        assert np.allclose(rep.norms, 1.0, atol=1e-12)
        assert abs(rep.sup_norm - 1.0) <= 1e-12


def test_norm_of_momentum_symbol_in_envelope():
    # Q(p e^{-a p^2}) is diagonal: its norm is the max over sampled momenta
    f = Symbol.momentum(T1) * gaussian_envelope(T1, 1.0)
    n, hbar = 64, 1 / 16
    K = quantize_pair(f, hbar, n)
    ks = np.arange(-(n // 2), n - n // 2)
    p = 2 * np.pi * hbar * ks
    assert operator_norm_exact(K) == pytest.approx(np.max(np.abs(p * np.exp(-(p**2) / 2))), rel=1e-12)
    assert sup_norm(f, n, [hbar]) == pytest.approx(np.exp(-0.5), rel=1e-3)


# smeared embedding


def test_embedding_mass_and_concentration():
    q = exact_holonomy(SmoothConnection.random(U1, 1, seed=9), steps=32)
    S = embed_qconnection(q, 0.25, Grid(8, 1), 128, 0.2)
    assert np.max(np.abs(S.mass() - 1.0)) <= 1e-12
    assert S.concentration() >= 0.99
    # density peaks at the holonomy angle
    c = S.centers[1, 2]
    assert S.density(1, 2, c) >= S.density(1, 2, c + 0.3)


def test_embedding_errors():
    q = exact_holonomy(SmoothConnection.random(U1, 1, seed=9), steps=8)
    with pytest.raises(WidthTooSmallForGrid):
        embed_qconnection(q, 0.25, Grid(4, 1), 16, 0.2)
    qs = exact_holonomy(SmoothConnection.random(SU2, 1, seed=9), steps=8)
    with pytest.raises(UnsupportedGroup):
        embed_qconnection(qs, 0.25, Grid(4, 1), 128, 0.2)
