import random

import pytest

from lieflow.algebroid import (
    base_change_series,
    log_chart,
    tangent_chart,
    trivial_chart,
)
from lieflow.lmodule import (
    LModule,
    PCurvature,
    binomial_leibniz_check,
    connection_difference_is_linear,
    curvature,
    is_integrable,
    lambda_connection,
    nilpotence_level,
    p_curvature,
    psi_frobenius_linearity,
)
from lieflow.matrices import Matrix
from lieflow.scalars import RingError, SeriesRing, poly, poly_x


def rank1_tangent_module(p, a_coeffs):
    L = tangent_chart(p)
    pr = L.poly_ring
    A = Matrix([[poly(a_coeffs, L.ring)]], pr)
    return LModule(L, [A])


def test_curvature_trivial_connection():
    E = rank1_tangent_module(3, [])
    assert is_integrable(E)


def test_curvature_commuting_constants():
    L = trivial_chart(5, 2)
    pr = L.poly_ring
    A1 = Matrix([[1, 0], [0, 2]], pr)
    A2 = Matrix([[3, 0], [0, 1]], pr)
    E = LModule(L, [A1, A2])
    assert is_integrable(E)


def test_curvature_noncommuting():
    L = trivial_chart(5, 2)
    pr = L.poly_ring
    A1 = Matrix([[0, 1], [0, 0]], pr)
    A2 = Matrix([[0, 0], [1, 0]], pr)
    E = LModule(L, [A1, A2])
    K = curvature(E)[(0, 1)]
    expect = Matrix([[1, 0], [0, -1]], pr)
    assert K == expect


def test_p_curvature_zero_connection():
    E = rank1_tangent_module(5, [])
    psi = p_curvature(E)
    assert psi.is_zero()
    assert psi.report.ok


def test_p_curvature_rank1_p2_closed_example():
    # p = 2, A = x: (d/dx + x)^2 = d^2/dx^2 + 1 + x^2 and d^2 kills F_2[x]
    E = rank1_tangent_module(2, [0, 1])
    psi = p_curvature(E)
    assert psi.mats[0] == Matrix([[poly([1, 0, 1], E.algebroid.ring)]], E.poly_ring)


def test_p_curvature_canonical_frobenius_pullback():
    # canonical connection on a pulled-back module: A = 0 in the pullback frame
    L = tangent_chart(3)
    pr = L.poly_ring
    E = LModule(L, [Matrix.zeros(2, 2, pr)])
    assert p_curvature(E).is_zero()


def test_p_curvature_requires_integrable():
    L = trivial_chart(3, 2)
    pr = L.poly_ring
    A1 = Matrix([[0, 1], [0, 0]], pr)
    A2 = Matrix([[0, 0], [1, 0]], pr)
    E = LModule(L, [A1, A2])
    with pytest.raises(RingError):
        p_curvature(E)


def _psi_oracle_rank1(p, a_coeffs):
    """p-fold composition oracle for rank 1 over T_{A^1}."""
    E = rank1_tangent_module(p, a_coeffs)
    s = (E.poly_ring.one,)
    for _ in range(p):
        s = E.apply(0, s)
    return s[0]


@pytest.mark.parametrize("p", [2, 3, 5])
def test_rank1_closed_form_psi(p):
    # psi(d/dx) = A^p + (d/dx)^{p-1}(A) for rank-1 connections
    rng = random.Random(10 + p)
    L = tangent_chart(p)
    for _ in range(15):
        a_coeffs = [rng.randrange(p) for _ in range(rng.randrange(1, 5))]
        A = poly(a_coeffs, L.ring)
        E = rank1_tangent_module(p, a_coeffs)
        psi = p_curvature(E)
        d = A
        for _ in range(p - 1):
            d = d.derivative()
        closed = A**p + d
        assert psi.mats[0].entry(0, 0) == closed
        assert _psi_oracle_rank1(p, a_coeffs) == closed


def test_psi_frobenius_linearity():
    E = rank1_tangent_module(3, [1, 2])
    psi = p_curvature(E)
    assert psi_frobenius_linearity(E, psi).ok


def test_binomial_leibniz():
    E = rank1_tangent_module(3, [0, 1])
    assert binomial_leibniz_check(E).ok
    Llog = log_chart(3)
    Elog = LModule(Llog, [Matrix([[poly([1], Llog.ring)]], Llog.poly_ring)])
    assert binomial_leibniz_check(Elog).ok


def test_connection_difference_linear():
    E1 = rank1_tangent_module(5, [1, 2, 3])
    E2 = rank1_tangent_module(5, [4])
    assert connection_difference_is_linear(E1, E2)


def test_lambda_zero_gives_matrix_power():
    # lambda = 0, rank 1, Higgs field A: psi = A^p
    p = 3
    L = tangent_chart(p)
    A = Matrix([[poly([1, 1], L.ring)]], L.poly_ring)
    E0 = lambda_connection(L, [A], 0)
    psi = p_curvature(E0)
    assert psi.mats[0] == A**p


def test_lambda_one_matches_plain():
    p = 3
    L = tangent_chart(p)
    A = Matrix([[poly([2, 1], L.ring)]], L.poly_ring)
    E1 = lambda_connection(L, [A], 1)
    Eplain = LModule(L, [A])
    assert p_curvature(E1).mats == p_curvature(Eplain).mats


@pytest.mark.parametrize("p", [2, 3])
def test_lambda_t_deformation_formula(p):
    # rank 1, lambda = t: psi(d/dx) = A^p + t^{p-1} (d/dx)^{p-1} A over k[t]/(t^N)
    N = 6
    base = base_change_series(tangent_chart(p), N)
    sring = SeriesRing(p, N)
    rng = random.Random(20 + p)
    for _ in range(10):
        a_coeffs = [rng.randrange(p) for _ in range(rng.randrange(1, 5))]
        A_poly = poly([sring.elem([c]) for c in a_coeffs], sring)
        A = Matrix([[A_poly]], base.poly_ring)
        Et = lambda_connection(base, [A], sring.t)
        psi = p_curvature(Et)
        d = A_poly
        for _ in range(p - 1):
            d = d.derivative()
        t_pow = poly([sring.t ** (p - 1)], sring)
        expect = A_poly**p + t_pow * d
        assert psi.mats[0].entry(0, 0) == expect
        # t = 0 specialization equals the p-th power of the Higgs field
        got0 = poly([c.at(0) for c in psi.mats[0].entry(0, 0).coeffs], tangent_chart(p).ring)
        a_fp = poly(a_coeffs, tangent_chart(p).ring)
        assert got0 == a_fp**p


def test_nilpotence_levels():
    p = 3
    L = tangent_chart(p)
    pr = L.poly_ring
    E = LModule(L, [Matrix.zeros(2, 2, pr)])
    psi0 = p_curvature(E)
    assert nilpotence_level(psi0, 5) == 0
    # hand-built psi with a single nilpotent matrix
    fake = PCurvature(E, (Matrix([[0, 1], [0, 0]], pr),))
    assert nilpotence_level(fake, 5) == 1
    E2 = rank1_tangent_module(2, [0, 1])
    psi2 = p_curvature(E2)  # x^2 + 1: not nilpotent
    assert nilpotence_level(psi2, 6) is None
