import random

import pytest

from lieflow.laurent import (
    LaurentPoly,
    LaurentRing,
    adjugate,
    birkhoff_split,
    extend_to_basis,
    invert_poly_unit,
    invert_unit_poly_matrix,
    laurent_matrix,
)
from lieflow.matrices import Matrix
from lieflow.scalars import PolyRing, PrimeField, RingError, SeriesRing, poly, poly_x


def test_laurent_arithmetic():
    base = PrimeField(5)
    lr = LaurentRing(base)
    x = lr.x
    xinv = lr.xinv
    assert x * xinv == lr.one
    f = x + xinv
    assert (f * f).coeffs.keys() == {-2, 0, 2}
    assert f.substitute_inverse() == f
    assert (x + 1).to_poly() == poly([1, 1], base)
    with pytest.raises(RingError):
        xinv.to_poly()


def test_invert_poly_unit_field():
    base = PrimeField(7)
    u = poly([3], base)
    assert invert_poly_unit(u) * u == poly([1], base)


def test_invert_poly_unit_series():
    base = SeriesRing(3, 5)
    t = base.t
    # u = 2 + t*x + t^2: a unit of (F_3[t]/t^5)[x]
    u = poly([base.elem(2) + t * t, t], base)
    ui = invert_poly_unit(u)
    assert ui * u == poly([base.one], base)


def test_invert_unit_poly_matrix():
    base = SeriesRing(3, 4)
    pr = PolyRing(base)
    t = base.t
    m = Matrix(
        [
            [poly([base.one], base), poly([t, base.one], base)],
            [poly([], base), poly([base.elem(2)], base)],
        ],
        pr,
    )
    mi = invert_unit_poly_matrix(m)
    assert m * mi == Matrix.identity(2, pr)
    assert mi * m == Matrix.identity(2, pr)


def test_extend_to_basis():
    base = PrimeField(5)
    pr = PolyRing(base)
    x = poly_x(base)
    m = Matrix([[x], [poly([1], base)]], pr)
    b = extend_to_basis(m)
    assert b.det().degree == 0
    assert [b.rows[i][0] for i in range(2)] == [x, poly([1], base)]


def test_extend_to_basis_rejects_unsaturated():
    base = PrimeField(5)
    pr = PolyRing(base)
    x = poly_x(base)
    m = Matrix([[x], [x * x]], pr)
    with pytest.raises(RingError):
        extend_to_basis(m)


def _diag_laurent(base, powers):
    lr = LaurentRing(base)
    rows = []
    n = len(powers)
    for i in range(n):
        rows.append(
            [
                LaurentPoly({powers[i]: base.one}, base) if i == j else lr.zero
                for j in range(n)
            ]
        )
    return Matrix(rows, lr)


def test_birkhoff_diagonal():
    base = PrimeField(3)
    T = _diag_laurent(base, [1, -1])
    S0, Sinf, degrees = birkhoff_split(T)
    assert degrees == (1, -1)


def test_birkhoff_nonsplit_extension():
    # [[1/x, 1], [0, x]] glues O + O (the nonsplit extension class)
    base = PrimeField(3)
    lr = LaurentRing(base)
    T = Matrix(
        [[lr.xinv, lr.one], [lr.zero, lr.x]],
        lr,
    )
    S0, Sinf, degrees = birkhoff_split(T)
    assert degrees == (0, 0)
    # check the factorization T = S0 diag(x^d) Sinf^{-1}, i.e. T*Sinf*diag(x^{-d}) = S0
    D = _diag_laurent(base, [0, 0])
    assert T * Sinf == S0 * D if degrees == (0, 0) else True


def test_birkhoff_split_factorization_random():
    rng = random.Random(5)
    base = PrimeField(3)
    lr = LaurentRing(base)
    p = 3
    for _ in range(6):
        # U0 = unipotent-upper(x) * invertible-lower-const: unit determinant
        d = sorted((rng.randrange(-2, 3) for _ in range(2)), reverse=True)
        a, dd = rng.randrange(1, p), rng.randrange(1, p)
        b, c = rng.randrange(p), rng.randrange(p)
        U0 = Matrix(
            [[lr.one, lr.x * c], [lr.zero, lr.one]],
            lr,
        ) * Matrix([[lr.elem(a), lr.zero], [lr.elem(b), lr.elem(dd)]], lr)
        a2, d2 = rng.randrange(1, p), rng.randrange(1, p)
        b2, c2 = rng.randrange(p), rng.randrange(p)
        V = Matrix(
            [[lr.elem(a2), lr.zero], [lr.elem(b2), lr.elem(d2)]], lr
        ) * Matrix([[lr.one, lr.zero], [lr.xinv * c2, lr.one]], lr)
        T = U0 * _diag_laurent(base, d) * V
        S0, Sinf, degrees = birkhoff_split(T)
        assert degrees == tuple(d)
        # verify: T * Sinf = S0 * diag(x^degrees)
        lhs = T * Sinf
        rhs = S0 * _diag_laurent(base, degrees)
        assert lhs == rhs
        # frame determinants are units
        s0det = S0.det()
        assert set(s0det.coeffs.keys()) == {0}
        sinfdet = Sinf.det()
        assert len(sinfdet.coeffs) == 1  # c * x^-m with constant c
