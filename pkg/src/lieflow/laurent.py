"""Laurent polynomials in the chart coordinate and Birkhoff splitting.

Transition matrices of bundles on P^1 (and their t-truncated families)
live over Laurent polynomials in x whose coefficients are F_p scalars or
truncated series.  Birkhoff/Grothendieck factorization of an F_p Laurent
matrix into U0 * diag(x^d) * U_inf with U0 polynomial in x and U_inf
polynomial in 1/x is computed by extracting minimal generators of the
graded module of twisted sections, mirroring the subsheaf engine.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from .matrices import Matrix
from .scalars import (
    DensePoly,
    PolyRing,
    PrimeField,
    RingError,
    SeriesRing,
    TruncSeries,
)


class LaurentRing:
    """Ring descriptor for base[x, 1/x]."""

    __slots__ = ("base",)

    def __init__(self, base):
        self.base = base

    @property
    def p(self):
        return self.base.p

    @property
    def zero(self):
        return LaurentPoly({}, self.base)

    @property
    def one(self):
        return LaurentPoly({0: self.base.one}, self.base)

    @property
    def x(self):
        return LaurentPoly({1: self.base.one}, self.base)

    @property
    def xinv(self):
        return LaurentPoly({-1: self.base.one}, self.base)

    def elem(self, v):
        if isinstance(v, LaurentPoly):
            if v.base != self.base:
                raise RingError("laurent ring mismatch")
            return v
        if isinstance(v, DensePoly):
            if v.ring != self.base:
                raise RingError("laurent ring mismatch")
            return LaurentPoly({i: c for i, c in enumerate(v.coeffs) if c}, self.base)
        return LaurentPoly({0: self.base.elem(v)}, self.base)

    def __eq__(self, other):
        return isinstance(other, LaurentRing) and other.base == self.base

    def __hash__(self):
        return hash(("LaurentRing", self.base))

    def __repr__(self):
        return f"{self.base}[x,1/x]"


class LaurentPoly:
    """Sparse Laurent polynomial; coeffs maps powers to nonzero scalars."""

    __slots__ = ("coeffs", "base")

    def __init__(self, coeffs: dict, base):
        cs = {int(k): base.elem(v) for k, v in coeffs.items()}
        cs = {k: v for k, v in cs.items() if v}
        object.__setattr__(self, "coeffs", cs)
        object.__setattr__(self, "base", base)

    def __setattr__(self, *a):
        raise AttributeError("LaurentPoly is immutable")

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def min_power(self) -> Optional[int]:
        return min(self.coeffs) if self.coeffs else None

    def max_power(self) -> Optional[int]:
        return max(self.coeffs) if self.coeffs else None

    def _coerce(self, other):
        if isinstance(other, LaurentPoly):
            if other.base != self.base:
                raise RingError("laurent ring mismatch")
            return other
        if isinstance(other, DensePoly):
            return LaurentRing(self.base).elem(other)
        return LaurentPoly({0: self.base.elem(other)}, self.base)

    def __add__(self, other):
        o = self._coerce(other)
        out = dict(self.coeffs)
        for k, v in o.coeffs.items():
            s = out.get(k)
            out[k] = v if s is None else s + v
        return LaurentPoly(out, self.base)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __neg__(self):
        return LaurentPoly({k: -v for k, v in self.coeffs.items()}, self.base)

    def __mul__(self, other):
        o = self._coerce(other)
        out = {}
        for i, a in self.coeffs.items():
            for j, b in o.coeffs.items():
                k = i + j
                t = a * b
                s = out.get(k)
                out[k] = t if s is None else s + t
        return LaurentPoly(out, self.base)

    __rmul__ = __mul__

    def shift(self, k: int) -> "LaurentPoly":
        return LaurentPoly({i + k: v for i, v in self.coeffs.items()}, self.base)

    def substitute_inverse(self) -> "LaurentPoly":
        """x -> 1/x."""
        return LaurentPoly({-i: v for i, v in self.coeffs.items()}, self.base)

    def to_poly(self) -> DensePoly:
        mp = self.min_power()
        if mp is not None and mp < 0:
            raise RingError("laurent polynomial has negative powers")
        top = self.max_power()
        cs = [self.base.zero] * (top + 1 if top is not None else 0)
        for k, v in self.coeffs.items():
            cs[k] = v
        return DensePoly(cs, self.base)

    def map_coeffs(self, fn, new_base) -> "LaurentPoly":
        return LaurentPoly({k: fn(v) for k, v in self.coeffs.items()}, new_base)

    def __eq__(self, other):
        if not isinstance(other, LaurentPoly):
            other = self._coerce(other)
        return other.base == self.base and other.coeffs == self.coeffs

    def __hash__(self):
        return hash((tuple(sorted(self.coeffs.items(), key=lambda kv: kv[0])), self.base))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(
            f"({v})x^{k}" if k else f"({v})" for k, v in sorted(self.coeffs.items())
        )


def laurent_matrix(rows, base) -> Matrix:
    return Matrix(rows, LaurentRing(base))


# ---------------------------------------------------------------------------
# polynomial matrix inversion with unit determinant


def adjugate(m: Matrix) -> Matrix:
    n = m.nrows
    if n != m.ncols:
        raise RingError("adjugate of a non-square matrix")
    if n == 1:
        return Matrix([[m.ring.one]], m.ring)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            sub = [
                [m.rows[a][b] for b in range(n) if b != i] for a in range(n) if a != j
            ]
            cof = Matrix(sub, m.ring).det()
            if (i + j) % 2:
                cof = -cof
            row.append(cof)
        rows.append(row)
    return Matrix(rows, m.ring)


def invert_series_unit(u: TruncSeries) -> TruncSeries:
    return u.inv()


def invert_poly_unit(u: DensePoly) -> DensePoly:
    """Inverse of a unit of base[x]: constants over F_p, or const + t(...)
    over a series ring (t nilpotent makes the geometric series finite)."""
    base = u.ring
    if isinstance(base, PrimeField):
        if u.degree != 0:
            raise RingError("polynomial unit over a field must be constant")
        return DensePoly([u.coeffs[0].inv()], base)
    if not isinstance(base, SeriesRing):
        raise RingError("unsupported coefficient ring")
    # write u = c + v with c the t-constant part, v in (t)
    c_coeffs = [TruncSeries([s.coeffs[0]], base.p, base.order) for s in u.coeffs]
    c_poly = DensePoly(c_coeffs, base)
    if c_poly.is_zero() or c_poly.degree != 0:
        raise RingError("matrix determinant is not a unit (t-constant part non-constant)")
    c0 = u.coeffs[0].coeffs[0]
    if c0 == 0:
        raise RingError("matrix determinant is not a unit")
    cinv = DensePoly([TruncSeries([pow(c0, base.p - 2, base.p)], base.p, base.order)], base)
    v = u - c_poly
    # geometric series: u^{-1} = cinv * sum_k (-v * cinv)^k, finite since t^N = 0
    acc = DensePoly([base.one], base)
    powterm = DensePoly([base.one], base)
    minus_v_cinv = -(v * cinv)
    for _ in range(base.order - 1):
        powterm = powterm * minus_v_cinv
        if powterm.is_zero():
            break
        acc = acc + powterm
    return cinv * acc


def invert_unit_poly_matrix(m: Matrix) -> Matrix:
    """Inverse of a polynomial matrix whose determinant is a unit."""
    d = m.det()
    dinv = invert_poly_unit(d)
    adj = adjugate(m)
    return adj.map(lambda e: e * dinv)


def extend_to_basis(m: Matrix) -> Matrix:
    """Complete a saturated set of columns over F_p[x] to a square basis.

    Uses the diagonalization transforms: for saturated input the diagonal
    entries are constants and the first columns of u_inv span the input,
    so u_inv itself is the required basis (input columns first, up to a
    unimodular change within their span).
    """
    from .matrices import smith_form

    d, u_inv = smith_form(m)
    if len(d) < m.ncols:
        raise RingError("columns are not independent")
    if any(e.degree != 0 for e in d):
        raise RingError("column span is not saturated")
    # replace the first columns by the originals (same span), keep complement
    cols = [[m.rows[i][j] for i in range(m.nrows)] for j in range(m.ncols)]
    comp = [
        [u_inv.rows[i][j] for i in range(m.nrows)] for j in range(m.ncols, m.nrows)
    ]
    allcols = cols + comp
    out = Matrix([[allcols[j][i] for j in range(m.nrows)] for i in range(m.nrows)], m.ring)
    if out.det().degree != 0:
        raise RingError("basis completion failed: determinant not a unit")
    return out


# ---------------------------------------------------------------------------
# Birkhoff / Grothendieck splitting over F_p


def birkhoff_split(T: Matrix) -> Tuple[Matrix, Matrix, Tuple[int, ...]]:
    """Factor an invertible F_p Laurent matrix as T = S0 * diag(x^d) * W.

    S0 is polynomial in x with constant nonzero determinant, W is
    polynomial in 1/x with constant nonzero determinant (returned as a
    Laurent matrix), and d is non-increasing: the bundle glued by T is
    O(d_1) + ... + O(d_r).  Sections (s0, s_inf) of twists are extracted
    degree by degree as minimal generators.
    """
    ring = T.ring
    if not isinstance(ring, LaurentRing) or not isinstance(ring.base, PrimeField):
        raise RingError("birkhoff splitting works over F_p laurent matrices")
    p = ring.p
    r = T.nrows
    powers = [abs(pw) for row in T.rows for e in row for pw in e.coeffs]
    M = max(powers, default=0)
    bound = r * M + 1
    ybound = 2 * bound + 2

    def sections(n: int) -> List[List[int]]:
        """Solutions s_inf (coefficient vectors) with x^n T s_inf(1/x) polynomial."""
        rows_eq = []
        ncols = r * (ybound + 1)
        cols_img = []
        for comp in range(r):
            for dgr in range(ybound + 1):
                img = [T.rows[i][comp].shift(n - dgr) for i in range(r)]
                cols_img.append(img)
        # negative-power coefficients must vanish
        neg_powers = set()
        for img in cols_img:
            for e in img:
                mp = e.min_power()
                if mp is not None and mp < 0:
                    neg_powers.update(k for k in e.coeffs if k < 0)
        for i in range(r):
            for k in sorted(neg_powers):
                row = []
                for img in cols_img:
                    c = img[i].coeffs.get(k)
                    row.append(c.value if c is not None else 0)
                rows_eq.append(row)
        from .p1 import nullspace

        return nullspace(rows_eq, ncols, p)

    gens = []  # (n, s_inf coeff vector)
    n = -bound
    from .p1 import rref

    while len(gens) < r:
        if n > bound + 1:
            raise RingError("birkhoff splitting failed to find generators: singular input?")
        sec = sections(n)
        if sec:
            mult_rows = []
            for gn, gvec in gens:
                delta = n - gn
                for mshift in range(delta + 1):
                    # multiply s_inf by y^(delta - mshift): shift coefficients
                    vec = [0] * (r * (ybound + 1))
                    for comp in range(r):
                        for dgr in range(ybound + 1):
                            c = gvec[comp * (ybound + 1) + dgr]
                            nd = dgr + (delta - mshift)
                            if c and nd <= ybound:
                                vec[comp * (ybound + 1) + nd] = c
                    mult_rows.append(vec)
            red_all, piv_all = rref([list(v) for v in sec] + [list(v) for v in mult_rows], p)
            red_old, piv_old = rref([list(v) for v in mult_rows], p) if mult_rows else ([], [])
            for row, pc in zip(red_all, piv_all):
                if pc in piv_old:
                    continue
                vec = list(row)
                for orow, opc in zip(red_old, piv_old):
                    f = vec[opc]
                    if f:
                        vec = [(a - f * b) % p for a, b in zip(vec, orow)]
                if any(vec):
                    gens.append((n, vec))
                    if len(gens) == r:
                        break
        n += 1
    degrees = tuple(-gn for gn, _ in gens)
    # build S0 (polynomial in x) and W = S_inf(1/x)^{-1}-side
    base = ring.base
    sinf_cols = []
    s0_cols = []
    for gn, gvec in gens:
        sinf = []
        for comp in range(r):
            cs = gvec[comp * (ybound + 1) : (comp + 1) * (ybound + 1)]
            sinf.append(LaurentPoly({-i: c for i, c in enumerate(cs) if c}, base))
        sinf_cols.append(sinf)
        s0 = []
        for i in range(r):
            acc = ring.zero
            for comp in range(r):
                acc = acc + T.rows[i][comp].shift(gn) * sinf_cols[-1][comp]
            s0.append(acc)
        s0_cols.append(s0)
    S0 = Matrix([[s0_cols[j][i] for j in range(r)] for i in range(r)], ring)
    # Sinf with columns x^{n_c} * sinf_c: T = S0 diag(x^{d}) (Sinf')^{-1}
    Sinf = Matrix([[sinf_cols[j][i] for j in range(r)] for i in range(r)], ring)
    return S0, Sinf, degrees


def laurent_poly_matrix_to_dense(m: Matrix) -> Matrix:
    """Convert a Laurent matrix with no negative powers into DensePoly form."""
    base = m.ring.base
    return Matrix([[e.to_poly() for e in row] for row in m.rows], PolyRing(base))
