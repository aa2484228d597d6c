"""Generic exact matrices and normal forms over F_p[x].

``Matrix`` works over any of the scalar rings (field elements, dense
polynomials, truncated series).  The normal-form routines (Hermite column
form, Smith form, saturation of a column span) are specific to
polynomials over F_p, which is a principal ideal domain.
"""

from __future__ import annotations

from typing import Callable, Sequence

from .scalars import DensePoly, PrimeField, RingError


class Matrix:
    """Immutable rectangular matrix over a single scalar ring."""

    __slots__ = ("rows", "nrows", "ncols", "ring")

    def __init__(self, rows: Sequence[Sequence], ring):
        rs = tuple(tuple(ring.elem(e) for e in row) for row in rows)
        if rs and any(len(r) != len(rs[0]) for r in rs):
            raise RingError("ragged matrix")
        object.__setattr__(self, "rows", rs)
        object.__setattr__(self, "nrows", len(rs))
        object.__setattr__(self, "ncols", len(rs[0]) if rs else 0)
        object.__setattr__(self, "ring", ring)

    def __setattr__(self, *a):
        raise AttributeError("Matrix is immutable")

    @classmethod
    def from_rows(cls, rows, ring):
        return cls(rows, ring)

    @classmethod
    def identity(cls, n: int, ring, one=None, zero=None):
        one = ring.one if one is None else one
        zero = ring.zero if zero is None else zero
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)], ring)

    @classmethod
    def zeros(cls, nrows: int, ncols: int, ring, zero=None):
        zero = ring.zero if zero is None else zero
        return cls([[zero] * ncols for _ in range(nrows)], ring)

    def entry(self, i: int, j: int):
        return self.rows[i][j]

    def map(self, fn: Callable, ring=None):
        return Matrix([[fn(e) for e in row] for row in self.rows], ring or self.ring)

    def __add__(self, other: "Matrix") -> "Matrix":
        if (self.nrows, self.ncols) != (other.nrows, other.ncols):
            raise RingError("shape mismatch in matrix addition")
        return Matrix(
            [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)], self.ring
        )

    def __sub__(self, other: "Matrix") -> "Matrix":
        return self + (-other)

    def __neg__(self):
        return Matrix([[-e for e in row] for row in self.rows], self.ring)

    def __mul__(self, other):
        if isinstance(other, Matrix):
            if self.ncols != other.nrows:
                raise RingError("shape mismatch in matrix product")
            ocols = list(zip(*other.rows)) if other.rows else []
            out = []
            for row in self.rows:
                out_row = []
                for col in ocols:
                    acc = None
                    for a, b in zip(row, col):
                        term = a * b
                        acc = term if acc is None else acc + term
                    out_row.append(acc)
                out.append(out_row)
            return Matrix(out, self.ring)
        return Matrix([[e * other for e in row] for row in self.rows], self.ring)

    def scale(self, c):
        return Matrix([[e * c for e in row] for row in self.rows], self.ring)

    def __pow__(self, n: int):
        if self.nrows != self.ncols:
            raise RingError("matrix power needs a square matrix")
        r = Matrix.identity(self.nrows, self.ring)
        b = self
        while n:
            if n & 1:
                r = r * b
            b = b * b
            n >>= 1
        return r

    def transpose(self) -> "Matrix":
        return Matrix(list(zip(*self.rows)) if self.rows else [], self.ring)

    def apply(self, vec: Sequence):
        """Matrix times column vector."""
        if len(vec) != self.ncols:
            raise RingError("vector length mismatch")
        out = []
        for row in self.rows:
            acc = None
            for a, v in zip(row, vec):
                term = a * v
                acc = term if acc is None else acc + term
            out.append(acc)
        return tuple(out)

    def commutator(self, other: "Matrix") -> "Matrix":
        return self * other - other * self

    def trace(self):
        acc = self.ring.zero
        for i in range(self.nrows):
            acc = acc + self.rows[i][i]
        return acc

    def det(self):
        if self.nrows != self.ncols:
            raise RingError("determinant of a non-square matrix")
        n = self.nrows
        if n == 0:
            return self.ring.one
        # Laplace expansion; matrices here stay small (n <= 6).
        def rec(rows, cols):
            if len(cols) == 1:
                return self.rows[rows[0]][cols[0]]
            acc = None
            sign = 1
            r0 = rows[0]
            rest = rows[1:]
            for k, c in enumerate(cols):
                a = self.rows[r0][c]
                if a:
                    sub = rec(rest, cols[:k] + cols[k + 1 :])
                    term = a * sub
                    if sign < 0:
                        term = -term
                    acc = term if acc is None else acc + term
                sign = -sign
            return acc if acc is not None else self.ring.zero

        return rec(tuple(range(n)), tuple(range(n)))

    def is_zero(self) -> bool:
        return all(not e for row in self.rows for e in row)

    def __eq__(self, other):
        return (
            isinstance(other, Matrix)
            and other.nrows == self.nrows
            and other.ncols == self.ncols
            and all(a == b for r1, r2 in zip(self.rows, other.rows) for a, b in zip(r1, r2))
        )

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return "[" + "; ".join(", ".join(repr(e) for e in row) for row in self.rows) + "]"


# ---------------------------------------------------------------------------
# normal forms over F_p[x]


def _check_poly_matrix(m: Matrix) -> PrimeField:
    from .scalars import PolyRing

    if not isinstance(m.ring, PolyRing) or not isinstance(m.ring.base, PrimeField):
        raise RingError("normal forms require a matrix of polynomials over F_p")
    return m.ring.base


def hermite_column_form(m: Matrix) -> Matrix:
    """Column echelon form over F_p[x] with monic pivots, reduced upwards.

    Canonical for the column span: two matrices have the same column span
    over F_p[x] iff their Hermite forms coincide (up to trailing zero
    columns, which are dropped).
    """
    ring = _check_poly_matrix(m)
    cols = [list(col) for col in zip(*m.rows)] if m.rows else []
    nrows = m.nrows
    done = 0
    for i in range(nrows):
        # gcd elimination in row i among columns done..
        while True:
            live = [j for j in range(done, len(cols)) if cols[j][i]]
            if len(live) <= 1:
                break
            live.sort(key=lambda j: cols[j][i].degree)
            j0 = live[0]
            piv = cols[j0][i]
            for j in live[1:]:
                q = cols[j][i] // piv
                cols[j] = [a - q * b for a, b in zip(cols[j], cols[j0])]
        live = [j for j in range(done, len(cols)) if cols[j][i]]
        if not live:
            continue
        j0 = live[0]
        cols[done], cols[j0] = cols[j0], cols[done]
        lead = cols[done][i].coeffs[-1].inv()
        cols[done] = [c * lead for c in cols[done]]
        piv = cols[done][i]
        for j in range(done):
            q = cols[j][i] // piv
            if not q.is_zero():
                cols[j] = [a - q * b for a, b in zip(cols[j], cols[done])]
        done += 1
    cols = [c for c in cols[:done]]
    return Matrix(list(zip(*cols)) if cols else [[] for _ in range(nrows)], m.ring)


def hnf_reduce(m_hnf: Matrix, vec: Sequence[DensePoly]):
    """Reduce a vector against a Hermite column form.

    Returns (coefficients, remainder); the vector lies in the column span
    iff the remainder is zero.
    """
    rem = list(vec)
    ncols = m_hnf.ncols
    coeffs = []
    pivots = []
    for j in range(ncols):
        col = [m_hnf.rows[i][j] for i in range(m_hnf.nrows)]
        for i, e in enumerate(col):
            if e:
                pivots.append((i, j))
                break
    for (i, j) in pivots:
        piv = m_hnf.rows[i][j]
        q = rem[i] // piv
        coeffs.append(q)
        if not q.is_zero():
            for r in range(len(rem)):
                rem[r] = rem[r] - q * m_hnf.rows[r][j]
    return coeffs, rem


def in_column_span(m_hnf: Matrix, vec: Sequence[DensePoly]) -> bool:
    _, rem = hnf_reduce(m_hnf, vec)
    return all(e.is_zero() for e in rem)


def smith_form(m: Matrix):
    """Diagonalize over F_p[x]: returns (d, u_inv) with U*M*V = diag(d).

    d lists the monic diagonal entries (no divisibility chain is
    enforced), and u_inv is the inverse of the accumulated row-operation
    matrix, so the saturation of the column span of M is spanned by the
    first rank(M) columns of u_inv.
    """
    ring = _check_poly_matrix(m)
    a = [list(row) for row in m.rows]
    nr, nc = m.nrows, m.ncols
    one = DensePoly([ring.one], ring)
    zero = DensePoly([], ring)
    u_inv = [[one if i == j else zero for j in range(nr)] for i in range(nr)]

    def row_op(i, j, q):
        # row_i -= q * row_j ; record inverse column op on u_inv
        for c in range(nc):
            a[i][c] = a[i][c] - q * a[j][c]
        for r in range(nr):
            u_inv[r][j] = u_inv[r][j] + q * u_inv[r][i]

    def row_swap(i, j):
        a[i], a[j] = a[j], a[i]
        for r in range(nr):
            u_inv[r][i], u_inv[r][j] = u_inv[r][j], u_inv[r][i]

    def row_scale(i, c):
        for col in range(nc):
            a[i][col] = a[i][col] * c
        cinv = c.inv()
        for r in range(nr):
            u_inv[r][i] = u_inv[r][i] * cinv

    def col_op(j, k, q):
        for r in range(nr):
            a[r][j] = a[r][j] - q * a[r][k]

    def col_swap(j, k):
        for r in range(nr):
            a[r][j], a[r][k] = a[r][k], a[r][j]

    d = []
    t = 0
    while t < min(nr, nc):
        # find pivot of minimal degree in the remaining block
        best = None
        for i in range(t, nr):
            for j in range(t, nc):
                if a[i][j] and (best is None or a[i][j].degree < best[2]):
                    best = (i, j, a[i][j].degree)
        if best is None:
            break
        bi, bj, _ = best
        row_swap(t, bi)
        col_swap(t, bj)
        while True:
            dirty = False
            for i in range(t + 1, nr):
                if a[i][t]:
                    q = a[i][t] // a[t][t]
                    row_op(i, t, q)
                    if a[i][t]:
                        row_swap(t, i)
                    dirty = True
            for j in range(t + 1, nc):
                if a[t][j]:
                    q = a[t][j] // a[t][t]
                    col_op(j, t, q)
                    if a[t][j]:
                        col_swap(t, j)
                    dirty = True
            if not dirty:
                break
        row_scale(t, a[t][t].coeffs[-1].inv())
        d.append(a[t][t])
        t += 1
    return d, Matrix(u_inv, m.ring)


def column_rank(m: Matrix) -> int:
    d, _ = smith_form(m)
    return len(d)


def smith_saturation(m: Matrix) -> Matrix:
    """Saturation of the column span of M inside the ambient free module.

    Requires full column rank over the fraction field F_p(x).  The result
    is Hermite-normalized, hence canonical, and idempotent.
    """
    d, u_inv = smith_form(m)
    if len(d) < m.ncols:
        raise RingError("saturation input is rank deficient")
    sat_cols = [[u_inv.rows[i][j] for i in range(m.nrows)] for j in range(len(d))]
    sat = Matrix(list(zip(*sat_cols)), m.ring)
    return hermite_column_form(sat)
