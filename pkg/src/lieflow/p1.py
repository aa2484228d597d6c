"""Vector bundles on the projective line via splitting types.

Everything here is exact linear algebra over F_p on spaces of binary
forms: bundles are splitting types, maps between split bundles twisted by
O(k) are matrices of forms with rigid degree bookkeeping, subsheaves are
saturated inclusions produced by one graded-generator engine (used for
saturations, kernels, annihilators and quotients), and the semistability
machinery (invariant subsheaves, maximal destabilizers, Harder-Narasimhan
filtrations) enumerates line subsheaves by their induced eigenform, which
is complete for rational subsheaves on the given degree window.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from .matrices import Matrix, column_rank
from .scalars import (
    BinaryForm,
    DensePoly,
    PolyRing,
    PrimeField,
    RingError,
    check_prime,
    form_gcd,
    poly,
)


# ---------------------------------------------------------------------------
# bundles


class SplitBundle:
    """Direct sum of line bundles, recorded by non-increasing degrees."""

    __slots__ = ("degrees",)

    def __init__(self, degrees: Sequence[int]):
        ds = tuple(int(d) for d in degrees)
        if not ds:
            raise RingError("bundle needs rank >= 1")
        if any(ds[i] < ds[i + 1] for i in range(len(ds) - 1)):
            raise RingError("splitting degrees must be non-increasing")
        object.__setattr__(self, "degrees", ds)

    def __setattr__(self, *a):
        raise AttributeError("SplitBundle is immutable")

    @property
    def rank(self) -> int:
        return len(self.degrees)

    @property
    def degree(self) -> int:
        return sum(self.degrees)

    @property
    def slope(self) -> Fraction:
        return Fraction(self.degree, self.rank)

    def dual(self) -> "SplitBundle":
        return SplitBundle(tuple(-d for d in reversed(self.degrees)))

    def twist(self, k: int) -> "SplitBundle":
        return SplitBundle(tuple(d + k for d in self.degrees))

    def __eq__(self, other):
        return isinstance(other, SplitBundle) and other.degrees == self.degrees

    def __hash__(self):
        return hash(self.degrees)

    def __repr__(self):
        return "O(" + ")+O(".join(str(d) for d in self.degrees) + ")"


def dual_index(E: SplitBundle, i: int) -> int:
    return E.rank - 1 - i


# ---------------------------------------------------------------------------
# twisted maps


class TwistedMap:
    """Map src -> dst tensor O(twist) between split bundles.

    entries[i][j] is the component O(src_j) -> O(dst_i + twist), a binary
    form of degree dst_i + twist - src_j (the zero form when negative).
    """

    __slots__ = ("p", "src", "dst", "twist", "entries")

    def __init__(self, p: int, src: SplitBundle, dst: SplitBundle, twist: int, entries):
        check_prime(p)
        ents = []
        for i in range(dst.rank):
            row = []
            for j in range(src.rank):
                e = entries[i][j]
                if not isinstance(e, BinaryForm):
                    raise RingError("entries must be binary forms")
                want = dst.degrees[i] + twist - src.degrees[j]
                if not e.is_zero():
                    if want < 0:
                        raise RingError(
                            f"entry ({i},{j}) must vanish: slot degree {want} < 0"
                        )
                    if e.degree != want:
                        raise RingError(
                            f"entry ({i},{j}) has degree {e.degree}, slot needs {want}"
                        )
                row.append(e)
            ents.append(tuple(row))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "twist", twist)
        object.__setattr__(self, "entries", tuple(ents))

    def __setattr__(self, *a):
        raise AttributeError("TwistedMap is immutable")

    @classmethod
    def zero(cls, p: int, src: SplitBundle, dst: SplitBundle, twist: int) -> "TwistedMap":
        z = BinaryForm.zero(p)
        return cls(p, src, dst, twist, [[z] * src.rank for _ in range(dst.rank)])

    @classmethod
    def from_rows(cls, p, src, dst, twist, rows) -> "TwistedMap":
        """Rows of coefficient sequences; each entry auto-shaped to its slot."""
        ents = []
        for i in range(dst.rank):
            row = []
            for j in range(src.rank):
                coeffs = rows[i][j]
                want = dst.degrees[i] + twist - src.degrees[j]
                if coeffs is None or (hasattr(coeffs, "__len__") and len(coeffs) == 0):
                    row.append(BinaryForm.zero(p))
                elif isinstance(coeffs, BinaryForm):
                    row.append(coeffs)
                elif isinstance(coeffs, int):
                    if coeffs % p == 0:
                        row.append(BinaryForm.zero(p))
                    else:
                        if want != 0:
                            raise RingError(f"integer entry needs slot degree 0, got {want}")
                        row.append(BinaryForm.constant(p, coeffs))
                else:
                    row.append(BinaryForm(p, want, coeffs))
            ents.append(row)
        return cls(p, src, dst, twist, ents)

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def column(self, j: int) -> tuple:
        return tuple(self.entries[i][j] for i in range(self.dst.rank))

    def compose(self, other: "TwistedMap") -> "TwistedMap":
        """self o other (other first)."""
        if other.dst != self.src:
            raise RingError("composition shape mismatch")
        z = BinaryForm.zero(self.p)
        ents = []
        for i in range(self.dst.rank):
            row = []
            for j in range(other.src.rank):
                acc = z
                for l in range(self.src.rank):
                    term = self.entries[i][l] * other.entries[l][j]
                    if not term.is_zero():
                        acc = acc + term if not acc.is_zero() else term
                row.append(acc)
            ents.append(row)
        return TwistedMap(self.p, other.src, self.dst, self.twist + other.twist, ents)

    def add(self, other: "TwistedMap") -> "TwistedMap":
        if (other.src, other.dst, other.twist) != (self.src, self.dst, self.twist):
            raise RingError("twisted map addition mismatch")
        ents = [
            [self.entries[i][j] + other.entries[i][j] for j in range(self.src.rank)]
            for i in range(self.dst.rank)
        ]
        return TwistedMap(self.p, self.src, self.dst, self.twist, ents)

    def scale(self, c: int) -> "TwistedMap":
        ents = [[e * c for e in row] for row in self.entries]
        return TwistedMap(self.p, self.src, self.dst, self.twist, ents)

    def scale_form(self, f: BinaryForm) -> "TwistedMap":
        d = 0 if f.is_zero() else f.degree
        ents = [[f * e for e in row] for row in self.entries]
        return TwistedMap(self.p, self.src, self.dst, self.twist + d, ents)

    def transpose_dual(self) -> "TwistedMap":
        """The dual map dst^* -> src^* with the same twist."""
        sdual, ddual = self.dst.dual(), self.src.dual()
        ents = []
        for a in range(ddual.rank):
            row = []
            for b in range(sdual.rank):
                row.append(self.entries[dual_index(self.dst, b)][dual_index(self.src, a)])
            ents.append(row)
        return TwistedMap(self.p, sdual, ddual, self.twist, ents)

    def evaluate(self, x0: int, x1: int):
        return tuple(
            tuple(e.evaluate(x0, x1) for e in row) for row in self.entries
        )

    def dehomogenize(self) -> Matrix:
        ring = PolyRing(PrimeField(self.p))
        return Matrix([[e.dehomogenize() for e in row] for row in self.entries], ring)

    def generic_rank(self) -> int:
        return column_rank(self.dehomogenize())

    def __eq__(self, other):
        return (
            isinstance(other, TwistedMap)
            and (other.src, other.dst, other.twist) == (self.src, self.dst, self.twist)
            and other.entries == self.entries
        )

    def __hash__(self):
        return hash((self.src, self.dst, self.twist, self.entries))

    def __repr__(self):
        return f"TwistedMap({self.src} -> {self.dst} (+{self.twist}))"


def identity_map(p: int, E: SplitBundle) -> TwistedMap:
    one = BinaryForm.constant(p, 1)
    z = BinaryForm.zero(p)
    return TwistedMap(p, E, E, 0, [[one if i == j else z for j in range(E.rank)] for i in range(E.rank)])


# ---------------------------------------------------------------------------
# hom spaces and coordinates

def hom_dimension(E: SplitBundle, F: SplitBundle, twist: int = 0):
    """dim Hom(E, F tensor O(twist)) with an explicit monomial basis.

    The basis is returned as a list of (i, j, m): the map sending the j-th
    summand of E by the monomial x0^(d-m) x1^m into the i-th summand of F.
    """
    dim = 0
    basis = []
    for i, b in enumerate(F.degrees):
        for j, a in enumerate(E.degrees):
            d = b + twist - a
            if d >= 0:
                dim += d + 1
                basis.extend((i, j, m) for m in range(d + 1))
    return dim, basis


class ColumnSpace:
    """Coordinates on Hom(O(f), E tensor O(twist)) as a vector space over F_p."""

    def __init__(self, p: int, E: SplitBundle, f: int, twist: int = 0):
        self.p = p
        self.E = E
        self.f = f
        self.twist = twist
        self.slot_degrees = [E.degrees[i] + twist - f for i in range(E.rank)]
        self.offsets = []
        dim = 0
        for d in self.slot_degrees:
            self.offsets.append(dim)
            if d >= 0:
                dim += d + 1
        self.dim = dim

    def to_column(self, vec: Sequence[int]) -> tuple:
        col = []
        for i, d in enumerate(self.slot_degrees):
            if d < 0:
                col.append(BinaryForm.zero(self.p))
            else:
                coeffs = vec[self.offsets[i] : self.offsets[i] + d + 1]
                col.append(BinaryForm(self.p, d, coeffs))
        return tuple(col)

    def from_column(self, col: Sequence[BinaryForm]) -> list:
        vec = [0] * self.dim
        for i, d in enumerate(self.slot_degrees):
            e = col[i]
            if e.is_zero():
                continue
            if d < 0 or e.degree != d:
                raise RingError("column entry degree mismatch")
            vec[self.offsets[i] : self.offsets[i] + d + 1] = e.coeffs
        return vec

    def basis_columns(self):
        for n in range(self.dim):
            vec = [0] * self.dim
            vec[n] = 1
            yield self.to_column(vec)


# ---------------------------------------------------------------------------
# F_p linear algebra on integer rows


def rref(rows: List[List[int]], p: int):
    """Reduced row echelon form mod p; returns (rows, pivot columns)."""
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(rows)):
            if rows[i][c] % p:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = pow(rows[r][c], p - 2, p)
        rows[r] = [(v * inv) % p for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] % p:
                f = rows[i][c]
                rows[i] = [(a - f * b) % p for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def nullspace(rows: List[List[int]], ncols: int, p: int) -> List[List[int]]:
    """Canonical basis of the solution space of rows * v = 0."""
    red, pivots = rref(rows, p) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [0] * ncols
        v[fc] = 1
        for r, pc in zip(red, pivots):
            v[pc] = (-r[fc]) % p
        basis.append(v)
    return basis


def solve_linear(rows: List[List[int]], rhs: List[int], p: int) -> Optional[List[int]]:
    """One solution of rows * v = rhs, or None."""
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [b % p] for r, b in zip(rows, rhs)]
    red, pivots = rref(aug, p)
    for r in red:
        if all(v % p == 0 for v in r[:-1]) and r[-1] % p:
            return None
    v = [0] * ncols
    for r, pc in zip(red, pivots):
        if pc == ncols:
            return None
        v[pc] = r[-1]
    return v


def lines_of_space(basis: List[List[int]], p: int):
    """Canonical representatives of 1-dimensional subspaces of a span.

    Iterates coefficient tuples whose first nonzero entry is 1.
    """
    d = len(basis)
    if d == 0:
        return
    for lead in range(d):
        for tail in itertools.product(range(p), repeat=d - lead - 1):
            coeffs = (0,) * lead + (1,) + tail
            vec = [0] * len(basis[0])
            for c, b in zip(coeffs, basis):
                if c:
                    vec = [(u + c * v) % p for u, v in zip(vec, b)]
            yield vec


# ---------------------------------------------------------------------------
# subsheaves via the graded generator engine


@dataclass(frozen=True)
class SubsheafDesc:
    """Saturated subsheaf of a split bundle, by a canonical inclusion."""

    parent: SplitBundle
    bundle: SplitBundle
    incl: TwistedMap  # bundle -> parent, twist 0

    @property
    def rank(self) -> int:
        return self.bundle.rank

    @property
    def degree(self) -> int:
        return self.bundle.degree

    @property
    def slope(self) -> Fraction:
        return self.bundle.slope

    def key(self):
        return (self.bundle.degrees, self.incl.entries)

    def sort_key(self):
        ents = tuple(
            tuple((-1,) if e.is_zero() else (e.degree,) + e.coeffs for e in row)
            for row in self.incl.entries
        )
        return (self.bundle.degrees, ents)

    def __repr__(self):
        return f"Subsheaf({self.bundle} in {self.parent})"


def _graded_generators(
    p: int,
    E: SplitBundle,
    section_space: Callable[[int], List[List[int]]],
    target_rank: int,
    d_max: int,
    d_min: int,
):
    """Minimal generators of a graded section module of a saturated subsheaf.

    section_space(d) returns a basis (coefficient vectors in the ColumnSpace
    of Hom(O(d), E)) of the degree-d sections.  Since the module is free of
    rank target_rank, the greedy scan from d_max downwards finds exactly
    target_rank generators; generator extraction is canonical (RREF with
    reduction against multiples of earlier generators).
    """
    gens: List[Tuple[int, tuple]] = []  # (degree, column of forms)
    d = d_max
    while len(gens) < target_rank:
        if d < d_min:
            raise RingError(
                f"graded generator scan fell below bound {d_min} with "
                f"{len(gens)}/{target_rank} generators: internal invariant breach"
            )
        space = ColumnSpace(p, E, d)
        sec = section_space(d)
        if sec:
            # span of multiples of already-found generators at this degree
            mult_rows = []
            for gd, gcol in gens:
                for m in range(gd - d + 1):
                    mono = BinaryForm(
                        p, gd - d, [1 if mm == m else 0 for mm in range(gd - d + 1)]
                    )
                    col = tuple(mono * e for e in gcol)
                    mult_rows.append(space.from_column(col))
            red_all, piv_all = rref([list(r) for r in sec] + [list(r) for r in mult_rows], p)
            red_old, piv_old = rref([list(r) for r in mult_rows], p) if mult_rows else ([], [])
            for row, pc in zip(red_all, piv_all):
                if pc in piv_old:
                    continue
                vec = list(row)
                # canonical coset representative: fully reduce against old span
                for orow, opc in zip(red_old, piv_old):
                    f = vec[opc]
                    if f:
                        vec = [(a - f * b) % p for a, b in zip(vec, orow)]
                if any(vec):
                    gens.append((d, space.to_column(vec)))
                    if len(gens) == target_rank:
                        break
        d -= 1
    degrees = tuple(gd for gd, _ in gens)
    F = SplitBundle(degrees)
    z = BinaryForm.zero(p)
    ents = [[z] * F.rank for _ in range(E.rank)]
    for c, (gd, gcol) in enumerate(gens):
        for i in range(E.rank):
            ents[i][c] = gcol[i]
    incl = TwistedMap(p, F, E, 0, ents)
    return SubsheafDesc(E, F, incl)


def saturate_columns(p: int, E: SplitBundle, cols: List[Tuple[int, tuple]]) -> SubsheafDesc:
    """Saturation of the span of columns (each a (src_degree, forms) pair).

    A candidate phi lies generically in the span iff every (s+1)x(s+1)
    minor of [cols | phi] vanishes identically, which is linear in phi.
    """
    if not cols:
        raise RingError("empty column list")
    r = E.rank
    # generic rank via the dehomogenized polynomial matrix
    ring = PolyRing(PrimeField(p))
    polymat = Matrix([[c[1][i].dehomogenize() for c in cols] for i in range(r)], ring)
    s = column_rank(polymat)
    if s == 0:
        raise RingError("zero span has no saturation")
    # degree bound bookkeeping: pick s generically independent columns
    indep = []
    for idx in range(len(cols)):
        trial = indep + [idx]
        sub = Matrix([[cols[c][1][i].dehomogenize() for c in trial] for i in range(r)], ring)
        if column_rank(sub) == len(trial):
            indep.append(idx)
        if len(indep) == s:
            break
    deg_lower = sum(cols[c][0] for c in indep)
    e_max = E.degrees[0]
    d_min = deg_lower - (s - 1) * e_max if s > 1 else deg_lower
    if s == r:
        return full_subsheaf(p, E)

    minors = {}
    for rowset in itertools.combinations(range(r), s):
        sub = [[cols[c][1][i] for c in indep] for i in rowset]
        minors[rowset] = _form_det(p, sub)

    def section_space(d: int) -> List[List[int]]:
        space = ColumnSpace(p, E, d)
        if space.dim == 0:
            return []
        eq_rows = []
        for iset in itertools.combinations(range(r), s + 1):
            # expansion of det[indep-cols | phi] along the phi column
            coeff_forms = []
            for l, il in enumerate(iset):
                rest = iset[:l] + iset[l + 1 :]
                mf = minors[rest]
                coeff_forms.append(mf if (s + l) % 2 == 0 else -mf)
            eq_rows.extend(_linear_rows_from_form_combo(p, space, iset, coeff_forms))
        return nullspace(eq_rows, space.dim, p)

    return _graded_generators(p, E, section_space, s, e_max, d_min)


def _form_det(p: int, entries) -> BinaryForm:
    n = len(entries)
    acc = BinaryForm.zero(p)
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = None
        for i in range(n):
            e = entries[i][perm[i]]
            if e.is_zero():
                term = None
                break
            term = e if term is None else term * e
        if term is None:
            continue
        acc = acc + term * sign
    return acc


def _perm_sign(perm) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _linear_rows_from_form_combo(p, space: ColumnSpace, rowset, coeff_forms):
    """Rows of the linear system sum_l coeff_forms[l] * phi_{rowset[l]} = 0."""
    # result form degree: uniform over l when nonzero
    out_deg = None
    for l, i in enumerate(rowset):
        cf = coeff_forms[l]
        if cf.is_zero() or space.slot_degrees[i] < 0:
            continue
        d = cf.degree + space.slot_degrees[i]
        out_deg = d if out_deg is None else max(out_deg, d)
    if out_deg is None:
        return []
    rows = [[0] * space.dim for _ in range(out_deg + 1)]
    for l, i in enumerate(rowset):
        cf = coeff_forms[l]
        sd = space.slot_degrees[i]
        if cf.is_zero() or sd < 0:
            continue
        for m in range(sd + 1):
            # phi slot (i, m) contributes cf * x0^(sd-m) x1^m
            for cm, cv in enumerate(cf.coeffs):
                if cv:
                    rows[cm + m][space.offsets[i] + m] = (
                        rows[cm + m][space.offsets[i] + m] + cv
                    ) % p
    return rows


def full_subsheaf(p: int, E: SplitBundle) -> SubsheafDesc:
    return SubsheafDesc(E, E, identity_map(p, E))


def kernel_subsheaf(T: TwistedMap) -> SubsheafDesc:
    """Kernel of a twisted map as a saturated subsheaf of T.src."""
    p = T.p
    E = T.src
    rank_T = T.generic_rank()
    target = E.rank - rank_T
    if target == 0:
        raise RingError("map is generically injective; kernel is zero")
    e_max = E.degrees[0]
    im_bound = sum(sorted((d + T.twist for d in T.dst.degrees), reverse=True)[:rank_T])
    d_min = (E.degree - im_bound) - max(0, target - 1) * e_max - 1

    def section_space(d: int) -> List[List[int]]:
        space = ColumnSpace(p, E, d)
        if space.dim == 0:
            return []
        rows = []
        out_space = ColumnSpace(p, T.dst, d, T.twist)
        # build linear map: phi coefficients -> T o phi coefficients
        cols_matrix = []
        for n in range(space.dim):
            vec = [0] * space.dim
            vec[n] = 1
            col = space.to_column(vec)
            image = tuple(
                _form_dot(p, T.entries[i], col) for i in range(T.dst.rank)
            )
            cols_matrix.append(out_space.from_column(image))
        # equations: each output coordinate = 0
        for coord in range(out_space.dim):
            rows.append([cols_matrix[n][coord] for n in range(space.dim)])
        return nullspace(rows, space.dim, p)

    return _graded_generators(p, E, section_space, target, e_max, d_min)


def _form_dot(p: int, row: Sequence[BinaryForm], col: Sequence[BinaryForm]) -> BinaryForm:
    acc = BinaryForm.zero(p)
    for a, b in zip(row, col):
        t = a * b
        if not t.is_zero():
            acc = acc + t if not acc.is_zero() else t
    return acc


def annihilator(sub: SubsheafDesc) -> SubsheafDesc:
    """ann(F) = ker(E^* -> F^*) as a subsheaf of E^*."""
    return kernel_subsheaf(sub.incl.transpose_dual())


@dataclass(frozen=True)
class Quotient:
    """E/F for a saturated subsheaf, with the projection map."""

    parent: SplitBundle
    sub: SubsheafDesc
    bundle: SplitBundle
    proj: TwistedMap  # parent -> bundle, twist 0


def quotient(sub: SubsheafDesc) -> Quotient:
    E = sub.parent
    if sub.rank == E.rank:
        raise RingError("quotient by the full subsheaf is zero")
    ann = annihilator(sub)
    Q = ann.bundle.dual()
    proj = ann.incl.transpose_dual()
    if Q.degree != E.degree - sub.degree:
        raise RingError("quotient degree mismatch: input subsheaf not saturated?")
    # sanity: proj o incl = 0
    if not proj.compose(sub.incl).is_zero():
        raise RingError("projection does not kill the subsheaf: internal breach")
    return Quotient(E, sub, Q, proj)


def factor_through(incl: TwistedMap, target: TwistedMap) -> Optional[TwistedMap]:
    """Solve incl o X = target for X (twist of X = twist difference).

    incl: F -> E (twist 0, generically injective); target: G -> E twist t.
    Returns X: G -> F twist t, or None when no factorization exists.
    """
    p = incl.p
    F, E = incl.src, incl.dst
    G = target.src
    tw = target.twist - incl.twist
    cols_X = []
    for j in range(G.rank):
        xs = ColumnSpace(p, F, G.degrees[j], tw)
        tgt_space = ColumnSpace(p, E, G.degrees[j], target.twist)
        rows_map = []
        for n in range(xs.dim):
            vec = [0] * xs.dim
            vec[n] = 1
            xcol = xs.to_column(vec)
            img = tuple(_form_dot(p, incl.entries[i], xcol) for i in range(E.rank))
            rows_map.append(tgt_space.from_column(img))
        rhs = tgt_space.from_column(target.column(j))
        if xs.dim == 0:
            if any(rhs):
                return None
            cols_X.append(xs.to_column([]))
            continue
        eq_rows = [[rows_map[n][coord] for n in range(xs.dim)] for coord in range(tgt_space.dim)]
        sol = solve_linear(eq_rows, rhs, p)
        if sol is None:
            return None
        cols_X.append(xs.to_column(sol))
    z = BinaryForm.zero(p)
    ents = [[z] * G.rank for _ in range(F.rank)]
    for j, col in enumerate(cols_X):
        for i in range(F.rank):
            ents[i][j] = col[i]
    return TwistedMap(p, G, F, tw, ents)


def contains(big: SubsheafDesc, small: SubsheafDesc) -> bool:
    if big.parent != small.parent:
        raise RingError("containment needs a common ambient bundle")
    return factor_through(big.incl, small.incl) is not None


def subsheaf_eq(a: SubsheafDesc, b: SubsheafDesc) -> bool:
    return a.parent == b.parent and a.key() == b.key()


# ---------------------------------------------------------------------------
# Higgs fields and connections on P^1


class TwistedField:
    """theta: E -> E tensor O(k), the Higgs field of a split bundle."""

    def __init__(self, endo: TwistedMap):
        if endo.src != endo.dst:
            raise RingError("Higgs field must be an endomorphism-valued map")
        self.map = endo
        self.p = endo.p
        self.E = endo.src
        self.k = endo.twist

    @classmethod
    def zero(cls, p: int, E: SplitBundle, k: int) -> "TwistedField":
        return cls(TwistedMap.zero(p, E, E, k))

    @classmethod
    def from_rows(cls, p, E, k, rows) -> "TwistedField":
        return cls(TwistedMap.from_rows(p, E, E, k, rows))

    def is_zero(self) -> bool:
        return self.map.is_zero()

    def scale(self, c: int) -> "TwistedField":
        return TwistedField(self.map.scale(c))

    def is_nilpotent(self) -> bool:
        return all(s.is_zero() for s in hitchin_invariants(self))

    def zeta_column(self, col, f: int):
        """theta applied to a column O(f) -> E; lands in twist k."""
        return tuple(_form_dot(self.p, self.map.entries[i], col) for i in range(self.E.rank))

    def __repr__(self):
        return f"TwistedField({self.E}, k={self.k})"


class P1Connection:
    """Global L-connection on a split bundle for a rank-1 algebroid on P^1.

    The algebroid has Omega_L = O(k) and chart-0 anchor beta(x) d/dx; the
    connection acts on chart-0 sections as s -> beta s' + C s.  Entry
    degree slots match a twisted field; globality of the operator across
    the two charts imposes deg C_ij <= e_i + k - e_j together with
    regularity of the infinity-chart matrix, which is checked on
    construction.
    """

    def __init__(self, p: int, E: SplitBundle, k: int, beta: DensePoly, C_rows, pop_coeff: Optional[int] = None):
        check_prime(p)
        self.p = p
        self.E = E
        self.k = k
        self.field = PrimeField(p)
        self.poly_ring = PolyRing(self.field)
        self.beta = self.poly_ring.elem(beta)
        if not self.beta.is_zero() and self.beta.degree > k + 2:
            raise RingError("anchor degree exceeds H^0(O(k+2)) bound")
        rows = []
        for i in range(E.rank):
            row = []
            for j in range(E.rank):
                f = self.poly_ring.elem(C_rows[i][j])
                slot = E.degrees[i] + k - E.degrees[j]
                if not f.is_zero() and f.degree > slot:
                    raise RingError(f"connection entry ({i},{j}) exceeds slot degree {slot}")
                row.append(f)
            rows.append(tuple(row))
        self.C = tuple(rows)
        self._check_infinity_regularity()

    def _check_infinity_regularity(self):
        """C_inf[i][j](y) = y^(e_i+k-e_j) C_ij(1/y) + delta_ij e_i y^(k+1) beta(1/y)
        must be polynomial in y."""
        for i in range(self.E.rank):
            for j in range(self.E.rank):
                lowest = {}
                base = self.E.degrees[i] + self.k - self.E.degrees[j]
                for m, c in enumerate(self.C[i][j].coeffs):
                    if c:
                        powr = base - m
                        lowest[powr] = (lowest.get(powr, 0) + c.value) % self.p
                if i == j and self.E.degrees[i] % self.p != 0:
                    e_i = self.E.degrees[i] % self.p
                    for m, c in enumerate(self.beta.coeffs):
                        if c:
                            powr = self.k + 1 - m
                            lowest[powr] = (lowest.get(powr, 0) + e_i * c.value) % self.p
                for powr, val in lowest.items():
                    if powr < 0 and val % self.p:
                        raise RingError(
                            f"connection is not regular at infinity: entry ({i},{j})"
                        )

    def zeta_poly(self, col_polys: Sequence[DensePoly]) -> tuple:
        """Chart-0 operator: beta d/dx + C applied to a polynomial column."""
        out = []
        for i in range(self.E.rank):
            acc = self.beta * col_polys[i].derivative()
            for j in range(self.E.rank):
                acc = acc + self.C[i][j] * col_polys[j]
            out.append(acc)
        return tuple(out)

    def dual(self) -> "P1Connection":
        """Dual connection on E^*: <nabla* xi, s> = beta d<xi,s> - <xi, nabla s>."""
        Ed = self.E.dual()
        rows = []
        for a in range(Ed.rank):
            row = []
            for b in range(Ed.rank):
                row.append(-self.C[dual_index(self.E, b)][dual_index(self.E, a)])
            rows.append(row)
        return P1Connection(self.p, Ed, self.k, self.beta, rows)

    def __repr__(self):
        return f"P1Connection({self.E}, k={self.k}, beta={self.beta})"


def connection_zeta_forms(conn: P1Connection, sub: SubsheafDesc):
    """Chart-0 images zeta(col) of the generators of a subsheaf (polynomial columns)."""
    out = []
    for c in range(sub.rank):
        col = [sub.incl.entries[i][c].dehomogenize() for i in range(sub.parent.rank)]
        out.append(conn.zeta_poly(col))
    return out


def _chart0_module_matrix(sub: SubsheafDesc) -> Matrix:
    ring = PolyRing(PrimeField(sub.incl.p))
    return Matrix(
        [[sub.incl.entries[i][c].dehomogenize() for c in range(sub.rank)] for i in range(sub.parent.rank)],
        ring,
    )


def is_invariant(structure, sub: SubsheafDesc) -> bool:
    """Whether a saturated subsheaf is preserved (theta- or nabla-invariance).

    For a saturated subsheaf, invariance on the dense chart is equivalent
    to global invariance.
    """
    if structure is None:
        return True
    if isinstance(structure, TwistedField):
        if structure.is_zero():
            return True
        return factor_through(sub.incl, structure.map.compose(sub.incl)) is not None
    if isinstance(structure, P1Connection):
        from .matrices import hermite_column_form, in_column_span

        hnf = hermite_column_form(_chart0_module_matrix(sub))
        for zeta in connection_zeta_forms(structure, sub):
            if not in_column_span(hnf, list(zeta)):
                return False
        return True
    raise RingError(f"unknown structure {structure!r}")


# ---------------------------------------------------------------------------
# invariant subsheaf enumeration


def all_forms(p: int, degree: int):
    """All binary forms of the given degree, zero included."""
    if degree < 0:
        yield BinaryForm.zero(p)
        return
    for coeffs in itertools.product(range(p), repeat=degree + 1):
        yield BinaryForm(p, degree, coeffs) if any(coeffs) else BinaryForm.zero(p)


def _line_candidates_higgs(theta: TwistedField, f: int):
    """Saturated theta-invariant line subsheaves of degree exactly f.

    Complete for F_p-rational lines: an invariant saturated line O(f)
    satisfies theta(phi) = g phi for a global eigenform g of degree k.
    """
    p, E, k = theta.p, theta.E, theta.k
    space = ColumnSpace(p, E, f)
    if space.dim == 0:
        return
    out_space = ColumnSpace(p, E, f, k)
    basis_images = []
    for n in range(space.dim):
        vec = [0] * space.dim
        vec[n] = 1
        col = space.to_column(vec)
        basis_images.append(out_space.from_column(theta.zeta_column(col, f)))
    seen = set()
    for g in all_forms(p, k):
        rows = []
        for n in range(space.dim):
            vec = [0] * space.dim
            vec[n] = 1
            col = space.to_column(vec)
            gcol = tuple(g * e for e in col)
            diff = [
                (a - b) % p
                for a, b in zip(basis_images[n], out_space.from_column(gcol))
            ]
            rows.append(diff)
        eq_rows = [[rows[n][coord] for n in range(space.dim)] for coord in range(out_space.dim)]
        ns = nullspace(eq_rows, space.dim, p)
        for vec in lines_of_space(ns, p):
            tup = tuple(vec)
            if tup in seen:
                continue
            seen.add(tup)
            col = space.to_column(vec)
            if form_gcd(col).degree != 0:
                continue  # not saturated; found at its saturated degree instead
            yield col


def _line_candidates_connection(conn: P1Connection, f: int):
    """Saturated nabla-invariant line subsheaves of degree exactly f.

    The induced connection coefficient g0 on an invariant O(f) is a chart
    polynomial of degree <= max(k, deg beta - 1).
    """
    p, E, k = conn.p, conn.E, conn.k
    space = ColumnSpace(p, E, f)
    if space.dim == 0:
        return
    g_bound = max(k, (conn.beta.degree or 0) - 1 if not conn.beta.is_zero() else 0)
    # polynomial output coordinates: bound the x-degree of zeta entries
    max_out = max(
        [
            (E.degrees[i] - f)
            + max(
                (conn.beta.degree - 1) if not conn.beta.is_zero() else 0,
                0,
            )
            for i in range(E.rank)
            if E.degrees[i] - f >= 0
        ]
        + [
            (E.degrees[j] - f) + (conn.C[i][j].degree or 0)
            for i in range(E.rank)
            for j in range(E.rank)
            if E.degrees[j] - f >= 0 and not conn.C[i][j].is_zero()
        ]
        + [g_bound + max(d for d in (E.degrees[i] - f for i in range(E.rank)) if d >= 0)]
    )

    def poly_coords(polys):
        # all rank slots are kept: where the column slot is empty the
        # eigen equation degenerates to the vanishing of zeta there
        vec = []
        for i in range(E.rank):
            cs = [c.value for c in polys[i].coeffs]
            if len(cs) > max_out + 1:
                raise RingError("zeta degree bound miscomputed: internal breach")
            cs += [0] * (max_out + 1 - len(cs))
            vec.extend(cs)
        return vec

    basis_cols = []
    basis_zetas = []
    for n in range(space.dim):
        vec = [0] * space.dim
        vec[n] = 1
        col = space.to_column(vec)
        basis_cols.append(col)
        polys = conn.zeta_poly([e.dehomogenize() for e in col])
        basis_zetas.append(polys)
    seen = set()
    for g_coeffs in itertools.product(range(p), repeat=g_bound + 1):
        g = poly(list(g_coeffs), conn.field)
        rows = []
        for n in range(space.dim):
            gcol = [g * e.dehomogenize() for e in basis_cols[n]]
            diff = [a - b for a, b in zip(basis_zetas[n], gcol)]
            rows.append(poly_coords(diff))
        eq_rows = [[rows[n][coord] for n in range(space.dim)] for coord in range(len(rows[0]))]
        ns = nullspace(eq_rows, space.dim, p)
        for vec in lines_of_space(ns, p):
            tup = tuple(vec)
            if tup in seen:
                continue
            seen.add(tup)
            col = space.to_column(vec)
            if form_gcd(col).degree != 0:
                continue
            yield col


@dataclass
class EnumerationNotice:
    complete: bool
    notes: list


def invariant_subsheaves(
    structure,
    E: SplitBundle,
    s: int,
    window: Tuple[int, int],
    p: Optional[int] = None,
    middle_cap: int = 200000,
):
    """Saturated rank-s invariant subsheaves with degree in the window.

    structure is a TwistedField, a P1Connection, or None (every subsheaf
    invariant).  The window's upper end is clamped to the completeness
    bound s * a_1.  Returns (list of SubsheafDesc, EnumerationNotice).
    """
    if isinstance(structure, TwistedField):
        p = structure.p
    elif isinstance(structure, P1Connection):
        p = structure.p
    elif p is None:
        raise RingError("plain-bundle enumeration needs the prime")
    r = E.rank
    if not 0 < s < r:
        raise RingError("subsheaf rank must satisfy 0 < s < rank E")
    lo, hi = window
    notice = EnumerationNotice(True, [])
    bound = s * E.degrees[0]
    if hi > bound:
        notice.notes.append(f"window clamped to completeness bound {bound}")
        hi = bound
    found = {}
    if s == 1:
        for f in range(hi, lo - 1, -1):
            for col in _iter_line_columns(structure, E, f, p):
                sub = saturate_columns(p, E, [(f, col)])
                if sub.degree != f:
                    continue
                found.setdefault(sub.key(), sub)
    elif s == r - 1:
        dual_structure = _dual_structure(structure)
        Ed = E.dual()
        dE = E.degree
        # F rank r-1 degree d  <->  dual line of degree d - deg E
        for f in range(hi, lo - 1, -1):
            h = f - dE
            if h > Ed.degrees[0]:
                continue
            for wcol in _iter_line_columns(dual_structure, Ed, h, p):
                line = SplitBundle((h,))
                incl = TwistedMap(p, line, Ed, 0, [[wcol[i]] for i in range(r)])
                ker = kernel_subsheaf(incl.transpose_dual())
                if ker.degree != f:
                    continue
                if not is_invariant(structure, ker):
                    raise RingError("dual-line kernel failed invariance: internal breach")
                found.setdefault(ker.key(), ker)
    else:
        subs, complete = _middle_rank_enumeration(structure, E, s, (lo, hi), p, middle_cap)
        if not complete:
            notice.complete = False
            notice.notes.append("middle-rank enumeration truncated (cap exceeded)")
        for sub in subs:
            found.setdefault(sub.key(), sub)
    subs = sorted(found.values(), key=lambda t: (-t.degree,) + t.sort_key())
    return subs, notice


def _iter_line_columns(structure, E: SplitBundle, f: int, p: int):
    if isinstance(structure, TwistedField) and not structure.is_zero():
        yield from _line_candidates_higgs(structure, f)
        return
    if isinstance(structure, P1Connection):
        yield from _line_candidates_connection(structure, f)
        return
    # plain bundle (or zero field): every column is invariant
    space = ColumnSpace(p, E, f)
    if space.dim == 0:
        return
    basis = [[1 if i == n else 0 for i in range(space.dim)] for n in range(space.dim)]
    for vec in lines_of_space(basis, p):
        col = space.to_column(vec)
        if form_gcd(col).degree != 0:
            continue
        yield col


def _dual_structure(structure):
    if structure is None:
        return None
    if isinstance(structure, TwistedField):
        if structure.is_zero():
            return None
        return TwistedField(structure.map.transpose_dual())
    if isinstance(structure, P1Connection):
        return structure.dual()
    raise RingError("unknown structure")


def _middle_rank_enumeration(structure, E, s, window, p, cap):
    """Rank-s enumeration for 1 < s < r-1 via eigenmatrix search.

    theta-invariance of F with inclusion M reads theta M = M G for an
    endomorphism-valued eigenmatrix G on F; iterating over the finite
    G-space makes the condition linear in M.  Feasible only for small
    G-spaces; the boolean in the result marks completeness.
    """
    lo, hi = window
    out = []
    complete = True
    for total in range(hi, lo - 1, -1):
        for fvec in _degree_vectors(total, s, E.degrees[0]):
            F = SplitBundle(fvec)
            if isinstance(structure, TwistedField) and not structure.is_zero():
                k = structure.k
                gdims = []
                for u in range(s):
                    for v in range(s):
                        d = fvec[u] + k - fvec[v]
                        gdims.append(max(0, d + 1))
                if p ** sum(gdims) > cap:
                    complete = False
                    continue
                for G in _iter_twisted_maps(p, F, F, k, cap):
                    out.extend(_solve_inclusions(structure, E, F, G))
            elif structure is None or (
                isinstance(structure, TwistedField) and structure.is_zero()
            ):
                # plain: saturate spans of s line columns found per summand
                subs = _plain_rank_s(p, E, F)
                out.extend(subs)
            else:
                complete = False
    return out, complete


def _degree_vectors(total: int, s: int, dmax: int):
    """Non-increasing tuples (f_1 >= ... >= f_s) with sum total, f_1 <= dmax."""
    if s == 1:
        if total <= dmax:
            yield (total,)
        return
    lo = -((-total) // s)  # f_1 >= ceil(total / s)
    for first in range(dmax, lo - 1, -1):
        for tail in _degree_vectors(total - first, s - 1, first):
            yield (first,) + tail


def _iter_twisted_maps(p, src, dst, twist, cap):
    spaces = []
    for u in range(dst.rank):
        for v in range(src.rank):
            d = dst.degrees[u] + twist - src.degrees[v]
            spaces.append((u, v, max(0, d + 1), max(d, 0)))
    total_dim = sum(c for _, _, c, _ in spaces)
    if p**total_dim > cap:
        return
    for combo in itertools.product(range(p), repeat=total_dim):
        rows = [[BinaryForm.zero(p)] * src.rank for _ in range(dst.rank)]
        pos = 0
        for (u, v, cnt, d) in spaces:
            coeffs = combo[pos : pos + cnt]
            pos += cnt
            if cnt and any(coeffs):
                rows[u][v] = BinaryForm(p, d, coeffs)
        yield TwistedMap(p, src, dst, twist, rows)


def _solve_inclusions(theta: TwistedField, E, F, G: TwistedMap):
    """Solve theta M = M G linearly in M and keep saturated solutions."""
    p = theta.p
    out = []
    spaces = [ColumnSpace(p, E, F.degrees[c]) for c in range(F.rank)]
    dims = [sp.dim for sp in spaces]
    total = sum(dims)
    if total == 0:
        return out
    out_spaces = [ColumnSpace(p, E, F.degrees[c], theta.k) for c in range(F.rank)]
    rows = []
    for c in range(F.rank):
        for coord in range(out_spaces[c].dim):
            rows.append([0] * total)
    # build: for unknown coefficient n of column c: theta*col contribution;
    # minus (M G) column c = sum_d M_d * G[d][c]
    row_offsets = []
    acc = 0
    for c in range(F.rank):
        row_offsets.append(acc)
        acc += out_spaces[c].dim
    col_offsets = []
    acc = 0
    for c in range(F.rank):
        col_offsets.append(acc)
        acc += dims[c]
    for c in range(F.rank):
        for n in range(dims[c]):
            vec = [0] * dims[c]
            vec[n] = 1
            col = spaces[c].to_column(vec)
            img = theta.zeta_column(col, F.degrees[c])
            coords = out_spaces[c].from_column(img)
            for coord, val in enumerate(coords):
                rows[row_offsets[c] + coord][col_offsets[c] + n] = val % p
            # subtract M_c * G[c][d] contribution into column d
            for d in range(F.rank):
                g = G.entries[c][d]
                if g.is_zero():
                    continue
                scaled = tuple(g * e for e in col)
                coords2 = out_spaces[d].from_column(scaled)
                for coord, val in enumerate(coords2):
                    rows[row_offsets[d] + coord][col_offsets[c] + n] = (
                        rows[row_offsets[d] + coord][col_offsets[c] + n] - val
                    ) % p
    ns = nullspace(rows, total, p)
    # each nullspace vector encodes a full candidate inclusion matrix M
    for vec in lines_of_space(ns, p):
        cols = []
        for c in range(F.rank):
            cols.append((F.degrees[c], spaces[c].to_column(vec[col_offsets[c] : col_offsets[c] + dims[c]])))
        try:
            sub = saturate_columns(p, E, cols)
        except RingError:
            continue
        if sub.rank != F.rank or sub.degree != F.degree:
            continue
        if is_invariant(theta, sub):
            out.append(sub)
    return out


def _plain_rank_s(p, E, F):
    """All saturated rank-s subsheaves with the given splitting when theta = 0.

    Only used as a fallback for middle ranks of plain bundles; spans of
    line columns of the prescribed degrees, saturated and filtered.
    """
    out = []
    line_sets = []
    for f in set(F.degrees):
        space = ColumnSpace(p, E, f)
        basis = [[1 if i == n else 0 for i in range(space.dim)] for n in range(space.dim)]
        line_sets.append((f, [space.to_column(v) for v in lines_of_space(basis, p)]))
    line_dict = dict(line_sets)
    pools = [line_dict[f] for f in F.degrees]
    seen = set()
    for combo in itertools.product(*pools):
        cols = list(zip(F.degrees, combo))
        try:
            sub = saturate_columns(p, E, cols)
        except RingError:
            continue
        if sub.rank != F.rank or sub.degree != F.degree:
            continue
        if sub.key() in seen:
            continue
        seen.add(sub.key())
        out.append(sub)
    return out


# ---------------------------------------------------------------------------
# maximal destabilizer / Harder-Narasimhan


def _ceil_fraction(fr: Fraction) -> int:
    return -((-fr.numerator) // fr.denominator)


def _is_plain(structure) -> bool:
    return structure is None or (isinstance(structure, TwistedField) and structure.is_zero())


def coordinate_subsheaf(p: int, E: SplitBundle, indices) -> SubsheafDesc:
    """Canonicalized span of a set of coordinate summands."""
    cols = []
    for i in sorted(indices):
        col = tuple(
            BinaryForm.constant(p, 1) if r == i else BinaryForm.zero(p)
            for r in range(E.rank)
        )
        cols.append((E.degrees[i], col))
    return saturate_columns(p, E, cols)


def maximal_destabilizer(structure, E: SplitBundle, p: Optional[int] = None) -> Optional[SubsheafDesc]:
    """The invariant subsheaf of maximal slope, then maximal rank.

    Returns None when E is semistable (no proper invariant subsheaf has
    slope > mu(E); ties at mu(E) itself leave E semistable and E is the
    maximal destabilizer by the rank tie-break).
    """
    if isinstance(structure, (TwistedField, P1Connection)):
        p = structure.p
    if p is None:
        raise RingError("need the prime for plain bundles")
    if _is_plain(structure):
        # every subsheaf is invariant: the destabilizer is the span of the
        # top-degree summands
        top = [i for i, d in enumerate(E.degrees) if d == E.degrees[0]]
        if len(top) == E.rank:
            return None
        return coordinate_subsheaf(p, E, top)
    r = E.rank
    mu = E.slope
    best = None
    for s in range(1, r):
        lo = _ceil_fraction(Fraction(s) * mu)
        hi = s * E.degrees[0]
        if hi < lo:
            continue
        subs, _ = invariant_subsheaves(structure, E, s, (lo, hi), p=p)
        for sub in subs:
            if sub.slope <= mu:
                continue
            if best is None:
                best = sub
                continue
            better = (sub.slope, sub.rank) > (best.slope, best.rank)
            tie = (sub.slope, sub.rank) == (best.slope, best.rank)
            if better or (tie and sub.sort_key() < best.sort_key()):
                best = sub
    return best


def is_semistable(structure, E: SplitBundle, p: Optional[int] = None) -> bool:
    return maximal_destabilizer(structure, E, p=p) is None


def hn_filtration(structure, E: SplitBundle, p: Optional[int] = None):
    """Iterated maximal destabilizer; returns (steps, slopes).

    steps is the strictly increasing chain of proper invariant subsheaves
    F_1 < F_2 < ... (empty when E is semistable); slopes lists the slopes
    of the successive quotients, strictly decreasing, ending with the last
    quotient's slope.
    """
    if isinstance(structure, (TwistedField, P1Connection)):
        p = structure.p
    steps: List[SubsheafDesc] = []
    if _is_plain(structure):
        distinct = sorted(set(E.degrees), reverse=True)
        for d in distinct[:-1]:
            steps.append(
                coordinate_subsheaf(p, E, [i for i, e in enumerate(E.degrees) if e >= d])
            )
    else:
        first = maximal_destabilizer(structure, E, p=p)
        if first is None:
            return [], [E.slope]
        steps.append(first)
        while True:
            prev = steps[-1]
            nxt = _next_hn_step(structure, E, prev, p)
            if nxt is None:
                break
            steps.append(nxt)
    if not steps:
        return [], [E.slope]
    slopes = []
    prev_deg, prev_rank = 0, 0
    for sub in steps:
        slopes.append(Fraction(sub.degree - prev_deg, sub.rank - prev_rank))
        prev_deg, prev_rank = sub.degree, sub.rank
    slopes.append(Fraction(E.degree - prev_deg, E.rank - prev_rank))
    return steps, slopes


def _next_hn_step(structure, E: SplitBundle, prev: SubsheafDesc, p):
    """Maximal destabilizer of E/prev, pulled back to a subsheaf of E."""
    r = E.rank
    mu_quot = Fraction(E.degree - prev.degree, E.rank - prev.rank)
    best = None
    best_rel = None
    for s in range(prev.rank + 1, r):
        lo = prev.degree + _ceil_fraction(Fraction(s - prev.rank) * mu_quot)
        hi = s * E.degrees[0]
        if hi < lo:
            continue
        subs, _ = invariant_subsheaves(structure, E, s, (lo, hi), p=p)
        for sub in subs:
            if not contains(sub, prev):
                continue
            rel = Fraction(sub.degree - prev.degree, sub.rank - prev.rank)
            if rel <= mu_quot:
                continue
            key = (rel, sub.rank)
            if best is None or key > best_rel or (
                key == best_rel and sub.sort_key() < best.sort_key()
            ):
                best = sub
                best_rel = key
    return best


# ---------------------------------------------------------------------------
# Hodge gradings


@dataclass(frozen=True)
class HodgeGrading:
    """Weights per summand index; theta maps weight w into weight w-1."""

    weights: tuple

    def classes(self):
        out = {}
        for i, w in enumerate(self.weights):
            out.setdefault(w, []).append(i)
        return dict(sorted(out.items()))


def detect_hodge(theta: TwistedField) -> Optional[HodgeGrading]:
    """Find a weight grading of the summands making theta weight-lowering.

    Nonzero entries force weight(target) = weight(source) - 1; the
    constraint graph either is consistent (grading, normalized with
    minimum weight 0 per connected component) or has no grading.
    """
    r = theta.E.rank
    adj = {i: [] for i in range(r)}
    for i in range(r):
        for j in range(r):
            if not theta.map.entries[i][j].is_zero():
                # source summand j maps into target summand i: w_i = w_j - 1
                adj[j].append((i, -1))
                adj[i].append((j, +1))
    weights = [None] * r
    for start in range(r):
        if weights[start] is not None:
            continue
        weights[start] = 0
        comp = [start]
        queue = [start]
        while queue:
            u = queue.pop(0)
            for v, delta in adj[u]:
                w = weights[u] + delta
                if weights[v] is None:
                    weights[v] = w
                    comp.append(v)
                    queue.append(v)
                elif weights[v] != w:
                    return None
        shift = min(weights[i] for i in comp)
        for i in comp:
            weights[i] -= shift
    return HodgeGrading(tuple(weights))


def weight_projection(p: int, E: SplitBundle, grading: HodgeGrading, w: int) -> TwistedMap:
    one = BinaryForm.constant(p, 1)
    z = BinaryForm.zero(p)
    return TwistedMap(
        p,
        E,
        E,
        0,
        [
            [one if (i == j and grading.weights[i] == w) else z for j in range(E.rank)]
            for i in range(E.rank)
        ],
    )


def is_graded_subsheaf(sub: SubsheafDesc, grading: HodgeGrading) -> bool:
    """Whether the subsheaf decomposes along the weight grading."""
    p = sub.incl.p
    E = sub.parent
    cols = []
    for c in range(sub.rank):
        col = sub.incl.column(c)
        for w in set(grading.weights):
            proj = weight_projection(p, E, grading, w)
            pc = tuple(_form_dot(p, proj.entries[i], col) for i in range(E.rank))
            if any(not e.is_zero() for e in pc):
                cols.append((sub.bundle.degrees[c], pc))
    span = saturate_columns(p, E, cols)
    if span.rank != sub.rank or span.degree != sub.degree:
        return False
    return contains(sub, span) and contains(span, sub)


def graded_pieces_of_subsheaf(sub: SubsheafDesc, grading: HodgeGrading):
    """For a graded subsheaf B: the pieces B_w = B cap E_w as subsheaves."""
    p = sub.incl.p
    E = sub.parent
    pieces = {}
    for w in sorted(set(grading.weights)):
        proj = weight_projection(p, E, grading, w)
        cols = []
        for c in range(sub.rank):
            col = sub.incl.column(c)
            pc = tuple(_form_dot(p, proj.entries[i], col) for i in range(E.rank))
            if any(not e.is_zero() for e in pc):
                cols.append((sub.bundle.degrees[c], pc))
        if cols:
            piece = saturate_columns(p, E, cols)
            pieces[w] = piece
    return pieces


# ---------------------------------------------------------------------------
# Hitchin invariants


def hitchin_invariants(theta: TwistedField):
    """sigma_i = (-1)^i tr(wedge^i theta), a form of degree i*k.

    These are the coefficients of det(T I - theta) = T^r + sigma_1 T^{r-1}
    + ... + sigma_r.
    """
    p, E, k = theta.p, theta.E, theta.k
    r = E.rank
    out = []
    for i in range(1, r + 1):
        acc = BinaryForm.zero(p)
        for rows_set in itertools.combinations(range(r), i):
            sub = [[theta.map.entries[a][b] for b in rows_set] for a in rows_set]
            d = _form_det(p, sub)
            if not d.is_zero():
                acc = acc + d if not acc.is_zero() else d
        sigma_i = acc * ((-1) ** i)
        if not sigma_i.is_zero() and sigma_i.degree != i * k:
            raise RingError("hitchin invariant degree bookkeeping failed")
        out.append(sigma_i)
    return out


def char_poly_at_fiber(p: int, mat_rows) -> list:
    """Coefficients (sigma_1..sigma_r) of det(T I - M) for an F_p matrix."""
    ring = PolyRing(PrimeField(p))
    r = len(mat_rows)
    T = ring.x
    entries = [
        [
            (T if i == j else ring.zero) - ring.elem(int(mat_rows[i][j]))
            for j in range(r)
        ]
        for i in range(r)
    ]
    m = Matrix(entries, ring)
    cp = m.det()
    coeffs = list(cp.coeffs) + [PrimeField(p).zero] * (r + 1 - len(cp.coeffs))
    # cp = T^r + sigma_1 T^{r-1} + ...: coefficient of T^{r-i} is sigma_i
    return [coeffs[r - i] for i in range(1, r + 1)]


def sample_fibers(p: int, count: int = 5):
    """Sample points of P^1(F_p): affine x0=1 points first, then infinity."""
    pts = [(1, x1) for x1 in range(p)] + [(0, 1)]
    return pts[:count] if count <= len(pts) else pts


def cayley_hamilton_check(theta: TwistedField, fibers=None) -> bool:
    """Fiberwise: M^r + sum sigma_i(pt) M^{r-i} = 0 at sample points."""
    p = theta.p
    r = theta.E.rank
    sigmas = hitchin_invariants(theta)
    fibers = sample_fibers(p) if fibers is None else fibers
    field = PrimeField(p)
    for (x0, x1) in fibers:
        m = Matrix([[int(v) for v in row] for row in theta.map.evaluate(x0, x1)], field)
        acc = m**r
        pow_cache = [Matrix.identity(r, field)]
        for _ in range(r):
            pow_cache.append(pow_cache[-1] * m)
        for i, s in enumerate(sigmas, start=1):
            acc = acc + pow_cache[r - i].scale(field.elem(s.evaluate(x0, x1)))
        if not acc.is_zero():
            return False
    return True
