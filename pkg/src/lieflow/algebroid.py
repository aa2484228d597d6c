"""Lie algebroids and restricted Lie algebroids on an affine chart.

A chart algebroid is a free module of rank m over F_p[x] (or over
(F_p[t]/(t^N))[x] for deformed families) with anchor vector fields
a_i(x) d/dx, a bracket table with polynomial coefficients, and optionally
a p-th power operation on the basis.  Elements are coordinate tuples of
dense polynomials; brackets and p-powers of non-basis sections are
computed from the Leibniz rule and the restricted axioms, never stored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from .liealg import LieAlgebra
from .matrices import Matrix, hermite_column_form, hnf_reduce, smith_saturation
from .reports import ValidationReport
from .scalars import (
    DensePoly,
    PolyRing,
    PrimeField,
    RingError,
    SeriesRing,
    TruncSeries,
    poly,
    poly_x,
)

Element = tuple  # coordinate vector of DensePoly


class AlgebroidChart:
    """(L, bracket, anchor, optional p-operation) over an affine chart."""

    def __init__(self, ring, rank: int, anchor: Sequence[DensePoly], bracket, pop=None):
        if not isinstance(ring, (PrimeField, SeriesRing)):
            raise RingError("chart coefficients must be F_p or a truncated series ring")
        self.ring = ring
        self.p = ring.p
        self.rank = rank
        self.poly_ring = PolyRing(ring)
        self.anchor = tuple(self.poly_ring.elem(a) for a in anchor)
        self.bracket_table = tuple(
            tuple(tuple(self.poly_ring.elem(c) for c in vec) for vec in row) for row in bracket
        )
        if len(self.anchor) != rank or len(self.bracket_table) != rank:
            raise RingError("anchor/bracket shape mismatch")
        for row in self.bracket_table:
            if len(row) != rank or any(len(v) != rank for v in row):
                raise RingError("bracket table shape mismatch")
        if pop is None:
            self.pop = None
        else:
            self.pop = tuple(tuple(self.poly_ring.elem(c) for c in vec) for vec in pop)
            if len(self.pop) != rank or any(len(v) != rank for v in self.pop):
                raise RingError("p-operation table shape mismatch")

    # -- elements ----------------------------------------------------------

    def zero(self) -> Element:
        return (self.poly_ring.zero,) * self.rank

    def basis(self, i: int) -> Element:
        return tuple(self.poly_ring.one if j == i else self.poly_ring.zero for j in range(self.rank))

    def add(self, u: Element, v: Element) -> Element:
        return tuple(a + b for a, b in zip(u, v))

    def sub(self, u: Element, v: Element) -> Element:
        return tuple(a - b for a, b in zip(u, v))

    def smul(self, f, u: Element) -> Element:
        f = self.poly_ring.elem(f)
        return tuple(f * a for a in u)

    def is_zero(self, u: Element) -> bool:
        return all(a.is_zero() for a in u)

    def anchor_of(self, u: Element) -> DensePoly:
        """Coefficient b(x) of the vector field alpha(u) = b(x) d/dx."""
        acc = self.poly_ring.zero
        for f, a in zip(u, self.anchor):
            acc = acc + f * a
        return acc

    def apply_anchor(self, u: Element, f: DensePoly) -> DensePoly:
        return self.anchor_of(u) * self.poly_ring.elem(f).derivative()

    # -- bracket and p-power -----------------------------------------------

    def bracket(self, u: Element, v: Element) -> Element:
        """Extended bracket via the Leibniz rule:
        [f e_i, g e_j] = f a_i g' e_j - g a_j f' e_i + f g [e_i, e_j]."""
        out = list(self.zero())
        for i, f in enumerate(u):
            if f.is_zero():
                continue
            for j, g in enumerate(v):
                if g.is_zero():
                    continue
                fg = f * g
                out[j] = out[j] + f * self.anchor[i] * g.derivative()
                out[i] = out[i] - g * self.anchor[j] * f.derivative()
                for k, c in enumerate(self.bracket_table[i][j]):
                    out[k] = out[k] + fg * c
        return tuple(out)

    def derivation_p_power(self, a: DensePoly) -> DensePoly:
        """(a d/dx)^p as a derivation: returns b with (a d/dx)^p = b d/dx.

        b = (a d/dx)^p (x); Hochschild's identity guarantees the p-fold
        composition of a derivation is again a derivation in char p.
        """
        x = poly_x(self.ring)
        g = x
        for _ in range(self.p):
            g = a * g.derivative()
        return g

    def derivation_p_power_checked(self, a: DensePoly, probe_bound: Optional[int] = None):
        """As above, plus verification on monomials x^n for n <= probe_bound."""
        b = self.derivation_p_power(a)
        bound = 3 * self.p if probe_bound is None else probe_bound
        x = poly_x(self.ring)
        for n in range(bound + 1):
            g = x**n
            for _ in range(self.p):
                g = a * g.derivative()
            if g != b * (x**n).derivative():
                raise RingError(f"(a d/dx)^p fails the derivation property on x^{n}")
        return b

    def s_polynomial_sum(self, u: Element, v: Element) -> Element:
        """sum_{0<j<p} s_j(u, v) with ad the extended bracket."""
        total = self.zero()
        pair = (u, v)
        p = self.p
        for sigma in itertools.product((0, 1), repeat=p - 1):
            j = sigma.count(0)
            if j == 0:
                continue
            w = v
            for idx in reversed(sigma):
                w = self.bracket(pair[idx], w)
            coeff = (-pow(j, p - 2, p)) % p
            total = self.add(total, self.smul(coeff, w))
        return total

    def p_power(self, u: Element) -> Element:
        """p-th power of a section, from the restricted axioms.

        (f e_i)^[p] = f^p e_i^[p] + (f a_i d/dx)^{p-1}(f) e_i, and sums are
        handled with axiom 3.  Requires the p-operation table.
        """
        if self.pop is None:
            raise RingError("p-operation table missing")
        terms = [(f, i) for i, f in enumerate(u) if not f.is_zero()]
        return self._p_power_terms(terms)

    def _p_power_terms(self, terms) -> Element:
        if not terms:
            return self.zero()
        f, i = terms[0]
        head_pow = self.smul(f**self.p, self.pop[i])
        # (f a_i d/dx)^{p-1} applied to f
        g = f
        fa = f * self.anchor[i]
        for _ in range(self.p - 1):
            g = fa * g.derivative()
        head_pow = self.add(head_pow, self.smul(g, self.basis(i)))
        if len(terms) == 1:
            return head_pow
        head = self.smul(f, self.basis(i))
        tail = self.zero()
        for g2, k in terms[1:]:
            tail = self.add(tail, self.smul(g2, self.basis(k)))
        rest = self._p_power_terms(terms[1:])
        return self.add(self.add(head_pow, rest), self.s_polynomial_sum(head, tail))

    def __repr__(self):
        return f"AlgebroidChart(rank={self.rank}, ring={self.ring}, restricted={self.pop is not None})"


# ---------------------------------------------------------------------------
# standard charts


def tangent_chart(p: int) -> AlgebroidChart:
    """T_{A^1}: rank 1, anchor d/dx, trivial bracket, d/dx^[p] = 0."""
    ring = PrimeField(p)
    pr = PolyRing(ring)
    return AlgebroidChart(ring, 1, [pr.one], [[(pr.zero,)]], pop=[(pr.zero,)])


def log_chart(p: int) -> AlgebroidChart:
    """Rank 1 with anchor x d/dx; (x d/dx)^[p] = x d/dx by Fermat."""
    ring = PrimeField(p)
    pr = PolyRing(ring)
    return AlgebroidChart(ring, 1, [pr.x], [[(pr.zero,)]], pop=[(pr.one,)])


def trivial_chart(p: int, rank: int, restricted: bool = True) -> AlgebroidChart:
    ring = PrimeField(p)
    pr = PolyRing(ring)
    z = pr.zero
    zvec = (z,) * rank
    return AlgebroidChart(
        ring,
        rank,
        [z] * rank,
        [[zvec] * rank for _ in range(rank)],
        pop=[zvec] * rank if restricted else None,
    )


def from_lie_algebra(L: LieAlgebra) -> AlgebroidChart:
    """Constant-coefficient algebroid with zero anchor (a sheaf of Lie algebras)."""
    ring = PrimeField(L.p)
    pr = PolyRing(ring)
    z = pr.zero
    bracket = [
        [tuple(pr.elem(c) for c in L.bracket_table[i][j]) for j in range(L.dim)]
        for i in range(L.dim)
    ]
    return AlgebroidChart(ring, L.dim, [z] * L.dim, bracket)


# ---------------------------------------------------------------------------
# validation

PROBE_EXPONENTS = (0, 1, 2, 3)  # monomial probes 1, x, x^2, x^3


def _probes(chart: AlgebroidChart):
    x = poly_x(chart.ring)
    return [x**n for n in PROBE_EXPONENTS]


def validate_algebroid(L: AlgebroidChart) -> ValidationReport:
    """Antisymmetry, Jacobi (with polynomial coefficients), Leibniz on
    monomial probes, and the anchor homomorphism property."""
    rep = ValidationReport(subject="algebroid axioms")
    rep.meta["probe_exponents"] = list(PROBE_EXPONENTS)
    m = L.rank
    for i in range(m):
        ok = L.is_zero(tuple(c for c in L.bracket_table[i][i]))
        rep.add(f"alternating ({i},{i})", ok)
    for i, j in itertools.combinations(range(m), 2):
        s = L.add(
            tuple(L.bracket_table[i][j]),
            tuple(L.bracket_table[j][i]),
        )
        rep.add(f"antisymmetry ({i},{j})", L.is_zero(s))
    for i, j, k in itertools.combinations_with_replacement(range(m), 3):
        x, y, z = L.basis(i), L.basis(j), L.basis(k)
        jac = L.add(
            L.add(L.bracket(x, L.bracket(y, z)), L.bracket(y, L.bracket(z, x))),
            L.bracket(z, L.bracket(x, y)),
        )
        rep.add(f"jacobi basis ({i},{j},{k})", L.is_zero(jac))
    probes = _probes(L)
    # Jacobi with polynomial coefficients on a small probe set
    probe_jac_ok = True
    for i, j in itertools.combinations_with_replacement(range(m), 2):
        for f, g in itertools.product(probes[1:3], repeat=2):
            x, y, z = L.smul(f, L.basis(i)), L.smul(g, L.basis(j)), L.basis((i + 1) % m)
            jac = L.add(
                L.add(L.bracket(x, L.bracket(y, z)), L.bracket(y, L.bracket(z, x))),
                L.bracket(z, L.bracket(x, y)),
            )
            if not L.is_zero(jac):
                probe_jac_ok = False
                rep.add(f"jacobi probes ({i},{j})", False, f"f={f}, g={g}")
    rep.add("jacobi with polynomial coefficients", probe_jac_ok)
    # Leibniz on probes
    leib_ok = True
    for i, j in itertools.product(range(m), repeat=2):
        for f in probes:
            lhs = L.bracket(L.basis(i), L.smul(f, L.basis(j)))
            rhs = L.add(
                L.smul(L.anchor[i] * f.derivative(), L.basis(j)),
                L.smul(f, tuple(L.bracket_table[i][j])),
            )
            if lhs != rhs:
                leib_ok = False
    rep.add("leibniz rule on probes", leib_ok)
    # anchor is a bracket homomorphism
    anch_ok = True
    for i, j in itertools.product(range(m), repeat=2):
        for f, g in [(probes[0], probes[0]), (probes[1], probes[2])]:
            u, v = L.smul(f, L.basis(i)), L.smul(g, L.basis(j))
            au, av = L.anchor_of(u), L.anchor_of(v)
            lie = au * av.derivative() - av * au.derivative()
            if L.anchor_of(L.bracket(u, v)) != lie:
                anch_ok = False
    rep.add("anchor homomorphism", anch_ok)
    return rep


def validate_restricted(L: AlgebroidChart) -> ValidationReport:
    """Restricted axioms: anchor respects p-powers (p-fold composition
    oracle), Hochschild scaling on monomial probes, and ad(e^[p]) = ad(e)^p."""
    rep = ValidationReport(subject="restricted algebroid axioms")
    if L.pop is None:
        raise RingError("p-operation table missing")
    m, p = L.rank, L.p
    probes = _probes(L)
    for i in range(m):
        b = L.derivation_p_power_checked(L.anchor[i])
        rep.add(
            f"anchor(e{i}^[p]) = anchor(e{i})^p",
            L.anchor_of(L.pop[i]) == b,
            f"expected {b}",
        )
    # Hochschild: alpha((f e_i)^[p]) = (f a_i d/dx)^p for probe f
    hoch_ok = True
    for i in range(m):
        for f in probes:
            u = L.smul(f, L.basis(i))
            lhs = L.anchor_of(L.p_power(u))
            rhs = L.derivation_p_power(f * L.anchor[i])
            if lhs != rhs:
                hoch_ok = False
    rep.add("hochschild scaling via anchor on probes", hoch_ok)
    # ad(e^[p]) = ad(e)^p on basis elements
    for i in range(m):
        ok = True
        for j in range(m):
            v = L.basis(j)
            lhs = L.bracket(L.pop[i], v)
            rhs = v
            for _ in range(p):
                rhs = L.bracket(L.basis(i), rhs)
            if lhs != rhs:
                ok = False
        rep.add(f"ad(e{i}^[p]) = ad(e{i})^p", ok)
    # additivity of the p-power on probe sums (axiom 3 cross-check)
    add_ok = True
    if m >= 2:
        for i, j in itertools.combinations(range(m), 2):
            for f, g in [(probes[0], probes[1]), (probes[1], probes[2])]:
                u, v = L.smul(f, L.basis(i)), L.smul(g, L.basis(j))
                lhs = L.p_power(L.add(u, v))
                rhs = L.add(L.add(L.p_power(u), L.p_power(v)), L.s_polynomial_sum(u, v))
                if lhs != rhs:
                    add_ok = False
    rep.add("p-power additivity with s_j correction", add_ok)
    return rep


# ---------------------------------------------------------------------------
# de Rham complex


class DeRhamElement:
    """Element of degree q of the de Rham complex of the algebroid.

    Coefficients are indexed by sorted q-subsets of the basis index set.
    """

    def __init__(self, chart: AlgebroidChart, degree: int, coeffs: Optional[dict] = None):
        self.chart = chart
        self.degree = degree
        self.coeffs = {}
        if coeffs:
            for key, val in coeffs.items():
                key = tuple(sorted(key))
                if len(key) != degree or len(set(key)) != degree:
                    raise RingError("de Rham index sets must be strict sorted subsets")
                v = chart.poly_ring.elem(val)
                if not v.is_zero():
                    self.coeffs[key] = v

    def coefficient(self, subset) -> DensePoly:
        return self.coeffs.get(tuple(sorted(subset)), self.chart.poly_ring.zero)

    def eval_indices(self, indices) -> DensePoly:
        """Evaluate with alternating sign normalization on a raw index list."""
        if len(set(indices)) != len(indices):
            return self.chart.poly_ring.zero
        order = tuple(sorted(indices))
        sign = _permutation_sign(indices)
        c = self.coefficient(order)
        return c if sign > 0 else -c

    def add(self, other: "DeRhamElement") -> "DeRhamElement":
        if other.degree != self.degree:
            raise RingError("degree mismatch")
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            s = out.get(k, self.chart.poly_ring.zero) + v
            if s.is_zero():
                out.pop(k, None)
            else:
                out[k] = s
        return DeRhamElement(self.chart, self.degree, out)

    def scale(self, f) -> "DeRhamElement":
        f = self.chart.poly_ring.elem(f)
        return DeRhamElement(
            self.chart, self.degree, {k: f * v for k, v in self.coeffs.items()}
        )

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        return (
            isinstance(other, DeRhamElement)
            and other.degree == self.degree
            and other.coeffs == self.coeffs
        )

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({v})de{list(k)}" for k, v in sorted(self.coeffs.items()))


def _permutation_sign(indices) -> int:
    sign = 1
    lst = list(indices)
    for i in range(len(lst)):
        for j in range(i + 1, len(lst)):
            if lst[i] > lst[j]:
                sign = -sign
    return sign


def de_rham_d(omega: DeRhamElement, L: AlgebroidChart) -> DeRhamElement:
    """The de Rham differential of the algebroid, evaluated on the dual basis.

    (d w)(l_1..l_{q+1}) = sum_i (-1)^{i+1} alpha_{l_i}(w(..l_i-hat..))
                        + sum_{i<j} (-1)^{i+j} w([l_i,l_j], ..hats..)
    """
    q = omega.degree
    out = {}
    for subset in itertools.combinations(range(L.rank), q + 1):
        acc = L.poly_ring.zero
        for s, i_s in enumerate(subset):
            rest = subset[:s] + subset[s + 1 :]
            term = L.anchor[i_s] * omega.coefficient(rest).derivative()
            acc = acc + term if s % 2 == 0 else acc - term
        for s, t in itertools.combinations(range(q + 1), 2):
            i_s, i_t = subset[s], subset[t]
            rest = tuple(v for r, v in enumerate(subset) if r not in (s, t))
            br = L.bracket_table[i_s][i_t]
            inner = L.poly_ring.zero
            for l, c in enumerate(br):
                if c.is_zero():
                    continue
                inner = inner + c * omega.eval_indices((l,) + rest)
            acc = acc + inner if (s + t + 2) % 2 == 0 else acc - inner
        if not acc.is_zero():
            out[subset] = acc
    return DeRhamElement(L, q + 1, out)


def wedge(a: DeRhamElement, b: DeRhamElement) -> DeRhamElement:
    L = a.chart
    out = {}
    for ka, va in a.coeffs.items():
        for kb, vb in b.coeffs.items():
            if set(ka) & set(kb):
                continue
            key = tuple(sorted(ka + kb))
            sign = _permutation_sign(ka + kb)
            term = va * vb if sign > 0 else -(va * vb)
            s = out.get(key, L.poly_ring.zero) + term
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
    return DeRhamElement(L, a.degree + b.degree, out)


def random_de_rham_element(L: AlgebroidChart, degree: int, rng, maxdeg: int = 3) -> DeRhamElement:
    out = {}
    for subset in itertools.combinations(range(L.rank), degree):
        out[subset] = poly([rng.randrange(L.p) for _ in range(maxdeg + 1)], L.ring)
    return DeRhamElement(L, degree, out)


# ---------------------------------------------------------------------------
# subalgebroid criterion


@dataclass
class SubalgebroidResult:
    verdict: str  # "not closed" | "subalgebroid" | "restricted subalgebroid"
    bracket_remainders: list
    p_power_remainders: list
    basis: Matrix
    saturated: bool


def subalgebroid_test(L: AlgebroidChart, generators: Matrix) -> SubalgebroidResult:
    """Ekedahl-type criterion for a submodule L' given by generator columns.

    Computes the induced maps wedge^2 L' -> L/L' and (if a p-operation is
    present) F*L' -> L/L'; L' is a (restricted) subalgebroid iff they
    vanish.  The criterion needs no saturation; whether L' is saturated in
    the ambient module is reported alongside.  The verdict depends only on
    the submodule, not on the generating set.
    """
    if not isinstance(L.ring, PrimeField):
        raise RingError("subalgebroid test requires an F_p chart")
    sat = hermite_column_form(generators)
    saturated = smith_saturation(generators) == sat
    cols = [tuple(sat.rows[i][j] for i in range(sat.nrows)) for j in range(sat.ncols)]
    bracket_rem = []
    closed = True
    for u, v in itertools.combinations(cols, 2):
        w = L.bracket(u, v)
        _, rem = hnf_reduce(sat, list(w))
        if any(not e.is_zero() for e in rem):
            closed = False
        bracket_rem.append(rem)
    p_rem = []
    restricted = None
    if L.pop is not None:
        restricted = True
        for u in cols:
            w = L.p_power(u)
            _, rem = hnf_reduce(sat, list(w))
            if any(not e.is_zero() for e in rem):
                restricted = False
            p_rem.append(rem)
    if not closed:
        verdict = "not closed"
    elif restricted:
        verdict = "restricted subalgebroid"
    else:
        verdict = "subalgebroid"
    return SubalgebroidResult(verdict, bracket_rem, p_rem, sat, saturated)


# ---------------------------------------------------------------------------
# deformation over the affine line


def lift_poly_to_series(f: DensePoly, sring: SeriesRing) -> DensePoly:
    return DensePoly([sring.elem([c.value]) for c in f.coeffs], sring)


def base_change_series(L: AlgebroidChart, order: int = 8) -> AlgebroidChart:
    """Constant-in-t lift of an F_p chart to k[t]/(t^order)."""
    if not isinstance(L.ring, PrimeField):
        raise RingError("base change starts from an F_p chart")
    sring = SeriesRing(L.p, order)
    anchor = [lift_poly_to_series(a, sring) for a in L.anchor]
    bracket = [
        [tuple(lift_poly_to_series(c, sring) for c in vec) for vec in row]
        for row in L.bracket_table
    ]
    pop = None
    if L.pop is not None:
        pop = [tuple(lift_poly_to_series(c, sring) for c in vec) for vec in L.pop]
    return AlgebroidChart(sring, L.rank, anchor, bracket, pop=pop)


def deform_over_line(L: AlgebroidChart, order: int = 8) -> AlgebroidChart:
    """The family L^R over k[t]/(t^order): bracket and anchor scale by t,
    the p-operation by t^(p-1).  t=1 recovers L, t=0 the trivial algebroid."""
    lifted = base_change_series(L, order)
    return twist_algebroid(lifted, SeriesRing(L.p, order).t)


def specialize(L_R: AlgebroidChart, t_value: int) -> AlgebroidChart:
    """Specialize a family over k[t]/(t^N) at t = t_value in F_p."""
    if not isinstance(L_R.ring, SeriesRing):
        raise RingError("specialize expects a chart over a series ring")
    field = PrimeField(L_R.p)

    def down(f: DensePoly) -> DensePoly:
        return DensePoly([c.at(t_value) for c in f.coeffs], field)

    anchor = [down(a) for a in L_R.anchor]
    bracket = [[tuple(down(c) for c in vec) for vec in row] for row in L_R.bracket_table]
    pop = None
    if L_R.pop is not None:
        pop = [tuple(down(c) for c in vec) for vec in L_R.pop]
    return AlgebroidChart(field, L_R.rank, anchor, bracket, pop=pop)


def twist_algebroid(L: AlgebroidChart, lam) -> AlgebroidChart:
    """lambda-twist: bracket and anchor scale by lambda, p-operation by
    lambda^(p-1).  lambda must live in the chart coefficient ring; for a
    series parameter deform the chart over k[t]/(t^N) first."""
    if isinstance(lam, TruncSeries) and not isinstance(L.ring, SeriesRing):
        raise RingError("series lambda requires a chart over the series ring; deform first")
    lam_poly = DensePoly([L.ring.elem(lam)], L.ring)
    anchor = [lam_poly * a for a in L.anchor]
    bracket = [
        [tuple(lam_poly * c for c in vec) for vec in row] for row in L.bracket_table
    ]
    pop = None
    if L.pop is not None:
        lp = lam_poly ** (L.p - 1)
        pop = [tuple(lp * c for c in vec) for vec in L.pop]
    return AlgebroidChart(L.ring, L.rank, anchor, bracket, pop=pop)
