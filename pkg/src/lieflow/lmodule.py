"""Modules over (restricted) Lie algebroids on a chart.

A module of rank n over a chart algebroid of rank m is given by action
matrices A_1..A_m over the chart polynomials: the generator e_i acts on a
column vector s of polynomials as nabla_{e_i}(s) = a_i(x) s' + A_i s.
Curvature, p-curvature, lambda-twisted connections and nilpotence levels
are computed by exact operator composition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .algebroid import AlgebroidChart, twist_algebroid
from .matrices import Matrix
from .reports import ValidationReport
from .scalars import DensePoly, PolyRing, RingError, poly_x

PolyVec = tuple  # column vector of DensePoly


class LModule:
    """Module over a chart algebroid, encoded by one action matrix per generator."""

    def __init__(self, algebroid: AlgebroidChart, mats: Sequence[Matrix]):
        self.algebroid = algebroid
        self.poly_ring = algebroid.poly_ring
        self.mats = tuple(mats)
        if len(self.mats) != algebroid.rank:
            raise RingError("need one action matrix per algebroid generator")
        n = self.mats[0].nrows if self.mats else 0
        for A in self.mats:
            if A.nrows != A.ncols or A.nrows != n:
                raise RingError("action matrices must be square of equal size")
            if A.ring != self.poly_ring:
                raise RingError("action matrix ring mismatch")
        self.rank = n

    def basis_vector(self, j: int) -> PolyVec:
        return tuple(
            self.poly_ring.one if i == j else self.poly_ring.zero for i in range(self.rank)
        )

    def apply(self, i: int, s: PolyVec) -> PolyVec:
        """nabla_{e_i}(s) = a_i s' + A_i s."""
        a = self.algebroid.anchor[i]
        derived = tuple(a * f.derivative() for f in s)
        acted = self.mats[i].apply(s)
        return tuple(d + v for d, v in zip(derived, acted))

    def apply_element(self, u, s: PolyVec) -> PolyVec:
        """nabla_u for u = sum f_i e_i: O_X-linear in u."""
        out = [self.poly_ring.zero] * self.rank
        for i, f in enumerate(u):
            if f.is_zero():
                continue
            v = self.apply(i, s)
            for r in range(self.rank):
                out[r] = out[r] + f * v[r]
        return tuple(out)

    def apply_power(self, i: int, s: PolyVec, n: int) -> PolyVec:
        for _ in range(n):
            s = self.apply(i, s)
        return s

    def operator_matrix_and_linearity(self, op, probe_exponents=(1, 2, 3)):
        """Extract the matrix of an O-linear operator and verify linearity.

        op maps PolyVec -> PolyVec.  The candidate matrix has columns
        op(e_j); O-linearity is checked on probes x^s e_j.
        """
        cols = [op(self.basis_vector(j)) for j in range(self.rank)]
        mat = Matrix([[cols[j][i] for j in range(self.rank)] for i in range(self.rank)], self.poly_ring)
        x = poly_x(self.algebroid.ring)
        linear = True
        for j in range(self.rank):
            for s in probe_exponents:
                xs = x**s
                probe = tuple(xs * c for c in self.basis_vector(j))
                got = op(probe)
                want = tuple(xs * c for c in cols[j])
                if got != want:
                    linear = False
        return mat, linear


def curvature(E: LModule) -> dict:
    """K(e_i, e_j) = [nabla_i, nabla_j] - nabla_{[e_i, e_j]} as matrices."""
    L = E.algebroid
    out = {}
    for i, j in itertools.combinations(range(L.rank), 2):
        def op(s, i=i, j=j):
            a = E.apply(i, E.apply(j, s))
            b = E.apply(j, E.apply(i, s))
            c = E.apply_element(L.bracket_table[i][j], s)
            return tuple(x - y - z for x, y, z in zip(a, b, c))

        mat, linear = E.operator_matrix_and_linearity(op)
        if not linear:
            raise RingError(f"curvature K(e{i},e{j}) failed O-linearity (inconsistent input)")
        out[(i, j)] = mat
    return out


def is_integrable(E: LModule) -> bool:
    return all(K.is_zero() for K in curvature(E).values())


@dataclass
class PCurvature:
    """psi(e_i) = nabla_{e_i}^p - nabla_{e_i^[p]} per generator, plus checks."""

    module: LModule
    mats: tuple
    report: ValidationReport = field(repr=False, default=None)

    def is_zero(self) -> bool:
        return all(m.is_zero() for m in self.mats)

    def adjoint_value(self, coeffs: Sequence[DensePoly]) -> Matrix:
        """psi_L(sum f_i x e_i) = sum f_i psi(e_i) for the F*L-twisted form.

        The adjoint map F*L -> End(E) is O-linear; coefficients of F*L pull
        back along x -> x^p, so psi(f e_i) = f^p psi(e_i) corresponds to
        psi_L(f^p x e_i) with the Frobenius substitution done by the caller.
        """
        acc = None
        for f, m in zip(coeffs, self.mats):
            term = m.map(lambda e, f=f: f * e)
            acc = term if acc is None else acc + term
        return acc


def p_curvature(E: LModule, check_integrable: bool = True) -> PCurvature:
    """p-fold composition of each nabla_{e_i}, minus nabla_{e_i^[p]}.

    Requires a restricted, validated algebroid and an integrable module.
    O-linearity of each psi(e_i) is verified on monomial probes; failure
    signals inconsistent input.
    """
    L = E.algebroid
    if L.pop is None:
        raise RingError("p-curvature requires a restricted algebroid")
    if check_integrable and not is_integrable(E):
        raise RingError("module is not integrable; p-curvature undefined")
    p = L.p
    rep = ValidationReport(subject="p-curvature")
    mats = []
    for i in range(L.rank):
        def op(s, i=i):
            a = E.apply_power(i, s, p)
            b = E.apply_element(L.pop[i], s)
            return tuple(x - y for x, y in zip(a, b))

        mat, linear = E.operator_matrix_and_linearity(op)
        rep.add(f"psi(e{i}) O-linear", linear)
        if not linear:
            raise RingError(f"psi(e{i}) failed O-linearity; input inconsistent")
        mats.append(mat)
    # commutation [psi(e_i), psi(e_j)] = 0 and [psi(e_i), nabla_j] = 0
    for i, j in itertools.combinations(range(L.rank), 2):
        rep.add(f"[psi(e{i}), psi(e{j})] = 0", mats[i].commutator(mats[j]).is_zero())
    x = poly_x(L.ring)
    for i, j in itertools.product(range(L.rank), repeat=2):
        ok = True
        for s_exp in (0, 1, 2):
            for r in range(E.rank):
                probe = tuple(
                    x**s_exp * c for c in E.basis_vector(r)
                )
                lhs = mats[i].apply(E.apply(j, probe))
                rhs = E.apply(j, mats[i].apply(probe))
                if lhs != rhs:
                    ok = False
        rep.add(f"[psi(e{i}), nabla(e{j})] = 0", ok)
    return PCurvature(E, tuple(mats), rep)


def psi_frobenius_linearity(E: LModule, psi: PCurvature, probe_exponents=(1, 2)) -> ValidationReport:
    """Check psi(f e_i) = f^p psi(e_i) on monomial probes f."""
    L = E.algebroid
    p = L.p
    rep = ValidationReport(subject="psi F*-linearity")
    x = poly_x(L.ring)
    for i in range(L.rank):
        for s_exp in probe_exponents:
            f = x**s_exp
            u = L.smul(f, L.basis(i))

            def op(s, u=u):
                w = s
                for _ in range(p):
                    w = E.apply_element(u, w)
                b = E.apply_element(L.p_power(u), s)
                return tuple(a - c for a, c in zip(w, b))

            mat, linear = E.operator_matrix_and_linearity(op)
            expect = psi.mats[i].map(lambda e, f=f: (f**p) * e)
            rep.add(
                f"psi(x^{s_exp} e{i}) = x^{s_exp * p} psi(e{i})",
                linear and mat == expect,
            )
    return rep


def binomial_leibniz_check(E: LModule, max_m: Optional[int] = None) -> ValidationReport:
    """(nabla(x))^m (f e) = sum C(m,i) alpha_x^i(f) (nabla(x))^{m-i}(e) for m <= p."""
    from math import comb

    L = E.algebroid
    p = L.p
    max_m = p if max_m is None else max_m
    rep = ValidationReport(subject="binomial Leibniz expansion")
    x = poly_x(L.ring)
    for i in range(L.rank):
        a = L.anchor[i]
        for f in (x, x**2):
            for j in range(E.rank):
                e = E.basis_vector(j)
                for m in range(1, max_m + 1):
                    lhs = E.apply_power(i, tuple(f * c for c in e), m)
                    rhs = None
                    g = f
                    for k in range(m + 1):
                        term_vec = E.apply_power(i, e, m - k)
                        coeff = L.poly_ring.elem(comb(m, k) % p) * g
                        term = tuple(coeff * c for c in term_vec)
                        rhs = term if rhs is None else tuple(u + v for u, v in zip(rhs, term))
                        g = a * g.derivative()
                    rep.add(f"binomial m={m} gen={i} f=x^{f.degree} e{j}", lhs == rhs)
    return rep


def connection_difference_is_linear(E1: LModule, E2: LModule) -> bool:
    """nabla_1 - nabla_2 on the same underlying module is O-linear."""
    if E1.rank != E2.rank or E1.algebroid is not E2.algebroid and E1.algebroid.rank != E2.algebroid.rank:
        raise RingError("modules must share rank and algebroid")
    ok = True
    for i in range(E1.algebroid.rank):
        def op(s, i=i):
            a = E1.apply(i, s)
            b = E2.apply(i, s)
            return tuple(u - v for u, v in zip(a, b))

        _, linear = E1.operator_matrix_and_linearity(op)
        ok = ok and linear
    return ok


def lambda_connection(base: AlgebroidChart, mats: Sequence[Matrix], lam) -> LModule:
    """Module over the lambda-twisted algebroid with the given action matrices.

    At lambda = 1 this is the plain connection; at lambda = 0 the matrices
    become a Higgs-type action over the trivial restricted algebroid.  A
    series lambda (e.g. t itself) requires a chart over the series ring.
    """
    twisted = twist_algebroid(base, lam)
    return LModule(twisted, mats)


def nilpotence_level(psi: PCurvature, l_max: int) -> Optional[int]:
    """Smallest l with all products of l+1 of the psi matrices zero.

    Level 0 means psi = 0 ("nilpotent of level less than 1"); returns None
    when no such level exists within l_max.
    """
    mats = psi.mats
    n = psi.module.rank
    ring = psi.module.poly_ring
    if all(m.is_zero() for m in mats):
        return 0
    # psi matrices commute, so products are determined by multisets
    current = {(): Matrix.identity(n, ring)}
    length = 0
    while length <= l_max:
        length += 1
        nxt = {}
        all_zero = True
        for key, m in current.items():
            start = key[-1] if key else 0
            for i in range(start, len(mats)):
                prod = m * mats[i]
                nxt[key + (i,)] = prod
                if not prod.is_zero():
                    all_zero = False
        if all_zero:
            return length - 1
        current = {k: v for k, v in nxt.items() if not v.is_zero()}
    return None
