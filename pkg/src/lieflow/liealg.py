"""Finite-dimensional restricted Lie algebras over F_p.

Structure constants live in F_p; elements are coordinate tuples of plain
integers mod p (this layer is the hottest path, so it avoids wrapper
objects).  Provides the axiom checks, the universal Lie polynomials s_j,
extension of the p-operation from a basis, the restricted enveloping
algebra with its p^m monomial basis, and empirical verification of
Jacobson's formulas in arbitrary associative algebras.
"""

from __future__ import annotations

import itertools
from typing import Sequence

from .matrices import Matrix
from .reports import ValidationReport
from .scalars import PrimeField, RingError, check_prime

Vec = tuple


class LieAlgebra:
    """Lie algebra over F_p given by a bracket table on a basis.

    bracket[i][j] is the coordinate vector of [x_i, x_j].
    """

    def __init__(self, p: int, bracket: Sequence[Sequence[Sequence[int]]]):
        self.p = check_prime(p)
        self.dim = len(bracket)
        self.bracket_table = tuple(
            tuple(tuple(c % p for c in vec) for vec in row) for row in bracket
        )
        for row in self.bracket_table:
            if len(row) != self.dim or any(len(v) != self.dim for v in row):
                raise RingError("bracket table shape mismatch")

    def zero(self) -> Vec:
        return (0,) * self.dim

    def basis(self, i: int) -> Vec:
        return tuple(1 if j == i else 0 for j in range(self.dim))

    def add(self, x: Vec, y: Vec) -> Vec:
        return tuple((a + b) % self.p for a, b in zip(x, y))

    def sub(self, x: Vec, y: Vec) -> Vec:
        return tuple((a - b) % self.p for a, b in zip(x, y))

    def smul(self, c: int, x: Vec) -> Vec:
        return tuple((c * a) % self.p for a in x)

    def bracket(self, x: Vec, y: Vec) -> Vec:
        out = [0] * self.dim
        for i, a in enumerate(x):
            if not a:
                continue
            for j, b in enumerate(y):
                if not b:
                    continue
                ab = a * b
                for k, c in enumerate(self.bracket_table[i][j]):
                    out[k] += ab * c
        return tuple(v % self.p for v in out)

    def ad_matrix(self, x: Vec) -> Matrix:
        field = PrimeField(self.p)
        cols = [self.bracket(x, self.basis(j)) for j in range(self.dim)]
        return Matrix([[cols[j][i] for j in range(self.dim)] for i in range(self.dim)], field)

    def random_element(self, rng) -> Vec:
        return tuple(rng.randrange(self.p) for _ in range(self.dim))

    def __repr__(self):
        return f"LieAlgebra(dim={self.dim}, p={self.p})"


def sl2(p: int) -> LieAlgebra:
    """sl_2 with basis (h, e, f): [h,e] = 2e, [h,f] = -2f, [e,f] = h."""
    check_prime(p)
    z = (0, 0, 0)
    b = [[z, z, z] for _ in range(3)]
    b[0][1] = (0, 2 % p, 0)
    b[1][0] = (0, (-2) % p, 0)
    b[0][2] = (0, 0, (-2) % p)
    b[2][0] = (0, 0, 2 % p)
    b[1][2] = (1, 0, 0)
    b[2][1] = ((-1) % p, 0, 0)
    return LieAlgebra(p, b)


def abelian(p: int, dim: int) -> LieAlgebra:
    z = (0,) * dim
    return LieAlgebra(p, [[z] * dim for _ in range(dim)])


def validate_lie(L: LieAlgebra) -> ValidationReport:
    """Check alternation, antisymmetry and the Jacobi identity on basis triples."""
    rep = ValidationReport(subject="lie algebra axioms")
    m = L.dim
    for i in range(m):
        ok = all(c == 0 for c in L.bracket_table[i][i])
        rep.add(f"alternating [x{i},x{i}]=0", ok, "" if ok else f"[x{i},x{i}] != 0")
    for i, j in itertools.combinations(range(m), 2):
        anti = L.add(L.bracket(L.basis(i), L.basis(j)), L.bracket(L.basis(j), L.basis(i)))
        ok = anti == L.zero()
        rep.add(f"antisymmetry ({i},{j})", ok, "" if ok else f"[x{i},x{j}]+[x{j},x{i}] = {anti}")
    for i, j, k in itertools.combinations(range(m), 3):
        x, y, z = L.basis(i), L.basis(j), L.basis(k)
        jac = L.add(
            L.add(L.bracket(x, L.bracket(y, z)), L.bracket(y, L.bracket(z, x))),
            L.bracket(z, L.bracket(x, y)),
        )
        ok = jac == L.zero()
        rep.add(f"jacobi ({i},{j},{k})", ok, "" if ok else f"cyclic sum = {jac}")
    return rep


def lie_polynomial_s(j: int, x: Vec, y: Vec, L: LieAlgebra) -> Vec:
    """Universal Lie polynomial s_j(x, y).

    s_j(x,y) = -(1/j) sum over maps sigma: {1..p-1} -> {1,2} taking the
    value 1 exactly j times of ad x_{sigma(1)} ... ad x_{sigma(p-1)} (x_2),
    with (x_1, x_2) = (x, y).
    """
    p = L.p
    if not 0 < j < p:
        raise RingError(f"s_j needs 0 < j < p, got j={j}, p={p}")
    pair = (x, y)
    total = L.zero()
    for sigma in itertools.product((0, 1), repeat=p - 1):
        if sigma.count(0) != j:
            continue
        v = y
        for idx in reversed(sigma):
            v = L.bracket(pair[idx], v)
        total = L.add(total, v)
    minus_inv_j = (-pow(j, p - 2, p)) % p
    return L.smul(minus_inv_j, total)


def sum_s_polynomials(x: Vec, y: Vec, L: LieAlgebra) -> Vec:
    total = L.zero()
    for j in range(1, L.p):
        total = L.add(total, lie_polynomial_s(j, x, y, L))
    return total


class RestrictedLieAlgebra:
    """Restricted structure: p-operation given on the basis only.

    The extension to arbitrary elements is computed from the axioms
    (fx)^[p] = f^p x^[p] and (x+y)^[p] = x^[p] + y^[p] + sum s_j(x, y),
    never stored.
    """

    def __init__(self, base: LieAlgebra, pop: Sequence[Sequence[int]]):
        self.base = base
        self.p = base.p
        self.dim = base.dim
        self.pop = tuple(tuple(c % base.p for c in vec) for vec in pop)
        if len(self.pop) != base.dim or any(len(v) != base.dim for v in self.pop):
            raise RingError("p-operation table shape mismatch")

    def p_power(self, x: Vec) -> Vec:
        L = self.base
        terms = [(a, i) for i, a in enumerate(x) if a]
        return self._p_power_terms(terms)

    def _p_power_terms(self, terms) -> Vec:
        L = self.base
        if not terms:
            return L.zero()
        a, i = terms[0]
        head_pow = L.smul(pow(a, self.p, self.p), self.pop[i])
        if len(terms) == 1:
            return head_pow
        head = L.smul(a, L.basis(i))
        tail = L.zero()
        for b, k in terms[1:]:
            tail = L.add(tail, L.smul(b, L.basis(k)))
        rest = self._p_power_terms(terms[1:])
        return L.add(L.add(head_pow, rest), sum_s_polynomials(head, tail, L))


def validate_restricted(R: RestrictedLieAlgebra, samples: int = 20, seed: int = 0) -> ValidationReport:
    """Check the three restricted-Lie axioms on basis elements and random sums."""
    import random

    L, p = R.base, R.p
    rng = random.Random(seed)
    rep = ValidationReport(subject="restricted structure")
    rep.meta["seed"] = seed
    rep.meta["samples"] = samples
    for i in range(L.dim):
        lhs = L.ad_matrix(R.pop[i])
        rhs = L.ad_matrix(L.basis(i)) ** p
        rep.add(f"ad(x{i}^[p]) = ad(x{i})^p", lhs == rhs)
    scalar_ok = adjoint_ok = additive_ok = True
    for n in range(samples):
        x, y = L.random_element(rng), L.random_element(rng)
        c = rng.randrange(p)
        if R.p_power(L.smul(c, x)) != L.smul(pow(c, p, p), R.p_power(x)):
            scalar_ok = False
            rep.add("scalar axiom", False, f"sample {n}: (c x)^[p] != c^p x^[p]")
        if L.ad_matrix(R.p_power(x)) != L.ad_matrix(x) ** p:
            adjoint_ok = False
            rep.add("adjoint axiom", False, f"sample {n}: ad(x^[p]) != ad(x)^p")
        rhs = L.add(L.add(R.p_power(x), R.p_power(y)), sum_s_polynomials(x, y, L))
        if R.p_power(L.add(x, y)) != rhs:
            additive_ok = False
            rep.add("additivity axiom", False, f"sample {n}: Jacobson sum fails")
    rep.add("scalar axiom (all samples)", scalar_ok)
    rep.add("adjoint axiom (all samples)", adjoint_ok)
    rep.add("additivity axiom (all samples)", additive_ok)
    return rep


# ---------------------------------------------------------------------------
# restricted enveloping algebra


class StraighteningDepthExceeded(RuntimeError):
    """PBW rewriting exceeded the depth bound; input data is corrupt."""


class RestrictedEnveloping:
    """u(L): the p^m-dimensional restricted enveloping algebra.

    Elements are dicts mapping exponent tuples (i_1, ..., i_m) with
    0 <= i_j < p to integers mod p.  Products are computed by
    straightening with respect to the lexicographic PBW order
    x_1^{i_1} ... x_m^{i_m}, reducing x_i^p to x_i^[p].
    """

    MAX_DEPTH = 10000

    def __init__(self, R: RestrictedLieAlgebra):
        self.R = R
        self.L = R.base
        self.p = R.p
        self.m = R.dim
        self._gen_cache: dict = {}
        self._depth = 0

    @property
    def dim(self) -> int:
        return self.p**self.m

    def zero(self) -> dict:
        return {}

    def one(self) -> dict:
        return {(0,) * self.m: 1}

    def monomials(self):
        return itertools.product(range(self.p), repeat=self.m)

    def from_lie(self, x: Vec) -> dict:
        out = {}
        for i, a in enumerate(x):
            if a:
                mono = tuple(1 if j == i else 0 for j in range(self.m))
                out[mono] = a % self.p
        return out

    def add(self, a: dict, b: dict) -> dict:
        out = dict(a)
        for mono, c in b.items():
            v = (out.get(mono, 0) + c) % self.p
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
        return out

    def sub(self, a: dict, b: dict) -> dict:
        return self.add(a, self.scale(-1, b))

    def scale(self, c: int, a: dict) -> dict:
        c %= self.p
        if not c:
            return {}
        return {mono: (c * v) % self.p for mono, v in a.items()}

    def _mul_mono_gen(self, mono: Vec, k: int) -> dict:
        """Product (PBW monomial) * x_k, straightened."""
        key = (mono, k)
        cached = self._gen_cache.get(key)
        if cached is not None:
            return cached
        self._depth += 1
        if self._depth > self.MAX_DEPTH:
            raise StraighteningDepthExceeded("rewriting depth bound exceeded")
        try:
            last = -1
            for idx in range(self.m - 1, -1, -1):
                if mono[idx]:
                    last = idx
                    break
            if last <= k:
                if mono[k] + 1 < self.p:
                    new = list(mono)
                    new[k] += 1
                    result = {tuple(new): 1}
                else:
                    # mono = rest * x_k^{p-1}; mono * x_k = rest * x_k^[p]
                    stripped = list(mono)
                    stripped[k] = 0
                    rest = tuple(stripped)
                    result = {}
                    for i, c in enumerate(self.R.pop[k]):
                        if c:
                            result = self.add(result, self.scale(c, self._mul_mono_gen(rest, i)))
            else:
                # mono = head * x_last ; x_last x_k = x_k x_last + [x_last, x_k]
                head = list(mono)
                head[last] -= 1
                head = tuple(head)
                swapped = self.mul_elem_gen(self._mul_mono_gen(head, k), last)
                br = self.L.bracket(self.L.basis(last), self.L.basis(k))
                corr = {}
                for i, c in enumerate(br):
                    if c:
                        corr = self.add(corr, self.scale(c, self._mul_mono_gen(head, i)))
                result = self.add(swapped, corr)
        finally:
            self._depth -= 1
        self._gen_cache[key] = result
        return result

    def mul_elem_gen(self, elem: dict, k: int) -> dict:
        out = {}
        for mono, c in elem.items():
            out = self.add(out, self.scale(c, self._mul_mono_gen(mono, k)))
        return out

    def mul(self, a: dict, b: dict) -> dict:
        out = {}
        for mono_b, cb in sorted(b.items()):
            term = self.scale(cb, a)
            for k in range(self.m):
                for _ in range(mono_b[k]):
                    term = self.mul_elem_gen(term, k)
            out = self.add(out, term)
        return out

    def power(self, a: dict, n: int) -> dict:
        r = self.one()
        for _ in range(n):
            r = self.mul(r, a)
        return r

    def commutator(self, a: dict, b: dict) -> dict:
        return self.sub(self.mul(a, b), self.mul(b, a))

    def degree(self, a: dict):
        return max((sum(mono) for mono in a), default=None)

    def check_defining_relations(self) -> ValidationReport:
        rep = ValidationReport(subject="u(L) defining relations")
        for i in range(self.m):
            for j in range(self.m):
                if i == j:
                    continue
                xi, xj = self.from_lie(self.L.basis(i)), self.from_lie(self.L.basis(j))
                comm = self.commutator(xi, xj)
                br = self.from_lie(self.L.bracket(self.L.basis(i), self.L.basis(j)))
                rep.add(f"x{i} x{j} - x{j} x{i} = [x{i},x{j}]", comm == br)
        for i in range(self.m):
            xi = self.from_lie(self.L.basis(i))
            lhs = self.power(xi, self.p)
            rhs = self.from_lie(self.R.pop[i])
            rep.add(f"x{i}^p = x{i}^[p]", lhs == rhs)
        return rep

    def check_associativity(self, max_exhaustive_dim: int = 30, samples: int = 60, seed: int = 0) -> ValidationReport:
        """Associativity on basis triples (exhaustive for small u, sampled beyond)."""
        import random

        rep = ValidationReport(subject="u(L) associativity")
        monos = list(self.monomials())
        if self.dim <= max_exhaustive_dim:
            triples = itertools.product(monos, repeat=3)
            rep.meta["mode"] = "exhaustive"
        else:
            rng = random.Random(seed)
            triples = [tuple(rng.choice(monos) for _ in range(3)) for _ in range(samples)]
            rep.meta["mode"] = f"sampled[{samples}] seed={seed}"
        bad = 0
        for ma, mb, mc in triples:
            a, b, c = {ma: 1}, {mb: 1}, {mc: 1}
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)):
                bad += 1
                rep.add(f"assoc {ma}*{mb}*{mc}", False, "differs")
                if bad > 5:
                    break
        rep.add("associativity on tested triples", bad == 0)
        return rep

    def check_filtration_degree(self, samples: int = 40, seed: int = 0) -> ValidationReport:
        import random

        rng = random.Random(seed)
        rep = ValidationReport(subject="u(L) filtration compatibility")
        monos = list(self.monomials())
        ok = True
        for _ in range(samples):
            ma, mb = rng.choice(monos), rng.choice(monos)
            prod = self.mul({ma: 1}, {mb: 1})
            d = self.degree(prod)
            if d is not None and d > sum(ma) + sum(mb):
                ok = False
        rep.add("deg(a*b) <= deg a + deg b", ok)
        return rep


# ---------------------------------------------------------------------------
# Jacobson's formulas in an arbitrary associative algebra


class MatrixAlgebra:
    """n x n matrices over F_p as an associative algebra adaptor."""

    def __init__(self, n: int, p: int):
        self.n = n
        self.p = check_prime(p)

    def zero(self):
        return tuple(tuple(0 for _ in range(self.n)) for _ in range(self.n))

    def add(self, a, b):
        return tuple(
            tuple((x + y) % self.p for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
        )

    def sub(self, a, b):
        return tuple(
            tuple((x - y) % self.p for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
        )

    def scale(self, c, a):
        return tuple(tuple((c * x) % self.p for x in row) for row in a)

    def mul(self, a, b):
        n = self.n
        bt = tuple(zip(*b))
        return tuple(
            tuple(sum(x * y for x, y in zip(row, col)) % self.p for col in bt) for row in a
        )

    def random_element(self, rng):
        return tuple(
            tuple(rng.randrange(self.p) for _ in range(self.n)) for _ in range(self.n)
        )


class EnvelopingAdaptor:
    """u(L) as an associative algebra adaptor; samples from the image of L."""

    def __init__(self, env: RestrictedEnveloping):
        self.env = env
        self.p = env.p

    def zero(self):
        return ()

    def _freeze(self, d: dict):
        return tuple(sorted(d.items()))

    def _thaw(self, t):
        return dict(t)

    def add(self, a, b):
        return self._freeze(self.env.add(self._thaw(a), self._thaw(b)))

    def sub(self, a, b):
        return self._freeze(self.env.sub(self._thaw(a), self._thaw(b)))

    def scale(self, c, a):
        return self._freeze(self.env.scale(c, self._thaw(a)))

    def mul(self, a, b):
        return self._freeze(self.env.mul(self._thaw(a), self._thaw(b)))

    def random_element(self, rng):
        x = self.env.L.random_element(rng)
        return self._freeze(self.env.from_lie(x))


def _assoc_power(A, x, n: int):
    r = x
    for _ in range(n - 1):
        r = A.mul(r, x)
    return r


def _assoc_ad(A, x, y):
    return A.sub(A.mul(x, y), A.mul(y, x))


def assoc_s_polynomial_sum(A, x, y):
    """sum_{0<j<p} s_j(x, y) computed with ad in the associative algebra A."""
    p = A.p
    total = A.zero()
    pair = (x, y)
    for sigma in itertools.product((0, 1), repeat=p - 1):
        j = sigma.count(0)
        if j == 0:
            continue
        v = y
        for idx in reversed(sigma):
            v = _assoc_ad(A, pair[idx], v)
        coeff = (-pow(j, p - 2, p)) % p
        total = A.add(total, A.scale(coeff, v))
    return total


def verify_jacobson(A, samples: int = 100, seed: int = 0) -> ValidationReport:
    """Empirically verify Jacobson's formulas in the associative algebra A.

    Checks ad(x^p) = ad(x)^p (applied to a second random element) and
    (x+y)^p = x^p + y^p + sum s_j(x,y) on random pairs.
    """
    import random

    rng = random.Random(seed)
    p = A.p
    rep = ValidationReport(subject="Jacobson formulas")
    rep.meta["seed"] = seed
    rep.meta["samples"] = samples
    ad_ok = sum_ok = True
    for n in range(samples):
        x, y = A.random_element(rng), A.random_element(rng)
        lhs = _assoc_ad(A, _assoc_power(A, x, p), y)
        rhs = y
        for _ in range(p):
            rhs = _assoc_ad(A, x, rhs)
        if lhs != rhs:
            ad_ok = False
            rep.add("ad(x^p) = ad(x)^p", False, f"sample {n}")
        lhs2 = _assoc_power(A, A.add(x, y), p)
        rhs2 = A.add(
            A.add(_assoc_power(A, x, p), _assoc_power(A, y, p)),
            assoc_s_polynomial_sum(A, x, y),
        )
        if lhs2 != rhs2:
            sum_ok = False
            rep.add("(x+y)^p = x^p + y^p + sum s_j", False, f"sample {n}")
    rep.add("ad(x^p) = ad(x)^p (all samples)", ad_ok)
    rep.add("(x+y)^p = x^p + y^p + sum s_j (all samples)", sum_ok)
    return rep


def psi_defect_checks(R: RestrictedLieAlgebra, A, phi, samples: int = 50, seed: int = 0) -> ValidationReport:
    """For a Lie homomorphism phi: L -> A, check that psi(x) = phi(x)^p - phi(x^[p])
    is additive and that its image commutes with the image of phi."""
    import random

    rng = random.Random(seed)
    L, p = R.base, R.p
    rep = ValidationReport(subject="psi additivity and commutation")
    rep.meta["seed"] = seed
    add_ok = comm_ok = True

    def psi(x):
        return A.sub(_assoc_power(A, phi(x), p), phi(R.p_power(x)))

    for n in range(samples):
        x, y = L.random_element(rng), L.random_element(rng)
        if psi(L.add(x, y)) != A.add(psi(x), psi(y)):
            add_ok = False
        if _assoc_ad(A, psi(x), phi(y)) != A.zero():
            comm_ok = False
    rep.add("psi additive", add_ok)
    rep.add("[psi(x), phi(y)] = 0", comm_ok)
    return rep
