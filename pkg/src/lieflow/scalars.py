"""Exact scalar rings.

Four exact scalar types back everything else:

* ``Fp`` -- residues mod a small prime p (2 <= p <= 13),
* ``TruncSeries`` -- elements of k[t]/(t^N) over F_p, the finite stand-in
  for a discrete valuation ring with uniformizer t,
* ``DensePoly`` -- univariate dense polynomials over F_p or over a
  truncated series ring (sections of the structure sheaf on the chart),
* ``BinaryForm`` -- homogeneous polynomials in (x0, x1), the Hom-spaces
  between line bundles on the projective line.

All values are immutable; operators raise ``RingError`` on modulus or
ring mismatches.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

DESK_PRIMES = (2, 3, 5, 7, 11, 13)


class RingError(ValueError):
    """Ring mismatch or illegal ring operation (e.g. inverting zero)."""


def check_prime(p: int) -> int:
    if p not in DESK_PRIMES:
        raise RingError(f"prime {p!r} outside supported range {DESK_PRIMES}")
    return p


# ---------------------------------------------------------------------------
# F_p


class Fp:
    """Residue class mod p with full field arithmetic."""

    __slots__ = ("value", "p")

    def __init__(self, value: int, p: int):
        check_prime(p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "value", value % p)

    def __setattr__(self, *a):  # immutable
        raise AttributeError("Fp is immutable")

    def _coerce(self, other) -> "Fp":
        if isinstance(other, Fp):
            if other.p != self.p:
                raise RingError(f"modulus mismatch: {self.p} vs {other.p}")
            return other
        if isinstance(other, int):
            return Fp(other, self.p)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Fp(self.value + o.value, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Fp(self.value - o.value, self.p)

    def __rsub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Fp(o.value - self.value, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else Fp(self.value * o.value, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return Fp(-self.value, self.p)

    def __pow__(self, n: int):
        if n < 0:
            return self.inv() ** (-n)
        return Fp(pow(self.value, n, self.p), self.p)

    def inv(self) -> "Fp":
        if self.value == 0:
            raise RingError("inversion of zero in F_%d" % self.p)
        return Fp(pow(self.value, self.p - 2, self.p), self.p)

    def __truediv__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else self * o.inv()

    def __eq__(self, other):
        if isinstance(other, int):
            return self.value == other % self.p
        return isinstance(other, Fp) and self.p == other.p and self.value == other.value

    def __hash__(self):
        return hash((self.value, self.p))

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"{self.value}"


class PrimeField:
    """Ring descriptor for F_p."""

    __slots__ = ("p",)

    def __init__(self, p: int):
        self.p = check_prime(p)

    @property
    def zero(self) -> Fp:
        return Fp(0, self.p)

    @property
    def one(self) -> Fp:
        return Fp(1, self.p)

    def elem(self, v) -> Fp:
        if isinstance(v, Fp):
            if v.p != self.p:
                raise RingError("modulus mismatch")
            return v
        return Fp(int(v), self.p)

    def random(self, rng) -> Fp:
        return Fp(rng.randrange(self.p), self.p)

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.p == self.p

    def __hash__(self):
        return hash(("PrimeField", self.p))

    def __repr__(self):
        return f"F_{self.p}"


# ---------------------------------------------------------------------------
# k[t]/(t^N)


class TruncSeries:
    """Element of F_p[t]/(t^N); coefficients stored low order first."""

    __slots__ = ("coeffs", "p", "order")

    def __init__(self, coeffs: Iterable[int], p: int, order: int):
        check_prime(p)
        if order < 1:
            raise RingError("truncation order must be >= 1")
        cs = [c % p for c in coeffs]
        if len(cs) > order:
            cs = cs[:order]
        cs.extend(0 for _ in range(order - len(cs)))
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "order", order)

    def __setattr__(self, *a):
        raise AttributeError("TruncSeries is immutable")

    def _coerce(self, other) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            if (other.p, other.order) != (self.p, self.order):
                raise RingError("series ring mismatch")
            return other
        if isinstance(other, int):
            return TruncSeries([other], self.p, self.order)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return TruncSeries([a + b for a, b in zip(self.coeffs, o.coeffs)], self.p, self.order)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return TruncSeries([a - b for a, b in zip(self.coeffs, o.coeffs)], self.p, self.order)

    def __rsub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        out = [0] * self.order
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(o.coeffs):
                if i + j >= self.order:
                    break
                out[i + j] += a * b
        return TruncSeries(out, self.p, self.order)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncSeries([-a for a in self.coeffs], self.p, self.order)

    def __pow__(self, n: int):
        r = TruncSeries([1], self.p, self.order)
        b = self
        while n:
            if n & 1:
                r = r * b
            b = b * b
            n >>= 1
        return r

    def valuation(self):
        """t-adic valuation; None for the zero element."""
        for i, c in enumerate(self.coeffs):
            if c:
                return i
        return None

    def is_unit(self) -> bool:
        return self.coeffs[0] != 0

    def inv(self) -> "TruncSeries":
        if not self.is_unit():
            raise RingError("inversion of a non-unit truncated series")
        p, n = self.p, self.order
        c0inv = pow(self.coeffs[0], p - 2, p)
        out = [c0inv] + [0] * (n - 1)
        for k in range(1, n):
            s = sum(self.coeffs[j] * out[k - j] for j in range(1, k + 1))
            out[k] = (-c0inv * s) % p
        return TruncSeries(out, p, n)

    def __truediv__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else self * o.inv()

    def shift_down(self, k: int) -> "TruncSeries":
        """Exact division by t^k; precision drops by k orders."""
        if any(self.coeffs[i] for i in range(min(k, self.order))):
            raise RingError("series not divisible by t^%d" % k)
        if self.order - k < 1:
            raise RingError("truncation order exhausted by t-division")
        return TruncSeries(self.coeffs[k:], self.p, self.order - k)

    def shift_up(self, k: int) -> "TruncSeries":
        return TruncSeries((0,) * k + self.coeffs, self.p, self.order)

    def truncate(self, order: int) -> "TruncSeries":
        return TruncSeries(self.coeffs[:order], self.p, order)

    def at(self, t_value: int) -> Fp:
        """Specialize t to a scalar (used for t=0 and t=1 fibers)."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * t_value + c
        return Fp(acc, self.p)

    def __eq__(self, other):
        if isinstance(other, int):
            return self == TruncSeries([other], self.p, self.order)
        return (
            isinstance(other, TruncSeries)
            and (self.p, self.order) == (other.p, other.order)
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.coeffs, self.p, self.order))

    def __bool__(self):
        return any(self.coeffs)

    def __repr__(self):
        terms = [
            f"{c}" if i == 0 else (f"t^{i}" if c == 1 else f"{c}*t^{i}")
            for i, c in enumerate(self.coeffs)
            if c
        ]
        return " + ".join(terms) if terms else "0"


class SeriesRing:
    """Ring descriptor for F_p[t]/(t^N)."""

    __slots__ = ("p", "order")

    def __init__(self, p: int, order: int):
        self.p = check_prime(p)
        if order < 1:
            raise RingError("truncation order must be >= 1")
        self.order = order

    @property
    def zero(self) -> TruncSeries:
        return TruncSeries([], self.p, self.order)

    @property
    def one(self) -> TruncSeries:
        return TruncSeries([1], self.p, self.order)

    @property
    def t(self) -> TruncSeries:
        return TruncSeries([0, 1], self.p, self.order)

    def elem(self, v) -> TruncSeries:
        if isinstance(v, TruncSeries):
            if (v.p, v.order) != (self.p, self.order):
                raise RingError("series ring mismatch")
            return v
        if isinstance(v, int):
            return TruncSeries([v], self.p, self.order)
        return TruncSeries(v, self.p, self.order)

    def random(self, rng) -> TruncSeries:
        return TruncSeries([rng.randrange(self.p) for _ in range(self.order)], self.p, self.order)

    def __eq__(self, other):
        return isinstance(other, SeriesRing) and (other.p, other.order) == (self.p, self.order)

    def __hash__(self):
        return hash(("SeriesRing", self.p, self.order))

    def __repr__(self):
        return f"F_{self.p}[t]/(t^{self.order})"


# ---------------------------------------------------------------------------
# dense polynomials


class DensePoly:
    """Dense univariate polynomial; coefficients low degree first.

    The coefficient ring is F_p or a truncated series ring.  Trailing zero
    coefficients are stripped; the zero polynomial has degree None.
    """

    __slots__ = ("coeffs", "ring")

    def __init__(self, coeffs: Sequence, ring):
        cs = [ring.elem(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))
        object.__setattr__(self, "ring", ring)

    def __setattr__(self, *a):
        raise AttributeError("DensePoly is immutable")

    @property
    def degree(self):
        return len(self.coeffs) - 1 if self.coeffs else None

    def is_zero(self) -> bool:
        return not self.coeffs

    def __bool__(self):
        return bool(self.coeffs)

    def _coerce(self, other) -> "DensePoly":
        if isinstance(other, DensePoly):
            if other.ring != self.ring:
                raise RingError("polynomial ring mismatch")
            return other
        if isinstance(other, (int, Fp, TruncSeries)):
            return DensePoly([self.ring.elem(other)], self.ring)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        n = max(len(self.coeffs), len(o.coeffs))
        z = self.ring.zero
        a = list(self.coeffs) + [z] * (n - len(self.coeffs))
        b = list(o.coeffs) + [z] * (n - len(o.coeffs))
        return DensePoly([x + y for x, y in zip(a, b)], self.ring)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        return o if o is NotImplemented else o - self

    def __neg__(self):
        return DensePoly([-c for c in self.coeffs], self.ring)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if not self.coeffs or not o.coeffs:
            return DensePoly([], self.ring)
        z = self.ring.zero
        out = [z] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if not a:
                continue
            for j, b in enumerate(o.coeffs):
                out[i + j] = out[i + j] + a * b
        return DensePoly(out, self.ring)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        r = DensePoly([self.ring.one], self.ring)
        b = self
        while n:
            if n & 1:
                r = r * b
            b = b * b
            n >>= 1
        return r

    def __call__(self, point):
        acc = self.ring.zero
        for c in reversed(self.coeffs):
            acc = acc * self.ring.elem(point) + c
        return acc

    def derivative(self) -> "DensePoly":
        return DensePoly(
            [self.ring.elem(i) * c for i, c in enumerate(self.coeffs)][1:], self.ring
        )

    def frobenius_pullback(self) -> "DensePoly":
        """Substitute x -> x^p (the relative Frobenius on the chart)."""
        p = self.ring.p
        z = self.ring.zero
        out = []
        for c in self.coeffs:
            out.append(c)
            out.extend([z] * (p - 1))
        return DensePoly(out[: len(self.coeffs) * p - (p - 1)] if out else [], self.ring)

    def shift(self, k: int) -> "DensePoly":
        """Multiply by x^k."""
        return DensePoly((self.ring.zero,) * k + self.coeffs, self.ring)

    def monic(self) -> "DensePoly":
        if self.is_zero():
            return self
        lead = self.coeffs[-1]
        return DensePoly([c / lead for c in self.coeffs], self.ring)

    def divmod(self, other: "DensePoly"):
        if not isinstance(self.ring, PrimeField):
            raise RingError("polynomial division requires field coefficients")
        o = self._coerce(other)
        if o.is_zero():
            raise RingError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [self.ring.zero] * max(0, len(rem) - len(o.coeffs) + 1)
        dinv = o.coeffs[-1].inv()
        for i in range(len(rem) - len(o.coeffs), -1, -1):
            c = rem[i + len(o.coeffs) - 1] * dinv
            if not c:
                continue
            q[i] = c
            for j, b in enumerate(o.coeffs):
                rem[i + j] = rem[i + j] - c * b
        return DensePoly(q, self.ring), DensePoly(rem, self.ring)

    def __floordiv__(self, other):
        return self.divmod(other)[0]

    def __mod__(self, other):
        return self.divmod(other)[1]

    def gcd(self, other: "DensePoly") -> "DensePoly":
        a, b = self, self._coerce(other)
        while not b.is_zero():
            a, b = b, a % b
        return a.monic()

    def valuation_x(self):
        """Order of vanishing at x = 0; None for the zero polynomial."""
        for i, c in enumerate(self.coeffs):
            if c:
                return i
        return None

    def __eq__(self, other):
        if isinstance(other, (int, Fp, TruncSeries)):
            other = DensePoly([self.ring.elem(other)], self.ring)
        return (
            isinstance(other, DensePoly)
            and other.ring == self.ring
            and other.coeffs == self.coeffs
        )

    def __hash__(self):
        return hash((self.coeffs, self.ring))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            cs = repr(c)
            if isinstance(c, TruncSeries) and ("+" in cs or "t" in cs):
                cs = f"({cs})"
            if i == 0:
                terms.append(cs)
            elif cs == "1":
                terms.append("x" if i == 1 else f"x^{i}")
            else:
                terms.append(f"{cs}*x" if i == 1 else f"{cs}*x^{i}")
        return " + ".join(terms)


class PolyRing:
    """Ring descriptor for base[x] with base = F_p or F_p[t]/(t^N)."""

    __slots__ = ("base",)

    def __init__(self, base):
        self.base = base

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def zero(self) -> DensePoly:
        return DensePoly([], self.base)

    @property
    def one(self) -> DensePoly:
        return DensePoly([self.base.one], self.base)

    @property
    def x(self) -> DensePoly:
        return DensePoly([self.base.zero, self.base.one], self.base)

    def elem(self, v) -> DensePoly:
        if isinstance(v, DensePoly):
            if v.ring != self.base:
                raise RingError("polynomial ring mismatch")
            return v
        return DensePoly([self.base.elem(v)], self.base)

    def __eq__(self, other):
        return isinstance(other, PolyRing) and other.base == self.base

    def __hash__(self):
        return hash(("PolyRing", self.base))

    def __repr__(self):
        return f"{self.base}[x]"


def poly(coeffs: Sequence, ring) -> DensePoly:
    return DensePoly(coeffs, ring)


def poly_x(ring) -> DensePoly:
    return DensePoly([ring.zero, ring.one], ring)


# ---------------------------------------------------------------------------
# binary forms


class BinaryForm:
    """Homogeneous form in (x0, x1) over F_p.

    A form of degree d stores d+1 integer coefficients, the coefficient of
    x0^(d-i) x1^i at slot i.  The zero form has degree None and compares
    equal to an all-zero form of any degree.
    """

    __slots__ = ("p", "degree", "coeffs")

    def __init__(self, p: int, degree, coeffs: Iterable[int] = ()):
        check_prime(p)
        if degree is None:
            cs = ()
        else:
            if degree < 0:
                raise RingError("binary form degree must be >= 0")
            cs = tuple(c % p for c in coeffs)
            if len(cs) != degree + 1:
                raise RingError(
                    f"form of degree {degree} needs {degree + 1} coefficients, got {len(cs)}"
                )
            if not any(cs):
                degree, cs = None, ()
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "coeffs", cs)

    def __setattr__(self, *a):
        raise AttributeError("BinaryForm is immutable")

    @classmethod
    def zero(cls, p: int) -> "BinaryForm":
        return cls(p, None)

    @classmethod
    def constant(cls, p: int, c: int) -> "BinaryForm":
        return cls(p, 0, (c,))

    def is_zero(self) -> bool:
        return self.degree is None

    def __bool__(self):
        return self.degree is not None

    def __add__(self, other: "BinaryForm") -> "BinaryForm":
        if not isinstance(other, BinaryForm) or other.p != self.p:
            raise RingError("form mismatch")
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        if self.degree != other.degree:
            raise RingError("cannot add forms of different degrees")
        return BinaryForm(self.p, self.degree, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "BinaryForm") -> "BinaryForm":
        return self + (-other)

    def __neg__(self):
        if self.is_zero():
            return self
        return BinaryForm(self.p, self.degree, [-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, int):
            if self.is_zero() or other % self.p == 0:
                return BinaryForm.zero(self.p)
            return BinaryForm(self.p, self.degree, [c * other for c in self.coeffs])
        if not isinstance(other, BinaryForm) or other.p != self.p:
            raise RingError("form mismatch")
        if self.is_zero() or other.is_zero():
            return BinaryForm.zero(self.p)
        d = self.degree + other.degree
        out = [0] * (d + 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return BinaryForm(self.p, d, out)

    __rmul__ = __mul__

    def evaluate(self, x0: int, x1: int) -> int:
        if self.is_zero():
            return 0
        acc = 0
        for i, c in enumerate(self.coeffs):
            acc += c * pow(x0, self.degree - i, self.p) * pow(x1, i, self.p)
        return acc % self.p

    def dehomogenize(self) -> DensePoly:
        """Set x0 = 1; gives a polynomial in x = x1/x0."""
        ring = PrimeField(self.p)
        return DensePoly([Fp(c, self.p) for c in self.coeffs], ring)

    @classmethod
    def homogenize(cls, f: DensePoly, degree: int) -> "BinaryForm":
        if f.is_zero():
            return cls.zero(f.ring.p)
        if not isinstance(f.ring, PrimeField):
            raise RingError("only F_p polynomials homogenize to forms")
        if f.degree > degree:
            raise RingError(f"degree {f.degree} exceeds target form degree {degree}")
        coeffs = [c.value for c in f.coeffs] + [0] * (degree - f.degree)
        return cls(f.ring.p, degree, coeffs)

    def __eq__(self, other):
        if not isinstance(other, BinaryForm) or other.p != self.p:
            return NotImplemented
        return (self.degree, self.coeffs) == (other.degree, other.coeffs)

    def __hash__(self):
        return hash((self.p, self.degree, self.coeffs))

    def __repr__(self):
        if self.is_zero():
            return "0"
        d = self.degree
        terms = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            mono = "*".join(
                s
                for s in (
                    f"x0^{d - i}" if d - i > 1 else ("x0" if d - i == 1 else ""),
                    f"x1^{i}" if i > 1 else ("x1" if i == 1 else ""),
                )
                if s
            )
            if not mono:
                terms.append(str(c))
            else:
                terms.append(mono if c == 1 else f"{c}*{mono}")
        return " + ".join(terms)


def form_gcd(forms: Iterable[BinaryForm]) -> BinaryForm:
    """Gcd of binary forms (monic-normalized), tracking the x0-content.

    A form factors as x0^a * h~(x0, x1) with h~ not divisible by x0, and
    h~ is recovered from the dehomogenization.  The gcd combines the
    minimum x0-exponent with the polynomial gcd of the dehomogenizations.
    """
    nonzero = [f for f in forms if not f.is_zero()]
    if not nonzero:
        return BinaryForm.zero(nonzero[0].p if nonzero else 2)
    p = nonzero[0].p
    x0_exp = None
    g = None
    for f in nonzero:
        h = f.dehomogenize()
        a = f.degree - h.degree
        x0_exp = a if x0_exp is None else min(x0_exp, a)
        g = h if g is None else g.gcd(h)
    return BinaryForm.homogenize(g.monic(), g.degree + x0_exp)


def slope(degree: int, rank: int) -> Fraction:
    return Fraction(degree, rank)
