"""Exact arithmetic layer: rationals, cyclotomic fields, sparse multivariate polynomials.

Two coefficient domains are used throughout the package:

* plain rationals (gmpy2.mpq, with fractions.Fraction as a fallback) carry the
  whole homology pipeline -- every differential is defined over Q and graded
  dimensions over Q equal those over C;
* the cyclotomic field Q(xi_n), xi_n = exp(2*pi*i/n), realised as residue
  classes modulo the n-th cyclotomic polynomial, is used only for the explicit
  root-of-unity generators and their coefficient identities.

Polynomials are sparse: a monomial is a sorted tuple of (variable, exponent)
pairs with positive exponents, and a polynomial maps monomials to nonzero
coefficients.  Variables are small integers; callers hand out ids.
"""

from __future__ import annotations

from typing import Iterable, Mapping

try:
    from gmpy2 import mpq as RAT
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as RAT

R_ZERO = RAT(0)
R_ONE = RAT(1)

Monomial = tuple  # tuple[tuple[int, int], ...], sorted by variable id

MON_ONE: Monomial = ()


class DivisionByZero(ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# cyclotomic field Q(xi_n)
# ---------------------------------------------------------------------------


def _poly_divmod(num: list, den: list) -> tuple[list, list]:
    """Dense univariate divmod over the rationals; trailing zeros trimmed."""
    num = list(num)
    q = [R_ZERO] * max(0, len(num) - len(den) + 1)
    inv = 1 / den[-1]
    for i in range(len(num) - len(den), -1, -1):
        c = num[i + len(den) - 1] * inv
        q[i] = c
        if c:
            for j, d in enumerate(den):
                num[i + j] -= c * d
    while num and not num[-1]:
        num.pop()
    return q, num


def cyclotomic_polynomial(n: int) -> list:
    """Coefficients (low degree first) of the n-th cyclotomic polynomial."""
    if n < 1:
        raise ValueError("n must be positive")
    poly = [RAT(-1)] + [R_ZERO] * (n - 1) + [R_ONE]  # t^n - 1
    for d in range(1, n):
        if n % d == 0:
            phi_d = cyclotomic_polynomial(d)
            poly, rem = _poly_divmod(poly, phi_d)
            assert not rem
    return poly


class CyclotomicField:
    """Q(xi_n) with xi_n a primitive n-th root of unity.

    The modulus is the irreducible cyclotomic polynomial, so every nonzero
    element is invertible; this is what the basis-change checks need.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.modulus = cyclotomic_polynomial(n)
        self.degree = len(self.modulus) - 1
        self.zero = CycNumber(self, (R_ZERO,) * self.degree)
        self.one = self.from_rational(R_ONE)

    def from_rational(self, value) -> "CycNumber":
        coeffs = [R_ZERO] * self.degree
        if self.degree:
            coeffs[0] = RAT(value)
        return CycNumber(self, tuple(coeffs))

    def xi(self, power: int = 1) -> "CycNumber":
        """xi_n ** power, for any integer power."""
        power %= self.n
        coeffs = [R_ZERO] * (power + 1)
        coeffs[power] = R_ONE
        return CycNumber(self, self._reduce(coeffs))

    def _reduce(self, coeffs: list) -> tuple:
        coeffs = list(coeffs)
        deg = self.degree
        while len(coeffs) > deg:
            c = coeffs.pop()
            if c:
                k = len(coeffs) - deg
                for j in range(deg):
                    coeffs[k + j] -= c * self.modulus[j]
        coeffs += [R_ZERO] * (deg - len(coeffs))
        return tuple(coeffs)

    def __repr__(self):
        return f"CyclotomicField({self.n})"


class CycNumber:
    """Element of a CyclotomicField; immutable, hashable."""

    __slots__ = ("field", "coeffs")

    def __init__(self, field: CyclotomicField, coeffs: tuple):
        self.field = field
        self.coeffs = coeffs

    def _coerce(self, other):
        if isinstance(other, CycNumber):
            if other.field.n != self.field.n:
                raise ValueError("mixed cyclotomic fields")
            return other
        return self.field.from_rational(other)

    def __bool__(self):
        return any(self.coeffs)

    def __eq__(self, other):
        if isinstance(other, CycNumber):
            return self.field.n == other.field.n and self.coeffs == other.coeffs
        try:
            return self == self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash((self.field.n, self.coeffs))

    def __add__(self, other):
        other = self._coerce(other)
        return CycNumber(self.field, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return CycNumber(self.field, tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self.coeffs, other.coeffs
        prod = [R_ZERO] * (2 * len(a) - 1) if a else []
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    if bj:
                        prod[i + j] += ai * bj
        return CycNumber(self.field, self.field._reduce(prod))

    __rmul__ = __mul__

    def inverse(self) -> "CycNumber":
        if not self:
            raise DivisionByZero("inverse of zero in cyclotomic field")
        # extended Euclid on (self, modulus) over Q[t]
        r0 = list(self.field.modulus)
        r1 = [c for c in self.coeffs]
        while r1 and not r1[-1]:
            r1.pop()
        s0, s1 = [], [R_ONE]
        while True:
            q, r = _poly_divmod(r0, r1)
            if not r:
                break
            s = list(s0)
            s += [R_ZERO] * (len(q) + len(s1) - 1 - len(s))
            for i, qi in enumerate(q):
                if qi:
                    for j, sj in enumerate(s1):
                        s[i + j] -= qi * sj
            while s and not s[-1]:
                s.pop()
            r0, r1, s0, s1 = r1, r, s1, s
        lead = 1 / r1[-1] if len(r1) == 1 else None
        if lead is None:
            raise DivisionByZero("element not invertible (modulus not coprime)")
        return CycNumber(self.field, self.field._reduce([c * lead for c in s1]))

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def __repr__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{c}" if k == 0 else (f"{c}*t^{k}" if k > 1 else f"{c}*t"))
        return "Cyc(" + (" + ".join(terms) if terms else "0") + ")"


def scalar_add(a, b):
    return a + b


def scalar_mul(a, b):
    return a * b


def scalar_inv(a):
    if isinstance(a, CycNumber):
        return a.inverse()
    if not a:
        raise DivisionByZero("inverse of zero")
    return 1 / a


# ---------------------------------------------------------------------------
# monomials
# ---------------------------------------------------------------------------


def mon_mul(m1: Monomial, m2: Monomial) -> Monomial:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for v, e in m2:
        d[v] = d.get(v, 0) + e
    return tuple(sorted((v, e) for v, e in d.items() if e))

def mon_deg(m: Monomial) -> int:
    return sum(e for _, e in m)


def mon_from_var(var: int, exp: int = 1) -> Monomial:
    return ((var, exp),) if exp else MON_ONE


def deglex_key(m: Monomial):
    # degree first, then lexicographic on exponent vectors with the smallest
    # variable most significant; (-v, e) walks variables in that order
    return (mon_deg(m), tuple((-v, e) for v, e in m))


def n_degree(m: Monomial, n: int) -> int:
    """Total exponent of a monomial reduced mod n."""
    return mon_deg(m) % n


# ---------------------------------------------------------------------------
# sparse multivariate polynomials
# ---------------------------------------------------------------------------


class Poly:
    """Sparse multivariate polynomial over a field of coefficients.

    Zero coefficients are never stored, so equality is structural.  The
    coefficient domain is anything with field operations and truthiness
    (rationals or CycNumber); a single polynomial keeps one domain throughout.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "Poly":
        return Poly()

    @staticmethod
    def const(c) -> "Poly":
        return Poly({MON_ONE: c}) if c else Poly()

    @staticmethod
    def var(v: int, exp: int = 1, coeff=R_ONE) -> "Poly":
        return Poly({mon_from_var(v, exp): coeff})

    # -- basic queries ------------------------------------------------------

    def __bool__(self):
        return bool(self.terms)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def variables(self) -> set:
        vs = set()
        for m in self.terms:
            for v, _ in m:
                vs.add(v)
        return vs

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((mon_deg(m) for m in self.terms), default=-1)

    def leading(self) -> tuple[Monomial, object]:
        """Leading term under degree-lexicographic order."""
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        m = max(self.terms, key=deglex_key)
        return m, self.terms[m]

    def coefficient(self, m: Monomial):
        return self.terms.get(m, R_ZERO)

    def constant_term(self):
        return self.terms.get(MON_ONE, R_ZERO)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other: "Poly") -> "Poly":
        t = dict(self.terms)
        for m, c in other.terms.items():
            s = t.get(m)
            if s is None:
                t[m] = c
            else:
                s = s + c
                if s:
                    t[m] = s
                else:
                    del t[m]
        p = Poly.__new__(Poly)
        p.terms = t
        return p

    def __neg__(self) -> "Poly":
        p = Poly.__new__(Poly)
        p.terms = {m: -c for m, c in self.terms.items()}
        return p

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        if not self.terms or not other.terms:
            return Poly()
        t: dict = {}
        small, big = (self.terms, other.terms)
        if len(small) > len(big):
            small, big = big, small
        for m1, c1 in small.items():
            for m2, c2 in big.items():
                m = mon_mul(m1, m2)
                c = c1 * c2
                s = t.get(m)
                if s is None:
                    t[m] = c
                else:
                    s = s + c
                    if s:
                        t[m] = s
                    else:
                        del t[m]
        p = Poly.__new__(Poly)
        p.terms = t
        return p

    def scale(self, c) -> "Poly":
        if not c:
            return Poly()
        p = Poly.__new__(Poly)
        p.terms = {m: c * v for m, v in self.terms.items()}
        return p

    def map_coefficients(self, fn) -> "Poly":
        return Poly({m: fn(c) for m, c in self.terms.items()})

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(R_ONE)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    # -- substitution and division -----------------------------------------

    def substitute(self, var: int, value: "Poly") -> "Poly":
        """Replace a variable by a polynomial, exactly."""
        untouched: dict = {}
        powers: dict[int, Poly] = {0: Poly.const(R_ONE), 1: value}
        out = Poly()
        for m, c in self.terms.items():
            e = dict(m).get(var)
            if e is None:
                s = untouched.get(m)
                untouched[m] = c if s is None else s + c
                continue
            rest = tuple((v, k) for v, k in m if v != var)
            if e not in powers:
                p = powers[max(powers)]
                for _ in range(max(powers), e):
                    p = p * value
                    powers[max(powers) + 1] = p
            out = out + powers[e].scale(c) * Poly({rest: R_ONE})
        return out + Poly({m: c for m, c in untouched.items() if c})

    def divide_exact(self, divisor: "Poly") -> "Poly":
        """Exact single-divisor division; raises ValueError if not exact."""
        if not divisor:
            raise DivisionByZero("division by zero polynomial")
        lm, lc = divisor.leading()
        lc_inv = scalar_inv(lc)
        rem = Poly(self.terms)
        quot: dict = {}
        lm_dict = dict(lm)
        while rem:
            m, c = rem.leading()
            md = dict(m)
            if any(md.get(v, 0) < e for v, e in lm_dict.items()):
                raise ValueError("inexact polynomial division")
            qm = tuple(sorted((v, e) for v, e in
                              ((v, md.get(v, 0) - lm_dict.get(v, 0)) for v in md)
                              if e))
            if any(e < 0 for _, e in qm):
                raise ValueError("inexact polynomial division")
            qc = c * lc_inv
            quot[qm] = quot.get(qm, R_ZERO) + qc
            rem = rem - divisor * Poly({qm: qc})
        return Poly(quot)

    def evaluate(self, assignment: Mapping[int, object]):
        """Evaluate at scalar values; every variable must be assigned."""
        total = None
        for m, c in self.terms.items():
            val = c
            for v, e in m:
                val = val * (assignment[v] ** e)
            total = val if total is None else total + val
        return total if total is not None else R_ZERO

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        bits = []
        for m in sorted(self.terms, key=deglex_key, reverse=True):
            c = self.terms[m]
            mon = "*".join(f"x{v}^{e}" if e > 1 else f"x{v}" for v, e in m) or "1"
            bits.append(f"({c})*{mon}")
        return "Poly(" + " + ".join(bits) + ")"


# ---------------------------------------------------------------------------
# quotient ring C[x_1..x_r]/(x_i^n - 1) and the n-degree machinery
# ---------------------------------------------------------------------------


def quotient_reduce(p: Poly, n: int) -> Poly:
    """Reduce every exponent mod n (x^n |-> 1 repeatedly).

    This is the projection to C[x..]/(x_i^n - 1, ...); it is a ring
    homomorphism and idempotent.
    """
    out: dict = {}
    for m, c in p.terms.items():
        rm = tuple(sorted((v, e % n) for v, e in m if e % n))
        s = out.get(rm)
        if s is None:
            out[rm] = c
        else:
            s = s + c
            if s:
                out[rm] = s
            else:
                del out[rm]
    return Poly(out)


def is_n_homogeneous(p: Poly, n: int) -> bool:
    degrees = {n_degree(m, n) for m in p.terms}
    return len(degrees) <= 1


def n_homogeneous_parts(p: Poly, n: int) -> dict[int, Poly]:
    """Split into parts of fixed total-degree-mod-n; zero parts omitted."""
    parts: dict[int, dict] = {}
    for m, c in p.terms.items():
        parts.setdefault(n_degree(m, n), {})[m] = c
    return {d: Poly(t) for d, t in sorted(parts.items())}
