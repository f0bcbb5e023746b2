"""Koszul matrix factorizations for the perturbed potential x^(n+1) - (n+1)x.

A model is a tensor product of Koszul rows (a_k; b_k) over a polynomial ring
Q[vars], possibly modulo cap relations x^d = tail (tail in normal form, all
terms of degree <= d), one relation per capped variable.  Since the leading
monomials of the relations are pure powers of distinct variables they form a
Groebner basis, so normal forms are canonical and the capped directions carry
an honest finite monomial basis.

Generators are bitmasks over rows; bit k clear means the even generator of
row k.  The differential sends bit k clear to set multiplying by a_k and set
to clear multiplying by b_k, with the Koszul sign (-1)^(set bits below k).
Quantum degrees: variables weigh 2 and each row's odd generator carries an
offset chosen so that in the unperturbed limit both internal differentials
are graded of degree exactly n+1.

Closed diagrams give potential zero.  Models are reduced by three kinds of
exact transport steps, each a chain equivalence with explicit chain maps both
ways (push down, pull up):

* ExcludeStep - drop a row whose entry is unit*(x - p), substituting x := p;
* CapStep     - a row (v; 0) whose leading monomial is a unit pure power of
  an uncapped variable is the cone of multiplication by v, so it becomes the
  cap relation x^d = tail (the classical circle row (n+1)(x^n - 1) included);
* TwistStep   - the Koszul row operation (a_i; b_i), (a_j; b_j) ->
  (a_i + t*a_j; b_i), (a_j; b_j - t*b_i), used to Gaussian-reduce the second
  entries and expose new rows of the first two kinds.

A model whose variables are all capped is finite-dimensional and its filtered
homology is computed exactly by the elimination engine; the admissible
labeling count is still checked as an independent oracle.  For models that
keep free variables, a degree-truncated computation with a stabilization
check is provided, which is how the truncation-parameter form of the public
homology operation is specified.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

from .algebra import (MON_ONE, Poly, R_ONE, R_ZERO, RAT, deglex_key,
                      mon_deg, mon_mul)
from .elimination import eliminate


class BadN(ValueError):
    pass


class NotExcludable(ValueError):
    pass


class NotClosed(ValueError):
    pass


class Unstabilized(RuntimeError):
    pass


class Row(NamedTuple):
    a: Poly
    b: Poly
    offset: int          # quantum degree of the odd generator relative to the even one
    tag: tuple           # (crossing id, slot) -- stable identity across models


class Model:
    """Tensor of Koszul rows over Q[variables] modulo cap relations."""

    def __init__(self, n: int, rows: tuple, variables: tuple, caps=None,
                 base_shift: int = 0, parity_offset: int = 0):
        self.n = n
        self.rows = rows
        self.variables = tuple(sorted(variables))
        self.caps = dict(caps) if caps else {}   # var -> (d, tail Poly)
        self.base_shift = base_shift
        self.parity_offset = parity_offset
        self._offsets = [r.offset for r in rows]
        self._nf_cache: dict = {}

    # -- normal forms ---------------------------------------------------------

    def nf_term(self, mon) -> Poly:
        """Normal form of a monomial modulo the cap relations."""
        cached = self._nf_cache.get(mon)
        if cached is not None:
            return cached
        for v, e in mon:
            cap = self.caps.get(v)
            if cap is not None and e >= cap[0]:
                d, tail = cap
                rest = tuple((w, f) if w != v else (w, e - d) for w, f in mon)
                rest = tuple((w, f) for w, f in rest if f)
                out = self.nf_poly(self.nf_term(rest) * tail)
                self._nf_cache[mon] = out
                return out
        p = Poly({mon: R_ONE})
        self._nf_cache[mon] = p
        return p

    def nf_poly(self, p: Poly) -> Poly:
        if not self.caps:
            return p
        out = Poly()
        for m, c in p.terms.items():
            out = out + self.nf_term(m).scale(c)
        return out

    # -- generator bookkeeping ------------------------------------------------

    def gen_qdeg(self, mask: int) -> int:
        q = self.base_shift
        m = mask
        k = 0
        while m:
            if m & 1:
                q += self._offsets[k]
            m >>= 1
            k += 1
        return q

    def gen_parity(self, mask: int) -> int:
        return (self.parity_offset + mask.bit_count()) & 1

    def qdeg(self, mask: int, mon) -> int:
        return self.gen_qdeg(mask) + 2 * mon_deg(mon)

    def potential(self) -> Poly:
        total = Poly()
        for r in self.rows:
            total = total + r.a * r.b
        return self.nf_poly(total)

    def all_capped(self) -> bool:
        return all(v in self.caps for v in self.variables)

    # -- the differential ------------------------------------------------------

    def differential(self, vec: dict) -> dict:
        out: dict = {}
        rows = self.rows
        for (mask, mon), coeff in vec.items():
            for k, row in enumerate(rows):
                bit = 1 << k
                entry = row.b if mask & bit else row.a
                if not entry:
                    continue
                sign = -1 if (mask & (bit - 1)).bit_count() & 1 else 1
                tmask = mask ^ bit
                c0 = coeff if sign > 0 else -coeff
                for em, ec in entry.terms.items():
                    prod = self.nf_term(mon_mul(mon, em))
                    for tm, tc in prod.terms.items():
                        key = (tmask, tm)
                        s = out.get(key)
                        s = c0 * ec * tc if s is None else s + c0 * ec * tc
                        if s:
                            out[key] = s
                        else:
                            del out[key]
        return out

    def __repr__(self):
        return (f"Model(n={self.n}, rows={len(self.rows)}, vars={self.variables}, "
                f"caps={sorted(self.caps)}, shift={self.base_shift})")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def gornik_potential(var: int, n: int) -> Poly:
    """x^(n+1) - (n+1)x."""
    if n < 2:
        raise BadN("n must be at least 2")
    return Poly({((var, n + 1),): R_ONE, ((var, 1),): RAT(-(n + 1))})


def pi_poly(n: int, i: int, j: int) -> Poly:
    """(w(x_i) - w(x_j)) / (x_i - x_j), exactly; collapses to (n+1)(x^n - 1) at i == j."""
    p = Poly()
    for k in range(n + 1):
        mon = mon_mul(((i, k),) if k else MON_ONE, ((j, n - k),) if n - k else MON_ONE)
        p = p + Poly({mon: R_ONE})
    return p + Poly.const(RAT(-(n + 1)))


def arc_row(n: int, out_var: int, in_var: int, tag=("arc",)) -> Row:
    """Koszul row of an oriented arc from in_var to out_var."""
    a = pi_poly(n, out_var, in_var)
    b = Poly.var(out_var) - Poly.var(in_var)
    return Row(a, b, 1 - n, tag)


def _power_sum(n_power: int) -> Poly:
    """x^k + y^k expressed in s = x+y (var -1) and p = x*y (var -2)."""
    S, P = -1, -2
    p0, p1 = Poly.const(RAT(2)), Poly.var(S)
    for _ in range(2, n_power + 1):
        p0, p1 = p1, Poly.var(S) * p1 - Poly.var(P) * p0
    return p1 if n_power >= 1 else p0


def two_variable_potential(n: int) -> Poly:
    """W(s, p) with W(x+y, xy) = w(x) + w(y), in reserved vars s=-1, p=-2."""
    return _power_sum(n + 1) - Poly.var(-1).scale(RAT(n + 1))


def _difference_quotient(W: Poly, slot_var: int, v1: Poly, v2: Poly, other_sub: dict) -> Poly:
    """(W|slot=v1 - W|slot=v2) / (v1 - v2), expanded via telescoping powers."""
    out = Poly()
    for m, c in W.terms.items():
        md = dict(m)
        e = md.pop(slot_var, 0)
        rest = Poly({tuple(sorted(md.items())): c})
        for v, sub in other_sub.items():
            rest = rest.substitute(v, sub)
        if e == 0:
            continue
        tele = Poly()
        for i in range(e):
            tele = tele + (v1 ** i) * (v2 ** (e - 1 - i))
        out = out + rest * tele
    return out


def wide_rows(n: int, x1: int, x2: int, x3: int, x4: int, tag_base=("wide",)) -> tuple:
    """The two Koszul rows of a wide edge with outgoing (x1,x2), incoming (x3,x4).

    Row entries come from the two-step symmetric difference quotient of the
    two-variable potential, so u1*(x1+x2-x3-x4) + u2*(x1x2-x3x4) equals
    w(x1)+w(x2)-w(x3)-w(x4) exactly and every entry is n-homogeneous.
    """
    W = two_variable_potential(n)
    s12 = Poly.var(x1) + Poly.var(x2)
    s34 = Poly.var(x3) + Poly.var(x4)
    p12 = Poly.var(x1) * Poly.var(x2)
    p34 = Poly.var(x3) * Poly.var(x4)
    u1 = _difference_quotient(W, -1, s12, s34, {-2: p12})
    u2 = _difference_quotient(W, -2, p12, p34, {-1: s34})
    e_row = Row(u1, s12 - s34, 1 - n, tag_base + ("E",))
    f_row = Row(u2, p12 - p34, 3 - n, tag_base + ("F",))
    return e_row, f_row


def koszul_row(a: Poly, b: Poly, n: int, tag=("row",)) -> Model:
    """Rank-(1,1) factorization with potential a*b."""
    if b:
        offset = 2 * b.degree() - (n + 1)
    elif a:
        offset = (n + 1) - 2 * a.degree()
    else:
        offset = 0
    variables = tuple(a.variables() | b.variables())
    return Model(n, (Row(a, b, offset, tag),), variables)


def arc_factorization(out_var: int, in_var: int, n: int) -> Model:
    row = arc_row(n, out_var, in_var, ("arc", out_var, in_var))
    variables = (out_var, in_var) if out_var != in_var else (out_var,)
    return Model(n, (row,), variables)


def wide_edge_factorization(out_pair: tuple, in_pair: tuple, n: int) -> Model:
    rows = wide_rows(n, out_pair[0], out_pair[1], in_pair[0], in_pair[1],
                     ("wide",) + tuple(out_pair) + tuple(in_pair))
    variables = tuple(set(out_pair) | set(in_pair))
    return Model(n, rows, variables, base_shift=-1)


def tensor(m1: Model, m2: Model) -> Model:
    if m1.n != m2.n:
        raise ValueError("tensor factors must share n")
    caps = dict(m1.caps)
    for v, c in m2.caps.items():
        if v in caps and caps[v] != c:
            raise ValueError("inconsistent caps")
        caps[v] = c
    return Model(
        m1.n,
        m1.rows + m2.rows,
        tuple(set(m1.variables) | set(m2.variables)),
        caps,
        m1.base_shift + m2.base_shift,
        (m1.parity_offset + m2.parity_offset) & 1,
    )


# ---------------------------------------------------------------------------
# division helpers (synthetic, in one variable over the capped rest)
# ---------------------------------------------------------------------------


def _by_exponent(p: Poly, var: int) -> dict:
    out: dict[int, Poly] = {}
    for m, c in p.terms.items():
        md = dict(m)
        e = md.pop(var, 0)
        rest = tuple(sorted(md.items()))
        out.setdefault(e, Poly())
        out[e] = out[e] + Poly({rest: c})
    return {e: q for e, q in out.items() if q}


def _divide_linear(p: Poly, var: int, sub: Poly, model: Model) -> Poly:
    """Divide p by (var - sub), sub var-free; remainder must vanish."""
    by_exp = _by_exponent(p, var)
    if not by_exp:
        return Poly()
    top = max(by_exp)
    quot: dict[int, Poly] = {}
    carry = Poly()
    for e in range(top, 0, -1):
        carry = model.nf_poly(carry + by_exp.get(e, Poly()))
        quot[e - 1] = carry
        carry = carry * sub
    out = Poly()
    for e, q in quot.items():
        out = out + (q * Poly.var(var, e) if e else q)
    return model.nf_poly(out)


def _divide_monic(p: Poly, var: int, d: int, tail: Poly, model: Model) -> Poly:
    """Divide p by (var^d - tail) where deg_var(tail) < d; exact by contract."""
    coeffs = _by_exponent(p, var)
    quot = Poly()
    while coeffs:
        top = max(coeffs)
        if top < d:
            break
        q = coeffs.pop(top)
        quot = quot + q * Poly.var(var, top - d)
        add = q * tail
        for e2, q2 in _by_exponent(add, var).items():
            cur = coeffs.get(top - d + e2, Poly()) + q2
            if cur:
                coeffs[top - d + e2] = cur
            else:
                coeffs.pop(top - d + e2, None)
    return model.nf_poly(quot)


# ---------------------------------------------------------------------------
# transport steps
# ---------------------------------------------------------------------------


def _mask_compress(mask: int, k: int) -> int:
    return (mask & ((1 << k) - 1)) | ((mask >> (k + 1)) << k)


def _mask_expand(mask: int, k: int) -> int:
    low = mask & ((1 << k) - 1)
    return low | ((mask >> k) << (k + 1))


def _sigma(mask: int, k: int) -> int:
    """Sign twist for removing a set bit: parity of the set bits above k."""
    return -1 if (mask >> (k + 1)).bit_count() & 1 else 1


def _sign_below(mask: int, k: int) -> int:
    return -1 if (mask & ((1 << k) - 1)).bit_count() & 1 else 1


def _subst_term(model: Model, mon, var: int, sub: Poly) -> Poly:
    md = dict(mon)
    e = md.pop(var, 0)
    rest = Poly({tuple(sorted(md.items())): R_ONE})
    if not e:
        return model.nf_poly(rest)
    return model.nf_poly(rest * sub ** e)


def _vec_add(out: dict, key, val):
    s = out.get(key)
    s = val if s is None else s + val
    if s:
        out[key] = s
    else:
        out.pop(key, None)


class TransportStep:
    """Common shape: source/target models plus chain maps both ways."""

    source: Model
    target: Model

    def push(self, vec: dict) -> dict:
        raise NotImplementedError

    def pull(self, vec: dict) -> dict:
        raise NotImplementedError

    def substitute_poly(self, p: Poly) -> Poly:
        return self.target.nf_poly(p)


class ExcludeStep(TransportStep):
    """Remove a Koszul row whose chosen entry is u*(x - p), substituting x := p.

    slot 'b': survivors are the even side of the row; slot 'a': the odd side,
    with a parity flip, the row's quantum offset, and a sign twist on the
    remaining mask bits.
    """

    def __init__(self, model: Model, k: int, slot: str, var: int, sub: Poly, unit):
        self.source = model
        self.k = k
        self.slot = slot
        self.var = var
        self.sub = sub
        self.unit = unit
        shift = model.base_shift
        parity = model.parity_offset
        if slot == "a":
            shift += model.rows[k].offset
            parity ^= 1
        caps = {v: c for v, c in model.caps.items() if v != var}
        variables = tuple(v for v in model.variables if v != var)
        tmp = Model(model.n, (), variables, caps)
        rows = []
        self._gaps = []
        for j, row in enumerate(model.rows):
            if j == k:
                continue
            na = tmp.nf_poly(row.a.substitute(var, sub))
            nb = tmp.nf_poly(row.b.substitute(var, sub))
            rows.append(Row(na, nb, row.offset, row.tag))
            # entry gaps, divided by (var - sub): the pull correction weights
            ga = model.nf_poly(row.a - na)
            gb = model.nf_poly(row.b - nb)
            if ga:
                self._gaps.append((j, "a", _divide_linear(ga, var, sub, model)))
            if gb:
                self._gaps.append((j, "b", _divide_linear(gb, var, sub, model)))
        self.target = Model(model.n, tuple(rows), variables, caps, shift, parity)

    def substitute_poly(self, p: Poly) -> Poly:
        return self.target.nf_poly(p.substitute(self.var, self.sub))

    def push(self, vec: dict) -> dict:
        k, bit = self.k, 1 << self.k
        keep_set = self.slot == "a"
        out: dict = {}
        for (mask, mon), c in vec.items():
            if bool(mask & bit) != keep_set:
                continue
            sign = _sigma(mask, k) if keep_set else 1
            tmask = _mask_compress(mask & ~bit, k)
            p = _subst_term(self.target, mon, self.var, self.sub)
            cc = c if sign > 0 else -c
            for tm, tc in p.terms.items():
                _vec_add(out, (tmask, tm), cc * tc)
        return out

    def _embed(self, vec: dict) -> dict:
        k, bit = self.k, 1 << self.k
        out = {}
        for (mask, mon), c in vec.items():
            emask = _mask_expand(mask, k)
            if self.slot == "a":
                sign = _sigma(emask, k)
                out[(emask | bit, mon)] = c if sign > 0 else -c
            else:
                out[(emask, mon)] = c
        return out

    def pull(self, vec: dict) -> dict:
        """Embed and add the division correction making this a chain map.

        The correction weights are the per-row entry gaps divided by
        (var - sub), precomputed at construction; no differentials are taken.
        """
        k, bit = self.k, 1 << self.k
        src = self.source
        out = self._embed(vec)
        u_inv = 1 / RAT(self.unit)
        for (emask, mon), c0 in list(out.items()):
            for j, slot_j, qgap in self._gaps:
                bit_j = 1 << j
                if bool(emask & bit_j) != (slot_j == "b"):
                    continue
                s_j = _sign_below(emask, j)
                kmask = (emask ^ bit_j) ^ bit
                s_k = _sign_below(kmask & ~bit, k)
                factor = -c0 * u_inv
                if s_j * s_k < 0:
                    factor = -factor
                for qm, qc in qgap.terms.items():
                    for tm, tc in src.nf_term(mon_mul(mon, qm)).terms.items():
                        _vec_add(out, (kmask, tm), factor * qc * tc)
        return out


class CapStep(TransportStep):
    """Replace a row whose only entry v has LM = lc * x^d (x uncapped) by the
    cap relation x^d = tail.

    The row is the cone of multiplication by v, which is monic in x and hence
    injective, so homology agrees with the quotient.  For slot 'a' (row
    (v; 0)) the survivors sit on the odd side (parity flip plus the row's
    offset); for slot 'b' (row (0; v)) on the even side with no shift.
    """

    def __init__(self, model: Model, k: int, slot: str, var: int, d: int,
                 lc, tail: Poly):
        self.source = model
        self.k = k
        self.slot = slot
        self.var = var
        self.d = d
        self.lc = lc
        self.tail = tail
        caps = dict(model.caps)
        caps[var] = (d, tail)
        tmp = Model(model.n, (), model.variables, caps)
        rows = []
        self._xrows = []   # rows whose entries involve the capped variable
        for j, r in enumerate(model.rows):
            if j == k:
                continue
            na, nb = tmp.nf_poly(r.a), tmp.nf_poly(r.b)
            rows.append(Row(na, nb, r.offset, r.tag))
            # products entry * monomial can exceed the cap even when the
            # entry itself is already in normal form
            if var in r.a.variables():
                self._xrows.append((j, "a", r.a))
            if var in r.b.variables():
                self._xrows.append((j, "b", r.b))
        shift = model.base_shift
        parity = model.parity_offset
        if slot == "a":
            shift += model.rows[k].offset
            parity ^= 1
        self.target = Model(model.n, tuple(rows), model.variables, caps, shift, parity)
        self._capq: dict = {}

    def _cap_quotient(self, mon) -> Poly:
        """(m - nf_target(m)) / v for a source monomial m, memoized."""
        q = self._capq.get(mon)
        if q is None:
            gap = Poly({mon: R_ONE}) - self.target.nf_term(mon)
            gap = self.source.nf_poly(gap)
            q = _divide_monic(gap, self.var, self.d, self.tail, self.source)
            self._capq[mon] = q
        return q

    def push(self, vec: dict) -> dict:
        k, bit = self.k, 1 << self.k
        keep_set = self.slot == "a"
        out: dict = {}
        for (mask, mon), c in vec.items():
            if bool(mask & bit) != keep_set:
                continue
            sign = _sigma(mask, k) if keep_set else 1
            tmask = _mask_compress(mask & ~bit, k)
            cc = c if sign > 0 else -c
            for tm, tc in self.target.nf_term(mon).terms.items():
                _vec_add(out, (tmask, tm), cc * tc)
        return out

    def _embed(self, vec: dict) -> dict:
        k, bit = self.k, 1 << self.k
        out = {}
        for (mask, mon), c in vec.items():
            emask = _mask_expand(mask, k)
            if self.slot == "a":
                sign = _sigma(emask, k)
                out[(emask | bit, mon)] = c if sign > 0 else -c
            else:
                out[(emask, mon)] = c
        return out

    def pull(self, vec: dict) -> dict:
        k, bit = self.k, 1 << self.k
        out = self._embed(vec)
        lc_inv = 1 / RAT(self.lc)
        for (emask, mon), c0 in list(out.items()):
            for j, slot_j, entry in self._xrows:
                bit_j = 1 << j
                if bool(emask & bit_j) != (slot_j == "b"):
                    continue
                s_j = _sign_below(emask, j)
                kmask = (emask ^ bit_j) ^ bit
                s_k = _sign_below(kmask & ~bit, k)
                factor = -c0 * lc_inv
                if s_j * s_k < 0:
                    factor = -factor
                for em, ec in entry.terms.items():
                    q = self._cap_quotient(mon_mul(mon, em))
                    for tm, tc in q.terms.items():
                        _vec_add(out, (kmask, tm), factor * ec * tc)
        return out


class TwistStep(TransportStep):
    """Koszul row operation: rows i, j become (a_i + t*a_j; b_i) and
    (a_j; b_j - t*b_i); an isomorphism, used to reduce the b-column."""

    def __init__(self, model: Model, i: int, j: int, t: Poly):
        self.source = model
        self.i = i
        self.j = j
        self.t = t
        rows = list(model.rows)
        ri, rj = rows[self.i], rows[self.j]
        rows[self.i] = Row(model.nf_poly(ri.a + t * rj.a), ri.b, ri.offset, ri.tag)
        rows[self.j] = Row(rj.a, model.nf_poly(rj.b - t * ri.b), rj.offset, rj.tag)
        self.target = Model(model.n, tuple(rows), model.variables, model.caps,
                            model.base_shift, model.parity_offset)

    def _apply(self, model: Model, vec: dict, t: Poly) -> dict:
        i, j = self.i, self.j
        bi, bj = 1 << i, 1 << j
        lo, hi = (i, j) if i < j else (j, i)
        between = ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)
        out = dict(vec)
        for (mask, mon), c in vec.items():
            if mask & bj and not mask & bi:
                sign = -1 if (mask & between).bit_count() & 1 else 1
                cc = c if sign > 0 else -c
                tmask = (mask & ~bj) | bi
                for em, ec in t.terms.items():
                    for tm, tc in model.nf_term(mon_mul(mon, em)).terms.items():
                        _vec_add(out, (tmask, tm), cc * ec * tc)
        return out

    def push(self, vec: dict) -> dict:
        return self._apply(self.target, vec, self.t)

    def pull(self, vec: dict) -> dict:
        return self._apply(self.source, vec, self.t.scale(RAT(-1)))


def _linear_exclusion_slot(model: Model, entry: Poly):
    """Find var x with entry = u*x + (x-free rest), u a nonzero rational."""
    candidates = []
    for m, c in entry.terms.items():
        if len(m) == 1 and m[0][1] == 1:
            candidates.append((m[0][0], c))
    for var, u in sorted(candidates):
        if var in model.caps:
            continue
        if any(var in dict(m) for m in entry.terms if m != ((var, 1),)):
            continue
        rest = Poly({m: c for m, c in entry.terms.items() if m != ((var, 1),)})
        sub = rest.scale(-1 / RAT(u))
        return var, sub, u
    return None


def _cap_candidate(model: Model, entry: Poly):
    """LM(entry) = lc * x^d with x uncapped: the cap data, else None."""
    if not entry:
        return None
    lm, lc = entry.leading()
    if len(lm) != 1:
        return None
    var, d = lm[0]
    if var in model.caps or isinstance(var, str):
        return None
    tail = (entry - Poly({lm: lc})).scale(-1 / RAT(lc))
    if any(dict(m).get(var, 0) >= d for m in tail.terms):
        return None
    return var, d, lc, tail


def exclusion_step(model: Model, k: int) -> ExcludeStep:
    """The canonical exclusion at row k; raises NotExcludable."""
    row = model.rows[k]
    for slot, entry in (("b", row.b), ("a", row.a)):
        if entry:
            found = _linear_exclusion_slot(model, entry)
            if found:
                return ExcludeStep(model, k, slot, *found)
    raise NotExcludable(f"row {k} has no unit-linear entry of the form x - p")


def exclude_variable(model: Model, k: int) -> Model:
    """Public single-row exclusion; raises NotExcludable."""
    return exclusion_step(model, k).target


def find_step(model: Model, k: int):
    """The canonical exclusion or cap step available at row k, if any."""
    row = model.rows[k]
    if row.b:
        found = _linear_exclusion_slot(model, row.b)
        if found:
            return ExcludeStep(model, k, "b", *found)
    if row.a:
        found = _linear_exclusion_slot(model, row.a)
        if found:
            return ExcludeStep(model, k, "a", *found)
    if row.a and not row.b:
        cap = _cap_candidate(model, row.a)
        if cap is not None:
            return CapStep(model, k, "a", *cap)
    if row.b and not row.a:
        cap = _cap_candidate(model, row.b)
        if cap is not None:
            return CapStep(model, k, "b", *cap)
    return None


def _find_exclusion(model: Model, skip_crossings: frozenset):
    for k in range(len(model.rows)):
        row = model.rows[k]
        if row.tag and row.tag[0] in skip_crossings:
            continue
        for slot, entry in (("b", row.b), ("a", row.a)):
            if entry:
                found = _linear_exclusion_slot(model, entry)
                if found:
                    return ExcludeStep(model, k, slot, *found)
    return None


def _find_cap(model: Model, skip_crossings: frozenset):
    """Smallest-degree cap relation over all one-entry rows."""
    best = None
    for k in range(len(model.rows)):
        row = model.rows[k]
        if row.tag and row.tag[0] in skip_crossings:
            continue
        for slot, entry, other in (("a", row.a, row.b), ("b", row.b, row.a)):
            if entry and not other:
                cap = _cap_candidate(model, entry)
                if cap is not None:
                    key = (cap[1], k)
                    if best is None or key < best[0]:
                        best = (key, k, slot, cap)
    if best is None:
        return None
    _, k, slot, cap = best
    return CapStep(model, k, slot, *cap)


def _find_twist(model: Model, skip_crossings: frozenset):
    """First b-column reduction: LM(b_i) divides a term of b_j."""
    for j, rj in enumerate(model.rows):
        if not rj.b or (rj.tag and rj.tag[0] in skip_crossings):
            continue
        for i, ri in enumerate(model.rows):
            if i == j or not ri.b:
                continue
            if ri.tag and ri.tag[0] in skip_crossings:
                continue
            lm, lc = ri.b.leading()
            lm_d = dict(lm)
            for m in sorted(rj.b.terms, key=deglex_key, reverse=True):
                md = dict(m)
                if all(md.get(v, 0) >= e for v, e in lm_d.items()):
                    qm = tuple(sorted((v, e - lm_d.get(v, 0)) for v, e in md.items()
                               if e - lm_d.get(v, 0)))
                    t = Poly({qm: rj.b.terms[m] / lc})
                    return TwistStep(model, i, j, t)
    return None


def reduce_model(model: Model, skip_crossings: frozenset = frozenset()):
    """Greedy canonical reduction; rows of skipped crossings stay untouched
    and are not used as twist reducers (edge contexts need identical
    decisions on both sides of a resolution change)."""
    steps = []
    m = model
    while True:
        step = (_find_exclusion(m, skip_crossings)
                or _find_cap(m, skip_crossings)
                or _find_twist(m, skip_crossings))
        if step is None:
            return steps, m
        steps.append(step)
        m = step.target


def pull_chain(steps, vec: dict) -> dict:
    for step in reversed(steps):
        vec = step.pull(vec)
    return vec


def push_chain(steps, vec: dict) -> dict:
    for step in steps:
        vec = step.push(vec)
    return vec


def transport_poly(steps, p: Poly) -> Poly:
    for step in steps:
        p = step.substitute_poly(p)
    return p


# ---------------------------------------------------------------------------
# homology
# ---------------------------------------------------------------------------


def _free_deg(mon, caps) -> int:
    return sum(e for v, e in mon if v not in caps)


def _monomials(variables, caps, free_bound):
    """Normal-form monomials: capped exponents below their cap degree, total
    degree in uncapped variables <= free_bound (sorted)."""
    out = [MON_ONE]
    for v in variables:
        cap = caps.get(v)
        new = []
        for m in out:
            if cap is not None:
                top = cap[0] - 1
            else:
                top = free_bound - sum(e for w, e in m if w not in caps)
            for e in range(1, top + 1):
                new.append(tuple(sorted(m + ((v, e),))))
        out.extend(new)
    return sorted(out)


def block_id(n: int, parity: int, z2n: int) -> tuple:
    """Connected component of (parity, class mod 2n) under the differential."""
    best = (parity, z2n)
    p, a = parity, z2n
    for _ in range(4 * n):
        p, a = 1 - p, (a + n + 1) % (2 * n)
        best = min(best, (p, a))
    return best


class VertexHomology:
    """Filtered homology of a closed model.

    For fully capped models the monomial basis is finite and the computation
    is exact.  Otherwise the basis is truncated in free degree; survivors are
    then only trusted below the entry-degree margin and callers must verify
    against the labeling oracle (the spec's stabilization contract).

    Basis classes carry (level, class mod 2n, parity) and explicit cycle
    representatives in the model's (mask, monomial) coordinates.  project()
    writes any other cycle in this basis.
    """

    def __init__(self, model: Model, free_bound: int = 0, pivot_mode="default"):
        if model.potential():
            raise NotClosed("nonzero potential")
        self.model = model
        self.free_bound = free_bound
        n = model.n
        caps = model.caps
        entry_bound = 0
        for r in model.rows:
            for p in (r.a, r.b):
                for m in p.terms:
                    entry_bound = max(entry_bound, _free_deg(m, caps))
        self.entry_bound = entry_bound
        safe = free_bound - entry_bound
        self.safe_bound = safe
        self.exact = model.all_capped()

        basis = []
        mons = _monomials(model.variables, caps, free_bound)
        for mask in range(1 << len(model.rows)):
            for mon in mons:
                basis.append((mask, mon))
        basis.sort(key=lambda bm: (model.qdeg(*bm), bm))
        index = {bm: i for i, bm in enumerate(basis)}
        levels = [model.qdeg(*bm) for bm in basis]

        blocks: dict[tuple, list] = {}
        for i, bm in enumerate(basis):
            bid = block_id(n, model.gen_parity(bm[0]), levels[i] % (2 * n))
            blocks.setdefault(bid, []).append(i)

        self.basis = basis
        self.index = index
        self.levels = levels
        self._results = {}
        self.classes = []
        self.unverified = []

        for bid, members in sorted(blocks.items()):
            local = {g: j for j, g in enumerate(members)}
            loc_levels = [levels[g] for g in members]
            cols = {}
            pivotable = set() if not self.exact else None
            for j, g in enumerate(members):
                if not self.exact:
                    if _free_deg(basis[g][1], caps) <= safe:
                        pivotable.add(j)
                    else:
                        continue
                img = model.differential({basis[g]: R_ONE})
                entries = {}
                for key, c in img.items():
                    t = index.get(key)
                    if t is None:
                        raise AssertionError("exact image left enumerated basis")
                    entries[local[t]] = c
                if entries:
                    cols[j] = entries
            res = eliminate(loc_levels, cols, expected_shift=n + 1,
                            pivot_mode=pivot_mode, pivotable_rows=pivotable)
            self._results[bid] = (res, members, local)
            for s in res.survivors:
                g = members[s]
                cls = {
                    "level": levels[g],
                    "z2n": levels[g] % (2 * n),
                    "parity": model.gen_parity(basis[g][0]),
                    "block": bid,
                    "survivor": s,
                }
                if not self.exact and (_free_deg(basis[g][1], caps) > safe
                                       or res.residual.get(s)):
                    self.unverified.append(cls)
                    continue
                rep_local = res.include({s: R_ONE})
                rep = {basis[members[j]]: c for j, c in rep_local.items()}
                if model.differential(rep):
                    raise Unstabilized(
                        "survivor representative is not a cycle; raise the bound")
                cls["rep"] = rep
                self.classes.append(cls)
        self.classes.sort(key=lambda c: (c["level"], c["block"], c["survivor"]))

    @property
    def dimension(self) -> int:
        return len(self.classes)

    def level_multiset(self) -> dict:
        out: dict[int, int] = {}
        for c in self.classes:
            out[c["level"]] = out.get(c["level"], 0) + 1
        return out

    def project(self, vec: dict) -> list:
        """Coordinates of a cycle on self.classes (in their listed order)."""
        by_block: dict[tuple, dict] = {}
        for key, c in vec.items():
            i = self.index.get(key)
            if i is None:
                raise Unstabilized("cycle exceeds the enumerated basis")
            bid = block_id(self.model.n, self.model.gen_parity(key[0]),
                           self.levels[i] % (2 * self.model.n))
            _, _, local = self._results[bid]
            by_block.setdefault(bid, {})[local[i]] = c
        coords = [R_ZERO] * len(self.classes)
        for bid, sub in by_block.items():
            res, members, _ = self._results[bid]
            reduced = res.project(sub)
            for ci, cls in enumerate(self.classes):
                if cls["block"] == bid:
                    val = reduced.pop(cls["survivor"], R_ZERO)
                    coords[ci] = val
            leftovers = {members[j]: v for j, v in reduced.items() if v}
            if leftovers:
                bad = {k: self.levels[k] for k in leftovers}
                raise Unstabilized(f"cycle has weight on unverified survivors {bad}")
        return coords


def default_free_bound(model: Model) -> int:
    """Free-degree budget for not-fully-capped models."""
    g = 0
    total = 2
    for r in model.rows:
        da = max((_free_deg(m, model.caps) for m in r.a.terms), default=0)
        db = max((_free_deg(m, model.caps) for m in r.b.terms), default=0)
        g = max(g, da, db)
        total += max(da, db)
    return total + g


def periodic_homology(model: Model, truncation: int | None = None,
                      free_bound: int | None = None,
                      pivot_mode="default") -> VertexHomology:
    """Homology of a closed model.

    Fully capped models are computed exactly (the truncation argument is then
    irrelevant).  Otherwise `truncation` is a quantum-degree budget from which
    a free-degree bound is derived (or pass free_bound directly).
    """
    if model.all_capped():
        return VertexHomology(model, 0, pivot_mode)
    if free_bound is None:
        if truncation is None:
            free_bound = default_free_bound(model)
        else:
            min_gen = min(model.gen_qdeg(m) for m in range(1 << len(model.rows)))
            free_bound = max(0, (truncation - min_gen) // 2)
    return VertexHomology(model, free_bound, pivot_mode)


def homology_of_reduced(model: Model, oracle: int | None = None,
                        pivot_mode="default") -> VertexHomology:
    """Exact homology of a fully reduced model; the pipeline path."""
    if not model.all_capped():
        raise Unstabilized(
            f"model did not reduce to finite form (free vars "
            f"{sorted(set(model.variables) - set(model.caps))})")
    h = VertexHomology(model, 0, pivot_mode)
    if oracle is not None and h.dimension != oracle:
        raise Unstabilized(
            f"homology dimension {h.dimension} != labeling count {oracle}")
    return h


def periodic_homology_oracle(model: Model, oracle: int,
                             pivot_mode="default") -> VertexHomology:
    """Exact homology checked against the labeling count."""
    return homology_of_reduced(model, oracle, pivot_mode)


def periodic_homology_stable(model: Model, truncation: int, oracle: int | None = None):
    """Stabilization contract: graded dimensions agree between the bounds
    derived from N and N + 2n and, when given, the total matches the oracle."""
    n = model.n
    h1 = periodic_homology(model, truncation=truncation)
    h2 = periodic_homology(model, truncation=truncation + 2 * n)
    if h1.level_multiset() != h2.level_multiset():
        raise Unstabilized(
            f"graded dimensions not stable: {h1.level_multiset()} vs {h2.level_multiset()}")
    if oracle is not None and h1.dimension != oracle:
        raise Unstabilized(f"dimension {h1.dimension} != labeling count {oracle}")
    return h1


# ---------------------------------------------------------------------------
# the admissible-labeling oracle
# ---------------------------------------------------------------------------


def admissible_labelings(circle_classes: int, wide_constraints: list, n: int) -> int:
    """Count edge labelings by n-th roots of unity.

    circle_classes: number of strand classes not touching any wide edge.
    wide_constraints: list of (out1, out2, in1, in2) over hashable class ids;
    a labeling is admissible when at each wide edge the incoming multiset
    equals the outgoing multiset and the two labels are distinct.
    """
    involved = sorted({c for w in wide_constraints for c in w})
    count = 0
    for labels in itertools.product(range(n), repeat=len(involved)):
        env = dict(zip(involved, labels))
        ok = True
        for o1, o2, i1, i2 in wide_constraints:
            a, b = sorted((env[o1], env[o2]))
            c, d = sorted((env[i1], env[i2]))
            if (a, b) != (c, d) or a == b:
                ok = False
                break
        if ok:
            count += 1
    if not wide_constraints:
        count = 1
    return count * n ** circle_classes
