"""The cube of resolutions and its filtered chain complex.

Each crossing is resolved two ways: the oriented smoothing (two through-arcs)
and the wide edge.  Cube coordinates put the oriented state at 0 for positive
crossings and at 1 for negative ones, so the all-oriented vertex sits in
homological degree 0 for every knot diagram.

Quantum normalization (calibrated against the unknot and the oriented-
resolution shift (1-n)(w+r)): arc rows carry odd-generator offset 1-n, wide
rows 1-n and 3-n, and the per-crossing shifts are

    positive:  oriented 1-n,   wide -(n+1)
    negative:  oriented n-1,   wide  n-1

With these, both edge maps preserve the quantum filtration exactly and the
mod-2n class of every differential entry is 0.

Edge maps between the two local factorizations are fixed 2x2-block matrices
with polynomial entries (derived by exact division, verified by commutation
at construction); saddle maps for the connected-sum band come from divided
differences of the potential.  Induced maps on vertex homology are computed
by lift - apply - project through the exclusion transport steps.
"""

from __future__ import annotations

import itertools

from .algebra import MON_ONE, Poly, R_ONE, R_ZERO, RAT
from . import factorization as fz
from .knots import KnotDiagram, crossing_signs, seifert_circles, writhe
from .elimination import eliminate


class NonCommuting(RuntimeError):
    pass


class ComplexTooLarge(RuntimeError):
    pass


class BandMismatch(ValueError):
    pass


def crossing_local_vars(quad, sign):
    """(x1, x2, x3, x4): oriented arcs x4 -> x1 and x3 -> x2; wide edge with
    outgoing (x1, x2), incoming (x3, x4)."""
    a, b, c, d = quad
    return (b, c, d, a) if sign > 0 else ((d, c, b, a))


def complete_homogeneous(deg: int, variables: tuple) -> Poly:
    """Sum of all monomials of the given total degree in the variables."""
    if deg < 0:
        return Poly()
    out: dict = {}
    for combo in itertools.combinations_with_replacement(sorted(set(variables)), deg):
        mon: dict = {}
        for v in combo:
            mon[v] = mon.get(v, 0) + 1
        out[tuple(sorted(mon.items()))] = R_ONE
    return Poly(out)


def divided_difference_2(n: int, a: int, b: int, c: int) -> Poly:
    """Second divided difference of the potential: h_(n-1)(x_a, x_b, x_c)."""
    return complete_homogeneous(n - 1, (a, b, c))


def divided_difference_3(n: int, a: int, b: int, c: int, d: int) -> Poly:
    """Third divided difference of the potential: h_(n-2)."""
    return complete_homogeneous(n - 2, (a, b, c, d))


# ---------------------------------------------------------------------------
# local chain maps: chi (crossing resolution change) and the band saddle
# ---------------------------------------------------------------------------


# formal variable ids used while dividing; actual edges are substituted after
_G1, _G2, _G3, _G4 = -11, -12, -13, -14


def _specialize(comps: dict, x1: int, x2: int, x3: int, x4: int) -> dict:
    out = {}
    for key, p in comps.items():
        for formal, actual in ((_G1, x1), (_G2, x2), (_G3, x3), (_G4, x4)):
            p = p.substitute(formal, Poly.var(actual))
        out[key] = p
    return out


def _chi_p2(n) -> Poly:
    """Exact quotient (x4*u2 + u1 - pi(x2,x3)) / (x1 - x4), generic variables."""
    e_row, f_row = fz.wide_rows(n, _G1, _G2, _G3, _G4)
    num = Poly.var(_G4) * f_row.a + e_row.a - fz.pi_poly(n, _G2, _G3)
    return num.divide_exact(Poly.var(_G1) - Poly.var(_G4))


def chi_components(n: int, x1: int, x2: int, x3: int, x4: int, direction: str) -> dict:
    """Components of the edge map, keyed ((bit1, bit2) in, (bit1, bit2) out).

    direction 'or_to_wide': from arcs (x1<-x4),(x2<-x3) to the wide edge;
    'wide_to_or' the other way.  Row 1 is the first arc / the linear wide row.
    The polynomials are derived in generic variables (the divisions degenerate
    at kinks) and specialised to the actual edges afterwards.
    """
    p2 = _chi_p2(n)
    one = Poly.const(R_ONE)
    if direction == "or_to_wide":
        comps = {
            ((0, 0), (0, 0)): Poly.var(_G2) - Poly.var(_G4),
            ((0, 0), (1, 1)): p2,
            ((1, 0), (1, 0)): Poly.var(_G4).scale(RAT(-1)),
            ((1, 0), (0, 1)): one,
            ((0, 1), (1, 0)): Poly.var(_G2),
            ((0, 1), (0, 1)): one.scale(RAT(-1)),
            ((1, 1), (1, 1)): one.scale(RAT(-1)),
        }
    elif direction == "wide_to_or":
        comps = {
            ((0, 0), (0, 0)): one,
            ((0, 0), (1, 1)): p2,
            ((1, 0), (1, 0)): one,
            ((1, 0), (0, 1)): one,
            ((0, 1), (1, 0)): Poly.var(_G2),
            ((0, 1), (0, 1)): Poly.var(_G4),
            ((1, 1), (1, 1)): Poly.var(_G4) - Poly.var(_G2),
        }
    else:
        raise ValueError(direction)
    return _specialize(comps, x1, x2, x3, x4)


def saddle_components(n: int, x1: int, x2: int, x3: int, x4: int) -> dict:
    """Odd chain map from arcs (x1<-x4),(x2<-x3) to arcs (x1<-x3),(x2<-x4).

    This is the elementary 1-handle reconnection; entries are divided
    differences of the potential, and the map is filtered of degree n-1.
    """
    t123 = divided_difference_2(n, _G1, _G2, _G3)
    t124 = divided_difference_2(n, _G1, _G2, _G4)
    t234 = divided_difference_2(n, _G2, _G3, _G4)
    t134 = divided_difference_2(n, _G1, _G3, _G4)
    t1234 = divided_difference_3(n, _G1, _G2, _G3, _G4)
    one = Poly.const(R_ONE)
    num = ((Poly.var(_G2) - Poly.var(_G1)) * t124
           + (Poly.var(_G3) - Poly.var(_G4)) * t234
           + (Poly.var(_G1) - Poly.var(_G3)) * t123)
    alpha2 = num.divide_exact(Poly.var(_G2) - Poly.var(_G4))
    gamma2 = (t134 + (Poly.var(_G2) - Poly.var(_G3)) * t1234).scale(RAT(-1))
    comps = {
        ((0, 0), (1, 0)): t123.scale(RAT(-1)),
        ((0, 0), (0, 1)): alpha2,
        ((1, 0), (0, 0)): one,
        ((1, 0), (1, 1)): t123.scale(RAT(-1)),
        ((0, 1), (0, 0)): one.scale(RAT(-1)),
        ((0, 1), (1, 1)): gamma2,
        ((1, 1), (1, 0)): one,
        ((1, 1), (0, 1)): one,
    }
    return _specialize(comps, x1, x2, x3, x4)


def apply_block_map(src: fz.Model, tgt: fz.Model, pos: int, comps: dict,
                    odd: bool, vec: dict) -> dict:
    """Apply a two-row local map (rows pos, pos+1) tensored with identity."""
    out: dict = {}
    b1, b2 = 1 << pos, 1 << (pos + 1)
    for (mask, mon), coeff in vec.items():
        bits = (1 if mask & b1 else 0, 1 if mask & b2 else 0)
        sign = 1
        if odd and (mask & (b1 - 1)).bit_count() & 1:
            sign = -1
        for (ib, ob), poly in comps.items():
            if ib != bits or not poly:
                continue
            tmask = (mask & ~(b1 | b2)) | (ob[0] * b1) | (ob[1] * b2)
            c0 = coeff if sign > 0 else -coeff
            for em, ec in poly.terms.items():
                for tm, tc in tgt.nf_term(fz.mon_mul(mon, em)).terms.items():
                    key = (tmask, tm)
                    s = out.get(key)
                    s = c0 * ec * tc if s is None else s + c0 * ec * tc
                    if s:
                        out[key] = s
                    else:
                        del out[key]
    return out


def check_block_chain_map(src: fz.Model, tgt: fz.Model, pos: int, comps: dict,
                          odd: bool):
    """Exact commutation check on all generators; raises NonCommuting."""
    sgn = -1 if odd else 1
    for mask in range(1 << len(src.rows)):
        gen = {(mask, MON_ONE): R_ONE}
        lhs = tgt.differential(apply_block_map(src, tgt, pos, comps, odd, gen))
        rhs = apply_block_map(src, tgt, pos, comps, odd, src.differential(gen))
        keys = set(lhs) | set(rhs)
        for k in keys:
            if lhs.get(k, R_ZERO) != (rhs.get(k, R_ZERO) * sgn):
                raise NonCommuting(
                    f"local map fails to (anti)commute at generator {mask:b}")


# ---------------------------------------------------------------------------
# vertex models
# ---------------------------------------------------------------------------


def _crossing_rows(n: int, ci: int, quad, sign: int, state: int) -> tuple:
    """Rows of crossing ci in cube coordinate `state` (0 or 1)."""
    x1, x2, x3, x4 = crossing_local_vars(quad, sign)
    oriented = (state == 0) if sign > 0 else (state == 1)
    if oriented:
        r1 = fz.Row(fz.pi_poly(n, x1, x4), Poly.var(x1) - Poly.var(x4), 1 - n, (ci, 0))
        r2 = fz.Row(fz.pi_poly(n, x2, x3), Poly.var(x2) - Poly.var(x3), 1 - n, (ci, 1))
        return r1, r2
    e_row, f_row = fz.wide_rows(n, x1, x2, x3, x4)
    return (fz.Row(e_row.a, e_row.b, e_row.offset, (ci, 0)),
            fz.Row(f_row.a, f_row.b, f_row.offset, (ci, 1)))


def _crossing_shift(n: int, sign: int, state: int) -> int:
    oriented = (state == 0) if sign > 0 else (state == 1)
    if sign > 0:
        return (1 - n) if oriented else -(n + 1)
    return n - 1


def vertex_model(diagram: KnotDiagram, n: int, state: tuple,
                 extra_arcs: tuple = ()) -> fz.Model:
    """Tensor factorization of the resolution at a cube vertex.

    extra_arcs: ((out_var, in_var, kind), ...) crossing-free arcs, used for
    marked points and connected-sum bands; `kind` heads the row tag.
    """
    signs = crossing_signs(diagram)
    rows = []
    variables = set()
    shift = 0
    for ci, quad in enumerate(diagram.crossings):
        rows.extend(_crossing_rows(n, ci, quad, signs[ci], state[ci]))
        variables.update(quad)
        shift += _crossing_shift(n, signs[ci], state[ci])
    for bi, (out_v, in_v, kind) in enumerate(extra_arcs):
        rows.append(fz.Row(fz.pi_poly(n, out_v, in_v),
                           Poly.var(out_v) - Poly.var(in_v), 1 - n,
                           (kind, bi)))
        variables.update((out_v, in_v))
    return fz.Model(n, tuple(rows), tuple(variables), frozenset(), shift, 0)


def vertex_oracle(diagram: KnotDiagram, n: int, state: tuple,
                  extra_arcs: tuple = ()) -> int:
    """Admissible-labeling count of the resolution graph at this vertex."""
    signs = crossing_signs(diagram)
    parent: dict = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    wides = []
    variables = set()
    for ci, quad in enumerate(diagram.crossings):
        x1, x2, x3, x4 = crossing_local_vars(quad, signs[ci])
        variables.update(quad)
        oriented = (state[ci] == 0) if signs[ci] > 0 else (state[ci] == 1)
        if oriented:
            union(x1, x4)
            union(x2, x3)
        else:
            wides.append((x1, x2, x3, x4))
    for out_v, in_v, _kind in extra_arcs:
        union(out_v, in_v)
        variables.update((out_v, in_v))
    if not variables:
        return n
    constraints = [tuple(find(x) for x in w) for w in wides]
    involved = {c for w in constraints for c in w}
    classes = {find(v) for v in variables}
    free_circles = len(classes - involved)
    return fz.admissible_labelings(free_circles, constraints, n)


# ---------------------------------------------------------------------------
# the cube
# ---------------------------------------------------------------------------


class FilteredComplex:
    """Finite filtered complex over Q: basis items (i, level, class mod 2n)
    with exact scalar differentials; d^2 = 0 and d preserves level and class."""

    def __init__(self, n, items, diffs, meta=None):
        self.n = n
        self.items = items          # list of dicts: i, level, z2n, vertex, idx
        self.diffs = diffs          # dict col -> dict row -> RAT
        self.meta = meta or {}

    def check(self):
        for c, rs in self.diffs.items():
            for r, val in rs.items():
                if not val:
                    continue
                if self.items[r]["i"] != self.items[c]["i"] + 1:
                    raise ValueError("differential does not raise i by 1")
                if self.items[r]["level"] > self.items[c]["level"]:
                    raise ValueError("differential raises filtration")
                if self.items[r]["z2n"] != self.items[c]["z2n"]:
                    raise ValueError("differential changes the mod-2n class")
        # d^2 = 0
        for c, rs in self.diffs.items():
            acc: dict = {}
            for r, val in rs.items():
                for r2, val2 in self.diffs.get(r, {}).items():
                    acc[r2] = acc.get(r2, R_ZERO) + val * val2
            if any(acc.values()):
                raise ValueError("d^2 != 0")


class CubeComplex:
    """All 2^c vertices of a diagram with induced edge maps on homology."""

    def __init__(self, diagram: KnotDiagram, n: int, extra_arcs: tuple = (),
                 pivot_mode: str = "default", max_crossings: int | None = None):
        if max_crossings is not None and diagram.crossing_count > max_crossings:
            raise ComplexTooLarge(
                f"{diagram.crossing_count} crossings exceeds budget {max_crossings}")
        self.diagram = diagram
        self.n = n
        self._plain = not extra_arcs
        if diagram.crossing_count == 0 and not extra_arcs:
            # a bare unknot still needs a model: a circle with two marked points
            extra_arcs = ((1, 2, "closure"), (2, 1, "closure"))
        self.extra_arcs = extra_arcs
        self.pivot_mode = pivot_mode
        self.signs = crossing_signs(diagram)
        self.c_minus = sum(1 for s in self.signs if s < 0)
        self.vertices: dict[tuple, dict] = {}
        self._chi_cache: dict = {}
        c = diagram.crossing_count
        for state in itertools.product((0, 1), repeat=c):
            self._build_vertex(state)
        self._build_edges()

    # -- vertices -----------------------------------------------------------

    def hom_degree(self, state: tuple) -> int:
        return sum(state) - self.c_minus

    def _build_vertex(self, state: tuple):
        model = vertex_model(self.diagram, self.n, state, self.extra_arcs)
        if model.potential():
            raise AssertionError("resolution has nonzero potential")
        steps, reduced = fz.reduce_model(model)
        oracle = vertex_oracle(self.diagram, self.n, state, self.extra_arcs)
        hom = fz.periodic_homology_oracle(reduced, oracle, self.pivot_mode)
        self.vertices[state] = {
            "model": model,
            "steps": steps,
            "reduced": reduced,
            "homology": hom,
            "i": self.hom_degree(state),
            "lifted": None,  # basis cycles pulled to the full model, on demand
        }

    # -- edges ---------------------------------------------------------------

    def _edge_matrix(self, state: tuple, ci: int):
        """Induced map of the resolution change at crossing ci (state -> state')."""
        tgt_state = tuple(s ^ (1 if k == ci else 0) for k, s in enumerate(state))
        v, w = self.vertices[state], self.vertices[tgt_state]
        skip = frozenset({ci})
        steps_v, red_v = fz.reduce_model(v["model"], skip)
        steps_w, red_w = fz.reduce_model(w["model"], skip)
        # both reduced models keep crossing ci's rows adjacent, same position
        pos_v = [k for k, r in enumerate(red_v.rows) if r.tag[0] == ci]
        pos_w = [k for k, r in enumerate(red_w.rows) if r.tag[0] == ci]
        if pos_v != pos_w or len(pos_v) != 2 or pos_v[1] != pos_v[0] + 1:
            raise NonCommuting("reduction misaligned the crossing rows")
        pos = pos_v[0]
        sign = self.signs[ci]
        x1, x2, x3, x4 = crossing_local_vars(self.diagram.crossings[ci], sign)
        direction = "or_to_wide" if sign > 0 else "wide_to_or"
        comps = chi_components(self.n, x1, x2, x3, x4, direction)
        comps = {k: fz.transport_poly(steps_v, p) for k, p in comps.items()}
        comps = {k: red_w.nf_poly(p) for k, p in comps.items()}
        check_block_chain_map(red_v, red_w, pos, comps, odd=False)
        if v["lifted"] is None:
            v["lifted"] = [fz.pull_chain(v["steps"], cls["rep"])
                           for cls in v["homology"].classes]
        cols = {}
        for j, lifted in enumerate(v["lifted"]):
            vec = fz.push_chain(steps_v, lifted)
            vec = apply_block_map(red_v, red_w, pos, comps, False, vec)
            vec = fz.pull_chain(steps_w, vec)
            vec = fz.push_chain(w["steps"], vec)
            coords = w["homology"].project(vec)
            entries = {i: val for i, val in enumerate(coords) if val}
            if entries:
                cols[j] = entries
        return tgt_state, cols

    def _build_edges(self):
        self.edges: dict[tuple, dict] = {}
        c = self.diagram.crossing_count
        for state in self.vertices:
            for ci in range(c):
                if state[ci] == 1:
                    continue
                tgt_state, cols = self._edge_matrix(state, ci)
                self.edges[(state, ci)] = {"target": tgt_state, "cols": cols}

    # -- assembly -------------------------------------------------------------

    def filtered_complex(self) -> FilteredComplex:
        items = []
        offset: dict[tuple, int] = {}
        for state in sorted(self.vertices):
            v = self.vertices[state]
            offset[state] = len(items)
            for idx, cls in enumerate(v["homology"].classes):
                items.append({
                    "i": v["i"],
                    "level": cls["level"],
                    "z2n": cls["z2n"],
                    "vertex": state,
                    "idx": idx,
                })
        diffs: dict[int, dict] = {}
        for (state, ci), edge in self.edges.items():
            sign = -1 if sum(state[:ci]) & 1 else 1
            base_c = offset[state]
            base_r = offset[edge["target"]]
            for j, entries in edge["cols"].items():
                col = diffs.setdefault(base_c + j, {})
                for i, val in entries.items():
                    cur = col.get(base_r + i, R_ZERO)
                    cur = cur + (val if sign > 0 else -val)
                    if cur:
                        col[base_r + i] = cur
                    else:
                        col.pop(base_r + i, None)
        meta = {"name": self.diagram.name}
        if self._plain:
            meta["w"] = writhe(self.diagram)
            meta["r"] = len(seifert_circles(self.diagram))
        fc = FilteredComplex(self.n, items, diffs, meta=meta)
        fc.check()
        return fc

    def euler_characteristic(self) -> dict:
        """Graded Euler characteristic of the chain level: {j: coefficient}."""
        out: dict[int, int] = {}
        for state, v in self.vertices.items():
            sgn = -1 if v["i"] & 1 else 1
            for cls in v["homology"].classes:
                out[cls["level"]] = out.get(cls["level"], 0) + sgn
        return {j: c for j, c in sorted(out.items()) if c}


def build_complex(diagram: KnotDiagram, n: int, pivot_mode: str = "default",
                  max_crossings: int | None = None) -> FilteredComplex:
    return CubeComplex(diagram, n, pivot_mode=pivot_mode,
                       max_crossings=max_crossings).filtered_complex()


# ---------------------------------------------------------------------------
# connected-sum saddle maps
# ---------------------------------------------------------------------------


class SaddlePair:
    """The two complexes related by the connected-sum band, with the merge map
    F (split -> joined) and the split map G (joined -> split).

    The split diagram is D1 |_| D2 with a marked point on the cut edge of
    each summand; the joined one rewires the same four band variables.
    """

    def __init__(self, d1: KnotDiagram, d2: KnotDiagram, n: int):
        from .knots import edge_roles, IN
        shift = d1.edge_count
        cross1 = [list(x) for x in d1.crossings]
        cross2 = [[e + shift for e in x] for x in d2.crossings]
        e1, e2 = 1, shift + 1
        edge_count = d1.edge_count + d2.edge_count
        h1, h2 = edge_count + 1, edge_count + 2
        closures = []
        if d1.crossings:
            roles = edge_roles(d1)
            for (ci, pos), role in roles.items():
                if d1.crossings[ci][pos] == e1 and role == IN:
                    cross1[ci][pos] = h1
        else:
            closures.append((e1, h1, "closure"))
        if d2.crossings:
            roles2 = edge_roles(d2)
            for (ci, pos), role in roles2.items():
                if d2.crossings[ci][pos] == e2 - shift and role == IN:
                    cross2[ci][pos] = h2
        else:
            closures.append((e2, h2, "closure"))
        crossings = tuple(tuple(x) for x in cross1) + tuple(tuple(x) for x in cross2)
        # carrier: crossing data only; band endpoints live on the extra arcs
        carrier = KnotDiagram.__new__(KnotDiagram)
        object.__setattr__(carrier, "crossings", crossings)
        object.__setattr__(carrier, "edge_count", edge_count + 2)
        object.__setattr__(carrier, "name", None)
        self.n = n
        self.vars = (h1, h2, e2, e1)  # (x1, x2, x3, x4) of the saddle template
        closures = tuple(closures)
        self.split = CubeComplex(
            carrier, n, extra_arcs=((h1, e1, "band"), (h2, e2, "band")) + closures)
        self.joined = CubeComplex(
            carrier, n, extra_arcs=((h1, e2, "band"), (h2, e1, "band")) + closures)

    def _map(self, src_cube: CubeComplex, tgt_cube: CubeComplex, comps_raw):
        """Per-vertex induced matrices of the band map."""
        out = {}
        for state, v in src_cube.vertices.items():
            w = tgt_cube.vertices[state]
            skip = frozenset({"band"})
            steps_v, red_v = fz.reduce_model(v["model"], skip)
            steps_w, red_w = fz.reduce_model(w["model"], skip)
            pos_v = [k for k, r in enumerate(red_v.rows) if r.tag[0] == "band"]
            pos_w = [k for k, r in enumerate(red_w.rows) if r.tag[0] == "band"]
            if pos_v != pos_w or len(pos_v) != 2 or pos_v[1] != pos_v[0] + 1:
                raise BandMismatch("band rows misaligned")
            pos = pos_v[0]
            comps = {k: red_w.nf_poly(fz.transport_poly(steps_v, p))
                     for k, p in comps_raw.items()}
            check_block_chain_map(red_v, red_w, pos, comps, odd=True)
            if v["lifted"] is None:
                v["lifted"] = [fz.pull_chain(v["steps"], cls["rep"])
                               for cls in v["homology"].classes]
            cols = {}
            for j, lifted in enumerate(v["lifted"]):
                vec = fz.push_chain(steps_v, lifted)
                vec = apply_block_map(red_v, red_w, pos, comps, True, vec)
                vec = fz.pull_chain(steps_w, vec)
                vec = fz.push_chain(w["steps"], vec)
                coords = w["homology"].project(vec)
                entries = {i: val for i, val in enumerate(coords) if val}
                if entries:
                    cols[j] = entries
            out[state] = cols
        return out

    def merge_matrices(self):
        x1, x2, x3, x4 = self.vars
        return self._map(self.split, self.joined,
                         saddle_components(self.n, x1, x2, x3, x4))

    def split_matrices(self):
        x1, x2, x3, x4 = self.vars
        # reconnecting back: same template with the roles of x3 and x4 swapped
        return self._map(self.joined, self.split,
                         saddle_components(self.n, x1, x2, x4, x3))
