"""The explicit root-of-unity cycles and the homogeneous basis they span.

For each label p the generator is the product over the oriented-resolution
circles of (x^n - 1)/(x - xi^p) = sum_a xi^(-(a+1)p) x^a, a cycle sitting in
the all-oriented summand of the chain complex.  Splitting the p = 0 generator
into its total-degree-mod-n parts gives the homogeneous basis; the change of
basis back is the explicit power matrix xi^(-t(p+r)).

Everything here works over Q(xi_n); cycle and rank verification run against
the rational pipeline by projecting through its elimination transcripts.
"""

from __future__ import annotations

from .algebra import (CycNumber, CyclotomicField, MON_ONE, Poly, R_ONE, R_ZERO,
                      n_homogeneous_parts)
from .filtered import KnotHomology
from .knots import KnotDiagram, oriented_resolution


class CycleFailure(RuntimeError):
    pass


class RankFailure(RuntimeError):
    pass


class ZeroClass(ValueError):
    pass


def circle_factor(field: CyclotomicField, var: int, p: int) -> Poly:
    """(x^n - 1)/(x - xi^p) = sum_a xi^(-(a+1)p) x^a."""
    n = field.n
    return Poly({((var, a),) if a else MON_ONE: field.xi(-(a + 1) * p)
                 for a in range(n)})


def build_g(p: int, n: int, variables) -> Poly:
    """Product of circle factors over the given circle variables."""
    field = CyclotomicField(n)
    out = Poly.const(field.one)
    for v in sorted(variables):
        out = out * circle_factor(field, v, p)
    return out


def build_h(n: int, variables) -> dict[int, Poly]:
    """The homogeneous parts of the p = 0 generator, keyed by degree mod n.

    All coefficients of g_0 are 1, so part d is the sum of the monomials of
    total degree d mod n.
    """
    return n_homogeneous_parts(build_g(0, n, variables), n)


def coefficient_oracle(t: int, p: int, r: int, n: int) -> CycNumber:
    """xi^(-t(p+r)): the ratio between a degree-p-mod-n monomial's coefficient
    in g_t and in g_0."""
    return CyclotomicField(n).xi(-t * (p + r))


def predicted_j(p: int, diagram: KnotDiagram, n: int) -> int:
    """Residue mod 2n of the graded piece carrying the degree-p class."""
    stats = oriented_resolution(diagram)
    return (2 * p + (1 - n) * (stats.w + stats.r)) % (2 * n)


class GornikBasis:
    """The n generator classes of a computed knot homology."""

    def __init__(self, kh: KnotHomology):
        self.kh = kh
        self.n = kh.n
        self.field = CyclotomicField(kh.n)
        cube = kh.cube
        signs = cube.signs
        self.or_state = tuple(0 if s > 0 else 1 for s in signs)
        vertex = cube.vertices[self.or_state]
        if vertex["i"] != 0:
            raise AssertionError("oriented vertex must sit in degree 0")
        reduced = vertex["reduced"]
        if reduced.rows or not reduced.all_capped():
            raise AssertionError("oriented vertex did not reduce to circles")
        self.circle_vars = tuple(sorted(reduced.caps))
        self.vertex = vertex

    def generator_vector(self, p: int) -> dict:
        """g_p as a vector in the reduced oriented-vertex model."""
        g = build_g(p, self.n, self.circle_vars)
        return {(0, m): c for m, c in g.terms.items()}

    def class_coords(self, p: int) -> list:
        """Coordinates of [g_p] on the oriented vertex's homology classes."""
        return self.vertex["homology"].project(self.generator_vector(p))

    def verify_cycles(self) -> dict:
        """d(g_p) = 0 exactly and the classes have rank n in homology."""
        cube, kh = self.kh.cube, self.kh
        coords = [self.class_coords(p) for p in range(self.n)]
        c = len(self.or_state)
        for p, coord in enumerate(coords):
            for ci in range(c):
                if self.or_state[ci] == 1:
                    continue
                edge = cube.edges[(self.or_state, ci)]
                image: dict = {}
                for j, val in enumerate(coord):
                    if not val:
                        continue
                    for i, entry in edge["cols"].get(j, {}).items():
                        s = image.get(i, self.field.zero) + val * entry
                        if s:
                            image[i] = s
                        else:
                            image.pop(i, None)
                if image:
                    raise CycleFailure(
                        f"d(g_{p}) != 0 along crossing {ci}: {image}")
        # rank n in total homology
        rows = []
        for p, coord in enumerate(coords):
            chain = {(self.or_state, j): val for j, val in enumerate(coord) if val}
            survivors = kh.eliminated.project_chain(chain)
            rows.append(survivors)
        keys = sorted({k for row in rows for k in row})
        matrix = [[row.get(k, self.field.zero) for k in keys] for row in rows]
        rank = _rank(matrix, self.field)
        if rank != self.n:
            raise RankFailure(f"generator classes have rank {rank} != {self.n}")
        return {"cycles": True, "rank": rank}

    def qgr(self, p: int) -> int:
        """Quantum grading of [g_p]: top level carrying its class."""
        coord = self.class_coords(p)
        chain = {(self.or_state, j): val for j, val in enumerate(coord) if val}
        survivors = self.kh.eliminated.project_chain(chain)
        levels = [self.kh.fc.items[s]["level"] for s, v in survivors.items() if v]
        if not levels:
            raise ZeroClass(f"[g_{p}] projects to zero")
        return max(levels)

    def realized_residues(self) -> set:
        """Residues mod 2n of the limit-page degrees at homological degree 0."""
        return {j % (2 * self.n) for (i, j) in self.kh.table.dims if i == 0}

    def predicted_residues(self) -> set:
        return {predicted_j(p, self.kh.diagram, self.n) for p in range(self.n)}


def _rank(matrix, field) -> int:
    m = [row[:] for row in matrix]
    rank = 0
    rows = len(m)
    cols = len(m[0]) if m else 0
    rowi = 0
    for col in range(cols):
        piv = next((r for r in range(rowi, rows) if m[r][col]), None)
        if piv is None:
            continue
        m[rowi], m[piv] = m[piv], m[rowi]
        inv = m[rowi][col].inverse() if isinstance(m[rowi][col], CycNumber) \
            else 1 / m[rowi][col]
        for r in range(rows):
            if r != rowi and m[r][col]:
                f = m[r][col] * inv
                m[r] = [a - f * b for a, b in zip(m[r], m[rowi])]
        rank += 1
        rowi += 1
    return rank


def verify_cycles(diagram: KnotDiagram, n: int, kh: KnotHomology | None = None) -> dict:
    basis = GornikBasis(kh or KnotHomology(diagram, n))
    return basis.verify_cycles()


def change_of_basis_matrix(n: int, r: int):
    """Entry (t, p): the coefficient of h_p in g_t, namely xi^(-t(p+r))."""
    field = CyclotomicField(n)
    return [[field.xi(-t * (p + r)) for p in range(n)] for t in range(n)]
