"""Associated-graded homology of the filtered complex and the even invariant.

filtered_eliminate cancels the cube differential in order of increasing
filtration drop; the survivors' (homological degree, level) multiset is the
limit page of the filtration spectral sequence.  For a knot the table must be
n one-dimensional pieces in homological degree 0 spaced by 2, which pins the
even integer shift and the two extreme gradings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .algebra import RAT, R_ZERO
from .elimination import eliminate, NotAComplex
from .cube import CubeComplex, FilteredComplex, build_complex
from .knots import KnotDiagram


class StructureViolation(RuntimeError):
    pass


class ShapeMismatch(ValueError):
    pass


class OddInvariant(ValueError):
    pass


class GradedDimTable:
    """Dimensions of the limit page: map (i, j) -> dim."""

    def __init__(self, dims: dict):
        self.dims = {k: v for k, v in dims.items() if v}

    def total(self) -> int:
        return sum(self.dims.values())

    def support_degrees(self) -> set:
        return {i for (i, _j) in self.dims}

    def row(self, i: int) -> dict:
        return {j: v for (ii, j), v in self.dims.items() if ii == i}

    def __eq__(self, other):
        return isinstance(other, GradedDimTable) and self.dims == other.dims

    def __repr__(self):
        return f"GradedDimTable({dict(sorted(self.dims.items()))})"


@dataclass
class InvariantReport:
    knot: str | None
    n: int
    s_n: int
    s_max: int
    s_min: int
    poly: list            # [(j, dim), ...] at homological degree 0
    checks: dict = field(default_factory=dict)
    truncation: int = 0
    runtime_ms: int = 0

    def canonical_json(self, include_runtime: bool = False) -> str:
        """Deterministic serialization; runtime is volatile and excluded from
        the byte-for-byte determinism contract."""
        data = {
            "knot": self.knot,
            "n": self.n,
            "s_n": self.s_n,
            "s_max": self.s_max,
            "s_min": self.s_min,
            "poly": [[j, d] for j, d in self.poly],
            "checks": {k: self.checks[k] for k in sorted(self.checks)},
            "truncation": self.truncation,
        }
        if include_runtime:
            data["runtime_ms"] = self.runtime_ms
        return json.dumps(data, separators=(",", ":"), sort_keys=False)


class EliminatedComplex:
    """A filtered complex together with its full elimination transcript;
    keeps enough data to express chain classes in the surviving basis."""

    def __init__(self, fc: FilteredComplex, pivot_mode: str = "default"):
        fc.check()
        self.fc = fc
        levels = [it["level"] for it in fc.items]
        self.result = eliminate(
            levels, {c: dict(rs) for c, rs in fc.diffs.items()},
            expected_shift=0, pivot_mode=pivot_mode)
        self._offsets: dict = {}
        for idx, it in enumerate(fc.items):
            self._offsets.setdefault(it["vertex"], {})[it["idx"]] = idx

    def table(self) -> GradedDimTable:
        dims: dict = {}
        for s in self.result.survivors:
            it = self.fc.items[s]
            key = (it["i"], it["level"])
            dims[key] = dims.get(key, 0) + 1
        return GradedDimTable(dims)

    def global_index(self, vertex, idx) -> int:
        return self._offsets[vertex][idx]

    def project_chain(self, vec: dict) -> dict:
        """Class coordinates on survivors of a cycle given at chain level
        ({(vertex, class idx): coeff})."""
        gvec = {}
        for (vertex, idx), c in vec.items():
            gvec[self.global_index(vertex, idx)] = c
        return self.result.project(gvec)

    def survivor_levels(self) -> list:
        return [(self.fc.items[s]["i"], self.fc.items[s]["level"])
                for s in self.result.survivors]


def filtered_eliminate(fc: FilteredComplex, pivot_mode: str = "default") -> GradedDimTable:
    """Limit-page dimensions of a filtered complex (d^2 checked)."""
    return EliminatedComplex(fc, pivot_mode).table()


def validate_structure(table: GradedDimTable, n: int, strict: bool = True) -> dict:
    """The structure checks every knot must satisfy."""
    checks = {
        "total_dimension_n": table.total() == n,
        "supported_in_degree_0": table.support_degrees() <= {0},
    }
    row = table.row(0)
    checks["pieces_one_dimensional"] = all(v == 1 for v in row.values())
    js = sorted(row)
    checks["spacing_by_two"] = bool(js) and js == list(range(js[0], js[0] + 2 * len(js), 2))
    if strict and not all(checks.values()):
        raise StructureViolation(f"limit page is not a shifted [n]: {table} ({checks})")
    return checks


def extract_invariant(table: GradedDimTable, n: int, knot: str | None = None,
                      strict: bool = True) -> InvariantReport:
    """The even shift: the table must be q^s * (q^n - q^-n)/(q - q^-1)."""
    checks = validate_structure(table, n, strict=strict)
    row = table.row(0)
    js = sorted(row)
    if not js or len(js) != n or any(row[j] != 1 for j in js):
        raise ShapeMismatch(f"degree-0 row is not [n]: {row}")
    s_max, s_min = js[-1], js[0]
    if (s_max + s_min) % 2:
        raise OddInvariant(f"s_max + s_min is odd: {s_max} + {s_min}")
    s_n = (s_max + s_min) // 2
    checks["s_n_even"] = s_n % 2 == 0
    checks["extremes_match"] = (s_max == s_n + (n - 1)) and (s_min == s_n - (n - 1))
    if strict and not (checks["s_n_even"] and checks["extremes_match"]):
        raise StructureViolation(f"invariant shape violated: {row}")
    return InvariantReport(
        knot=knot, n=n, s_n=s_n, s_max=s_max, s_min=s_min,
        poly=[(j, row[j]) for j in js], checks=checks)


class KnotHomology:
    """End-to-end pipeline for one (diagram, n): cube, elimination, report."""

    def __init__(self, diagram: KnotDiagram, n: int, pivot_mode: str = "default",
                 max_crossings: int | None = None, strict: bool = True):
        self.diagram = diagram
        self.n = n
        self.cube = CubeComplex(diagram, n, pivot_mode=pivot_mode,
                                max_crossings=max_crossings)
        self.fc = self.cube.filtered_complex()
        self.eliminated = EliminatedComplex(self.fc, pivot_mode)
        self.table = self.eliminated.table()
        self.strict = strict

    def report(self) -> InvariantReport:
        return extract_invariant(self.table, self.n,
                                 knot=self.diagram.name, strict=self.strict)


def gornik_table(diagram: KnotDiagram, n: int, pivot_mode: str = "default",
                 strict: bool = True, max_crossings: int | None = None) -> GradedDimTable:
    """Limit page of a knot diagram; StructureViolation unless it is a
    shifted [n] at homological degree 0 (strict mode)."""
    kh = KnotHomology(diagram, n, pivot_mode=pivot_mode, max_crossings=max_crossings)
    validate_structure(kh.table, n, strict=strict)
    return kh.table


def s_invariant(diagram: KnotDiagram, n: int, **kw) -> int:
    return KnotHomology(diagram, n, **kw).report().s_n
