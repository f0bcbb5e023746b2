"""Oriented knot diagrams in planar-diagram (PD) notation.

Conventions, fixed once and relied on everywhere:

* A crossing is a quadruple X[a,b,c,d] of edge labels listed counterclockwise
  starting from the incoming under-strand, so the under-strand runs a -> c.
* The crossing sign is +1 when the over-strand runs d -> b and -1 when it
  runs b -> d.
* The oriented resolution replaces a positive crossing by the arcs a -> b and
  d -> c, a negative one by a -> d and b -> c (the two non-crossing
  orientation-preserving connections).
* A 0-crossing unknot is the empty crossing list with edge_count 1.

Edges are labelled 1..edge_count and each label appears exactly twice, once
as an incoming end and once as an outgoing end.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field


class PDError(ValueError):
    pass


class MalformedSyntax(PDError):
    pass


class BadIncidence(PDError):
    pass


class OrientationConflict(PDError):
    pass


class UnknownKnot(KeyError):
    pass


IN, OUT = 0, 1


@dataclass(frozen=True)
class KnotDiagram:
    """PD-coded oriented knot diagram (value semantics, hashable)."""

    crossings: tuple
    edge_count: int
    name: str | None = None

    def __post_init__(self):
        _validate(self)

    @property
    def crossing_count(self) -> int:
        return len(self.crossings)

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "crossings": [list(x) for x in self.crossings]},
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(text: str) -> "KnotDiagram":
        data = json.loads(text)
        crossings = tuple(tuple(x) for x in data["crossings"])
        edge_count = max((e for x in crossings for e in x), default=1)
        return KnotDiagram(crossings, edge_count, data.get("name"))


@dataclass(frozen=True)
class ResolutionStats:
    """Circle count of the oriented resolution and the writhe."""

    r: int
    w: int


def _validate(d: KnotDiagram):
    if not d.crossings:
        if d.edge_count != 1:
            raise BadIncidence("crossingless diagram must have edge_count 1")
        return
    counts: dict[int, int] = {}
    for x in d.crossings:
        if len(x) != 4:
            raise MalformedSyntax(f"crossing {x} is not a quadruple")
        for e in x:
            if not isinstance(e, int) or e < 1 or e > d.edge_count:
                raise BadIncidence(f"edge label {e} outside 1..{d.edge_count}")
            counts[e] = counts.get(e, 0) + 1
    bad = [e for e in range(1, d.edge_count + 1) if counts.get(e, 0) != 2]
    if bad:
        raise BadIncidence(f"edges {bad} do not appear exactly twice")
    edge_roles(d)  # raises OrientationConflict if inconsistent


def parse_pd(text: str) -> KnotDiagram:
    """Parse `X[a,b,c,d]` items, optionally wrapped in `PD[...]`, or `unknot`."""
    stripped = text.strip()
    if stripped.lower() == "unknot":
        return KnotDiagram((), 1, "unknot")
    body = stripped
    m = re.fullmatch(r"PD\s*[\[(](.*)[\])]\s*", stripped, re.DOTALL)
    if m:
        body = m.group(1)
    crossings = []
    pos = 0
    pattern = re.compile(r"\s*X\s*[\[(]\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*[\])]\s*")
    while pos < len(body):
        if body[pos] in ", \t\n":
            pos += 1
            continue
        m = pattern.match(body, pos)
        if not m:
            raise MalformedSyntax(f"unparseable token at position {pos}: {body[pos:pos + 20]!r}")
        crossings.append(tuple(int(g) for g in m.groups()))
        pos = m.end()
    if not crossings:
        raise MalformedSyntax("no crossings found and input is not 'unknot'")
    edge_count = max(e for x in crossings for e in x)
    return KnotDiagram(tuple(crossings), edge_count)


def edge_roles(d: KnotDiagram) -> dict[tuple[int, int], int]:
    """Role (IN/OUT) of every (crossing index, position); derived by propagation.

    Positions 0 and 2 are the under-strand head and tail; positions 1 and 3
    carry the over-strand, whose direction is pinned down by requiring every
    edge to occur once incoming and once outgoing.
    """
    appearances: dict[int, list[tuple[int, int]]] = {}
    for ci, x in enumerate(d.crossings):
        for pos, e in enumerate(x):
            appearances.setdefault(e, []).append((ci, pos))
    roles: dict[tuple[int, int], int] = {}
    work = []
    for ci in range(len(d.crossings)):
        roles[(ci, 0)] = IN
        roles[(ci, 2)] = OUT
        work.append((ci, 0))
        work.append((ci, 2))

    def assign(key, val):
        if key in roles:
            if roles[key] != val:
                raise OrientationConflict(f"no consistent orientation at {key}")
            return
        roles[key] = val
        work.append(key)

    while work:
        ci, pos = work.pop()
        val = roles[(ci, pos)]
        e = d.crossings[ci][pos]
        for (cj, pj) in appearances[e]:
            if (cj, pj) != (ci, pos):
                assign((cj, pj), 1 - val)
        if pos in (1, 3):
            assign((ci, 4 - pos), 1 - val)
        # a double appearance within one crossing at the same slot pair is
        # handled by the edge rule above
        if appearances[e][0] == appearances[e][1]:
            raise OrientationConflict(f"edge {e} appears twice at one position")
    for ci in range(len(d.crossings)):
        for pos in range(4):
            if (ci, pos) not in roles:
                raise OrientationConflict("orientation underdetermined")
    return roles


def crossing_signs(d: KnotDiagram) -> list[int]:
    """+1 when the over-strand runs d -> b, else -1."""
    roles = edge_roles(d)
    return [1 if roles[(ci, 3)] == IN else -1 for ci in range(len(d.crossings))]


def writhe(d: KnotDiagram) -> int:
    return sum(crossing_signs(d))


def oriented_arcs(d: KnotDiagram) -> list[tuple[int, int]]:
    """Arcs (incoming edge -> outgoing edge) of the oriented resolution."""
    arcs = []
    for x, s in zip(d.crossings, crossing_signs(d)):
        a, b, c, cc = x
        if s > 0:
            arcs.append((a, b))
            arcs.append((cc, c))
        else:
            arcs.append((a, cc))
            arcs.append((b, c))
    return arcs


def seifert_circles(d: KnotDiagram) -> list[list[int]]:
    """Edge cycles of the oriented resolution, each a sorted rotation."""
    if not d.crossings:
        return [[1]]
    nxt = {u: v for u, v in oriented_arcs(d)}
    seen = set()
    circles = []
    for e in range(1, d.edge_count + 1):
        if e in seen:
            continue
        cyc = []
        cur = e
        while cur not in seen:
            seen.add(cur)
            cyc.append(cur)
            cur = nxt[cur]
        start = cyc.index(min(cyc))
        circles.append(cyc[start:] + cyc[:start])
    return sorted(circles)


def oriented_resolution(d: KnotDiagram) -> ResolutionStats:
    return ResolutionStats(r=len(seifert_circles(d)), w=writhe(d))


def mirror(d: KnotDiagram) -> KnotDiagram:
    """Switch every crossing; writhe negates, Seifert circles are unchanged."""
    out = []
    for x, s in zip(d.crossings, crossing_signs(d)):
        a, b, c, dd = x
        out.append((dd, a, b, c) if s > 0 else ((b, c, dd, a)))
    name = None
    if d.name:
        name = d.name[1:] if d.name.startswith("m") else "m" + d.name
    return KnotDiagram(tuple(out), d.edge_count, name)


def relabel(d: KnotDiagram, perm: dict[int, int]) -> KnotDiagram:
    """Apply an edge-label permutation (stats must be unchanged)."""
    out = tuple(tuple(perm[e] for e in x) for x in d.crossings)
    return KnotDiagram(out, d.edge_count, d.name)


def connected_sum(d1: KnotDiagram, d2: KnotDiagram) -> KnotDiagram:
    """Splice the two diagrams along their lowest-numbered edges.

    Any band placement gives the same invariants for knots; cutting the
    lowest edge of each summand keeps the construction deterministic.
    """
    if not d1.crossings:
        return KnotDiagram(d2.crossings, d2.edge_count, _sum_name(d1, d2))
    if not d2.crossings:
        return KnotDiagram(d1.crossings, d1.edge_count, _sum_name(d1, d2))
    shift = d1.edge_count
    x2 = [tuple(e + shift for e in x) for x in d2.crossings]
    e1, e2 = 1, shift + 1
    roles1 = edge_roles(d1)
    # replace the head appearance of e1 by e2 and of e2 by e1: this reroutes
    # the two strands through each other's diagram
    x1 = [list(x) for x in d1.crossings]
    for (ci, pos), role in roles1.items():
        if d1.crossings[ci][pos] == e1 and role == IN:
            x1[ci][pos] = e2
    roles2 = edge_roles(d2)
    for (ci, pos), role in roles2.items():
        if d2.crossings[ci][pos] == e2 - shift and role == IN:
            lst = list(x2[ci])
            lst[pos] = e1
            x2[ci] = tuple(lst)
    crossings = tuple(tuple(x) for x in x1) + tuple(x2)
    return KnotDiagram(crossings, d1.edge_count + d2.edge_count, _sum_name(d1, d2))


def _sum_name(d1, d2):
    if d1.name and d2.name:
        return f"{d1.name}#{d2.name}"
    return None


def is_alternating(d: KnotDiagram) -> bool:
    """True when over/under passages alternate along the strand."""
    if not d.crossings:
        return True
    roles = edge_roles(d)
    # passage map: arriving edge -> (is_under, departing edge)
    arrive: dict[int, tuple[bool, int]] = {}
    for ci, x in enumerate(d.crossings):
        a, b, c, dd = x
        arrive[a] = (True, c)
        if roles[(ci, 3)] == IN:
            arrive[dd] = (False, b)
        else:
            arrive[b] = (False, dd)
    start = 1
    seq = []
    cur = start
    while True:
        under, nxt = arrive[cur]
        seq.append(under)
        cur = nxt
        if cur == start:
            break
    if len(seq) != 2 * len(d.crossings):
        raise OrientationConflict("diagram is not a single knot component")
    return all(seq[i] != seq[(i + 1) % len(seq)] for i in range(len(seq)))


def is_knot(d: KnotDiagram) -> bool:
    if not d.crossings:
        return True
    try:
        is_alternating(d)
        return True
    except OrientationConflict:
        return False


# ---------------------------------------------------------------------------
# braid closures
# ---------------------------------------------------------------------------


def braid_closure(word: list[int], strands: int, name: str | None = None) -> KnotDiagram:
    """PD code of the closure of a braid word (letters +-i for the i-th
    elementary crossing, strands oriented downward).

    A positive letter produces a positive crossing under the sign convention
    above; the closure must be a single component.
    """
    if not word:
        raise ValueError("empty braid word")
    perm = list(range(strands))
    for letter in word:
        i = abs(letter) - 1
        if i < 0 or i + 1 >= strands:
            raise ValueError(f"letter {letter} outside strand range")
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
    # single component check: the permutation must be one cycle
    seen, j = set(), 0
    while j not in seen:
        seen.add(j)
        j = perm.index(j)
    if len(seen) != strands:
        raise ValueError("braid closure is not a knot")

    fresh = strands + 1
    init = list(range(1, strands + 1))
    cur = list(init)
    crossings = []
    for letter in word:
        i = abs(letter) - 1
        u, v = cur[i], cur[i + 1]
        up, vp = fresh, fresh + 1
        fresh += 2
        if letter > 0:
            crossings.append((u, vp, up, v))
        else:
            crossings.append((v, u, vp, up))
        cur[i], cur[i + 1] = vp, up
    # close up: identify cur[j] with init[j]
    ident = {c: i for c, i in zip(cur, init) if c != i}
    crossings = [tuple(ident.get(e, e) for e in x) for x in crossings]
    # renumber contiguously, preserving numeric order
    used = sorted({e for x in crossings for e in x})
    renum = {e: k + 1 for k, e in enumerate(used)}
    crossings = tuple(tuple(renum[e] for e in x) for x in crossings)
    return KnotDiagram(crossings, len(used), name)


# ---------------------------------------------------------------------------
# the built-in table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableEntry:
    crossing_number: int
    alternating: bool
    genus: int | None
    braid: tuple | None  # (word, strands) when the stored diagram is a closure
    pd: str | None = None


_TABLE: dict[str, TableEntry] = {
    "unknot": TableEntry(0, True, 0, None),
    "3_1": TableEntry(3, True, 1, ((1, 1, 1), 2)),
    "m3_1": TableEntry(3, True, 1, ((-1, -1, -1), 2)),
    "4_1": TableEntry(4, True, 1, ((1, -2, 1, -2), 3)),
    "5_1": TableEntry(5, True, 2, ((1, 1, 1, 1, 1), 2)),
    "5_2": TableEntry(
        5, True, 1, None,
        "PD[X[1,4,2,5],X[3,8,4,9],X[5,10,6,1],X[9,6,10,7],X[7,2,8,3]]",
    ),
    "6_1": TableEntry(
        6, True, 1, None,
        "PD[X[1,4,2,5],X[7,10,8,11],X[3,9,4,8],X[9,3,10,2],X[5,12,6,1],X[11,6,12,7]]",
    ),
}


def table_names() -> list[str]:
    return list(_TABLE)


def table_entry(name: str) -> TableEntry:
    if name not in _TABLE:
        raise UnknownKnot(name)
    return _TABLE[name]


def knot_table(name: str) -> KnotDiagram:
    entry = table_entry(name)
    if name == "unknot":
        return KnotDiagram((), 1, "unknot")
    if entry.braid is not None:
        word, strands = entry.braid
        return braid_closure(list(word), strands, name)
    d = parse_pd(entry.pd)
    return KnotDiagram(d.crossings, d.edge_count, name)
