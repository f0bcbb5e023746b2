"""Filtered Gaussian elimination with exact scalars.

One engine serves two layers: the 2-periodic homology of a truncated
factorization (differential filtered of degree n+1) and the cube complex of a
diagram (differential filtered of degree 0).  `expected_shift` is the degree
the differential realises on graded tops; an entry from basis element s to
basis element t has drop = level(s) + expected_shift - level(t) >= 0.

Cancelling pairs in order of increasing drop runs the filtration spectral
sequence: after every entry has been cancelled the surviving generators'
levels are the associated-graded dimensions.  Processing a given drop never
creates an entry of smaller drop, so a single increasing sweep terminates.
The transcript of cancellations is kept so that later vectors can be
projected to the surviving basis (expressing a cycle's homology class) and
survivors can be lifted back to explicit chain representatives.
"""

from __future__ import annotations

from heapq import heappush, heappop

from .algebra import scalar_inv


class NotAComplex(ValueError):
    pass


class EliminationResult:
    __slots__ = ("survivors", "ops", "levels", "residual")

    def __init__(self, survivors, ops, levels, residual=None):
        self.survivors = survivors  # sorted list of surviving basis indices
        self.ops = ops              # list of (c, r, u, beta, rho)
        self.levels = levels        # level per original index
        self.residual = residual or {}  # entries that were never pivotable

    def project(self, vec: dict) -> dict:
        """Reduce a cycle to coordinates on the surviving basis."""
        v = dict(vec)
        for c, r, u, beta, rho in self.ops:
            zr = v.pop(r, None)
            if zr is not None:
                s = zr * scalar_inv(u)
                for j, bj in beta.items():
                    t = v.get(j)
                    t = -s * bj if t is None else t - s * bj
                    if t:
                        v[j] = t
                    else:
                        v.pop(j, None)
            v.pop(c, None)
        return v

    def include(self, vec: dict) -> dict:
        """Lift a combination of survivors to a chain in the original basis."""
        v = dict(vec)
        for c, r, u, beta, rho in reversed(self.ops):
            acc = None
            for j, pj in rho.items():
                xj = v.get(j)
                if xj is not None:
                    acc = pj * xj if acc is None else acc + pj * xj
            if acc:
                v[c] = -acc * scalar_inv(u)
        return v


def eliminate(levels, columns, expected_shift=0, pivot_mode="default",
              pivotable_rows=None):
    """Cancel entries of a filtered differential by pair cancellation.

    levels: filtration level per basis index.
    columns: dict source -> dict target -> scalar (consumed).
    pivot_mode 'alternate' changes tie-breaking; reported survivor levels must
    not depend on it.
    pivotable_rows: when given, only entries targeting these indices may be
    used as pivots (rows outside the set have incomplete incoming data in a
    truncated complex); anything left over is reported as residual.
    """
    col = {c: dict(rs) for c, rs in columns.items() if rs}
    row: dict[int, dict[int, object]] = {}
    for c, rs in col.items():
        for r, val in rs.items():
            row.setdefault(r, {})[c] = val

    def drop(c, r):
        d = levels[c] + expected_shift - levels[r]
        if d < 0:
            raise NotAComplex(f"differential raises filtration level: {c} -> {r}")
        return d

    reverse = pivot_mode == "alternate"

    def key_pair(c, r, score):
        return (score, -c, -r) if reverse else (score, c, r)

    buckets: dict[int, list] = {}

    def push(c, r):
        if pivotable_rows is not None and r not in pivotable_rows:
            return
        d = drop(c, r)
        score = (len(col[c]) - 1) * (len(row[r]) - 1)
        heappush(buckets.setdefault(d, []), key_pair(c, r, score))

    for c, rs in col.items():
        for r in rs:
            push(c, r)

    alive = set(range(len(levels)))
    ops = []
    while buckets:
        delta = min(buckets)
        heap = buckets[delta]
        while heap:
            entry = heappop(heap)
            c, r = (-entry[1], -entry[2]) if reverse else (entry[1], entry[2])
            if c not in col or r not in col.get(c, {}):
                continue
            u = col[c].pop(r)
            del row[r][c]
            beta = col.pop(c)
            rho = row.pop(r)
            for rr in beta:
                del row[rr][c]
            for cc in rho:
                del col[cc][r]
            # entries into c and out of r vanish with the pair (no corrections)
            for cc in row.pop(c, {}):
                del col[cc][c]
            for rr in col.pop(r, {}):
                del row[rr][r]
            u_inv = scalar_inv(u)
            for cc, rho_c in rho.items():
                factor = rho_c * u_inv
                tgt = col[cc]
                for rr, beta_r in beta.items():
                    val = tgt.get(rr)
                    val = -factor * beta_r if val is None else val - factor * beta_r
                    if val:
                        is_new = rr not in tgt
                        tgt[rr] = val
                        row[rr][cc] = val
                        if is_new:
                            push(cc, rr)
                    else:
                        del tgt[rr]
                        del row[rr][cc]
            alive.discard(c)
            alive.discard(r)
            ops.append((c, r, u, beta, rho))
        del buckets[delta]
    residual = {c: dict(rs) for c, rs in col.items() if rs}
    return EliminationResult(sorted(alive), ops, list(levels), residual)
