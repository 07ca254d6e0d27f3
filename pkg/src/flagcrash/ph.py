"""Persistent homology of directed flag complexes in dimensions 0 and 1.

A weighted digraph is filtered by ascending edge weight; the directed
flag complex admits an ordered tuple (v_a, v_b, v_c) as a 2-simplex
exactly when the three directed edges (v_a,v_b), (v_a,v_c), (v_b,v_c)
are present.  Simplices above dimension 2 cannot affect H0/H1 and are
never built.  Homology is computed over GF(2) by column reduction of the
boundary matrix, one dimension block at a time with the clearing
optimization: an edge that already shows up as the pivot of a reduced
triangle column is a doomed cycle-creator and is never reduced itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

from .corrnet import WeightedDigraph
from .errors import DataError

Simplex = tuple[tuple[int, ...], int, float]  # (vertex tuple, dimension, value)


@dataclass
class Filtration:
    n_vertices: int
    simplices: list[Simplex]  # sorted by (value, dimension, tuple)


@dataclass
class PersistenceDiagram:
    finite: list[tuple[float, float, int]]  # (birth, death, dim), death > birth
    essential: list[tuple[float, int]]  # (birth, dim), never dying
    max_filtration: float  # largest simplex value, used by the capping variant


@dataclass
class TdaFeature:
    as_of_date: date
    l1_h0: float
    l2_h0: float
    l1_h1: float
    l2_h1: float

    def values(self) -> tuple[float, float, float, float]:
        return (self.l1_h0, self.l2_h0, self.l1_h1, self.l2_h1)


def build_filtration(g: WeightedDigraph) -> Filtration:
    """Vertices at 0, edges at their weight, directed 2-cliques at the max
    of their three edge weights."""
    weights: dict[tuple[int, int], float] = {}
    succ: dict[int, set[int]] = {v: set() for v in range(g.n_vertices)}
    for s, t, w in g.edges:
        if s == t:
            raise DataError(f"self-loop on vertex {s}")
        if (s, t) in weights:
            raise DataError(f"duplicate edge ({s}, {t})")
        if not 0.0 < w:
            raise DataError(f"edge ({s}, {t}) has non-positive weight {w}")
        weights[(s, t)] = w
        succ[s].add(t)

    simplices: list[Simplex] = [((v,), 0, 0.0) for v in range(g.n_vertices)]
    for (a, b), w_ab in weights.items():
        simplices.append(((a, b), 1, w_ab))
        for c in succ[a] & succ[b]:
            value = max(w_ab, weights[(a, c)], weights[(b, c)])
            simplices.append(((a, b, c), 2, value))
    simplices.sort(key=lambda s: (s[2], s[1], s[0]))
    return Filtration(n_vertices=g.n_vertices, simplices=simplices)


def persistent_homology(f: Filtration) -> PersistenceDiagram:
    """GF(2) boundary reduction of the filtration, reported for dims 0, 1.

    Zero-length pairs are discarded; essential classes carry only a birth.
    """
    index: dict[tuple[int, ...], int] = {}
    values: list[float] = []
    edges_at: list[int] = []
    tris_at: list[int] = []
    for i, (tup, dim, value) in enumerate(f.simplices):
        index[tup] = i
        values.append(value)
        if dim == 1:
            edges_at.append(i)
        elif dim == 2:
            tris_at.append(i)

    finite: list[tuple[float, float, int]] = []
    cleared: set[int] = set()

    # dimension-2 block: columns over edge rows
    pivot_of: dict[int, frozenset[int]] = {}
    for j in tris_at:
        a, b, c = f.simplices[j][0]
        col = {index[(b, c)], index[(a, c)], index[(a, b)]}
        while col:
            piv = max(col)
            ruling = pivot_of.get(piv)
            if ruling is None:
                break
            col ^= ruling
        if col:
            piv = max(col)
            pivot_of[piv] = frozenset(col)
            cleared.add(piv)
            if values[piv] != values[j]:
                finite.append((values[piv], values[j], 1))
        # a zero column would create an H2 class: out of reported range

    # dimension-1 block: columns over vertex rows
    h1_essential_births: list[float] = []
    vertex_pivot: dict[int, frozenset[int]] = {}
    for j in edges_at:
        if j in cleared:
            continue
        a, b = f.simplices[j][0]
        col = {index[(a,)], index[(b,)]}
        while col:
            piv = max(col)
            ruling = vertex_pivot.get(piv)
            if ruling is None:
                break
            col ^= ruling
        if col:
            piv = max(col)
            vertex_pivot[piv] = frozenset(col)
            if values[piv] != values[j]:
                finite.append((values[piv], values[j], 0))
        else:
            h1_essential_births.append(values[j])

    essential = [
        (0.0, 0)
        for v in range(f.n_vertices)
        if index[(v,)] not in vertex_pivot
    ]
    essential.extend((b, 1) for b in h1_essential_births)
    max_filtration = max(values) if values else 0.0
    return PersistenceDiagram(
        finite=finite, essential=essential, max_filtration=max_filtration
    )


def diagram_norm(
    d: PersistenceDiagram, p: int, dim: int, essential: str = "drop"
) -> float:
    """L1 (sum of bar lengths) or L2 (root sum of squares) in one dimension.

    Essential bars are dropped by default; `essential="cap"` closes them at
    the largest filtration value instead.
    """
    if p not in (1, 2):
        raise DataError(f"norm order must be 1 or 2, got {p}")
    if dim not in (0, 1):
        raise DataError(f"homological dimension must be 0 or 1, got {dim}")
    if essential not in ("drop", "cap"):
        raise DataError(f"essential policy must be 'drop' or 'cap', got {essential!r}")
    lengths = [death - birth for birth, death, dm in d.finite if dm == dim]
    if essential == "cap":
        lengths.extend(
            d.max_filtration - birth
            for birth, dm in d.essential
            if dm == dim and d.max_filtration > birth
        )
    if p == 1:
        return float(sum(lengths))
    return float(sum(x * x for x in lengths)) ** 0.5


def tda_features(
    graphs: list[WeightedDigraph], essential: str = "drop"
) -> list[TdaFeature]:
    """The (L1-H0, L2-H0, L1-H1, L2-H1) vector of every graph in order."""
    out = []
    for g in graphs:
        if g.as_of_date is None:
            raise DataError("tda_features requires dated graphs")
        diagram = persistent_homology(build_filtration(g))
        out.append(
            TdaFeature(
                as_of_date=g.as_of_date,
                l1_h0=diagram_norm(diagram, 1, 0, essential),
                l2_h0=diagram_norm(diagram, 2, 0, essential),
                l1_h1=diagram_norm(diagram, 1, 1, essential),
                l2_h1=diagram_norm(diagram, 2, 1, essential),
            )
        )
    return out
