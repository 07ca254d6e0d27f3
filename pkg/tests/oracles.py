"""Independent reference implementations used as test oracles.

Everything here recomputes results from first principles (explicit rank
computations, literal formulas, exhaustive loops) without touching the
library's reduction/score code paths.
"""

from __future__ import annotations

from collections import Counter
from datetime import date, timedelta

import numpy as np

from flagcrash.corrnet import WeightedDigraph


# ---------------------------------------------------------------------------
# GF(2) linear algebra on columns encoded as python ints (bit i = row i)


class Gf2Eliminator:
    """Incremental column echelonization over GF(2)."""

    def __init__(self):
        self.pivots: dict[int, int] = {}

    def add(self, col: int) -> bool:
        """Insert a column; returns True if the rank increased."""
        while col:
            p = col.bit_length() - 1
            if p in self.pivots:
                col ^= self.pivots[p]
            else:
                self.pivots[p] = col
                return True
        return False

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def clone(self) -> "Gf2Eliminator":
        out = Gf2Eliminator()
        out.pivots = dict(self.pivots)
        return out


# ---------------------------------------------------------------------------
# Brute-force persistent diagram from persistent Betti numbers


def _enumerate_simplices(g: WeightedDigraph):
    """Vertices, directed edges, and ordered directed triangles with values,
    found by exhaustive loops over vertex tuples."""
    w = {(s, t): wt for s, t, wt in g.edges}
    verts = [((v,), 0.0) for v in range(g.n_vertices)]
    edges = [((s, t), wt) for (s, t), wt in w.items()]
    tris = []
    for a in range(g.n_vertices):
        for b in range(g.n_vertices):
            for c in range(g.n_vertices):
                if len({a, b, c}) < 3:
                    continue
                if (a, b) in w and (a, c) in w and (b, c) in w:
                    tris.append(((a, b, c), max(w[(a, b)], w[(a, c)], w[(b, c)])))
    return verts, edges, tris


def brute_force_diagram(g: WeightedDigraph):
    """Finite-bar and essential-bar multisets for dims 0 and 1.

    Computed from persistent Betti numbers: for each pair of filtration
    levels s <= t,

        beta_p(s, t) = rank [ d_{p+1}(K_t) | P(K_s) ] - rank d_p(K_s)
                       - rank d_{p+1}(K_t)

    where P(K_s) selects the coordinate columns of p-simplices present in
    K_s.  Bar multiplicities follow by inclusion-exclusion over levels.
    Returns (finite Counter of (birth, death, dim), essential Counter of
    (birth, dim)).
    """
    verts, edges, tris = _enumerate_simplices(g)
    levels = sorted({0.0} | {v for _, v in edges})
    m = len(levels)
    level_of = {v: i for i, v in enumerate(levels)}

    by_dim = {0: verts, 1: edges, 2: tris}
    for d in by_dim:
        by_dim[d] = sorted(by_dim[d], key=lambda s: (s[1], s[0]))
    row_index = {d: {tup: i for i, (tup, _) in enumerate(by_dim[d])} for d in by_dim}

    def counts_by_level(simps):
        out = [0] * m
        for _, v in simps:
            out[level_of[v]] += 1
        return np.cumsum(out).tolist()

    n_at = {d: counts_by_level(by_dim[d]) for d in by_dim}

    def boundary_col(dim, tup):
        col = 0
        for drop in range(dim + 1):
            face = tup[:drop] + tup[drop + 1 :]
            col |= 1 << row_index[dim - 1][face]
        return col

    def boundary_ranks_by_level(dim):
        """rank d_dim(K_t) for every level t (d_0 = 0)."""
        ranks = [0] * m
        if dim == 0:
            return ranks
        elim = Gf2Eliminator()
        cols = [(v, boundary_col(dim, tup)) for tup, v in by_dim[dim]]
        ci = 0
        for t, lv in enumerate(levels):
            while ci < len(cols) and cols[ci][0] <= lv:
                elim.add(cols[ci][1])
                ci += 1
            ranks[t] = elim.rank
        return ranks

    finite: Counter = Counter()
    essential: Counter = Counter()
    for p in (0, 1):
        rank_dp = boundary_ranks_by_level(p)
        rank_dp1 = boundary_ranks_by_level(p + 1)

        # beta[s][t] for s <= t
        beta = [[0] * m for _ in range(m)]
        bcols = [(v, boundary_col(p + 1, tup)) for tup, v in by_dim[p + 1]]
        bcols.sort(key=lambda cv: cv[0])
        pcols = [(v, 1 << row_index[p][tup]) for tup, v in by_dim[p]]
        pcols.sort(key=lambda cv: cv[0])
        boundary_elim = Gf2Eliminator()
        bi = 0
        for t, lv_t in enumerate(levels):
            while bi < len(bcols) and bcols[bi][0] <= lv_t:
                boundary_elim.add(bcols[bi][1])
                bi += 1
            joint = boundary_elim.clone()
            pi = 0
            for s in range(t + 1):
                while pi < len(pcols) and pcols[pi][0] <= levels[s]:
                    joint.add(pcols[pi][1])
                    pi += 1
                beta[s][t] = joint.rank - rank_dp[s] - rank_dp1[t]

        def b(s, t):
            return beta[s][t] if s >= 0 else 0

        for s in range(m):
            for t in range(s + 1, m):
                mult = (b(s, t - 1) - b(s, t)) - (b(s - 1, t - 1) - b(s - 1, t))
                if mult:
                    finite[(levels[s], levels[t], p)] += mult
            ess = b(s, m - 1) - b(s - 1, m - 1)
            if ess:
                essential[(levels[s], p)] += ess
    return finite, essential


# ---------------------------------------------------------------------------
# Union-find oracle for H0 deaths


def union_find_merge_weights(g: WeightedDigraph):
    """Multiset of weights at which components merge (ascending Kruskal)
    and the number of final components."""
    parent = list(range(g.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    merges = []
    for s, t, w in sorted(g.edges, key=lambda e: e[2]):
        rs, rt = find(s), find(t)
        if rs != rt:
            parent[rs] = rt
            merges.append(w)
    components = len({find(v) for v in range(g.n_vertices)})
    return Counter(merges), components


# ---------------------------------------------------------------------------
# Random graph generators


def random_digraph(rng: np.random.Generator, max_vertices: int) -> WeightedDigraph:
    n = int(rng.integers(1, max_vertices + 1))
    density = float(rng.uniform(0.05, 0.7))
    quantize = rng.random() < 0.3  # force weight ties sometimes
    edges = []
    for s in range(n):
        for t in range(n):
            if s != t and rng.random() < density:
                w = float(rng.uniform(0.05, 1.0))
                if quantize:
                    w = round(w, 1) or 0.1
                edges.append((s, t, w))
    return WeightedDigraph(
        n_vertices=n, edges=edges, as_of_date=date(2020, 1, 1)
    )


def random_graph_sequence(seed: int, count: int, max_vertices: int):
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(count):
        g = random_digraph(rng, max_vertices)
        g.as_of_date = date(2018, 1, 1) + timedelta(days=i)
        graphs.append(g)
    return graphs


# ---------------------------------------------------------------------------
# Literal LOF reference (O(T^2), straight from the definitions)


def brute_force_lof(points: np.ndarray, k: int) -> np.ndarray:
    t = points.shape[0]
    dist = np.zeros((t, t))
    for a in range(t):
        for b in range(t):
            dist[a, b] = float(np.sqrt(np.sum((points[a] - points[b]) ** 2)))

    kdist = np.zeros(t)
    neighborhoods = []
    for a in range(t):
        others = sorted(dist[a, b] for b in range(t) if b != a)
        kdist[a] = others[k - 1]
        neighborhoods.append(
            [b for b in range(t) if b != a and dist[a, b] <= kdist[a]]
        )

    lrd = np.zeros(t)
    for a in range(t):
        reach = [max(kdist[b], dist[a, b]) for b in neighborhoods[a]]
        lrd[a] = 1.0 / (sum(reach) / len(reach) + 1e-10)

    lof = np.zeros(t)
    for a in range(t):
        lof[a] = sum(lrd[b] for b in neighborhoods[a]) / len(neighborhoods[a]) / lrd[a]
    return lof
