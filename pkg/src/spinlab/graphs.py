"""Graph objects for the reduction: configuration-model multigraphs, bipartite
double covers, deficiency gadgets and the composed graph H^G.

Vertices are 0-indexed. Edges are stored as a list of (u, v) pairs with
u <= v; multi-edges and self-loops are kept as repeated entries.
"""

from __future__ import annotations

import json
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstructionFailure, GenerationFailure, InvalidInput

PLUS, MINUS = 1, -1


def _norm(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class MultiGraph:
    n: int
    edges: tuple
    coloring: tuple | None = None

    def __post_init__(self):
        edges = tuple(_norm(int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        for u, v in edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise InvalidInput(f"edge ({u}, {v}) out of range for n={self.n}")
        if self.coloring is not None:
            col = tuple(int(c) for c in self.coloring)
            if len(col) != self.n or any(c not in (PLUS, MINUS) for c in col):
                raise InvalidInput("coloring must assign +1/-1 to every vertex")
            object.__setattr__(self, "coloring", col)

    @property
    def m(self):
        return len(self.edges)

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self):
        """Neighbor lists with multiplicity; a self-loop lists v twice at v."""
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def edge_counter(self):
        return Counter(self.edges)

    def is_simple(self):
        return all(u != v for u, v in self.edges) and len(set(self.edges)) == len(self.edges)

    def is_regular(self, d):
        return bool(np.all(self.degrees() == d))

    def properly_colored(self):
        if self.coloring is None:
            return False
        c = self.coloring
        return all(c[u] != c[v] for u, v in self.edges)

    def components(self):
        adj = self.adjacency()
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            seen[s] = True
            comp, queue = [s], deque([s])
            while queue:
                x = queue.popleft()
                for y in adj[x]:
                    if not seen[y]:
                        seen[y] = True
                        comp.append(y)
                        queue.append(y)
            comps.append(sorted(comp))
        return comps

    def is_bipartite(self):
        adj = self.adjacency()
        side = [0] * self.n
        for s in range(self.n):
            if side[s]:
                continue
            side[s] = 1
            queue = deque([s])
            while queue:
                x = queue.popleft()
                for y in adj[x]:
                    if side[y] == 0:
                        side[y] = -side[x]
                        queue.append(y)
                    elif side[y] == side[x]:
                        return False
        return True

    def with_edges(self, edges):
        return MultiGraph(self.n, tuple(edges), self.coloring)

    def same_as(self, other):
        return (self.n == other.n and self.coloring == other.coloring
                and self.edge_counter() == other.edge_counter())


def write_graph(graph: MultiGraph, path):
    lines = [f"{graph.n} {graph.m}"]
    if graph.coloring is not None:
        lines.append(" ".join("+" if c == PLUS else "-" for c in graph.coloring))
    lines.extend(f"{u} {v}" for u, v in graph.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> MultiGraph:
    try:
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise InvalidInput(f"cannot read graph file {path}: {exc}") from exc
    if not rows or len(rows[0]) != 2:
        raise InvalidInput(f"{path}: first line must be 'n m'")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
    except ValueError as exc:
        raise InvalidInput(f"{path}: malformed header") from exc
    body = rows[1:]
    coloring = None
    if body and all(tok in ("+", "-", "−") for tok in body[0]) and len(body[0]) == n:
        coloring = tuple(PLUS if tok == "+" else MINUS for tok in body[0])
        body = body[1:]
    if len(body) != m:
        raise InvalidInput(f"{path}: header says {m} edges, found {len(body)}")
    try:
        edges = [(int(r[0]), int(r[1])) for r in body]
    except (ValueError, IndexError) as exc:
        raise InvalidInput(f"{path}: malformed edge line") from exc
    return MultiGraph(n, tuple(edges), coloring)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def configuration_model(n: int, d: int, seed=None) -> MultiGraph:
    """Uniform random perfect matching on the n*d half-edges; half-edge h
    belongs to vertex h mod n."""
    if n <= 0 or d < 0:
        raise InvalidInput("need n > 0 and d >= 0")
    if (n * d) % 2:
        raise InvalidInput(f"n*d = {n * d} must be even")
    rng = _rng(seed)
    perm = rng.permutation(n * d)
    owners = perm % n
    edges = tuple(zip(owners[0::2].tolist(), owners[1::2].tolist()))
    return MultiGraph(n, edges)


def double_cover(H: MultiGraph) -> MultiGraph:
    """Vertex i of H becomes i (the + copy) and n + i (the - copy); each edge
    (i, j) yields (i+, j-) and (j+, i-)."""
    n = H.n
    edges = []
    for i, j in H.edges:
        edges.append((i, n + j))
        edges.append((j, n + i))
    return MultiGraph(2 * n, tuple(edges), (PLUS,) * n + (MINUS,) * n)


@dataclass(frozen=True)
class Gadget:
    graph: MultiGraph
    d: int
    k: int
    w_plus: tuple   # (i^1_+, j^1_+, i^2_+, j^2_+, ...)
    w_minus: tuple  # (i^1_-, j^1_-, ...)
    deleted: tuple  # ((i^l_+, j^l_-), (j^l_+, i^l_-)) per l, flattened
    centers: tuple  # (i^l, j^l) in H_n
    seed: int | None
    attempts: int
    merged_multiedges: int
    parent: MultiGraph = field(repr=False, compare=False, default=None)

    @property
    def n_half(self):
        return self.graph.n // 2

    @property
    def w(self):
        return self.w_plus + self.w_minus

    def sidecar(self):
        return {
            "w_plus": list(self.w_plus),
            "w_minus": list(self.w_minus),
            "deleted": [list(e) for e in self.deleted],
            "k": self.k,
            "d": self.d,
            "seed": self.seed,
            "attempts": self.attempts,
            "merged_multiedges": self.merged_multiedges,
        }


def write_gadget(gadget: Gadget, path):
    write_graph(gadget.graph, path)
    Path(str(path) + ".json").write_text(json.dumps(gadget.sidecar(), indent=2))


def read_gadget(path) -> Gadget:
    graph = read_graph(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    w_plus, w_minus = tuple(meta["w_plus"]), tuple(meta["w_minus"])
    n = graph.n // 2
    centers = tuple((w_plus[2 * l], w_plus[2 * l + 1]) for l in range(len(w_plus) // 2))
    return Gadget(graph, meta.get("d", int(graph.degrees().max())), meta["k"], w_plus, w_minus,
                  tuple(tuple(e) for e in meta["deleted"]),
                  tuple((a % n, b % n) for a, b in centers), meta.get("seed"),
                  meta.get("attempts", 1), meta.get("merged_multiedges", 0))


def make_gadget(n: int, d: int, k: int, seed=None, max_attempts: int = 1000,
                connected: bool = True) -> Gadget:
    """Sample G^k_{2n}: configuration model, double cover, delete k mirrored
    edge pairs, merge multi-edges.

    A draw is rejected unless the merged parent double cover is simple and
    d-regular and the 2k deficient vertices on each side are distinct. With
    ``connected`` (default) disconnected results are rejected too; a bipartite
    H_n, for instance, doubles into two disjoint copies.
    """
    if n % 2:
        raise InvalidInput("n must be even")
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if (n * d) % 2:
        raise InvalidInput("n*d must be even")
    if 2 * k > n:
        raise InvalidInput(f"2k = {2 * k} deficient vertices per side need n >= 2k (n={n})")
    rng = _rng(seed)
    for attempt in range(1, max_attempts + 1):
        H = configuration_model(n, d, rng)
        G = double_cover(H)
        merged = G.m - len(set(G.edges))
        if not G.is_simple() or not G.is_regular(d):
            # a parent with loops or parallel edges loses degree when merged
            continue
        adjH = H.adjacency()
        centers = rng.choice(n, size=k, replace=False)
        pairs = [(int(i), int(adjH[i][rng.integers(len(adjH[i]))])) for i in centers]
        ends = [x for p in pairs for x in p]
        if len(set(ends)) != 2 * k:
            continue
        deleted = []
        for i, j in pairs:
            deleted.append(_norm(i, n + j))
            deleted.append(_norm(j, n + i))
        remaining = Counter(G.edges)
        for e in deleted:
            remaining[e] -= 1
        edges = tuple(sorted(remaining.elements()))
        graph = MultiGraph(2 * n, edges, G.coloring)
        if connected and len(graph.components()) > 1:
            continue
        w_plus = tuple(x for i, j in pairs for x in (i, j))
        w_minus = tuple(n + x for x in w_plus)
        return Gadget(graph, d, k, w_plus, w_minus, tuple(deleted), tuple(pairs),
                      None if isinstance(seed, np.random.Generator) else seed,
                      attempt, merged, G)
    raise GenerationFailure(
        f"no admissible gadget for n={n}, d={d}, k={k} in {max_attempts} attempts")


def restore_parent(gadget: Gadget) -> MultiGraph:
    """Re-add the deleted edges; the result is the d-regular parent."""
    return gadget.graph.with_edges(list(gadget.graph.edges) + list(gadget.deleted))


@dataclass(frozen=True)
class ComposedGraph:
    graph: MultiGraph          # H^G
    disjoint: MultiGraph       # \hat H^G (no inter-gadget edges)
    copy_of: tuple             # copy index per vertex
    added: tuple               # inter-gadget edges
    copies: int
    copy_size: int
    rotations: tuple           # matching rotation used per H-edge


def _incident_slots(H: MultiGraph):
    """(edge index -> (slot at u, slot at v)) using H's sorted edge list."""
    counter = [0] * H.n
    slots = []
    for u, v in sorted(H.edges):
        slots.append((counter[u], counter[v]))
        counter[u] += 1
        counter[v] += 1
    return slots


def build_HG(H: MultiGraph, gadget: Gadget, k: int) -> ComposedGraph:
    """Wire one copy of the gadget per vertex of H.

    The g-th edge at x (in H's sorted edge list) uses the g-th block of k
    deleted pairs of G_x. For the l-th pair of that block, i_+ of x joins j_+
    of y and j_+ of x joins i_+ of y; likewise on the minus side.
    """
    if not H.is_simple() or not H.is_regular(3):
        raise InvalidInput("H must be simple and 3-regular")
    if gadget.k != 3 * k:
        raise InvalidInput(f"gadget has {gadget.k} deleted pairs, need 3k = {3 * k}")
    size = gadget.graph.n
    copy_of = tuple(x for x in range(H.n) for _ in range(size))
    base = []
    for x in range(H.n):
        off = x * size
        base.extend((u + off, v + off) for u, v in gadget.graph.edges)
    existing = set(base)
    added, rotations = [], []
    for (u, v), (gu, gv) in zip(sorted(H.edges), _incident_slots(H)):
        for rot in range(k):
            trial = []
            for l in range(k):
                lu = gu * k + l
                lv = gv * k + (l + rot) % k
                for side in (gadget.w_plus, gadget.w_minus):
                    iu, ju = side[2 * lu], side[2 * lu + 1]
                    iv, jv = side[2 * lv], side[2 * lv + 1]
                    trial.append(_norm(iu + u * size, jv + v * size))
                    trial.append(_norm(ju + u * size, iv + v * size))
            if not any(e in existing for e in trial) and len(set(trial)) == len(trial):
                break
        else:
            raise ConstructionFailure(f"cannot wire H-edge ({u}, {v}) without collisions")
        existing.update(trial)
        added.extend(trial)
        rotations.append(rot)
    coloring = gadget.graph.coloring * H.n
    disjoint = MultiGraph(H.n * size, tuple(base), coloring)
    full = MultiGraph(H.n * size, tuple(base + added), coloring)
    return ComposedGraph(full, disjoint, copy_of, tuple(added), H.n, size, tuple(rotations))


def local_tree_fraction(G: MultiGraph, t: int, d: int | None = None) -> float:
    """Fraction of vertices whose depth-t ball is the depth-t d-regular tree
    (with alternating colors along every edge when G is colored)."""
    if d is None:
        d = int(G.degrees().max()) if G.m else 0
    adj = G.adjacency()
    col = G.coloring
    good = 0
    for root in range(G.n):
        dist = {root: 0}
        queue = deque([root])
        ok = True
        while queue and ok:
            x = queue.popleft()
            if dist[x] == t:
                continue
            if len(adj[x]) != d:
                ok = False
                break
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if not ok:
            continue
        ball = set(dist)
        n_edges = 0
        for u, v in G.edges:
            if u in ball and v in ball:
                n_edges += 1
                if u == v or (col is not None and col[u] == col[v]):
                    ok = False
        if ok and n_edges == len(ball) - 1:
            good += 1
    return good / G.n if G.n else 0.0


def tree_graph(d: int, t: int) -> MultiGraph:
    """The rooted d-regular tree truncated at depth t, colored by depth parity."""
    edges, coloring = [], [PLUS]
    frontier, nxt = [0], 1
    for depth in range(t):
        new = []
        for x in frontier:
            for _ in range(d if depth == 0 else d - 1):
                edges.append((x, nxt))
                coloring.append(MINUS if (depth % 2 == 0) else PLUS)
                new.append(nxt)
                nxt += 1
        frontier = new
    return MultiGraph(nxt, tuple(edges), tuple(coloring))


def cycle_graph(n: int) -> MultiGraph:
    return MultiGraph(n, tuple((i, (i + 1) % n) for i in range(n)),
                      tuple(PLUS if i % 2 == 0 else MINUS for i in range(n)) if n % 2 == 0 else None)


def complete_graph(n: int) -> MultiGraph:
    return MultiGraph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def complete_bipartite(a: int, b: int) -> MultiGraph:
    return MultiGraph(a + b, tuple((i, a + j) for i in range(a) for j in range(b)),
                      (PLUS,) * a + (MINUS,) * b)


@dataclass(frozen=True)
class ExpansionReport:
    delta: float
    gamma: float
    lam: float
    witness: tuple | None
    exhaustive: bool
    min_ratio: float          # smallest crossing/|S| seen over admissible S
    worst_set: tuple | None   # the set attaining min_ratio

    @property
    def passed(self):
        return self.witness is None


def _csr(G: MultiGraph, drop_loops=False):
    adj = G.adjacency()
    if drop_loops:
        adj = [[y for y in row if y != v] for v, row in enumerate(adj)]
    ptr = np.zeros(G.n + 1, dtype=np.int64)
    for v in range(G.n):
        ptr[v + 1] = ptr[v] + len(adj[v])
    idx = np.array([y for row in adj for y in row], dtype=np.int64)
    return ptr, idx


def _size_bounds(N, delta, gamma):
    lo = int(np.ceil(delta * N - 1e-12))
    hi = int(np.floor(gamma * N + 1e-12))
    return max(lo, 1), hi


def _scan_subsets(N, ptr, idx, lo, hi):
    from ._kernels import expansion_scan
    return expansion_scan(N, ptr, idx, lo, hi)


def expansion_check(G: MultiGraph, delta: float, gamma: float, lam: float,
                    exhaustive_limit: int = 24, restarts: int = 200, seed=0) -> ExpansionReport:
    """Test the (delta, gamma, lam)-edge-expander property: every S with
    delta|V| <= |S| <= gamma|V| has at least lam|S| edges leaving it.

    Exhaustive over all subsets up to ``exhaustive_limit`` vertices, otherwise
    randomized local search (a returned pass is then only evidence).
    """
    if not (0 < delta <= gamma <= 0.5):
        raise InvalidInput("need 0 < delta <= gamma <= 1/2")
    N = G.n
    lo, hi = _size_bounds(N, delta, gamma)
    if lo > hi:
        return ExpansionReport(delta, gamma, lam, None, True, np.inf, None)
    ptr, idx = _csr(G, drop_loops=True)
    if N <= exhaustive_limit:
        ratio, mask = _scan_subsets(N, ptr, idx, lo, hi)
        worst = tuple(v for v in range(N) if (int(mask) >> v) & 1)
        exhaustive = True
    else:
        ratio, worst = _local_search(N, ptr, idx, lo, hi, restarts, _rng(seed))
        exhaustive = False
    witness = worst if ratio < lam - 1e-12 else None
    return ExpansionReport(delta, gamma, lam, witness, exhaustive, float(ratio), worst)


def _local_search(N, ptr, idx, lo, hi, restarts, rng):
    best_ratio, best_set = np.inf, None
    for _ in range(restarts):
        size = int(rng.integers(lo, hi + 1))
        # grow a BFS ball from a random root: small-boundary sets are connected
        inside = np.zeros(N, dtype=bool)
        order = [int(rng.integers(N))]
        inside[order[0]] = True
        head = 0
        while len(order) < size:
            if head < len(order):
                x = order[head]
                head += 1
                nbrs = idx[ptr[x]:ptr[x + 1]]
                for y in rng.permutation(nbrs):
                    if not inside[y] and len(order) < size:
                        inside[y] = True
                        order.append(int(y))
            else:
                y = int(rng.choice(np.flatnonzero(~inside)))
                inside[y] = True
                order.append(y)
        inside_cnt = np.array([inside[idx[ptr[v]:ptr[v + 1]]].sum() for v in range(N)])
        deg = np.diff(ptr)
        cross = int(sum(deg[v] - inside_cnt[v] for v in range(N) if inside[v]))
        s = size
        improved = True
        while improved:
            improved = False
            for v in rng.permutation(N):
                if inside[v] and s - 1 >= lo:
                    delta_c = -(deg[v] - inside_cnt[v]) + inside_cnt[v]
                    new = (cross + delta_c) / (s - 1)
                    if new < cross / s - 1e-15:
                        inside[v] = False
                        cross += delta_c
                        s -= 1
                        for y in idx[ptr[v]:ptr[v + 1]]:
                            inside_cnt[y] -= 1
                        improved = True
                elif not inside[v] and s + 1 <= hi:
                    delta_c = (deg[v] - inside_cnt[v]) - inside_cnt[v]
                    new = (cross + delta_c) / (s + 1)
                    if new < cross / s - 1e-15:
                        inside[v] = True
                        cross += delta_c
                        s += 1
                        for y in idx[ptr[v]:ptr[v + 1]]:
                            inside_cnt[y] += 1
                        improved = True
        if cross / s < best_ratio:
            best_ratio, best_set = cross / s, tuple(int(v) for v in np.flatnonzero(inside))
    return best_ratio, best_set

