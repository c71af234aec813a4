"""Graphs, doubly-stochastic weights, schedules and mixing bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes ``0..n-1``; self-loops are implicit."""

    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                continue
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {e!r} references a node outside 0..{self.n - 1}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def union(self, other: "Graph") -> "Graph":
        if other.n != self.n:
            raise ValueError("cannot union graphs with different node counts")
        return Graph(self.n, self.edges | other.edges)

    def is_connected(self) -> bool:
        return is_connected(self.n, self.edges)


def is_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


# -- named topologies -------------------------------------------------------

def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        return path_graph(n)
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def grid_graph(n: int) -> Graph:
    side = math.isqrt(n)
    if side * side != n:
        raise ValueError(f"grid size {n} is not a perfect square")
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
            if r + 1 < side:
                edges.append((v, v + side))
    return Graph.from_edges(n, edges)


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_geometric_graph(points: np.ndarray) -> Graph:
    """Connect each point to its nearest neighbours, growing the radius until connected."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 1:
        return Graph(1)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    pairs = sorted((dist[i, j], i, j) for i in range(n) for j in range(i + 1, n))
    # smallest radius giving a connected graph, then keep all pairs within it
    edges: list[tuple[int, int]] = []
    for idx, (_, i, j) in enumerate(pairs):
        edges.append((i, j))
        if is_connected(n, edges):
            radius = pairs[idx][0]
            break
    return Graph.from_edges(n, [(i, j) for d, i, j in pairs if d <= radius])


def topology(name: str, n: int, edges: Sequence[tuple[int, int]] | None = None) -> Graph:
    name = name.lower()
    if name == "path":
        return path_graph(n)
    if name in ("cycle", "circle", "ring"):
        return cycle_graph(n)
    if name == "grid":
        return grid_graph(n)
    if name == "complete":
        return complete_graph(n)
    if name == "custom":
        if edges is None:
            raise ValueError("custom topology requires an edge list")
        return Graph.from_edges(n, [tuple(e) for e in edges])
    raise ValueError(f"unknown topology {name!r}")


# -- weight matrices --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Non-negative n x n mixing matrix. Not validated on construction."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("weight matrix must be square")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def min_positive(self) -> float:
        a = self.entries
        return float(a[a > 0].min())

    def violations(self, graph: Graph | None = None, tol: float = STOCHASTIC_TOL) -> list[str]:
        a = self.entries
        out = []
        if (a < 0).any():
            out.append("negative entries")
        rows = a.sum(axis=1)
        cols = a.sum(axis=0)
        for i in np.flatnonzero(np.abs(rows - 1.0) > tol):
            out.append(f"row {i} sums to {float(rows[i])!r}")
        for j in np.flatnonzero(np.abs(cols - 1.0) > tol):
            out.append(f"column {j} sums to {float(cols[j])!r}")
        for i in np.flatnonzero(np.diag(a) <= 0):
            out.append(f"diagonal entry {i} is not positive")
        if graph is not None:
            allowed = graph.adjacency() | np.eye(self.n, dtype=bool)
            for i, j in zip(*np.nonzero((a != 0) & ~allowed)):
                out.append(f"entry ({i},{j}) is non-zero but ({i},{j}) is not an edge")
            for i, j in graph.edges:
                if a[i, j] <= 0 or a[j, i] <= 0:
                    out.append(f"edge ({i},{j}) carries no weight")
        return out

    def is_doubly_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return not self.violations(tol=tol)


def metropolis_weights(g: Graph) -> WeightMatrix:
    d = g.degrees()
    a = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / max(d[i] + 1, d[j] + 1)
        a[i, j] = a[j, i] = w
    a[np.diag_indices(g.n)] = 1.0 - a.sum(axis=1)
    return WeightMatrix(a)


def lazy_metropolis_weights(g: Graph) -> WeightMatrix:
    a = 0.5 * metropolis_weights(g).entries
    a[np.diag_indices(g.n)] += 0.5
    return WeightMatrix(a)


WEIGHT_RULES = {"metropolis": metropolis_weights, "lazy_metropolis": lazy_metropolis_weights}


def weight_rule(name: str):
    try:
        return WEIGHT_RULES[name]
    except KeyError:
        raise ValueError(f"unknown weight rule {name!r}; expected one of {sorted(WEIGHT_RULES)}") from None


# -- schedules --------------------------------------------------------------

class GraphSchedule:
    """Sequence of (graph, weight matrix) pairs indexed by step ``k >= 0``.

    Subclasses implement :meth:`graph`; weights are derived through
    ``weights_fn`` and cached per distinct graph.
    """

    static = False

    def __init__(self, n: int, B: int = 1, weights_fn=lazy_metropolis_weights):
        if B < 1:
            raise ValueError("window B must be >= 1")
        self.n = n
        self.B = B
        self.weights_fn = weights_fn
        self._cache: dict[Graph, WeightMatrix] = {}

    def graph(self, k: int) -> Graph:  # pragma: no cover - abstract
        raise NotImplementedError

    def weights(self, k: int) -> WeightMatrix:
        g = self.graph(k)
        w = self._cache.get(g)
        if w is None:
            w = self.weights_fn(g)
            self._cache[g] = w
        return w

    def matrix(self, k: int) -> np.ndarray:
        return self.weights(k).entries

    def __getitem__(self, k: int) -> tuple[Graph, WeightMatrix]:
        return self.graph(k), self.weights(k)

    def realized_eta(self, k0: int = 0, horizon: int | None = None) -> float:
        """Smallest positive weight over steps ``[k0, k0 + horizon)``."""
        if horizon is None:
            horizon = self.B
        return min(self.weights(k).min_positive() for k in range(k0, k0 + horizon))


class StaticSchedule(GraphSchedule):
    static = True

    def __init__(self, graph: Graph, weights_fn=lazy_metropolis_weights, weights: WeightMatrix | None = None):
        super().__init__(graph.n, 1, weights_fn)
        self._graph = graph
        if weights is not None:
            self._cache[graph] = weights

    def graph(self, k: int) -> Graph:
        return self._graph


def _mix64(x: int) -> int:
    """SplitMix64 finalizer; used only to pick templates deterministically."""
    x &= 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class TemplateSchedule(GraphSchedule):
    """Time-varying schedule built from connected-union templates.

    Each template is a list of ``B`` graphs whose union is connected. Window
    ``w`` (steps ``wB .. wB+B-1``) replays one template chosen by a hash of
    ``(seed, w)``, so the schedule is B-strongly connected by construction and
    any step can be evaluated independently.
    """

    def __init__(self, templates: Sequence[Sequence[Graph]], seed: int, weights_fn=lazy_metropolis_weights):
        if not templates:
            raise ValueError("need at least one template")
        B = len(templates[0])
        n = templates[0][0].n
        for t in templates:
            if len(t) != B:
                raise ValueError("all templates must have the same window length")
            union = Graph(n)
            for g in t:
                union = union.union(g)
            if not union.is_connected():
                raise ValueError("template union is not connected")
        super().__init__(n, B, weights_fn)
        self.templates = [tuple(t) for t in templates]
        self.seed = int(seed)

    def template_index(self, window: int) -> int:
        return _mix64(_mix64(self.seed) ^ (window * 0x9E3779B97F4A7C15)) % len(self.templates)

    def graph(self, k: int) -> Graph:
        window, offset = divmod(k, self.B)
        return self.templates[self.template_index(window)][offset]


class SequenceSchedule(GraphSchedule):
    """Periodic replay of an explicit list of graphs (period need not equal B)."""

    def __init__(self, graphs: Sequence[Graph], B: int = 1, weights_fn=lazy_metropolis_weights):
        super().__init__(graphs[0].n, B, weights_fn)
        self.graphs = tuple(graphs)

    def graph(self, k: int) -> Graph:
        return self.graphs[k % len(self.graphs)]


def random_connected_graph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.1) -> Graph:
    """Random spanning tree plus independent extra edges."""
    order = rng.permutation(n)
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        a, b = int(order[v]), int(order[u])
        edges.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < extra_edge_prob:
                edges.add((i, j))
    return Graph(n, frozenset(edges))


def random_templates(n: int, B: int, count: int, rng: np.random.Generator, extra_edge_prob: float = 0.1) -> list[list[Graph]]:
    """Split the edges of random connected graphs across ``B`` steps."""
    templates = []
    for _ in range(count):
        union = random_connected_graph(n, rng, extra_edge_prob)
        parts: list[set] = [set() for _ in range(B)]
        for e in sorted(union.edges):
            parts[int(rng.integers(B))].add(e)
        templates.append([Graph(n, frozenset(p)) for p in parts])
    return templates


def random_schedule(n: int, B: int, seed: int, num_templates: int = 8, extra_edge_prob: float = 0.1,
                    weights_fn=lazy_metropolis_weights) -> TemplateSchedule:
    rng = np.random.default_rng(seed)
    return TemplateSchedule(random_templates(n, B, num_templates, rng, extra_edge_prob), seed, weights_fn)


def edge_split_schedule(graph: Graph, B: int, seed: int, num_templates: int = 8,
                        weights_fn=lazy_metropolis_weights) -> TemplateSchedule:
    """Time-varying schedule whose every window activates each edge of ``graph`` exactly once.

    The slot of each edge inside the window is random per template, so the
    union over any window is ``graph`` itself.
    """
    if not graph.is_connected():
        raise ValueError("base graph must be connected")
    rng = np.random.default_rng(seed)
    templates = []
    for _ in range(num_templates):
        parts: list[set] = [set() for _ in range(B)]
        for e in sorted(graph.edges):
            parts[int(rng.integers(B))].add(e)
        templates.append([Graph(graph.n, frozenset(p)) for p in parts])
    return TemplateSchedule(templates, seed, weights_fn)


def check_b_strong_connectivity(schedule: GraphSchedule, k0: int, horizon: int) -> bool:
    """True iff every length-B window inside ``[k0, k0 + horizon)`` has a connected union.

    Windows are aligned to multiples of B.
    """
    B = schedule.B
    if horizon % B:
        raise ValueError("horizon must be a multiple of B")
    n = schedule.n
    first = -(-k0 // B)
    last = (k0 + horizon) // B
    for w in range(first, last):
        edges = set()
        for k in range(w * B, (w + 1) * B):
            edges |= schedule.graph(k).edges
        if not is_connected(n, edges):
            return False
    return True


# -- matrix products --------------------------------------------------------

def product_chain(schedule: GraphSchedule, t: int, k: int) -> np.ndarray:
    """Ordered product ``A_k A_{k-1} ... A_t`` (full recomputation)."""
    if k < t:
        raise ValueError("product_chain requires k >= t")
    p = schedule.matrix(t).copy()
    for s in range(t + 1, k + 1):
        p = schedule.matrix(s) @ p
    return p


class ProductTracker:
    """Incrementally maintains every backward product ``A_{k:t}`` for ``t0 <= t <= k``.

    Each :meth:`advance` costs one batched matrix product, so sweeping ``k``
    over a trajectory is linear per step in the number of stored products.
    """

    def __init__(self, schedule: GraphSchedule, t0: int = 0):
        self.schedule = schedule
        self.t0 = t0
        self.k = t0 - 1
        self.products = np.empty((0, schedule.n, schedule.n))

    def advance(self) -> np.ndarray:
        """Move to step ``k+1``; returns the stack indexed by ``t - t0``."""
        self.k += 1
        a = self.schedule.matrix(self.k)
        if self.products.shape[0]:
            stacked = np.matmul(a, self.products)
        else:
            stacked = self.products
        self.products = np.concatenate([stacked, a[None]], axis=0)
        return self.products


def mixing_bound_lambda(n: int, eta: float, B: int, lazy: bool = False) -> float:
    """``(1 - eta / 4n^2) ** (1/B)``.

    ``lazy`` is accepted for interface symmetry; the lazy-Metropolis case uses
    the same formula with the realized eta.
    """
    if n < 1 or B < 1 or not (0 < eta <= 1):
        raise ValueError(f"invalid arguments n={n}, eta={eta}, B={B}")
    return (1.0 - eta / (4.0 * n * n)) ** (1.0 / B)


def product_envelope_bound(lam: float, steps: int) -> float:
    return math.sqrt(2.0) * lam ** steps


def cumulative_mixing_sum(schedule: GraphSchedule, k: int, i: int) -> float:
    """``sum_{t=1..k} sum_j |[A_{k:t}]_ij - 1/n|``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = schedule.n
    total = 0.0
    p = np.eye(n)
    # walk t downward: A_{k:t} = A_{k:t+1} A_t
    for t in range(k, 0, -1):
        p = p @ schedule.matrix(t)
        total += np.abs(p[i] - 1.0 / n).sum()
    return float(total)


def cumulative_mixing_sums(schedule: GraphSchedule, k: int) -> np.ndarray:
    """Vector of :func:`cumulative_mixing_sum` over all nodes ``i``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = schedule.n
    total = np.zeros(n)
    p = np.eye(n)
    for t in range(k, 0, -1):
        p = p @ schedule.matrix(t)
        total += np.abs(p - 1.0 / n).sum(axis=1)
    return total


def cumulative_mixing_bound(n: int, lam: float) -> float:
    return 4.0 * math.log(n) / (1.0 - lam)


# -- accelerated consensus --------------------------------------------------

def momentum(U: int) -> float:
    return 1.0 - 2.0 / (9.0 * U + 1.0)


@dataclass(frozen=True, eq=False)
class AcceleratedOperator:
    """Lazy-Metropolis matrix on a static graph with its momentum block matrix.

    ``block`` is ``[[(1+s)A, -sA], [I, 0]]`` with ``s = 1 - 2/(9U+1)``.
    """

    graph: Graph
    U: int
    base: WeightMatrix = field(init=False)
    sigma: float = field(init=False)
    block: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.U < self.graph.n:
            raise ValueError(f"U={self.U} must be >= n={self.graph.n}")
        base = lazy_metropolis_weights(self.graph)
        sigma = momentum(self.U)
        n = self.graph.n
        a = base.entries
        block = np.block([[(1 + sigma) * a, -sigma * a], [np.eye(n), np.zeros((n, n))]])
        block.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "block", block)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def rate(self) -> float:
        """Entry-wise envelope rate ``1 - 1/(18U)``."""
        return 1.0 - 1.0 / (18.0 * self.U)

    def schedule(self) -> StaticSchedule:
        return StaticSchedule(self.graph, weights=self.base)


def accelerated_consensus_step(op: AcceleratedOperator, y_curr: np.ndarray, y_prev: np.ndarray) -> np.ndarray:
    y_curr = np.asarray(y_curr, dtype=float)
    return op.base.entries @ (y_curr + op.sigma * (y_curr - np.asarray(y_prev, dtype=float)))


def accelerated_consensus(op: AcceleratedOperator, x1: np.ndarray, steps: int) -> np.ndarray:
    """Iterates ``y_1 .. y_{steps}`` starting from ``y_0 = y_1 = x1``; row ``k-1`` is ``y_k``."""
    x1 = np.asarray(x1, dtype=float)
    out = np.empty((steps, x1.size))
    prev = curr = x1
    out[0] = x1
    for k in range(1, steps):
        prev, curr = curr, accelerated_consensus_step(op, curr, prev)
        out[k] = curr
    return out


def effective_operator_row(op: AcceleratedOperator, k: int) -> np.ndarray:
    """``[I 0] B^k [I I]'``: the n x n map from ``y_1`` to ``y_{k+1}``."""
    if k < 2:
        raise ValueError("effective operator is defined for k >= 2")
    return effective_operators(op, k)[k]


def effective_operators(op: AcceleratedOperator, kmax: int) -> np.ndarray:
    """Stack of ``[I 0] B^k [I I]'`` for ``k = 0..kmax`` (recurrence, no matrix powers)."""
    n = op.n
    a = op.base.entries
    s = op.sigma
    out = np.empty((kmax + 1, n, n))
    prev = cur = np.eye(n)
    out[0] = cur
    for k in range(1, kmax + 1):
        prev, cur = cur, (1 + s) * a @ cur - s * a @ prev
        out[k] = cur
    return out


def block_power_operator(op: AcceleratedOperator, k: int) -> np.ndarray:
    """Same as :func:`effective_operator_row` via an explicit block-matrix power."""
    n = op.n
    bk = np.linalg.matrix_power(op.block, k)
    return bk[:n, :n] + bk[:n, n:]


def accelerated_envelope_bound(U: int, k: int) -> float:
    return math.sqrt(2.0) * (1.0 - 1.0 / (18.0 * U)) ** k


def consensus_contraction_bound(U: int, k: int) -> float:
    """Factor ``2 (1 - 1/9U)^(k-1)`` multiplying the initial squared disagreement."""
    return 2.0 * (1.0 - 1.0 / (9.0 * U)) ** (k - 1)


# -- bound verification -----------------------------------------------------

@dataclass(frozen=True)
class BoundCheck:
    """Outcome of comparing observed quantities with a proven envelope.

    ``worst_margin`` is the smallest ``bound - observed`` seen; a negative
    value means at least one violation.
    """

    name: str
    checked: int
    violations: int
    worst_margin: float
    worst_ratio: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.checked > 0


def check_mixing_bounds(schedule: GraphSchedule, kmax: int, lam: float | None = None,
                        tol: float = 1e-12) -> tuple[BoundCheck, BoundCheck]:
    """Entry-wise product envelope and cumulative-sum bound for ``0 <= t <= k <= kmax``.

    ``lam`` defaults to the mixing rate with the smallest positive weight
    realized over the tested steps. Both checks share one pass over the
    backward products.
    """
    n = schedule.n
    if lam is None:
        eta = schedule.realized_eta(0, kmax + 1)
        lam = mixing_bound_lambda(n, eta, schedule.B)
    tracker = ProductTracker(schedule, 0)
    cap3 = cumulative_mixing_bound(n, lam) if n > 1 else 0.0
    c1 = v1 = c3 = v3 = 0
    m1 = m3 = math.inf
    r1 = r3 = 0.0
    for k in range(kmax + 1):
        prods = tracker.advance()  # index t
        dev = np.abs(prods - 1.0 / n)
        bound = math.sqrt(2.0) * lam ** (k - np.arange(k + 1))
        worst = dev.max(axis=(1, 2))
        c1 += dev.size
        v1 += int((dev > bound[:, None, None] + tol).sum())
        m1 = min(m1, float((bound - worst).min()))
        r1 = max(r1, float((worst / bound).max()))
        if k >= 1:
            sums = dev[1:].sum(axis=(0, 2))
            c3 += n
            v3 += int((sums > cap3 + tol).sum())
            m3 = min(m3, float(cap3 - sums.max()))
            if cap3 > 0:
                r3 = max(r3, float(sums.max() / cap3))
    return (BoundCheck("product_envelope", c1, v1, m1, r1),
            BoundCheck("cumulative_mixing", c3, v3, m3, r3))


def check_accelerated_envelope(op: AcceleratedOperator, kmax: int, tol: float = 1e-12) -> BoundCheck:
    """Effective-operator entries against ``sqrt(2) (1 - 1/18U)^k`` for ``2 <= k <= kmax``."""
    ops = effective_operators(op, kmax)[2:]
    ks = np.arange(2, kmax + 1)
    bound = math.sqrt(2.0) * op.rate ** ks
    dev = np.abs(ops - 1.0 / op.n)
    worst = dev.max(axis=(1, 2))
    return BoundCheck("accelerated_envelope", dev.size, int((dev > bound[:, None, None] + tol).sum()),
                      float((bound - worst).min()), float((worst / bound).max()))


def check_consensus_contraction(op: AcceleratedOperator, steps: int, starts: np.ndarray | None = None,
                                tol: float = 1e-12) -> BoundCheck:
    """Squared disagreement of the momentum iteration against ``2 (1 - 1/9U)^(k-1)`` times its start.

    ``starts`` (rows are initial vectors) defaults to the standard basis.
    """
    starts = np.eye(op.n) if starts is None else np.atleast_2d(np.asarray(starts, dtype=float))
    ks = np.arange(1, steps + 1)
    factor = 2.0 * (1.0 - 1.0 / (9.0 * op.U)) ** (ks - 1)
    checked = violations = 0
    margin, ratio = math.inf, 0.0
    for x in starts:
        ys = accelerated_consensus(op, x, steps)
        d = ((ys - ys.mean(axis=1, keepdims=True)) ** 2).sum(axis=1)
        if d[0] == 0:
            continue
        bound = factor * d[0]
        checked += steps
        violations += int((d > bound * (1 + tol) + tol).sum())
        margin = min(margin, float(((bound - d) / d[0]).min()))
        ratio = max(ratio, float((d / bound).max()))
    return BoundCheck("consensus_contraction", checked, violations, margin, ratio)
