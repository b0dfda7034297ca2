"""Mixed causal graphs: directed edges plus bidirected confounding edges.

A bidirected edge ``a <-> b`` stands for an unobserved common parent. For
d-separation each one is expanded into an explicit latent fork before a
single Bayes-ball reachability pass.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import InputError, OverlapError, UnknownVariable


@dataclass(frozen=True)
class CausalGraph:
    vertices: tuple[str, ...]
    directed: frozenset = field(default_factory=frozenset)
    bidirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(set(verts)) != len(verts):
            raise ValueError("duplicate vertex names")
        vs = set(verts)
        directed = frozenset((str(a), str(b)) for a, b in self.directed)
        bidirected = frozenset(frozenset(e) if not isinstance(e, frozenset) else e for e in self.bidirected)
        for a, b in directed:
            if a == b:
                raise ValueError(f"self-loop on {a}")
            for v in (a, b):
                if v not in vs:
                    raise UnknownVariable(v, "graph")
        for e in bidirected:
            if len(e) != 2:
                raise ValueError(f"bidirected edge {sorted(e)} needs two distinct endpoints")
            for v in e:
                if v not in vs:
                    raise UnknownVariable(v, "graph")
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)

    @classmethod
    def from_edges(
        cls,
        vertices: Iterable[str],
        directed: Iterable[Sequence[str]] = (),
        bidirected: Iterable[Sequence[str]] = (),
    ) -> "CausalGraph":
        return cls(tuple(vertices), frozenset(map(tuple, directed)), frozenset(frozenset(e) for e in bidirected))

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.directed:
            out[b].append(a)
        return {v: tuple(sorted(ps, key=self.index.__getitem__)) for v, ps in out.items()}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.vertices}
        for a, b in self.directed:
            out[a].append(b)
        return {v: tuple(sorted(cs, key=self.index.__getitem__)) for v, cs in out.items()}

    @cached_property
    def spouses(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {v: [] for v in self.vertices}
        for e in self.bidirected:
            a, b = tuple(e)
            out[a].append(b)
            out[b].append(a)
        return {v: tuple(sorted(ss, key=self.index.__getitem__)) for v, ss in out.items()}

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.directed

    def has_bidirected(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self.bidirected

    def directed_list(self) -> list[tuple[str, str]]:
        key = self.index.__getitem__
        return sorted(self.directed, key=lambda e: (key(e[0]), key(e[1])))

    def bidirected_list(self) -> list[tuple[str, str]]:
        key = self.index.__getitem__
        pairs = [tuple(sorted(e, key=key)) for e in self.bidirected]
        return sorted(pairs, key=lambda e: (key(e[0]), key(e[1])))

    def same_edges(self, other: "CausalGraph") -> bool:
        return self.directed == other.directed and self.bidirected == other.bidirected

    def check_vertices(self, names: Iterable[str]):
        for n in names:
            if n not in self.index:
                raise UnknownVariable(n, "graph")

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "directed": [list(e) for e in self.directed_list()],
            "bidirected": [list(e) for e in self.bidirected_list()],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CausalGraph":
        if not isinstance(doc, Mapping):
            raise InputError("<root>", "expected a JSON object")
        if "vertices" not in doc:
            raise InputError("vertices", "missing")
        verts = doc["vertices"]
        if not isinstance(verts, list) or not all(isinstance(v, str) for v in verts):
            raise InputError("vertices", "expected a list of strings")
        edges = {}
        for key in ("directed", "bidirected"):
            raw = doc.get(key, [])
            if not isinstance(raw, list):
                raise InputError(key, "expected a list of pairs")
            for i, e in enumerate(raw):
                if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, str) for v in e)):
                    raise InputError(f"{key}[{i}]", "expected a pair of vertex names")
                if e[0] == e[1]:
                    raise InputError(f"{key}[{i}]", "self-loop")
                for v in e:
                    if v not in verts:
                        raise InputError(f"{key}[{i}]", f"unknown vertex {v!r}")
            edges[key] = raw
        return cls.from_edges(verts, edges["directed"], edges["bidirected"])

    @cached_property
    def _compiled(self) -> "_Compiled":
        return _Compiled(self)


def induced_graph(model) -> "CausalGraph":
    """Directed edges from endogenous parents, bidirected edges from shared exogenous parents."""
    model.require_valid()
    directed = set()
    users: dict[str, list[str]] = {}
    for m in model.mechanisms:
        for p in m.endo_parents:
            directed.add((p, m.child))
        for u in m.exo_parents:
            users.setdefault(u, []).append(m.child)
    bidirected = set()
    for children in users.values():
        for i, a in enumerate(children):
            for b in children[i + 1:]:
                if a != b:
                    bidirected.add(frozenset((a, b)))
    return CausalGraph(model.endo_names, frozenset(directed), frozenset(bidirected))


def topological_sort(vertices: Sequence[str], edges: Iterable[tuple[str, str]]):
    """Kahn ordering that keeps the input order among ready vertices.

    Returns ``(order, cycle)``; exactly one of them is empty.
    """
    edges = list(edges)
    pos = {v: i for i, v in enumerate(vertices)}
    indeg = dict.fromkeys(vertices, 0)
    children: dict[str, list[str]] = {v: [] for v in vertices}
    for a, b in edges:
        indeg[b] += 1
        children[a].append(b)
    import heapq

    ready = [(pos[v], v) for v in vertices if indeg[v] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, v = heapq.heappop(ready)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, (pos[c], c))
    if len(order) == len(vertices):
        return order, []
    return [], _cycle_witness(vertices, children, set(order))


def _cycle_witness(vertices, children, acyclic_part):
    # Every leftover vertex has a leftover parent, so walking parents backward must loop.
    left = [v for v in vertices if v not in acyclic_part]
    parents: dict[str, list[str]] = {v: [] for v in left}
    for a in left:
        for b in children[a]:
            if b in parents:
                parents[b].append(a)
    seen: dict[str, int] = {}
    walk = []
    v = left[0]
    while v not in seen:
        seen[v] = len(walk)
        walk.append(v)
        v = parents[v][0]
    cycle = walk[seen[v]:]
    cycle.reverse()
    return cycle


def is_acyclic(g: CausalGraph) -> tuple[bool, list[str]]:
    """``(True, topological order)`` or ``(False, witness cycle)``."""
    order, cycle = topological_sort(g.vertices, g.directed_list())
    return (True, order) if not cycle else (False, cycle)


def ancestors(g: CausalGraph, names: Iterable[str]) -> set[str]:
    """Ancestors of ``names`` in the directed part, including ``names`` themselves."""
    stack = list(names)
    g.check_vertices(stack)
    out = set(stack)
    while stack:
        v = stack.pop()
        for p in g.parents[v]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def descendants(g: CausalGraph, names: Iterable[str]) -> set[str]:
    stack = list(names)
    g.check_vertices(stack)
    out = set(stack)
    while stack:
        v = stack.pop()
        for c in g.children[v]:
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


class _Compiled:
    """Augmented DAG as bitmasks: latent fork vertices appended after the observed ones."""

    def __init__(self, g: CausalGraph):
        n = len(g.vertices)
        idx = g.index
        parents = [0] * n
        children = [0] * n
        for a, b in g.directed:
            parents[idx[b]] |= 1 << idx[a]
            children[idx[a]] |= 1 << idx[b]
        for e in g.bidirected_list():
            latent = len(parents)
            a, b = idx[e[0]], idx[e[1]]
            parents.append(0)
            children.append((1 << a) | (1 << b))
            parents[a] |= 1 << latent
            parents[b] |= 1 << latent
        self.n = n
        self.parents = parents
        self.children = children
        self.index = idx
        self._cache: dict[tuple[int, int], int] = {}

    def mask(self, names: Iterable[str]) -> int:
        m = 0
        for v in names:
            try:
                m |= 1 << self.index[v]
            except KeyError:
                raise UnknownVariable(v, "graph") from None
        return m

    def ancestor_mask(self, zmask: int) -> int:
        out = zmask
        frontier = zmask
        while frontier:
            nxt = 0
            m = frontier
            while m:
                low = m & -m
                nxt |= self.parents[low.bit_length() - 1]
                m ^= low
            frontier = nxt & ~out
            out |= frontier
        return out

    def reachable(self, xmask: int, zmask: int) -> int:
        """Observed vertices d-connected to some X-vertex given Z (Bayes ball)."""
        key = (xmask, zmask)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        anc = self.ancestor_mask(zmask)
        up_seen = 0  # arrived from a child
        down_seen = 0  # arrived from a parent
        reached = 0
        queue = deque()
        m = xmask
        while m:
            low = m & -m
            queue.append((low.bit_length() - 1, True))
            up_seen |= low
            m ^= low
        parents, children = self.parents, self.children
        while queue:
            v, up = queue.popleft()
            bit = 1 << v
            in_z = bool(zmask & bit)
            if not in_z:
                reached |= bit
            if up:
                if in_z:
                    continue
                nxt_up, nxt_down = parents[v], children[v]
            else:
                nxt_down = 0 if in_z else children[v]
                nxt_up = parents[v] if anc & bit else 0
            new = nxt_up & ~up_seen
            up_seen |= new
            while new:
                low = new & -new
                queue.append((low.bit_length() - 1, True))
                new ^= low
            new = nxt_down & ~down_seen
            down_seen |= new
            while new:
                low = new & -new
                queue.append((low.bit_length() - 1, False))
                new ^= low
        reached &= (1 << self.n) - 1
        if len(self._cache) < 200_000:
            self._cache[key] = reached
        return reached


def d_separated(g: CausalGraph, X: Iterable[str], Y: Iterable[str], Z: Iterable[str] = ()) -> bool:
    """True iff X and Y are d-separated by Z once bidirected edges become latent forks."""
    X, Y, Z = set(X), set(Y), set(Z)
    if not X or not Y:
        raise ValueError("X and Y must be nonempty")
    if X & Y or X & Z or Y & Z:
        raise OverlapError("X, Y and Z must be pairwise disjoint")
    c = g._compiled
    xm, ym, zm = c.mask(X), c.mask(Y), c.mask(Z)
    return not (c.reachable(xm, zm) & ym)


def _check_endpoints(g: CausalGraph, remainder: set[str], a: str, b: str):
    g.check_vertices((a, b))
    g.check_vertices(remainder)
    if a == b:
        raise ValueError("endpoints must differ")
    for v in (a, b):
        if v in remainder:
            raise ValueError(f"endpoint {v!r} lies in the remainder")


def mediated_path(g: CausalGraph, remainder: Iterable[str], a: str, b: str) -> list[str] | None:
    """Shortest directed path a -> ... -> b with every intermediate in the remainder."""
    remainder = set(remainder)
    _check_endpoints(g, remainder, a, b)
    prev = {a: None}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        for c in g.children[v]:
            if c == b:
                path = [b, v]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return path[::-1]
            if c in remainder and c not in prev:
                prev[c] = v
                queue.append(c)
    return None


def mediated_adjacent(g: CausalGraph, remainder: Iterable[str], a: str, b: str) -> bool:
    return mediated_path(g, remainder, a, b) is not None


def _remainder_sources(g: CausalGraph, remainder: set[str], v: str) -> dict[str, str | None]:
    """{w: next hop toward v} for v and every w with a path w -> ... -> v through the remainder."""
    nxt: dict[str, str | None] = {v: None}
    queue = deque([v])
    while queue:
        w = queue.popleft()
        for p in g.parents[w]:
            if p in remainder and p not in nxt:
                nxt[p] = w
                queue.append(p)
    return nxt


def _walk(nxt: Mapping[str, str | None], start: str) -> list[str]:
    path = [start]
    while nxt[path[-1]] is not None:
        path.append(nxt[path[-1]])
    return path


@dataclass(frozen=True)
class ConfoundingLink:
    """Outcome of :func:`confounding_link`.

    ``rule`` is ``"2A"``, ``"2B"`` or ``None``. For 2A, ``path`` runs from a
    to b and crosses the bidirected edge once. For 2B, ``root`` is the fork
    vertex and ``path`` is the fork a <- ... <- root -> ... -> b.
    """

    rule: str | None
    path: tuple[str, ...] = ()
    root: str | None = None

    def __bool__(self):
        return self.rule is not None


def confounding_link(g: CausalGraph, remainder: Iterable[str], a: str, b: str) -> ConfoundingLink:
    remainder = set(remainder)
    _check_endpoints(g, remainder, a, b)
    la = _remainder_sources(g, remainder, a)
    lb = _remainder_sources(g, remainder, b)
    idx = g.index
    for w1 in sorted(la, key=idx.__getitem__):
        for w2 in g.spouses[w1]:
            if w2 in lb:
                left = _walk(la, w1)[::-1]
                right = _walk(lb, w2)
                return ConfoundingLink("2A", tuple(left + right))
    for q in sorted(set(la) & set(lb) & remainder, key=idx.__getitem__):
        left = _walk(la, q)[::-1]
        right = _walk(lb, q)
        return ConfoundingLink("2B", tuple(left[:-1] + right), q)
    return ConfoundingLink(None)


def graph_surgery(
    g: CausalGraph, remove_incoming: Iterable[str] = (), remove_outgoing: Iterable[str] = ()
) -> CausalGraph:
    """Cut edges into ``remove_incoming`` (bidirected included) and out of ``remove_outgoing``."""
    inc, out = set(remove_incoming), set(remove_outgoing)
    g.check_vertices(inc | out)
    if not inc and not out:
        return g
    directed = frozenset((a, b) for a, b in g.directed if b not in inc and a not in out)
    bidirected = frozenset(e for e in g.bidirected if not (e & inc))
    return CausalGraph(g.vertices, directed, bidirected)


RULES = (1, 2, 3)


def do_calculus_rule(
    g: CausalGraph,
    rule: int,
    X: Iterable[str] = (),
    Y: Iterable[str] = (),
    Z: Iterable[str] = (),
    W: Iterable[str] = (),
) -> bool:
    """Whether do-calculus rule 1, 2 or 3 licenses its rewrite of P(y | do(x), z, w)."""
    X, Y, Z, W = set(X), set(Y), set(Z), set(W)
    sets = [X, Y, Z, W]
    for i in range(4):
        for j in range(i + 1, 4):
            if sets[i] & sets[j]:
                raise OverlapError("X, Y, Z and W must be pairwise disjoint")
    if int(rule) not in RULES:
        raise ValueError(f"rule must be 1, 2 or 3, got {rule!r}")
    g.check_vertices(X | Y | Z | W)
    if not Z or not Y:
        return True
    rule = int(rule)
    if rule == 1:
        h = graph_surgery(g, X)
    elif rule == 2:
        h = graph_surgery(g, X, Z)
    else:
        h = graph_surgery(g, X | rule3_blocked(g, X, Z, W))
    return d_separated(h, Y, Z, X | W)


def rule3_blocked(g: CausalGraph, X: set[str], Z: set[str], W: set[str]) -> set[str]:
    """Z(W): the Z-vertices that are not ancestors of W once X's incoming edges are cut."""
    if not W:
        return set(Z)
    anc = ancestors(graph_surgery(g, X), W)
    return {z for z in Z if z not in anc}


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: CausalGraph, labels: Mapping[str, str] | None = None, name: str = "G") -> str:
    """Graphviz text; ``labels`` overrides node labels (cluster member lists)."""
    lines = [f"digraph {_dot_id(name)} {{"]
    for v in g.vertices:
        if labels and v in labels:
            lines.append(f"  {_dot_id(v)} [label={_dot_id(labels[v])}];")
        else:
            lines.append(f"  {_dot_id(v)};")
    for a, b in g.directed_list():
        lines.append(f"  {_dot_id(a)} -> {_dot_id(b)};")
    for a, b in g.bidirected_list():
        lines.append(f"  {_dot_id(a)} -> {_dot_id(b)} [dir=both, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
