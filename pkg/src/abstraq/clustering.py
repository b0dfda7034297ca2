"""Cluster DAGs and partial cluster DAGs built from a (partial) clustering.

A clustering assigns some endogenous variables to clusters and leaves the
rest in a remainder set. Remainder variables have no abstract counterpart;
the partial cluster graph lifts base paths through them instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence

from . import _config
from .errors import CyclicInducedGraph, InputError, NonTotalClustering, OverlapError, ScopeMismatch, UnknownVariable
from .graph import (
    RULES,
    CausalGraph,
    _remainder_sources,
    d_separated,
    do_calculus_rule,
    is_acyclic,
)
from .scm import L1, L2, Violation, parse_layer

ALL_RULES = ("1", "2A", "2B")


@dataclass(frozen=True)
class Clustering:
    """Ordered clusters ``(id, members)`` plus the remainder set."""

    clusters: tuple[tuple[str, tuple[str, ...]], ...]
    remainder: tuple[str, ...] = ()

    def __post_init__(self):
        cl = tuple((str(cid), tuple(members)) for cid, members in self.clusters)
        object.__setattr__(self, "clusters", cl)
        object.__setattr__(self, "remainder", tuple(self.remainder))

    @classmethod
    def from_mapping(cls, clusters: Mapping[str, Sequence[str]], remainder: Iterable[str] = ()) -> "Clustering":
        return cls(tuple((cid, tuple(m)) for cid, m in clusters.items()), tuple(remainder))

    @classmethod
    def singletons(cls, names: Iterable[str], remainder: Iterable[str] = ()) -> "Clustering":
        rem = set(remainder)
        return cls(tuple((n, (n,)) for n in names if n not in rem), tuple(n for n in names if n in rem))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.clusters)

    @cached_property
    def members(self) -> dict[str, tuple[str, ...]]:
        return dict(self.clusters)

    @cached_property
    def phi(self) -> dict[str, str]:
        return {v: cid for cid, ms in self.clusters for v in ms}

    @property
    def relevant(self) -> tuple[str, ...]:
        return tuple(v for _, ms in self.clusters for v in ms)

    @property
    def is_total(self) -> bool:
        return not self.remainder

    def preimage(self, ids: Iterable[str]) -> tuple[str, ...]:
        """Member variables of ``ids``, cluster by cluster in the given order."""
        out = []
        for cid in ids:
            try:
                out.extend(self.members[cid])
            except KeyError:
                raise UnknownVariable(cid, "clustering") from None
        return tuple(out)

    def labels(self) -> dict[str, str]:
        return {cid: "{" + ", ".join(ms) + "}" for cid, ms in self.clusters}

    def to_dict(self) -> dict:
        return {"clusters": {cid: list(ms) for cid, ms in self.clusters}, "remainder": list(self.remainder)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Clustering":
        if not isinstance(doc, Mapping):
            raise InputError("<root>", "expected a JSON object")
        if "clusters" not in doc:
            raise InputError("clusters", "missing")
        raw = doc["clusters"]
        if not isinstance(raw, Mapping):
            raise InputError("clusters", "expected an object mapping cluster ids to member lists")
        for cid, ms in raw.items():
            if not isinstance(ms, list) or not all(isinstance(m, str) for m in ms):
                raise InputError(f"clusters.{cid}", "expected a list of variable names")
        rem = doc.get("remainder", [])
        if not isinstance(rem, list) or not all(isinstance(m, str) for m in rem):
            raise InputError("remainder", "expected a list of variable names")
        return cls.from_mapping(raw, rem)


@dataclass(frozen=True)
class ClusterGraph:
    graph: CausalGraph
    clustering: Clustering
    kind: str = "pcdag"
    rules: tuple[str, ...] = ALL_RULES

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.graph.vertices

    def to_dict(self) -> dict:
        doc = self.graph.to_dict()
        doc["kind"] = self.kind
        doc["clusters"] = self.clustering.to_dict()["clusters"]
        doc["remainder"] = list(self.clustering.remainder)
        return doc


@dataclass(frozen=True)
class SepStatement:
    X: tuple[str, ...]
    Y: tuple[str, ...]
    Z: tuple[str, ...]
    holds: bool

    def to_dict(self) -> dict:
        return {"X": list(self.X), "Y": list(self.Y), "Z": list(self.Z), "holds": self.holds}


@dataclass(frozen=True)
class RuleStatement:
    rule: int
    X: tuple[str, ...]
    Y: tuple[str, ...]
    Z: tuple[str, ...]
    W: tuple[str, ...]
    holds: bool

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "X": list(self.X),
            "Y": list(self.Y),
            "Z": list(self.Z),
            "W": list(self.W),
            "holds": self.holds,
        }


def _direct_cluster_edges(g: CausalGraph, c: Clustering) -> set[tuple[str, str]]:
    phi = c.phi
    return {
        (phi[a], phi[b])
        for a, b in g.directed
        if a in phi and b in phi and phi[a] != phi[b]
    }


def _mediated_cluster_edges(g: CausalGraph, c: Clustering) -> set[tuple[str, str]]:
    phi = c.phi
    rem = set(c.remainder)
    edges = set()
    for v in c.relevant:
        # Children of v, and of remainder vertices reachable from v through the remainder.
        seen = {v}
        stack = [v]
        while stack:
            w = stack.pop()
            for ch in g.children[w]:
                if ch in rem:
                    if ch not in seen:
                        seen.add(ch)
                        stack.append(ch)
                elif ch in phi and phi[ch] != phi[v]:
                    edges.add((phi[v], phi[ch]))
    return edges


def validate_clustering(g: CausalGraph, c: Clustering) -> list[Violation]:
    out: list[Violation] = []
    vs = set(g.vertices)
    seen: dict[str, str] = {}
    if len(set(c.ids)) != len(c.ids):
        out.append(Violation("duplicate-cluster", "a cluster id is used twice", c.ids))
    for cid, ms in c.clusters:
        if not ms:
            out.append(Violation("empty-cluster", f"cluster {cid} has no members", (cid,)))
        for m in ms:
            if m not in vs:
                out.append(Violation("unknown-vertex", f"cluster {cid} names unknown variable {m!r}", (m,)))
            if m in seen:
                out.append(Violation("partition", f"{m} assigned to both {seen[m]} and {cid}", (m,)))
            seen[m] = cid
    for m in c.remainder:
        if m not in vs:
            out.append(Violation("unknown-vertex", f"remainder names unknown variable {m!r}", (m,)))
        if m in seen:
            out.append(Violation("partition", f"{m} is in cluster {seen[m]} and in the remainder", (m,)))
        seen[m] = "remainder"
    missing = [v for v in g.vertices if v not in seen]
    if missing:
        out.append(
            Violation("partition", "not assigned to any cluster or the remainder: " + ", ".join(missing), tuple(missing))
        )
    if not c.clusters:
        out.append(Violation("no-clusters", "a clustering needs at least one cluster"))
    if out:
        return out
    cg = CausalGraph(c.ids, frozenset(_mediated_cluster_edges(g, c)))
    ok, cycle = is_acyclic(cg)
    if not ok:
        out.append(Violation("cyclic", "induced cluster graph is cyclic: " + " -> ".join(cycle), tuple(cycle)))
    return out


def _require_partition(g: CausalGraph, c: Clustering):
    problems = [v for v in validate_clustering(g, c) if v.code != "cyclic"]
    if problems:
        raise ValueError("invalid clustering: " + "; ".join(v.message for v in problems))


def _finish(c: Clustering, directed, bidirected, kind, rules=ALL_RULES) -> ClusterGraph:
    cg = CausalGraph(c.ids, frozenset(directed), frozenset(frozenset(e) for e in bidirected))
    ok, cycle = is_acyclic(cg)
    if not ok:
        raise CyclicInducedGraph(cycle)
    return ClusterGraph(cg, c, kind, tuple(rules))


def build_cdag(g: CausalGraph, c: Clustering) -> ClusterGraph:
    """Lift every cross-cluster directed and bidirected edge."""
    if not c.is_total:
        raise NonTotalClustering("a cluster DAG needs every variable in some cluster; use build_pcdag")
    _require_partition(g, c)
    phi = c.phi
    bidirected = set()
    for e in g.bidirected:
        a, b = tuple(e)
        if phi[a] != phi[b]:
            bidirected.add((phi[a], phi[b]))
    return _finish(c, _direct_cluster_edges(g, c), bidirected, "cdag")


def build_pcdag(g: CausalGraph, c: Clustering, rules: Sequence[str] = ALL_RULES) -> ClusterGraph:
    """Partial cluster DAG.

    ``rules`` selects which lifting rules run; every rule is on by default and
    the switch exists for mutation testing.
    """
    rules = tuple(str(r).upper() for r in rules)
    for r in rules:
        if r not in ALL_RULES:
            raise ValueError(f"unknown rule {r!r}")
    _require_partition(g, c)
    phi = c.phi
    rem = set(c.remainder)
    directed = _mediated_cluster_edges(g, c) if "1" in rules else set()
    sources = {v: set(_remainder_sources(g, rem, v)) for v in c.relevant}
    spouse_reach = {v: {s for w in sources[v] for s in g.spouses[w]} for v in c.relevant}
    roots = {v: sources[v] & rem for v in c.relevant}
    bidirected = set()
    rel = c.relevant
    for i, a in enumerate(rel):
        for b in rel[i + 1:]:
            ca, cb = phi[a], phi[b]
            if ca == cb or frozenset((ca, cb)) in bidirected:
                continue
            linked = ("2A" in rules and bool(spouse_reach[a] & sources[b])) or (
                "2B" in rules and bool(roots[a] & roots[b])
            )
            if linked:
                bidirected.add(frozenset((ca, cb)))
    return _finish(c, directed, bidirected, "pcdag", rules)


# -- constraint enumeration ---------------------------------------------------


def _subsets(items: Sequence[str], cap: int | None, nonempty: bool) -> Iterator[tuple[str, ...]]:
    top = len(items) if cap is None else min(cap, len(items))
    for k in range(0 if not nonempty else 1, top + 1):
        yield from combinations(items, k)


def _role_cap(n_clusters: int) -> int | None:
    return None if n_clusters <= _config.FULL_ENUMERATION_MAX_CLUSTERS else _config.ROLE_CAP


def disjoint_triples(ids: Sequence[str], cap: int | None = None, unordered: bool = True):
    """(X, Y, Z) with X, Y nonempty and all three disjoint.

    With ``unordered`` each {X, Y} pair appears once, which suffices for a
    symmetric relation such as d-separation.
    """
    ids = tuple(ids)
    pos = {v: i for i, v in enumerate(ids)}
    for X in _subsets(ids, cap, True):
        rest = [v for v in ids if v not in X]
        for Y in _subsets(rest, cap, True):
            if unordered and min(pos[v] for v in Y) < min(pos[v] for v in X):
                continue
            rest2 = [v for v in rest if v not in Y]
            for Z in _subsets(rest2, cap, False):
                yield X, Y, Z


def rule_instances(ids: Sequence[str], cap: int | None = None):
    """(X, Y, Z, W) pairwise disjoint with Y and Z nonempty."""
    ids = tuple(ids)
    for Y in _subsets(ids, cap, True):
        r1 = [v for v in ids if v not in Y]
        for Z in _subsets(r1, cap, True):
            r2 = [v for v in r1 if v not in Z]
            for X in _subsets(r2, cap, False):
                r3 = [v for v in r2 if v not in X]
                for W in _subsets(r3, cap, False):
                    yield X, Y, Z, W


def _check_scope(g: CausalGraph, cg: ClusterGraph):
    c = cg.clustering
    if set(c.relevant) | set(c.remainder) != set(g.vertices):
        raise ScopeMismatch("cluster graph was not built over this base graph's vertices")


@dataclass
class GraphicalConsistency:
    layer: str
    consistent: bool
    checked: int
    counterexamples: list

    def __bool__(self):
        return self.consistent

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "consistent": self.consistent,
            "checked": self.checked,
            "counterexamples": [s.to_dict() for s in self.counterexamples],
        }


def check_graphical_consistency(
    g: CausalGraph, cg: ClusterGraph, layer="L1", max_counterexamples: int | None = None
) -> GraphicalConsistency:
    """Every constraint that holds in ``cg`` must hold in ``g`` after substituting pre-images."""
    layer = parse_layer(layer)
    _check_scope(g, cg)
    c = cg.clustering
    ids = cg.vertices
    cap = _role_cap(len(ids))
    pre = c.preimage
    bad: list = []
    checked = 0
    if layer == L1:
        for X, Y, Z in disjoint_triples(ids, cap):
            if not d_separated(cg.graph, X, Y, Z):
                continue
            checked += 1
            if not d_separated(g, pre(X), pre(Y), pre(Z)):
                bad.append(SepStatement(X, Y, Z, True))
                if max_counterexamples and len(bad) >= max_counterexamples:
                    break
    else:
        done = False
        for X, Y, Z, W in rule_instances(ids, cap):
            for rule in RULES:
                if not do_calculus_rule(cg.graph, rule, X, Y, Z, W):
                    continue
                checked += 1
                if not do_calculus_rule(g, rule, pre(X), pre(Y), pre(Z), pre(W)):
                    bad.append(RuleStatement(rule, X, Y, Z, W, True))
                    if max_counterexamples and len(bad) >= max_counterexamples:
                        done = True
                        break
            if done:
                break
    return GraphicalConsistency(layer, not bad, checked, bad)


@dataclass(frozen=True)
class DSepVerdict:
    cluster_verdict: bool
    base_verdict: bool

    @property
    def consistent(self) -> bool:
        return self.cluster_verdict == self.base_verdict

    def to_dict(self) -> dict:
        return {
            "cluster_verdict": self.cluster_verdict,
            "base_verdict": self.base_verdict,
            "consistent": self.consistent,
        }


def cluster_d_sep_check(
    g: CausalGraph, cg: ClusterGraph, X: Iterable[str], Y: Iterable[str], Z: Iterable[str] = ()
) -> DSepVerdict:
    X, Y, Z = tuple(X), tuple(Y), tuple(Z)
    cg.graph.check_vertices(X + Y + Z)
    pre = cg.clustering.preimage
    return DSepVerdict(d_separated(cg.graph, X, Y, Z), d_separated(g, pre(X), pre(Y), pre(Z)))


def do_calculus_applicable(cg: ClusterGraph | CausalGraph, rule: int, X=(), Y=(), Z=(), W=()) -> bool:
    graph = cg.graph if isinstance(cg, ClusterGraph) else cg
    sets = [set(X), set(Y), set(Z), set(W)]
    for i in range(4):
        for j in range(i + 1, 4):
            if sets[i] & sets[j]:
                raise OverlapError("X, Y, Z and W must be pairwise disjoint")
    return do_calculus_rule(graph, rule, X, Y, Z, W)


__all__ = [
    "Clustering",
    "ClusterGraph",
    "SepStatement",
    "RuleStatement",
    "GraphicalConsistency",
    "DSepVerdict",
    "validate_clustering",
    "build_cdag",
    "build_pcdag",
    "check_graphical_consistency",
    "cluster_d_sep_check",
    "do_calculus_applicable",
    "disjoint_triples",
    "rule_instances",
    "L1",
    "L2",
]
