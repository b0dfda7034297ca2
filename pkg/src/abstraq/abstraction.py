"""α-abstractions between a base SCM and a coarser abstract SCM.

An abstraction keeps a set of relevant base variables, maps each of them to
an abstract variable (``phi``) and maps the joint values of every pre-image
block onto the abstract variable's values (``alpha``). Block values are
mixed-radix indices over the block's members in relevant-list order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._config import ZERO_EVIDENCE, tolerance
from .clustering import Clustering, build_pcdag
from .errors import InconsistentAbstraction, InputError, ScopeMismatch, UnknownVariable, ZeroProbabilityEvidence
from .graph import CausalGraph, induced_graph
from .scm import (
    L2,
    Distribution,
    Mechanism,
    Scm,
    Variable,
    condition,
    joint_distribution,
    marginalize,
    parse_layer,
)

TV = "tv"
MAXABS = "maxabs"


def parse_metric(metric) -> str:
    text = str(metric).strip().lower().replace("_", "").replace("-", "")
    if text in ("tv", "totalvariation"):
        return TV
    if text in ("maxabs", "max", "linf"):
        return MAXABS
    raise ValueError(f"metric must be tv or maxabs, got {metric!r}")


def distance(p: np.ndarray, q: np.ndarray, metric=TV) -> float:
    diff = np.abs(np.asarray(p, dtype=float).ravel() - np.asarray(q, dtype=float).ravel())
    if diff.size == 0:
        return 0.0
    return float(0.5 * diff.sum()) if parse_metric(metric) == TV else float(diff.max())


@dataclass(frozen=True, eq=False)
class Abstraction:
    relevant: tuple[str, ...]
    phi: Mapping[str, str]
    alpha: Mapping[str, np.ndarray]
    domain_sizes: Mapping[str, int]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "relevant", tuple(self.relevant))
        object.__setattr__(self, "phi", dict(self.phi))
        maps = {}
        for k, m in self.alpha.items():
            arr = np.array(m, dtype=np.int64).ravel()
            arr.setflags(write=False)
            maps[k] = arr
        object.__setattr__(self, "alpha", maps)
        object.__setattr__(self, "domain_sizes", {k: int(v) for k, v in self.domain_sizes.items()})
        for v in self.relevant:
            if v not in self.phi:
                raise ScopeMismatch(f"relevant variable {v} has no image under phi")
        if set(self.phi) != set(self.relevant):
            raise ScopeMismatch("phi must be defined exactly on the relevant variables")
        for t in self.targets:
            if t not in self.alpha or t not in self.domain_sizes:
                raise ScopeMismatch(f"abstract variable {t} has no alpha map")
            m = self.alpha[t]
            k = self.domain_sizes[t]
            if m.size == 0 or m.min() < 0 or m.max() >= k:
                raise ScopeMismatch(f"alpha map of {t} leaves its domain of size {k}")
            if np.unique(m).size != k:
                raise ScopeMismatch(f"alpha map of {t} is not surjective")

    @cached_property
    def targets(self) -> tuple[str, ...]:
        """Abstract variables in order of first appearance along ``relevant``."""
        out: list[str] = []
        for v in self.relevant:
            if self.phi[v] not in out:
                out.append(self.phi[v])
        return tuple(out)

    @cached_property
    def members(self) -> dict[str, tuple[str, ...]]:
        return {t: tuple(v for v in self.relevant if self.phi[v] == t) for t in self.targets}

    @cached_property
    def bijective(self) -> bool:
        return all(self.alpha[t].size == self.domain_sizes[t] for t in self.targets)

    @property
    def bijective_flag(self) -> bool:
        return self.bijective

    def preimage(self, names: Iterable[str]) -> tuple[str, ...]:
        out = []
        for n in names:
            if n not in self.members:
                raise UnknownVariable(n, "abstraction")
            out.extend(self.members[n])
        return tuple(out)

    def map_block(self, target: str, block_index) -> np.ndarray | int:
        return self.alpha[target][block_index]

    def clustering(self, base: Scm) -> Clustering:
        rel = set(self.relevant)
        return Clustering(
            tuple((t, self.members[t]) for t in self.targets),
            tuple(n for n in base.endo_names if n not in rel),
        )

    def check(self, base: Scm, abstract: Scm | None = None):
        """Raise :class:`ScopeMismatch` unless the maps fit both models."""
        base_endo = set(base.endo_names)
        for v in self.relevant:
            if v not in base_endo:
                raise ScopeMismatch(f"relevant variable {v} is not endogenous in the base model")
        for t in self.targets:
            size = int(np.prod([base.card(v) for v in self.members[t]], dtype=np.int64))
            if self.alpha[t].size != size:
                raise ScopeMismatch(f"alpha map of {t} has {self.alpha[t].size} entries, pre-image domain has {size}")
        if abstract is not None:
            if set(abstract.endo_names) != set(self.targets):
                raise ScopeMismatch(
                    f"abstract variables {sorted(abstract.endo_names)} differ from phi's codomain {sorted(self.targets)}"
                )
            for t in self.targets:
                if abstract.card(t) != self.domain_sizes[t]:
                    raise ScopeMismatch(f"{t}: abstract domain has {abstract.card(t)} values, alpha maps onto {self.domain_sizes[t]}")

    def value_index(self, base: Scm, order: Sequence[str] | None = None) -> np.ndarray:
        """For every base joint index, the abstract joint index over ``order`` (targets by default)."""
        order = tuple(self.targets if order is None else order)
        key = (id(base), order)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is base:
            return hit[1]
        cards = [base.card(n) for n in base.endo_names]
        size = int(np.prod(cards, dtype=np.int64))
        coords = np.unravel_index(np.arange(size, dtype=np.int64), cards)
        pos = {n: i for i, n in enumerate(base.endo_names)}
        codes = []
        for t in order:
            ms = self.members[t]
            block = np.ravel_multi_index([coords[pos[m]] for m in ms], [base.card(m) for m in ms])
            codes.append(self.alpha[t][block])
        out = np.ravel_multi_index(codes, [self.domain_sizes[t] for t in order]) if codes else np.zeros(size, np.int64)
        out = np.asarray(out, dtype=np.int64)
        out.setflags(write=False)
        self._cache[key] = (base, out)
        return out

    def push_joint(self, base: Scm, joint: Distribution, order: Sequence[str] | None = None) -> Distribution:
        """Pushforward of a full base joint onto all abstract variables."""
        order = tuple(self.targets if order is None else order)
        if joint.scope != base.endo_names:
            raise ScopeMismatch("expected a joint over every base endogenous variable")
        shape = tuple(self.domain_sizes[t] for t in order)
        flat = np.bincount(self.value_index(base, order), weights=joint.flat, minlength=int(np.prod(shape, dtype=np.int64)))
        return Distribution(order, flat.reshape(shape))

    def to_dict(self) -> dict:
        return {
            "relevant": list(self.relevant),
            "phi": {v: self.phi[v] for v in self.relevant},
            "alpha": {t: {"domain_size": self.domain_sizes[t], "map": [int(x) for x in self.alpha[t]]} for t in self.targets},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Abstraction":
        if not isinstance(doc, Mapping):
            raise InputError("<root>", "expected a JSON object")
        for key, typ in (("relevant", list), ("phi", Mapping), ("alpha", Mapping)):
            if key not in doc:
                raise InputError(key, "missing")
            if not isinstance(doc[key], typ):
                raise InputError(key, f"expected {'a list' if typ is list else 'an object'}")
        maps, sizes = {}, {}
        for t, spec in doc["alpha"].items():
            where = f"alpha.{t}"
            if not isinstance(spec, Mapping):
                raise InputError(where, "expected an object with domain_size and map")
            if not isinstance(spec.get("domain_size"), int):
                raise InputError(f"{where}.domain_size", "expected an integer")
            m = spec.get("map")
            if not isinstance(m, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in m):
                raise InputError(f"{where}.map", "expected a list of integers")
            maps[t] = m
            sizes[t] = spec["domain_size"]
        try:
            return cls(tuple(doc["relevant"]), dict(doc["phi"]), maps, sizes)
        except ScopeMismatch as exc:
            raise InputError("alpha", str(exc)) from None


def canonical_alpha(model: Scm, c: Clustering) -> Abstraction:
    """Identity maps on the mixed-radix encoding of each cluster's product domain."""
    g = induced_graph(model)
    from .clustering import validate_clustering

    problems = validate_clustering(g, c)
    if problems:
        raise ValueError("invalid clustering: " + "; ".join(v.message for v in problems))
    maps, sizes = {}, {}
    for cid, ms in c.clusters:
        k = int(np.prod([model.card(m) for m in ms], dtype=np.int64))
        maps[cid] = np.arange(k)
        sizes[cid] = k
    return Abstraction(c.relevant, dict(c.phi), maps, sizes)


def _infer_targets(a: Abstraction, scope: Sequence[str]) -> tuple[str, ...]:
    targets: list[str] = []
    i = 0
    scope = tuple(scope)
    while i < len(scope):
        v = scope[i]
        if v not in a.phi:
            raise ScopeMismatch(f"{v} is not a relevant variable")
        t = a.phi[v]
        ms = a.members[t]
        if scope[i:i + len(ms)] != ms or t in targets:
            raise ScopeMismatch(f"scope must list the members of {t} contiguously as {list(ms)}")
        targets.append(t)
        i += len(ms)
    return tuple(targets)


def pushforward(a: Abstraction, dist: Distribution, targets: Sequence[str] | None = None) -> Distribution:
    """Mass of each abstract value tuple = total mass of its base pre-images."""
    inferred = _infer_targets(a, dist.scope)
    if targets is not None and tuple(targets) != inferred:
        raise ScopeMismatch(f"distribution scope corresponds to {list(inferred)}, not {list(targets)}")
    if not inferred:
        return Distribution((), np.asarray(dist.probs.sum()))
    block_sizes = [a.alpha[t].size for t in inferred]
    if int(np.prod(block_sizes, dtype=np.int64)) != dist.flat.size:
        raise ScopeMismatch("distribution cardinalities do not match the alpha maps")
    coords = np.unravel_index(np.arange(dist.flat.size), block_sizes)
    codes = [a.alpha[t][coords[k]] for k, t in enumerate(inferred)]
    shape = tuple(a.domain_sizes[t] for t in inferred)
    flat = np.bincount(np.ravel_multi_index(codes, shape), weights=dist.flat, minlength=int(np.prod(shape)))
    return Distribution(inferred, flat.reshape(shape))


# -- constructive abstract model ---------------------------------------------


def construct_abstract_scm(model: Scm, c: Clustering) -> tuple[Scm, Abstraction]:
    """Composite-mechanism abstract model for a (partial) clustering.

    Each cluster's mechanism outputs the tuple of its members' values. Any
    reference to a remainder variable or to a fellow member is replaced by
    that variable's own mechanism until only variables of other clusters and
    exogenous variables remain as inputs.
    """
    g = induced_graph(model)
    build_pcdag(g, c)  # raises on cyclic or malformed clusterings
    a = canonical_alpha(model, c)
    phi = c.phi
    exo_pos = {n: i for i, n in enumerate(model.exo_names)}
    cluster_pos = {cid: i for i, cid in enumerate(c.ids)}
    order = model.topological_order
    rank = {n: i for i, n in enumerate(order)}

    abstract_vars = []
    for cid, ms in c.clusters:
        labels = [",".join(combo) for combo in product(*(model.variable(m).domain for m in ms))]
        abstract_vars.append(Variable(cid, tuple(labels)))

    mechanisms = []
    for cid, ms in c.clusters:
        # Internal variables: members plus every remainder or member ancestor reached through them.
        internal: set[str] = set()
        leaves_endo: set[str] = set()
        leaves_exo: set[str] = set()
        stack = list(ms)
        while stack:
            v = stack.pop()
            if v in internal:
                continue
            internal.add(v)
            mech = model.mechanism(v)
            leaves_exo.update(mech.exo_parents)
            for p in mech.endo_parents:
                if p in phi and phi[p] != cid:
                    leaves_endo.add(p)
                else:
                    stack.append(p)
        parent_clusters = sorted({phi[v] for v in leaves_endo}, key=cluster_pos.__getitem__)
        exo_parents = sorted(leaves_exo, key=exo_pos.__getitem__)
        in_cards = [a.domain_sizes[p] for p in parent_clusters] + [model.card(u) for u in exo_parents]
        rows = int(np.prod(in_cards, dtype=np.int64))
        grid = np.unravel_index(np.arange(rows, dtype=np.int64), in_cards) if in_cards else ()
        values: dict[str, np.ndarray] = {}
        for k, pc in enumerate(parent_clusters):
            pms = c.members[pc]
            decoded = np.unravel_index(grid[k], [model.card(m) for m in pms])
            for m, col in zip(pms, decoded):
                values[m] = np.asarray(col, dtype=np.int64)
        for k, u in enumerate(exo_parents):
            values[u] = np.asarray(grid[len(parent_clusters) + k], dtype=np.int64)
        for v in sorted(internal, key=rank.__getitem__):
            mech = model.mechanism(v)
            idx = np.zeros(rows, dtype=np.int64)
            for p in mech.parents:
                idx = idx * model.card(p) + values[p]
            values[v] = mech.table[idx]
        table = np.ravel_multi_index([values[m] for m in ms], [model.card(m) for m in ms]) if rows else np.zeros(0)
        mechanisms.append(Mechanism(cid, tuple(parent_clusters), tuple(exo_parents), np.asarray(table, np.int64)))

    abstract = Scm(abstract_vars, model.exogenous, mechanisms, model.exo_dist)
    return abstract, a


# -- consistency ---------------------------------------------------------------


@dataclass
class ConsistencyReport:
    layer: str
    metric: str
    max_error: float
    witness: dict | None
    skipped_cells: int
    checked_cells: int

    def passed(self, tol: float | None = None) -> bool:
        return self.max_error <= (tolerance() if tol is None else tol)

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "metric": self.metric,
            "max_error": self.max_error,
            "witness": self.witness,
            "skipped_cells": self.skipped_cells,
            "checked_cells": self.checked_cells,
        }


def _nonempty_subsets(items: Sequence[str]):
    for k in range(1, len(items) + 1):
        yield from combinations(items, k)


def _all_subsets(items: Sequence[str]):
    for k in range(0, len(items) + 1):
        yield from combinations(items, k)


def abstraction_error(
    base: Scm, abstract: Scm, a: Abstraction, layer="L2", metric=TV
) -> ConsistencyReport:
    """Worst disagreement between querying-then-abstracting and abstracting-then-querying.

    Ranges over every abstract X (including the empty set), every disjoint
    nonempty Y and every intervention or evidence value. For L2 the base
    interventions run at base granularity and are matched to their α-image.
    For L1 the base side conditions on the pre-image event of the abstract
    evidence value; for bijective maps this is the same as conditioning on
    the single base pre-image.
    """
    layer = parse_layer(layer)
    metric = parse_metric(metric)
    a.check(base, abstract)
    targets = a.targets
    best = {"err": 0.0, "witness": None}
    skipped = 0
    checked = 0

    def compare(P: Distribution, Q: Distribution, X, x_abs, x_base):
        nonlocal checked
        rest = [t for t in targets if t not in X]
        checked += 1
        for Y in _nonempty_subsets(rest):
            d = distance(marginalize(P, Y).flat, marginalize(Q, Y).flat, metric)
            if d > best["err"]:
                best["err"] = d
                best["witness"] = {
                    "X": list(X),
                    "Y": list(Y),
                    "x": [int(v) for v in x_abs],
                    "x_base": None if x_base is None else [int(v) for v in x_base],
                    "distance": d,
                }

    if layer == L2:
        for X in _all_subsets(targets):
            pre = a.preimage(X)
            cards = [base.card(v) for v in pre]
            for x_base in product(*(range(k) for k in cards)):
                base_do = dict(zip(pre, x_base))
                x_abs = []
                off = 0
                for t in X:
                    n = len(a.members[t])
                    block = int(np.ravel_multi_index(x_base[off:off + n], cards[off:off + n])) if n else 0
                    x_abs.append(int(a.alpha[t][block]))
                    off += n
                P = a.push_joint(base, joint_distribution(base, base_do))
                Q = marginalize(joint_distribution(abstract, dict(zip(X, x_abs))), targets)
                compare(P, Q, X, x_abs, x_base)
    else:
        P0 = a.push_joint(base, joint_distribution(base))
        Q0 = marginalize(joint_distribution(abstract), targets)
        for X in _all_subsets(targets):
            if not X:
                compare(P0, Q0, X, (), None)
                continue
            for x_abs in product(*(range(a.domain_sizes[t]) for t in X)):
                ev = dict(zip(X, x_abs))
                try:
                    P = condition(P0, ev)
                    Q = condition(Q0, ev)
                except ZeroProbabilityEvidence:
                    skipped += 1
                    continue
                compare(P, Q, X, x_abs, None)
    return ConsistencyReport(layer, metric, best["err"], best["witness"], skipped, checked)


# -- structure recovery --------------------------------------------------------


@dataclass
class RecoveredStructure:
    graph: CausalGraph
    pcdag: CausalGraph | None
    omitted_directed: list = field(default_factory=list)
    omitted_bidirected: list = field(default_factory=list)
    extra_directed: list = field(default_factory=list)
    extra_bidirected: list = field(default_factory=list)
    diagnostic: bool = False

    @property
    def directed(self):
        return self.graph.directed

    @property
    def bidirected(self):
        return self.graph.bidirected

    @property
    def matches_pcdag(self) -> bool:
        return not (self.omitted_directed or self.omitted_bidirected or self.extra_directed or self.extra_bidirected)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "pcdag": None if self.pcdag is None else self.pcdag.to_dict(),
            "matches_pcdag": self.matches_pcdag,
            "omitted_directed": [list(e) for e in self.omitted_directed],
            "omitted_bidirected": [list(e) for e in self.omitted_bidirected],
            "extra_directed": [list(e) for e in self.extra_directed],
            "extra_bidirected": [list(e) for e in self.extra_bidirected],
            "diagnostic": self.diagnostic,
        }


class _Oracle:
    """Interventional marginals of the abstract model with per-query caching."""

    def __init__(self, model: Scm, tol: float):
        self.model = model
        self.tol = tol

    def marginal(self, do: Mapping[str, int], keep: Sequence[str]) -> np.ndarray:
        return marginalize(joint_distribution(self.model, do), keep).probs

    def differs(self, p: np.ndarray, q: np.ndarray) -> bool:
        return float(np.max(np.abs(p - q))) > self.tol


def _values(model: Scm, names: Sequence[str]):
    return product(*(range(model.card(n)) for n in names))


def _blocking_sets(others: Sequence[str]):
    # Largest first: the full complement blocks every open path when any set does.
    for k in range(len(others), -1, -1):
        yield from combinations(others, k)


def _directed_edge(oracle: _Oracle, ci: str, cj: str, others: Sequence[str]) -> bool:
    m = oracle.model
    for Z in _blocking_sets(others):
        for z in _values(m, Z):
            do = dict(zip(Z, z))
            ref = oracle.marginal(do, (cj,))
            if not any(oracle.differs(oracle.marginal({**do, ci: c}, (cj,)), ref) for c in range(m.card(ci))):
                return False
    return True


def _confounded_nonadjacent(oracle: _Oracle, ci: str, cj: str, others: Sequence[str]) -> bool:
    m = oracle.model
    for Z in _blocking_sets(others):
        for z in _values(m, Z):
            joint = oracle.marginal(dict(zip(Z, z)), (ci, cj))
            indep = np.outer(joint.sum(axis=1), joint.sum(axis=0))
            if not oracle.differs(joint, indep):
                return False
    return True


def _confounded_adjacent(oracle: _Oracle, cause: str, effect: str, others: Sequence[str]) -> bool:
    m = oracle.model
    for Z in _blocking_sets(others):
        blocked = True
        for z in _values(m, Z):
            do = dict(zip(Z, z))
            joint = oracle.marginal(do, (cause, effect))
            for c in range(m.card(cause)):
                mass = joint[c].sum()
                if mass <= ZERO_EVIDENCE:
                    continue
                observed = joint[c] / mass
                forced = oracle.marginal({**do, cause: c}, (effect,))
                if oracle.differs(observed, forced):
                    blocked = False
                    break
            if not blocked:
                break
        if blocked:
            return False
    return True


def recover_structure(
    base: Scm,
    abstract: Scm,
    a: Abstraction,
    diagnostic: bool = False,
    check_consistency: bool = True,
    tol: float | None = None,
) -> RecoveredStructure:
    """Read the abstract causal graph off interventional distributions alone.

    Requires an L2-consistent abstraction. Non-bijective maps are refused
    unless ``diagnostic`` is set, in which case edges that the partial
    cluster DAG predicts but the distributions do not support are reported
    as omitted.
    """
    tol = tolerance() if tol is None else tol
    a.check(base, abstract)
    if not a.bijective and not diagnostic:
        raise InconsistentAbstraction("structure recovery needs bijective alpha maps; pass diagnostic=True to override")
    if check_consistency:
        rep = abstraction_error(base, abstract, a, L2)
        if rep.max_error > tol:
            raise InconsistentAbstraction(f"abstraction is not L2-consistent (error {rep.max_error:.3g})")
    oracle = _Oracle(abstract, tol)
    names = a.targets
    directed = set()
    for ci in names:
        for cj in names:
            if ci == cj:
                continue
            others = [n for n in names if n not in (ci, cj)]
            if _directed_edge(oracle, ci, cj, others):
                directed.add((ci, cj))
    bidirected = set()
    for i, ci in enumerate(names):
        for cj in names[i + 1:]:
            others = [n for n in names if n not in (ci, cj)]
            if (ci, cj) in directed:
                linked = _confounded_adjacent(oracle, ci, cj, others)
            elif (cj, ci) in directed:
                linked = _confounded_adjacent(oracle, cj, ci, others)
            else:
                linked = _confounded_nonadjacent(oracle, ci, cj, others)
            if linked:
                bidirected.add(frozenset((ci, cj)))
    graph = CausalGraph(names, frozenset(directed), frozenset(bidirected))
    try:
        pc = build_pcdag(induced_graph(base), a.clustering(base)).graph
    except Exception:  # a hand-made abstraction need not come from a valid clustering
        pc = None
    out = RecoveredStructure(graph, pc, diagnostic=diagnostic)
    if pc is not None:
        out.omitted_directed = sorted(pc.directed - graph.directed)
        out.extra_directed = sorted(graph.directed - pc.directed)
        out.omitted_bidirected = sorted(tuple(sorted(e)) for e in pc.bidirected - graph.bidirected)
        out.extra_bidirected = sorted(tuple(sorted(e)) for e in graph.bidirected - pc.bidirected)
    return out


# -- (in)equality preservation ------------------------------------

MAX_DRAWS_PER_TRIAL = 50


@dataclass
class PreservationReport:
    trials: int
    passed: int
    failed: int
    skipped: int
    equal_pairs: int
    bijective: bool
    counterexample: dict | None

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed == self.trials

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "trials": self.trials,
            "passed": self.passed,
            "failed": self.failed,
            "skipped": self.skipped,
            "equal_pairs": self.equal_pairs,
            "bijective": self.bijective,
            "counterexample": self.counterexample,
        }


def _base_query(base: Scm, a: Abstraction, X, Y, y, Z, z) -> np.ndarray | None:
    """P(φ⁻¹X | do(φ⁻¹Y = y), φ⁻¹Z = z) over base values, or None on null evidence."""
    px, py, pz = a.preimage(X), a.preimage(Y), a.preimage(Z)
    joint = marginalize(joint_distribution(base, dict(zip(py, y))), pz + px)
    try:
        return condition(joint, dict(zip(pz, z))).probs.ravel()
    except ZeroProbabilityEvidence:
        return None


def _abstract_query(abstract: Scm, X, Y, y, Z, z) -> np.ndarray | None:
    joint = marginalize(joint_distribution(abstract, dict(zip(Y, y))), tuple(Z) + tuple(X))
    try:
        return condition(joint, dict(zip(Z, z))).probs.ravel()
    except ZeroProbabilityEvidence:
        return None


def _push_flat(a: Abstraction, X, flat: np.ndarray, cards) -> np.ndarray:
    d = Distribution(a.preimage(X), flat.reshape(cards))
    return pushforward(a, d).flat


def _block_values(a: Abstraction, base: Scm, names, block_values) -> list[int]:
    """Flatten block indices of ``names`` into base member values, in pre-image order."""
    out: list[int] = []
    for t, b in zip(names, block_values):
        out.extend(int(v) for v in np.unravel_index(b, [base.card(m) for m in a.members[t]]))
    return out


def check_inequality_preservation(
    base: Scm, abstract: Scm, a: Abstraction, trials: int = 100, seed: int = 0, tol: float | None = None
) -> PreservationReport:
    """Random pairs of three-place queries compared before and after pushforward.

    Each trial draws two queries P(X | do(Y_k), Z_k) over φ-pre-image sets.
    Draws where either query conditions on a null event are redrawn and
    counted as skipped, so ``trials`` comparisons are made.
    With bijective maps, base equality must coincide with equality of the
    pushforwards; with merely surjective maps only the direction
    "pushforwards differ implies base queries differ" is required. For
    bijective maps the pushforward is also compared with the same query
    posed to the abstract model.
    """
    tol = tolerance() if tol is None else tol
    a.check(base, abstract)
    rng = np.random.default_rng(seed)
    names = list(a.targets)
    passed = failed = skipped = equal = 0
    first = None

    def draw_sets():
        perm = list(rng.permutation(len(names)))
        k_x = int(rng.integers(1, len(names) + 1))
        X = tuple(names[i] for i in sorted(perm[:k_x]))
        rest = perm[k_x:]
        roles = rng.integers(0, 3, size=len(rest))
        Y = tuple(names[i] for i, r in sorted(zip(rest, roles)) if r == 1)
        Z = tuple(names[i] for i, r in sorted(zip(rest, roles)) if r == 2)
        return X, Y, Z

    def draw_vals(S):
        return tuple(int(rng.integers(0, a.alpha[t].size)) for t in S)

    trial = -1
    attempts = 0
    while passed + failed < trials and attempts < MAX_DRAWS_PER_TRIAL * max(trials, 1):
        attempts += 1
        trial += 1
        X, Y1, Z1 = draw_sets()
        y1, z1 = draw_vals(Y1), draw_vals(Z1)
        mode = rng.random()
        if mode < 0.1:
            Y2, Z2, y2, z2 = Y1, Z1, y1, z1
        elif mode < 0.55:
            # Same sets, one coordinate perturbed: the setting where equalities arise.
            Y2, Z2 = Y1, Z1
            y2, z2 = list(y1), list(z1)
            slots = [("y", i) for i in range(len(Y1))] + [("z", i) for i in range(len(Z1))]
            if slots:
                kind, i = slots[int(rng.integers(len(slots)))]
                S = Y1 if kind == "y" else Z1
                vals = y2 if kind == "y" else z2
                vals[i] = int(rng.integers(0, a.alpha[S[i]].size))
            y2, z2 = tuple(y2), tuple(z2)
        else:
            rest = [n for n in names if n not in X]
            roles = rng.integers(0, 3, size=len(rest))
            Y2 = tuple(n for n, r in zip(rest, roles) if r == 1)
            Z2 = tuple(n for n, r in zip(rest, roles) if r == 2)
            y2, z2 = draw_vals(Y2), draw_vals(Z2)
        bx = [base.card(v) for v in a.preimage(X)]
        b1 = _base_query(base, a, X, Y1, _block_values(a, base, Y1, y1), Z1, _block_values(a, base, Z1, z1))
        b2 = _base_query(base, a, X, Y2, _block_values(a, base, Y2, y2), Z2, _block_values(a, base, Z2, z2))
        if b1 is None or b2 is None:
            skipped += 1
            continue
        p1, p2 = _push_flat(a, X, b1, bx), _push_flat(a, X, b2, bx)
        base_equal = distance(b1, b2) <= tol
        push_equal = distance(p1, p2) <= tol
        equal += base_equal
        ok = (base_equal == push_equal) if a.bijective else (base_equal <= push_equal)
        note = None
        if ok and a.bijective:
            a1 = _abstract_query(abstract, X, Y1, [a.alpha[t][v] for t, v in zip(Y1, y1)], Z1, [a.alpha[t][v] for t, v in zip(Z1, z1)])
            if a1 is None or distance(a1, p1) > tol:
                ok = False
                note = "abstract model disagrees with the pushforward"
        if ok:
            passed += 1
            continue
        failed += 1
        if first is None:
            first = {
                "trial": trial,
                "X": list(X),
                "query1": {"Y": list(Y1), "y": list(y1), "Z": list(Z1), "z": list(z1)},
                "query2": {"Y": list(Y2), "y": list(y2), "Z": list(Z2), "z": list(z2)},
                "base_equal": bool(base_equal),
                "pushforward_equal": bool(push_equal),
                "note": note,
            }
    return PreservationReport(trials, passed, failed, skipped, equal, a.bijective, first)
