"""Finite-domain structural causal models and exact enumeration.

Mechanisms are dense lookup tables. A table is indexed in mixed-radix order
over the endogenous parents followed by the exogenous parents, the last
listed parent varying fastest. Exogenous variables are mutually independent
categoricals; confounding is expressed by one exogenous variable feeding
several mechanisms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from ._config import NORMALIZATION_TOLERANCE, ZERO_EVIDENCE
from .errors import (
    DomainError,
    InputError,
    InvalidModel,
    OverlapError,
    ScopeMismatch,
    UnknownVariable,
    ZeroProbabilityEvidence,
)

ENDO = "endo"
EXO = "exo"

_JOINT_CACHE_LIMIT = 8192


@dataclass(frozen=True)
class Variable:
    name: str
    domain: tuple[str, ...]
    kind: str = ENDO

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(str(d) for d in self.domain))

    @property
    def card(self) -> int:
        return len(self.domain)


@dataclass(frozen=True, eq=False)
class Mechanism:
    child: str
    endo_parents: tuple[str, ...]
    exo_parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "endo_parents", tuple(self.endo_parents))
        object.__setattr__(self, "exo_parents", tuple(self.exo_parents))
        table = np.array(self.table, dtype=np.int64).ravel()
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def parents(self) -> tuple[str, ...]:
        return self.endo_parents + self.exo_parents

    def __eq__(self, other):
        if not isinstance(other, Mechanism):
            return NotImplemented
        return (
            self.child == other.child
            and self.endo_parents == other.endo_parents
            and self.exo_parents == other.exo_parents
            and np.array_equal(self.table, other.table)
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    """One failed model or clustering invariant."""

    code: str
    message: str
    names: tuple[str, ...] = ()


class Scm:
    """A semi-Markovian SCM over finite domains.

    Instances are treated as immutable: operations such as :func:`intervene`
    return new models. Interventional joints are memoized per instance.
    """

    def __init__(
        self,
        endogenous: Iterable[Variable],
        exogenous: Iterable[Variable],
        mechanisms: Iterable[Mechanism],
        exo_dist: Mapping[str, Sequence[float]],
    ):
        self.endogenous = tuple(
            v if v.kind == ENDO else Variable(v.name, v.domain, ENDO) for v in endogenous
        )
        self.exogenous = tuple(
            v if v.kind == EXO else Variable(v.name, v.domain, EXO) for v in exogenous
        )
        self.mechanisms = tuple(mechanisms)
        dist = {}
        for name, probs in exo_dist.items():
            arr = np.array(probs, dtype=np.float64).ravel()
            arr.setflags(write=False)
            dist[name] = arr
        self.exo_dist = dist
        self._joint_cache: dict = {}

    # -- lookup -----------------------------------------------------------
    @cached_property
    def _vars(self) -> dict[str, Variable]:
        out = {}
        for v in self.exogenous + self.endogenous:
            out.setdefault(v.name, v)
        return out

    @cached_property
    def _mech_by_child(self) -> dict[str, Mechanism]:
        return {m.child: m for m in self.mechanisms}

    @property
    def endo_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.endogenous)

    @property
    def exo_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.exogenous)

    def variable(self, name: str) -> Variable:
        try:
            return self._vars[name]
        except KeyError:
            raise UnknownVariable(name) from None

    def card(self, name: str) -> int:
        return self.variable(name).card

    def mechanism(self, name: str) -> Mechanism:
        try:
            return self._mech_by_child[name]
        except KeyError:
            raise UnknownVariable(name, "mechanisms") from None

    def __repr__(self):
        return f"Scm(endogenous={list(self.endo_names)}, exogenous={list(self.exo_names)})"

    def __eq__(self, other):
        if not isinstance(other, Scm):
            return NotImplemented
        return (
            self.endogenous == other.endogenous
            and self.exogenous == other.exogenous
            and sorted(self.mechanisms, key=lambda m: m.child)
            == sorted(other.mechanisms, key=lambda m: m.child)
            and self.exo_dist.keys() == other.exo_dist.keys()
            and all(np.array_equal(self.exo_dist[k], other.exo_dist[k]) for k in self.exo_dist)
        )

    __hash__ = object.__hash__

    # -- validation and packing -------------------------------------------
    @cached_property
    def violations(self) -> tuple[Violation, ...]:
        return tuple(_validate(self))

    def require_valid(self):
        if self.violations:
            raise InvalidModel(self.violations)

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        self.require_valid()
        order, _ = _topo(self.endo_names, {m.child: m.endo_parents for m in self.mechanisms})
        return tuple(order)

    @cached_property
    def packed(self) -> dict[str, np.ndarray]:
        """Flat arrays consumed by :mod:`abstraq.kernels`."""
        self.require_valid()
        endo_index = {n: i for i, n in enumerate(self.endo_names)}
        n_endo = len(endo_index)
        exo_index = {n: n_endo + i for i, n in enumerate(self.exo_names)}
        par_ptr = [0]
        par_src: list[int] = []
        par_card: list[int] = []
        tab_ptr = [0]
        tables = []
        for name in self.endo_names:
            mech = self.mechanism(name)
            for p in mech.endo_parents:
                par_src.append(endo_index[p])
                par_card.append(self.card(p))
            for p in mech.exo_parents:
                par_src.append(exo_index[p])
                par_card.append(self.card(p))
            par_ptr.append(len(par_src))
            tables.append(mech.table)
            tab_ptr.append(tab_ptr[-1] + mech.table.shape[0])
        as_i64 = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
        return {
            "exo_cards": as_i64([v.card for v in self.exogenous]),
            "endo_cards": as_i64([v.card for v in self.endogenous]),
            "order": as_i64([endo_index[n] for n in self.topological_order]),
            "par_ptr": as_i64(par_ptr),
            "par_src": as_i64(par_src),
            "par_card": as_i64(par_card),
            "tab_ptr": as_i64(tab_ptr),
            "tables": np.concatenate(tables).astype(np.int64) if tables else as_i64([]),
        }

    @cached_property
    def exo_probs(self) -> np.ndarray:
        """P(u) for every exogenous joint assignment, mixed-radix ordered."""
        vectors = [self.exo_dist[n] for n in self.exo_names]
        if not vectors:
            return np.ones(1)
        out = reduce(np.multiply.outer, vectors).ravel()
        out.setflags(write=False)
        return out

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "variables": [
                {"name": v.name, "kind": v.kind, "domain": list(v.domain)}
                for v in self.endogenous + self.exogenous
            ],
            "mechanisms": [
                {
                    "child": m.child,
                    "endo_parents": list(m.endo_parents),
                    "exo_parents": list(m.exo_parents),
                    "table": [int(t) for t in m.table],
                }
                for m in self.mechanisms
            ],
            "exo_dist": {n: [float(p) for p in self.exo_dist[n]] for n in self.exo_dist},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Scm":
        if not isinstance(doc, Mapping):
            raise InputError("<root>", "expected a JSON object")
        endo, exo = [], []
        for i, raw in enumerate(_field(doc, "variables", list)):
            where = f"variables[{i}]"
            if not isinstance(raw, Mapping):
                raise InputError(where, "expected an object")
            name = _field(raw, "name", str, where)
            kind = _field(raw, "kind", str, where)
            domain = _field(raw, "domain", list, where)
            if kind not in (ENDO, EXO):
                raise InputError(f"{where}.kind", f"must be 'endo' or 'exo', got {kind!r}")
            (endo if kind == ENDO else exo).append(Variable(name, tuple(domain), kind))
        mechs = []
        for i, raw in enumerate(_field(doc, "mechanisms", list)):
            where = f"mechanisms[{i}]"
            if not isinstance(raw, Mapping):
                raise InputError(where, "expected an object")
            table = _field(raw, "table", list, where)
            if not all(isinstance(t, int) and not isinstance(t, bool) for t in table):
                raise InputError(f"{where}.table", "entries must be integers")
            mechs.append(
                Mechanism(
                    _field(raw, "child", str, where),
                    tuple(_field(raw, "endo_parents", list, where, default=[])),
                    tuple(_field(raw, "exo_parents", list, where, default=[])),
                    np.asarray(table, dtype=np.int64),
                )
            )
        dist = _field(doc, "exo_dist", Mapping)
        for name, probs in dist.items():
            if not isinstance(probs, list) or not all(
                isinstance(p, (int, float)) and not isinstance(p, bool) for p in probs
            ):
                raise InputError(f"exo_dist.{name}", "expected a list of numbers")
        return cls(endo, exo, mechs, dist)


def _field(doc, key, typ, where=None, default=None):
    path = f"{where}.{key}" if where else key
    if key not in doc:
        if default is not None:
            return default
        raise InputError(path, "missing")
    value = doc[key]
    if not isinstance(value, typ):
        raise InputError(path, f"expected {getattr(typ, '__name__', typ)}")
    return value


def _topo(vertices, parents):
    """Kahn's algorithm; returns (order, leftover) where leftover is nonempty iff cyclic."""
    indeg = {v: 0 for v in vertices}
    children: dict[str, list[str]] = {v: [] for v in vertices}
    for child, pars in parents.items():
        for p in pars:
            if p in indeg and child in indeg:
                indeg[child] += 1
                children[p].append(child)
    ready = [v for v in vertices if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    leftover = [v for v in vertices if v not in set(order)]
    return order, leftover


def _find_cycle(vertices, parents):
    """Return one directed cycle as a vertex list, or ``[]``."""
    children: dict[str, list[str]] = {v: [] for v in vertices}
    for child, pars in parents.items():
        for p in pars:
            if p in children and child in children:
                children[p].append(child)
    color = dict.fromkeys(vertices, 0)
    stack: list[str] = []

    def visit(v):
        color[v] = 1
        stack.append(v)
        for c in children[v]:
            if color[c] == 1:
                return stack[stack.index(c):]
            if color[c] == 0:
                found = visit(c)
                if found:
                    return found
        stack.pop()
        color[v] = 2
        return []

    for v in vertices:
        if color[v] == 0:
            found = visit(v)
            if found:
                return list(found)
    return []


def _validate(model: Scm) -> list[Violation]:
    out: list[Violation] = []
    seen: dict[str, str] = {}
    for v in model.endogenous + model.exogenous:
        if v.name in seen:
            out.append(Violation("duplicate-name", f"variable name {v.name!r} used twice", (v.name,)))
        seen[v.name] = v.kind
        if v.card < 1:
            out.append(Violation("empty-domain", f"{v.name} has an empty domain", (v.name,)))
        if len(set(v.domain)) != len(v.domain):
            out.append(Violation("duplicate-label", f"{v.name} has repeated domain labels", (v.name,)))

    counts: dict[str, int] = {}
    for m in model.mechanisms:
        counts[m.child] = counts.get(m.child, 0) + 1
        if seen.get(m.child) != ENDO:
            out.append(Violation("mechanism-child", f"mechanism child {m.child!r} is not endogenous", (m.child,)))
            continue
        ok = True
        for p in m.endo_parents:
            if seen.get(p) != ENDO:
                out.append(Violation("unknown-parent", f"{m.child}: endogenous parent {p!r} unknown", (m.child, p)))
                ok = False
        for p in m.exo_parents:
            if seen.get(p) != EXO:
                out.append(Violation("unknown-parent", f"{m.child}: exogenous parent {p!r} unknown", (m.child, p)))
                ok = False
        if m.child in m.endo_parents:
            out.append(Violation("self-parent", f"{m.child} lists itself as a parent", (m.child,)))
        if len(set(m.parents)) != len(m.parents):
            out.append(Violation("duplicate-parent", f"{m.child} lists a parent twice", (m.child,)))
        if not ok:
            continue
        expected = int(np.prod([model.card(p) for p in m.parents], dtype=np.int64))
        if m.table.shape[0] != expected:
            out.append(
                Violation(
                    "table-length",
                    f"{m.child}: table has {m.table.shape[0]} entries, expected {expected}",
                    (m.child,),
                )
            )
        card = model.card(m.child)
        if m.table.size and (m.table.min() < 0 or m.table.max() >= card):
            out.append(Violation("table-range", f"{m.child}: table entry outside domain of size {card}", (m.child,)))
    for v in model.endogenous:
        n = counts.get(v.name, 0)
        if n == 0:
            out.append(Violation("missing-mechanism", f"no mechanism for {v.name}", (v.name,)))
        elif n > 1:
            out.append(Violation("duplicate-mechanism", f"{n} mechanisms for {v.name}", (v.name,)))

    endo_names = [v.name for v in model.endogenous]
    parents = {m.child: m.endo_parents for m in model.mechanisms}
    cycle = _find_cycle(endo_names, parents)
    if cycle:
        out.append(Violation("cycle", "cycle among " + ", ".join(cycle), tuple(cycle)))

    for v in model.exogenous:
        probs = model.exo_dist.get(v.name)
        if probs is None:
            out.append(Violation("exo-dist-missing", f"no distribution for {v.name}", (v.name,)))
            continue
        if probs.shape[0] != v.card:
            out.append(
                Violation("exo-dist-length", f"{v.name}: {probs.shape[0]} probabilities for {v.card} values", (v.name,))
            )
            continue
        if np.any(probs < 0):
            out.append(Violation("negative-probability", f"{v.name} has a negative probability", (v.name,)))
        total = float(probs.sum())
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            out.append(
                Violation("distribution not normalized", f"distribution not normalized: {v.name} sums to {total!r}", (v.name,))
            )
    for name in model.exo_dist:
        if seen.get(name) != EXO:
            out.append(Violation("exo-dist-unknown", f"exo_dist names unknown exogenous {name!r}", (name,)))
    return out


def validate_scm(model: Scm) -> list[Violation]:
    """Every violated model invariant; the model is valid iff the list is empty."""
    return list(model.violations)


# -- distributions ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Distribution:
    """Dense joint table; axis ``k`` indexes the values of ``scope[k]``."""

    scope: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != len(self.scope):
            raise ScopeMismatch(f"table has {probs.ndim} axes for scope {self.scope}")
        if not probs.flags.writeable and probs.flags.c_contiguous:
            arr = probs
        else:
            arr = np.ascontiguousarray(probs).copy()
            arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def cards(self) -> tuple[int, ...]:
        return self.probs.shape

    @property
    def flat(self) -> np.ndarray:
        """Entries in mixed-radix order, last variable fastest."""
        return self.probs.ravel()

    def prob(self, assignment: Mapping[str, int]) -> float:
        return float(self.probs[tuple(assignment[n] for n in self.scope)])

    def allclose(self, other: "Distribution", atol: float = 1e-9) -> bool:
        return self.scope == other.scope and self.cards == other.cards and bool(
            np.all(np.abs(self.probs - other.probs) <= atol)
        )

    def __repr__(self):
        return f"Distribution(scope={self.scope}, probs={self.flat.tolist()})"


def marginalize(dist: Distribution, keep: Sequence[str]) -> Distribution:
    keep = tuple(keep)
    index = {n: i for i, n in enumerate(dist.scope)}
    for n in keep:
        if n not in index:
            raise UnknownVariable(n, "distribution scope")
    if len(set(keep)) != len(keep):
        raise OverlapError(f"repeated variable in {keep}")
    if keep == dist.scope:
        return dist
    drop = tuple(i for i, n in enumerate(dist.scope) if n not in set(keep))
    summed = dist.probs.sum(axis=drop) if drop else dist.probs
    remaining = [n for n in dist.scope if n in set(keep)]
    perm = [remaining.index(n) for n in keep]
    return Distribution(keep, np.transpose(summed, perm))


def condition(dist: Distribution, evidence: Mapping[str, int]) -> Distribution:
    index = {n: i for i, n in enumerate(dist.scope)}
    slicer: list = [slice(None)] * len(dist.scope)
    for n, val in evidence.items():
        if n not in index:
            raise UnknownVariable(n, "distribution scope")
        if not 0 <= int(val) < dist.cards[index[n]]:
            raise DomainError(f"value {val} out of range for {n}")
        slicer[index[n]] = int(val)
    sliced = dist.probs[tuple(slicer)]
    mass = float(sliced.sum())
    if mass <= ZERO_EVIDENCE:
        raise ZeroProbabilityEvidence(evidence, mass)
    rest = tuple(n for n in dist.scope if n not in evidence)
    return Distribution(rest, sliced / mass)


# -- interventions and enumeration ------------------------------------------


def _normalize_do(model: Scm, do: Mapping[str, int] | None) -> tuple[tuple[str, int], ...]:
    if not do:
        return ()
    endo = set(model.endo_names)
    items = []
    for name, val in do.items():
        if name not in endo:
            raise UnknownVariable(name)
        val = int(val)
        if not 0 <= val < model.card(name):
            raise DomainError(f"do({name}={val}) outside domain of size {model.card(name)}")
        items.append((name, val))
    return tuple(sorted(items))


def intervene(model: Scm, do: Mapping[str, int] | None) -> Scm:
    """Replace each intervened mechanism by a parentless constant table."""
    items = dict(_normalize_do(model, do))
    if not items:
        return Scm(model.endogenous, model.exogenous, model.mechanisms, model.exo_dist)
    mechs = [
        Mechanism(m.child, (), (), np.array([items[m.child]])) if m.child in items else m
        for m in model.mechanisms
    ]
    return Scm(model.endogenous, model.exogenous, mechs, model.exo_dist)


def endogenous_outcomes(model: Scm, do: Mapping[str, int] | None = None) -> np.ndarray:
    """Flat endogenous-setting index reached from every exogenous assignment."""
    items = _normalize_do(model, do)
    packed = model.packed
    forced = np.full(len(model.endogenous), -1, dtype=np.int64)
    pos = {n: i for i, n in enumerate(model.endo_names)}
    for name, val in items:
        forced[pos[name]] = val
    return kernels.propagate(
        packed["exo_cards"],
        packed["endo_cards"],
        packed["order"],
        packed["par_ptr"],
        packed["par_src"],
        packed["par_card"],
        packed["tab_ptr"],
        packed["tables"],
        forced,
    )


def joint_distribution(model: Scm, do: Mapping[str, int] | None = None) -> Distribution:
    """Exact joint over all endogenous variables under ``do``."""
    key = _normalize_do(model, do)
    cached = model._joint_cache.get(key)
    if cached is not None:
        return cached
    outcomes = endogenous_outcomes(model, dict(key))
    cards = tuple(int(c) for c in model.packed["endo_cards"])
    size = int(np.prod(cards, dtype=np.int64))
    flat = np.bincount(outcomes, weights=model.exo_probs, minlength=size)
    dist = Distribution(model.endo_names, flat.reshape(cards))
    if len(model._joint_cache) < _JOINT_CACHE_LIMIT:
        model._joint_cache[key] = dist
    return dist


L1 = "L1"
L2 = "L2"


def parse_layer(layer) -> str:
    text = str(layer).strip().upper()
    if text in ("L1", "1"):
        return L1
    if text in ("L2", "2"):
        return L2
    raise ValueError(f"layer must be L1 or L2, got {layer!r}")


def interventional_query(
    model: Scm,
    Y: Sequence[str],
    X: Sequence[str] = (),
    x: Sequence[int] | Mapping[str, int] = (),
    layer="L2",
) -> Distribution:
    """P(Y | X=x) for layer L1, P(Y | do(X=x)) for layer L2."""
    layer = parse_layer(layer)
    Y, X = tuple(Y), tuple(X)
    if set(X) & set(Y):
        raise OverlapError(f"query sets overlap: {sorted(set(X) & set(Y))}")
    values = dict(x) if isinstance(x, Mapping) else dict(zip(X, x))
    if set(values) != set(X):
        raise ScopeMismatch(f"values {sorted(values)} do not match X={list(X)}")
    if layer == L2:
        return marginalize(joint_distribution(model, values), Y)
    _normalize_do(model, values)  # domain checks
    joint = marginalize(joint_distribution(model), X + Y)
    return condition(joint, values)
