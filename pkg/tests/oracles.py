"""Independent reference implementations used only by the tests.

Nothing here imports the library's enumeration, d-separation or
pushforward code paths; each oracle is written from the definitions.
"""

from __future__ import annotations

from collections import defaultdict
from functools import lru_cache
from itertools import product

import networkx as nx
import numpy as np


def enumerate_joint(model, do=None):
    """Joint over endogenous variables by brute force.

    Differs from the library on purpose: exogenous assignments are visited
    with the first variable fastest, endogenous values are found by memoized
    recursion on parents instead of a topological sweep, and mass is
    accumulated in a dict keyed by value tuples in reversed variable order.
    """
    do = dict(do or {})
    endo = [v.name for v in model.endogenous]
    exo = [v.name for v in model.exogenous]
    cards = {v.name: v.card for v in model.endogenous + model.exogenous}
    mech = {m.child: m for m in model.mechanisms}
    probs = {n: list(model.exo_dist[n]) for n in exo}
    acc = defaultdict(float)
    for rev in product(*(range(cards[n]) for n in reversed(exo))):
        u = dict(zip(reversed(exo), rev))
        weight = 1.0
        for n in exo:
            weight *= probs[n][u[n]]

        @lru_cache(maxsize=None)
        def value(name):
            if name in do:
                return do[name]
            m = mech[name]
            idx = 0
            for p in m.endo_parents:
                idx = idx * cards[p] + value(p)
            for p in m.exo_parents:
                idx = idx * cards[p] + u[p]
            return int(m.table[idx])

        key = tuple(value(n) for n in reversed(endo))
        acc[key] += weight
    out = np.zeros([cards[n] for n in reversed(endo)])
    for key, w in acc.items():
        out[key] += w
    return out.transpose(tuple(reversed(range(len(endo)))))


def augmented_digraph(g):
    """networkx DAG with one latent fork vertex per bidirected edge."""
    d = nx.DiGraph()
    d.add_nodes_from(g.vertices)
    d.add_edges_from(g.directed)
    for k, e in enumerate(sorted(tuple(sorted(e)) for e in g.bidirected)):
        lat = ("__latent__", k)
        d.add_edge(lat, e[0])
        d.add_edge(lat, e[1])
    return d


def nx_d_separated(g, X, Y, Z=()):
    return nx.is_d_separator(augmented_digraph(g), set(X), set(Y), set(Z))


def bayes_ball(parents, X, Y, Z):
    """Textbook reachability d-separation on a plain DAG given as child -> parents."""
    children = defaultdict(set)
    for c, ps in parents.items():
        for p in ps:
            children[p].add(c)
    Z = set(Z)
    # Ancestors of Z decide whether a collider is open.
    anc = set()
    stack = list(Z)
    while stack:
        v = stack.pop()
        if v in anc:
            continue
        anc.add(v)
        stack.extend(parents.get(v, ()))
    seen = set()
    stack = [(x, "up") for x in X]
    while stack:
        v, d = stack.pop()
        if (v, d) in seen:
            continue
        seen.add((v, d))
        if v in Y and v not in Z:
            return False
        if d == "up" and v not in Z:
            stack += [(p, "up") for p in parents.get(v, ())]
            stack += [(c, "down") for c in children[v]]
        elif d == "down":
            if v not in Z:
                stack += [(c, "down") for c in children[v]]
            if v in anc:
                stack += [(p, "up") for p in parents.get(v, ())]
    return True


def push_by_preimage(table, maps, out_sizes):
    """Aggregate base mass onto abstract tuples by scanning every base cell.

    ``table`` has one axis per base variable, grouped block by block;
    ``maps`` lists, per block, (block axis sizes, alpha map).
    """
    out = np.zeros(out_sizes)
    for cell in product(*(range(k) for k in table.shape)):
        target, off = [], 0
        for sizes, amap in maps:
            block = cell[off:off + len(sizes)]
            target.append(int(amap[int(np.ravel_multi_index(block, sizes))]))
            off += len(sizes)
        out[tuple(target)] += table[cell]
    return out


def evaluate(model, u, do=None):
    """Endogenous values for one exogenous assignment, by fixed-point sweeps."""
    do = dict(do or {})
    cards = {v.name: v.card for v in model.endogenous + model.exogenous}
    values = dict(do)
    pending = [m for m in model.mechanisms if m.child not in do]
    while pending:
        ready = [m for m in pending if all(p in values for p in m.endo_parents)]
        for m in ready:
            idx = 0
            for p in m.endo_parents:
                idx = idx * cards[p] + values[p]
            for p in m.exo_parents:
                idx = idx * cards[p] + u[p]
            values[m.child] = int(m.table[idx])
        pending = [m for m in pending if m.child not in values]
    return values
