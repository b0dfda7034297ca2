"""Seeded random fixtures and runnable theorem suites.

Every fixture is a pure function of ``(GenParams, seed)``. Per-fixture seeds
in a suite are spawned from the suite seed with :class:`numpy.random.SeedSequence`,
so verdicts do not depend on execution order.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from itertools import combinations, product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _config
from .abstraction import (
    Abstraction,
    abstraction_error,
    check_inequality_preservation,
    construct_abstract_scm,
    recover_structure,
)
from .clustering import (
    ALL_RULES,
    Clustering,
    build_pcdag,
    check_graphical_consistency,
    cluster_d_sep_check,
    disjoint_triples,
    do_calculus_applicable,
    rule_instances,
    validate_clustering,
)
from .errors import GenerationExhausted
from .graph import CausalGraph, d_separated, induced_graph
from .scm import Mechanism, Scm, Variable, joint_distribution, marginalize
from .tau import check_tau_compatibility, derive_tau

MAX_REJECTIONS = 1000
PROB_FLOOR = 0.05


@dataclass(frozen=True)
class GenParams:
    n_endo: int = 5
    n_exo: int = 2
    max_domain: int = 3
    edge_prob: float = 0.5
    confound_prob: float = 0.2
    faithfulness_gap: float = 1e-6
    seed: int = 0
    min_endo: int | None = None

    def __post_init__(self):
        if not 2 <= self.n_endo <= 8:
            raise ValueError("n_endo must lie in 2..8")
        if self.min_endo is not None and not 1 <= self.min_endo <= self.n_endo:
            raise ValueError("min_endo must lie in 1..n_endo")
        if not 1 <= self.n_exo <= 8:
            raise ValueError("n_exo must lie in 1..8")
        if not 2 <= self.max_domain <= 4:
            raise ValueError("max_domain must lie in 2..4")
        for name in ("edge_prob", "confound_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.faithfulness_gap < 0:
            raise ValueError("faithfulness_gap must be non-negative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return asdict(self)


def _probs(rng: np.random.Generator, k: int) -> list[float]:
    floor = min(PROB_FLOOR, 0.5 / k)
    p = floor + (1.0 - floor * k) * rng.dirichlet(np.ones(k))
    p = p / p.sum()
    return [float(x) for x in p]


def _draw_model(p: GenParams, rng: np.random.Generator) -> Scm:
    lo = p.min_endo if p.min_endo is not None else p.n_endo
    n = int(rng.integers(lo, p.n_endo + 1))
    names = [f"V{i + 1}" for i in range(n)]
    topo = [names[i] for i in rng.permutation(n)]
    cards = {v: int(rng.integers(2, p.max_domain + 1)) for v in names}
    parents: dict[str, list[str]] = {v: [] for v in names}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p.edge_prob:
                parents[topo[j]].append(topo[i])
    shared: list[tuple[str, str]] = []
    for a, b in combinations(names, 2):
        if len(shared) < p.n_exo and rng.random() < p.confound_prob:
            shared.append((a, b))

    exo_users: dict[str, list[str]] = {v: [] for v in names}
    shared_card: dict[str, int] = {}
    for k, (a, b) in enumerate(shared):
        name = f"U_S{k + 1}"
        shared_card[name] = int(rng.integers(2, p.max_domain + 1))
        exo_users[a].append(name)
        exo_users[b].append(name)

    exo_vars, dist, mechs = [], {}, []
    for v in names:
        k = cards[v]
        endo_p = sorted(parents[v], key=names.index)
        inputs = [cards[q] for q in endo_p] + [shared_card[u] for u in exo_users[v]]
        # Monotone threshold mechanism: v = clip(sum_i [x_i >= t_i] + u_v - s_max, 0, k - 1).
        # Every input then shifts v upward in every context, so effects along
        # parallel paths cannot cancel; the private noise range keeps every
        # value of v reachable whatever its inputs are.
        thresholds = [int(rng.integers(1, c)) for c in inputs]
        s_max = len(inputs)
        priv = f"U_{v}"
        n_priv = s_max + k
        exo_vars.append(Variable(priv, tuple(str(x) for x in range(n_priv)), "exo"))
        dist[priv] = _probs(rng, n_priv)
        in_cards = inputs + [n_priv]
        grid = np.unravel_index(np.arange(int(np.prod(in_cards))), in_cards)
        total = grid[-1] - s_max
        for t, col in zip(thresholds, grid[:-1]):
            total = total + (col >= t)
        table = np.clip(total, 0, k - 1)
        # Table order: endogenous parents, then private noise, then shared noise.
        n_endo_in = len(endo_p)
        order = list(range(n_endo_in)) + [len(inputs)] + list(range(n_endo_in, len(inputs)))
        table = table.reshape(in_cards).transpose(order).ravel()
        mechs.append(Mechanism(v, tuple(endo_p), (priv, *exo_users[v]), table))
    for name, kk in shared_card.items():
        exo_vars.append(Variable(name, tuple(str(x) for x in range(kk)), "exo"))
        dist[name] = _probs(rng, kk)
    endo_vars = [Variable(v, tuple(str(x) for x in range(cards[v]))) for v in names]
    return Scm(endo_vars, exo_vars, mechs, dist)


def faithfulness_gap(model: Scm, g: CausalGraph | None = None, max_cond: int = 2) -> float:
    """Smallest dependence gap over d-connected pairs given sets of size up to ``max_cond``.

    The gap of a statement is the largest, over conditioning values of
    positive probability, of max |P(a, b | s) - P(a | s) P(b | s)|.
    Returns ``inf`` when no pair is d-connected.
    """
    g = induced_graph(model) if g is None else g
    joint = joint_distribution(model)
    names = model.endo_names
    worst = float("inf")
    for a, b in combinations(names, 2):
        rest = [v for v in names if v not in (a, b)]
        for k in range(0, max_cond + 1):
            for S in combinations(rest, k):
                if d_separated(g, (a,), (b,), S):
                    continue
                t = marginalize(joint, S + (a, b)).probs
                t = t.reshape(-1, t.shape[-2], t.shape[-1])
                mass = t.sum(axis=(1, 2))
                gap = 0.0
                for s in range(t.shape[0]):
                    if mass[s] <= _config.ZERO_EVIDENCE:
                        continue
                    c = t[s] / mass[s]
                    gap = max(gap, float(np.max(np.abs(c - np.outer(c.sum(1), c.sum(0))))))
                worst = min(worst, gap)
    return worst


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(int(seed))


def random_scm(p: GenParams, seed=None) -> Scm:
    """Random faithful SCM; ``seed`` overrides ``p.seed`` (int or SeedSequence)."""
    rng = _rng(p.seed if seed is None else seed)
    for _ in range(MAX_REJECTIONS):
        model = _draw_model(p, rng)
        if faithfulness_gap(model) >= p.faithfulness_gap:
            return model
    raise GenerationExhausted(f"no faithful model after {MAX_REJECTIONS} draws")


def random_clustering(
    g: CausalGraph,
    seed,
    remainder_prob: float = 0.3,
    max_clusters: int | None = None,
    singletons: bool = False,
) -> Clustering:
    """Random partial clustering with an acyclic induced cluster graph."""
    rng = _rng(seed)
    verts = list(g.vertices)
    for _ in range(MAX_REJECTIONS):
        kept = [v for v in verts if rng.random() >= remainder_prob]
        if not kept:
            continue
        rem = [v for v in verts if v not in kept]
        if singletons:
            labels = list(range(len(kept)))
        else:
            top = len(kept) if max_clusters is None else min(max_clusters, len(kept))
            # Favour fine clusterings: coarse ones make most theorem checks vacuous.
            k = int(rng.integers((top + 1) // 2, top + 1)) if top > 1 else 1
            labels = list(range(k)) + [int(x) for x in rng.integers(0, k, size=len(kept) - k)]
            labels = [labels[i] for i in rng.permutation(len(kept))]
        # Name clusters by first appearance so ids are dense and ordered.
        rename: dict[int, str] = {}
        for lab in labels:
            rename.setdefault(lab, f"C{len(rename) + 1}")
        groups: dict[str, list[str]] = {cid: [] for cid in rename.values()}
        for v, lab in zip(kept, labels):
            groups[rename[lab]].append(v)
        c = Clustering.from_mapping(groups, rem)
        if not validate_clustering(g, c):
            return c
    raise GenerationExhausted(f"no valid clustering after {MAX_REJECTIONS} draws")


# -- theorem checks ------------------------------------------------------------

SUITES = (
    "construct_graph",
    "l2_consistency",
    "l1_consistency",
    "inequality",
    "recovery",
    "graphical_l1",
    "graphical_l2",
    "dsep",
    "docalc",
    "tau",
)


def _cond(t: np.ndarray, eps=_config.ZERO_EVIDENCE):
    """Normalize along the leading axis; returns (conditional, mass-ok mask)."""
    mass = t.sum(axis=0)
    ok = mass > eps
    out = np.divide(t, np.where(ok, mass, 1.0))
    return out, ok


def rule_discrepancy(model: Scm, rule: int, X=(), Y=(), Z=(), W=()) -> float:
    """Largest gap between the two sides of a do-calculus rule in ``model``.

    Rule 1 compares P(y | do(x), z, w) with P(y | do(x), w), rule 2 compares
    P(y | do(x), do(z), w) with P(y | do(x), z, w) and rule 3 compares
    P(y | do(x), do(z), w) with P(y | do(x), w). Cells whose conditioning
    event has zero probability are skipped on both sides.
    """
    X, Y, Z, W = tuple(X), tuple(Y), tuple(Z), tuple(W)
    card = model.card
    ny = int(np.prod([card(v) for v in Y]))
    nz = int(np.prod([card(v) for v in Z]))
    nw = int(np.prod([card(v) for v in W]))
    worst = 0.0
    for x in product(*(range(card(v)) for v in X)):
        dox = dict(zip(X, x))
        # Observational-in-Z table under do(x): axes (Y, Z, W).
        J = marginalize(joint_distribution(model, dox), Y + Z + W).probs.reshape(ny, nz, nw)
        p_y_zw, ok_zw = _cond(J)
        p_y_w, ok_w = _cond(J.sum(axis=1))
        if rule == 1:
            diff = np.abs(p_y_zw - p_y_w[:, None, :])
            worst = max(worst, float(diff[:, ok_zw].max(initial=0.0)))
            continue
        for zi, z in enumerate(product(*(range(card(v)) for v in Z))):
            K = marginalize(joint_distribution(model, {**dox, **dict(zip(Z, z))}), Y + W).probs
            p_do, ok_do = _cond(K.reshape(ny, nw))
            if rule == 2:
                ok = ok_do & ok_zw[zi]
                diff = np.abs(p_do - p_y_zw[:, zi, :])
            else:
                ok = ok_do & ok_w
                diff = np.abs(p_do - p_y_w)
            worst = max(worst, float(diff[:, ok].max(initial=0.0)))
    return worst


def docalc_equalities(model: Scm, cg, cap: int | None = None, tol: float | None = None, limit: int | None = None):
    """Check every applicable rule instance of ``cg`` as a distributional identity in ``model``.

    Returns ``(checked, failures)``; each failure records the instance and
    the observed discrepancy.
    """
    tol = _config.tolerance() if tol is None else tol
    checked = 0
    failures = []
    ids = cg.vertices
    cap = _config.ROLE_CAP if cap is None and len(ids) > _config.FULL_ENUMERATION_MAX_CLUSTERS else cap
    for X, Y, Z, W in rule_instances(ids, cap):
        for rule in (1, 2, 3):
            if not do_calculus_applicable(cg, rule, X, Y, Z, W):
                continue
            checked += 1
            worst = rule_discrepancy(model, rule, X, Y, Z, W)
            if worst > tol:
                failures.append(
                    {"rule": rule, "X": list(X), "Y": list(Y), "Z": list(Z), "W": list(W), "discrepancy": worst}
                )
                if limit and len(failures) >= limit:
                    return checked, failures
    return checked, failures


@dataclass
class CheckOutcome:
    ok: bool
    detail: dict = field(default_factory=dict)


def run_checks(
    base: Scm,
    clustering: Clustering,
    which: Iterable[str] = SUITES,
    rules: Sequence[str] = ALL_RULES,
    inequality_trials: int = 20,
    seed: int = 0,
    tol: float | None = None,
    timings: dict | None = None,
) -> dict[str, CheckOutcome]:
    """Run the selected theorem checks on one (model, clustering) fixture."""
    tol = _config.tolerance() if tol is None else tol
    which = list(which)
    unknown = set(which) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    g = induced_graph(base)
    abstract, a = construct_abstract_scm(base, clustering)
    pcdag = build_pcdag(g, clustering, rules)
    out: dict[str, CheckOutcome] = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        res = fn()
        if timings is not None:
            timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0
        out[name] = res

    for name in which:
        if name == "construct_graph":
            timed(name, lambda: CheckOutcome(
                induced_graph(abstract).same_edges(pcdag.graph),
                {"abstract": induced_graph(abstract).to_dict(), "pcdag": pcdag.graph.to_dict()},
            ))
        elif name in ("l2_consistency", "l1_consistency"):
            layer = "L2" if name == "l2_consistency" else "L1"

            def run(layer=layer):
                rep = abstraction_error(base, abstract, a, layer)
                return CheckOutcome(rep.max_error <= tol, rep.to_dict())

            timed(name, run)
        elif name == "inequality":
            def run():
                rep = check_inequality_preservation(base, abstract, a, inequality_trials, seed, tol)
                return CheckOutcome(rep.ok, rep.to_dict())

            timed(name, run)
        elif name == "recovery":
            def run():
                rec = recover_structure(base, abstract, a, check_consistency=False, tol=tol)
                same = rec.graph.same_edges(pcdag.graph)
                return CheckOutcome(same, {"recovered": rec.graph.to_dict(), "pcdag": pcdag.graph.to_dict()})

            timed(name, run)
        elif name in ("graphical_l1", "graphical_l2"):
            layer = "L1" if name == "graphical_l1" else "L2"

            def run(layer=layer):
                rep = check_graphical_consistency(g, pcdag, layer, max_counterexamples=5)
                return CheckOutcome(rep.consistent, rep.to_dict())

            timed(name, run)
        elif name == "dsep":
            def run():
                # Split by direction: "sound" means the cluster graph separates
                # but the base graph does not; "complete" is the converse.
                n = 0
                misses = {"sound": None, "complete": None}
                counts = {"sound": 0, "complete": 0}
                for X, Y, Z in disjoint_triples(pcdag.vertices):
                    n += 1
                    v = cluster_d_sep_check(g, pcdag, X, Y, Z)
                    if v.consistent:
                        continue
                    kind = "sound" if v.cluster_verdict else "complete"
                    counts[kind] += 1
                    if misses[kind] is None:
                        misses[kind] = {"X": list(X), "Y": list(Y), "Z": list(Z), **v.to_dict()}
                ok = not any(counts.values())
                return CheckOutcome(ok, {"queries": n, "failures": counts, "counterexamples": misses})

            timed(name, run)
        elif name == "docalc":
            def run():
                n, bad = docalc_equalities(abstract, pcdag, tol=tol, limit=5)
                return CheckOutcome(not bad, {"instances": n, "failures": bad})

            timed(name, run)
        elif name == "tau":
            def run():
                rep = check_tau_compatibility(base, abstract, derive_tau(a, base, abstract))
                return CheckOutcome(rep.compatible, rep.to_dict())

            timed(name, run)
    return out


# -- suites ------------------------------------------------------------------------


@dataclass
class SuiteReport:
    params: dict
    n_fixtures: int
    counts: dict
    seconds: dict
    counterexamples: list

    @property
    def ok(self) -> bool:
        return all(c["failed"] == 0 for c in self.counts.values())

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "params": self.params,
            "n_fixtures": self.n_fixtures,
            "counts": self.counts,
            "seconds": self.seconds,
            "counterexamples": self.counterexamples,
        }


def fixture_seeds(seed: int, n: int) -> list[tuple[int, int]]:
    """(model seed, clustering seed) per fixture, spawned from the suite seed."""
    out = []
    for child in np.random.SeedSequence(int(seed)).spawn(n):
        a, b = child.generate_state(2, dtype=np.uint64)
        out.append((int(a), int(b)))
    return out


def make_fixture(p: GenParams, model_seed: int, clustering_seed: int, remainder_prob: float = 0.3):
    base = random_scm(p, model_seed)
    c = random_clustering(induced_graph(base), clustering_seed, remainder_prob)
    return base, c


def write_bundle(path: Path, base: Scm, c: Clustering, a: Abstraction, check: dict) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "scm.json").write_text(json.dumps(base.to_dict(), indent=2))
    (path / "clustering.json").write_text(json.dumps(c.to_dict(), indent=2))
    (path / "abstraction.json").write_text(json.dumps(a.to_dict(), indent=2))
    (path / "check.json").write_text(json.dumps(check, indent=2, default=_jsonable))
    return path


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def run_theorem_suite(
    p: GenParams,
    n_fixtures: int,
    which: Iterable[str] = SUITES,
    remainder_prob: float = 0.3,
    rules: Sequence[str] = ALL_RULES,
    inequality_trials: int = 20,
    bundle_dir: str | Path | None = None,
) -> SuiteReport:
    which = list(which)
    counts = {name: {"passed": 0, "failed": 0} for name in which}
    seconds = {name: 0.0 for name in which}
    counterexamples = []
    for i, (ms, cs) in enumerate(fixture_seeds(p.seed, n_fixtures)):
        base, c = make_fixture(p, ms, cs, remainder_prob)
        results = run_checks(base, c, which, rules, inequality_trials, seed=cs, timings=seconds)
        for name, res in results.items():
            counts[name]["passed" if res.ok else "failed"] += 1
            if res.ok:
                continue
            check = {
                "suite": name,
                "fixture": i,
                "rules": list(rules),
                "inequality_trials": inequality_trials,
                "seed": cs,
                "detail": res.detail,
            }
            entry = {
                "suite": name,
                "fixture": i,
                "scm": base.to_dict(),
                "clustering": c.to_dict(),
                "abstraction": construct_abstract_scm(base, c)[1].to_dict(),
                "check": check,
            }
            if bundle_dir is not None:
                a = Abstraction.from_dict(entry["abstraction"])
                entry["bundle"] = str(write_bundle(Path(bundle_dir) / f"fixture{i:04d}-{name}", base, c, a, check))
            counterexamples.append(entry)
    return SuiteReport(p.to_dict(), n_fixtures, counts, {k: round(v, 4) for k, v in seconds.items()}, counterexamples)


def replay(bundle: str | Path) -> CheckOutcome:
    """Re-run the failing check recorded in a counterexample bundle."""
    bundle = Path(bundle)
    base = Scm.from_dict(json.loads((bundle / "scm.json").read_text()))
    c = Clustering.from_dict(json.loads((bundle / "clustering.json").read_text()))
    check = json.loads((bundle / "check.json").read_text())
    suite = check["suite"]
    res = run_checks(
        base,
        c,
        [suite],
        tuple(check.get("rules", ALL_RULES)),
        int(check.get("inequality_trials", 20)),
        seed=int(check.get("seed", 0)),
    )
    return res[suite]


__all__ = [
    "GenParams",
    "SuiteReport",
    "CheckOutcome",
    "SUITES",
    "random_scm",
    "random_clustering",
    "faithfulness_gap",
    "run_checks",
    "run_theorem_suite",
    "docalc_equalities",
    "rule_discrepancy",
    "fixture_seeds",
    "make_fixture",
    "write_bundle",
    "replay",
]
