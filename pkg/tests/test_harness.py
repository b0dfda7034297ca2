import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import enumerate_joint

from abstraq import (
    CausalGraph,
    Clustering,
    d_separated,
    induced_graph,
    joint_distribution,
    marginalize,
)
from abstraq.errors import GenerationExhausted
from abstraq.fixtures import LUNG_CDAG_CLUSTERINGS, lung
from abstraq.graph import ancestors
from abstraq.harness import (
    SUITES,
    GenParams,
    faithfulness_gap,
    fixture_seeds,
    make_fixture,
    random_clustering,
    random_scm,
    replay,
    run_theorem_suite,
)

SUITE_PARAMS = GenParams(n_endo=6, min_endo=4, n_exo=3, max_domain=3, seed=2024)


# -- parameters ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_endo": 1},
        {"n_endo": 9},
        {"n_exo": 0},
        {"max_domain": 5},
        {"edge_prob": 1.5},
        {"confound_prob": -0.1},
        {"faithfulness_gap": -1.0},
        {"seed": -1},
        {"n_endo": 3, "min_endo": 4},
    ],
)
def test_param_ranges(kwargs):
    with pytest.raises(ValueError):
        GenParams(**kwargs)


# -- random models -------------------------------------------------------------------


def test_two_variable_chain_is_dependent():
    m = random_scm(GenParams(n_endo=2, edge_prob=1.0, confound_prob=0.0, seed=7))
    g = induced_graph(m)
    assert len(g.directed) == 1 and not g.bidirected
    j = enumerate_joint(m)
    gap = np.abs(j - np.outer(j.sum(1), j.sum(0))).max()
    assert gap >= 1e-6


def test_same_seed_same_bytes():
    p = GenParams(n_endo=5, seed=99)
    assert json.dumps(random_scm(p).to_dict()) == json.dumps(random_scm(p).to_dict())


def test_no_edges_no_confounding_factorizes():
    m = random_scm(GenParams(n_endo=4, edge_prob=0.0, confound_prob=0.0, seed=5))
    joint = joint_distribution(m)
    prod = np.ones(())
    for v in m.endo_names:
        prod = np.multiply.outer(prod, marginalize(joint, [v]).probs)
    assert np.allclose(joint.probs, prod, atol=1e-9)


@settings(max_examples=30)
@given(st.integers(0, 2**63), st.integers(2, 5), st.sampled_from([2, 3]))
def test_generated_models_are_faithful_up_to_pairs(seed, n, k):
    p = GenParams(n_endo=n, max_domain=k)
    m = random_scm(p, seed)
    assert faithfulness_gap(m) >= p.faithfulness_gap
    # Exogenous probabilities stay away from 0 and 1.
    for probs in m.exo_dist.values():
        assert min(probs) >= min(0.05, 0.5 / len(probs)) - 1e-12


@settings(max_examples=30)
@given(st.integers(0, 2**63))
def test_every_listed_parent_matters(seed):
    m = random_scm(GenParams(n_endo=4, max_domain=3), seed)
    for mech in m.mechanisms:
        cards = [m.card(p) for p in mech.parents]
        t = np.asarray(mech.table).reshape(cards)
        for axis, p in enumerate(mech.parents):
            moved = np.moveaxis(t, axis, 0)
            assert any(not np.array_equal(moved[0], moved[i]) for i in range(1, cards[axis])), (mech.child, p)


# -- random clusterings -----------------------------------------------------------------


def test_no_remainder_one_cluster_per_vertex_is_identity():
    g = induced_graph(lung())
    c = random_clustering(g, 1, 0.0, singletons=True)
    assert sorted(map(len, c.members.values())) == [1] * 5 and c.remainder == ()


def test_everything_in_the_remainder_is_exhausted():
    with pytest.raises(GenerationExhausted):
        random_clustering(induced_graph(lung()), 0, 1.0)


def test_lung_sweep_shows_total_and_partial_clusterings():
    g = induced_graph(lung())
    seen = [random_clustering(g, s, 0.3) for s in range(40)]
    assert any(not c.remainder for c in seen)
    assert any(c.remainder for c in seen)
    # One of the four reference total clusterings also appears.
    reference = [frozenset(map(frozenset, p.members.values())) for p in LUNG_CDAG_CLUSTERINGS.values()]
    assert any(frozenset(map(frozenset, c.members.values())) in reference for c in seen if not c.remainder)


@settings(max_examples=40)
@given(st.integers(0, 2**63), st.floats(0.0, 0.8))
def test_random_clusterings_are_valid(seed, rp):
    from abstraq import validate_clustering

    g = CausalGraph.from_edges("abcde", [("a", "b"), ("b", "c"), ("a", "d"), ("d", "e"), ("c", "e")])
    c = random_clustering(g, seed, rp)
    assert validate_clustering(g, c) == []


def test_fixture_seeds_are_prefix_stable():
    assert fixture_seeds(3, 10)[:4] == fixture_seeds(3, 4)


# -- suites ---------------------------------------------------------------------------


def test_zero_fixtures_is_an_empty_pass():
    r = run_theorem_suite(SUITE_PARAMS, 0)
    assert r.ok and r.counterexamples == []
    assert all(c == {"passed": 0, "failed": 0} for c in r.counts.values())


def test_small_suite_passes_and_is_deterministic():
    which = [s for s in SUITES if s != "dsep"]
    a = run_theorem_suite(SUITE_PARAMS, 4, which)
    b = run_theorem_suite(SUITE_PARAMS, 4, which)
    assert a.ok, a.counterexamples
    assert a.counts == b.counts and a.counts["tau"]["passed"] == 4


def test_unknown_suite_is_rejected():
    from abstraq.harness import run_checks

    base, c = make_fixture(SUITE_PARAMS, 1, 2)
    with pytest.raises(ValueError):
        run_checks(base, c, ["nonsense"])


def _has_remainder_fork(base, c, entry):
    g = induced_graph(base)
    detail = entry["check"]["detail"]["counterexamples"]["sound"]
    pre = c.preimage
    ax = ancestors(g, pre(detail["X"]))
    ay = ancestors(g, pre(detail["Y"]))
    return any(r in ax and r in ay for r in c.remainder)


def test_disabling_rule_2b_breaks_sound_separation(tmp_path):
    broken = run_theorem_suite(SUITE_PARAMS, 100, ["dsep"], rules=("1", "2A"), bundle_dir=tmp_path)
    sound = [e for e in broken.counterexamples if e["check"]["detail"]["failures"]["sound"] > 0]
    assert sound
    from abstraq import Scm

    e = sound[0]
    base, c = Scm.from_dict(e["scm"]), Clustering.from_dict(e["clustering"])
    assert _has_remainder_fork(base, c, e)
    # With every rule enabled the same fixture separates soundly.
    fixed = run_theorem_suite(SUITE_PARAMS, 100, ["dsep"])
    assert all(x["check"]["detail"]["failures"]["sound"] == 0 for x in fixed.counterexamples)
    # The bundle replays to the same failure.
    res = replay(e["bundle"])
    assert not res.ok
    assert res.detail["failures"] == e["check"]["detail"]["failures"]


def test_fork_counterexample_shape_by_hand():
    # X <- R -> Y with R dropped: only rule 2B links the clusters.
    g = CausalGraph.from_edges("RXY", [("R", "X"), ("R", "Y")])
    c = Clustering.from_mapping({"CX": ["X"], "CY": ["Y"]}, ["R"])
    from abstraq import build_pcdag

    assert d_separated(build_pcdag(g, c, ("1", "2A")).graph, ["CX"], ["CY"])
    assert not d_separated(build_pcdag(g, c).graph, ["CX"], ["CY"])
    assert not d_separated(g, ["X"], ["Y"])


