import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import enumerate_joint
from strategies import interventions, models

from abstraq import (
    CausalGraph,
    Distribution,
    Mechanism,
    Scm,
    Variable,
    condition,
    d_separated,
    induced_graph,
    intervene,
    interventional_query,
    joint_distribution,
    marginalize,
    validate_scm,
)
from abstraq.errors import (
    DomainError,
    InputError,
    InvalidModel,
    OverlapError,
    UnknownVariable,
    ZeroProbabilityEvidence,
)
from abstraq.fixtures import chain_with_mediator, confounded_chain, lung
from abstraq.harness import GenParams, random_scm

BIN = ("0", "1")


def single(p=0.5):
    return Scm([Variable("V", BIN)], [Variable("U", BIN, "exo")], [Mechanism("V", (), ("U",), [0, 1])], {"U": [p, 1 - p]})


# -- validation ----------------------------------------------------------------


def test_lung_is_valid():
    assert validate_scm(lung()) == []


def test_cycle_is_reported_with_names():
    m = Scm(
        [Variable("X", BIN), Variable("Y", BIN)],
        [],
        [Mechanism("X", ("Y",), (), [0, 1]), Mechanism("Y", ("X",), (), [0, 1])],
        {},
    )
    codes = {v.code: v for v in validate_scm(m)}
    assert "cycle" in codes
    assert set(codes["cycle"].names) == {"X", "Y"}


def test_unnormalized_exogenous_distribution():
    m = single()
    bad = Scm(m.endogenous, m.exogenous, m.mechanisms, {"U": [0.5, 0.4]})
    assert "distribution not normalized" in {v.code for v in validate_scm(bad)}


@pytest.mark.parametrize(
    "mutate, code",
    [
        (lambda m: Scm(m.endogenous, m.exogenous, [Mechanism("V", (), ("U",), [0, 1, 0])], m.exo_dist), "table-length"),
        (lambda m: Scm(m.endogenous, m.exogenous, [Mechanism("V", (), ("U",), [0, 2])], m.exo_dist), "table-range"),
        (lambda m: Scm(m.endogenous, m.exogenous, [], m.exo_dist), "missing-mechanism"),
        (lambda m: Scm(m.endogenous, m.exogenous, [Mechanism("V", (), ("W",), [0, 1])], m.exo_dist), "unknown-parent"),
        (lambda m: Scm(m.endogenous, m.exogenous, m.mechanisms, {}), "exo-dist-missing"),
        (lambda m: Scm(m.endogenous, m.exogenous, m.mechanisms, {"U": [1.5, -0.5]}), "negative-probability"),
        (lambda m: Scm(m.endogenous + (Variable("V", BIN),), m.exogenous, m.mechanisms, m.exo_dist), "duplicate-name"),
    ],
)
def test_each_violation_code(mutate, code):
    assert code in {v.code for v in validate_scm(mutate(single()))}


def test_invalid_model_refuses_enumeration():
    m = single()
    bad = Scm(m.endogenous, m.exogenous, m.mechanisms, {"U": [0.5, 0.4]})
    with pytest.raises(InvalidModel):
        joint_distribution(bad)


# -- intervention ----------------------------------------------------------------


def test_null_intervention_is_structurally_identical():
    m = lung()
    assert intervene(m, {}) == m


def test_do_z_makes_constant_mechanism_and_cuts_edges():
    m = intervene(lung(), {"Z": 1})
    z = m.mechanism("Z")
    assert z.endo_parents == () and z.exo_parents == () and z.table.tolist() == [1]
    g = induced_graph(m)
    assert ("X1", "Z") not in g.directed and ("X2", "Z") not in g.directed
    assert ("Z", "Y1") in g.directed


def test_two_variable_intervention_is_local():
    base = lung()
    m = intervene(base, {"X1": 0, "X2": 1})
    assert m.mechanism("X1").table.tolist() == [0]
    assert m.mechanism("X2").table.tolist() == [1]
    for name in ("Z", "Y1", "Y2"):
        assert m.mechanism(name) == base.mechanism(name)
    # The input model is untouched.
    assert base.mechanism("X1").exo_parents == ("U_X1",)


def test_intervention_errors():
    with pytest.raises(UnknownVariable):
        intervene(lung(), {"Q": 0})
    with pytest.raises(DomainError):
        intervene(lung(), {"Z": 2})


# -- joint distribution ----------------------------------------------------------


def test_pass_through_variable():
    assert joint_distribution(single()).flat.tolist() == [0.5, 0.5]


def test_lung_joint_matches_oracle():
    m = lung()
    assert np.allclose(joint_distribution(m).probs, enumerate_joint(m), atol=1e-12, rtol=0)


def test_do_forces_point_mass():
    d = marginalize(joint_distribution(lung(), {"X1": 1}), ["X1"])
    assert d.flat.tolist() == [0.0, 1.0]


def test_lung_marginal_of_outcomes_frozen():
    # Computed with the enumeration oracle in tests/oracles.py.
    d = marginalize(joint_distribution(lung()), ["Y1", "Y2"])
    assert np.allclose(d.probs, [[0.2101, 0.2779], [0.2971, 0.2149]], atol=1e-12)


@given(models(), st.data())
def test_joint_matches_oracle_under_interventions(m, data):
    do = data.draw(interventions(m))
    assert np.allclose(joint_distribution(m, do).probs, enumerate_joint(m, do), atol=1e-12, rtol=0)


@given(models(), st.data())
def test_joint_is_normalized_and_nonnegative(m, data):
    p = joint_distribution(m, data.draw(interventions(m))).probs
    assert p.min() >= 0
    assert abs(p.sum() - 1.0) <= 1e-9


@given(models(), st.data())
def test_surgery_composition(m, data):
    d1 = data.draw(interventions(m))
    d2 = {k: v for k, v in data.draw(interventions(m)).items() if k not in d1}
    lhs = joint_distribution(intervene(m, d1), d2).probs
    rhs = joint_distribution(m, {**d1, **d2}).probs
    assert np.allclose(lhs, rhs, atol=1e-12, rtol=0)


@given(models())
def test_enumeration_is_deterministic(m):
    a = joint_distribution(m).probs
    fresh = Scm.from_dict(m.to_dict())
    assert np.array_equal(a, joint_distribution(fresh).probs)


@given(models())
def test_unconnected_pairs_factorize(m):
    g = induced_graph(m)
    joint = joint_distribution(m)
    for a in m.endo_names:
        for b in m.endo_names:
            if a >= b or not d_separated(g, [a], [b]):
                continue
            t = marginalize(joint, [a, b]).probs
            assert np.allclose(t, np.outer(t.sum(1), t.sum(0)), atol=1e-9)


# -- marginalize / condition -------------------------------------------------------


def test_marginalize_full_scope_is_identity():
    d = joint_distribution(lung())
    assert marginalize(d, d.scope) is d


def test_marginalize_uniform():
    d = Distribution(("A", "B"), np.full((2, 2), 0.25))
    assert marginalize(d, ["A"]).flat.tolist() == [0.5, 0.5]


def test_marginalize_reorders_scope():
    d = joint_distribution(lung())
    m = marginalize(d, ["Y2", "Y1"])
    assert m.scope == ("Y2", "Y1")
    assert np.allclose(m.probs, enumerate_joint(lung()).sum(axis=(0, 1, 2)).T, atol=1e-12)


def test_marginalize_unknown_variable():
    with pytest.raises(UnknownVariable):
        marginalize(joint_distribution(lung()), ["Q"])


def test_condition_on_sure_event():
    d = Distribution(("A", "B"), np.array([[0.0, 0.0], [0.3, 0.7]]))
    assert np.allclose(condition(d, {"A": 1}).probs, [0.3, 0.7])


def test_condition_independent_pair():
    d = Distribution(("A", "B"), np.outer([0.2, 0.8], [0.6, 0.4]))
    assert np.allclose(condition(d, {"B": 1}).probs, [0.2, 0.8])
    assert np.allclose(condition(d, {"A": 0}).probs, [0.6, 0.4])


def test_condition_matches_slice_oracle():
    J = enumerate_joint(lung())
    oracle = J[:, :, 1] / J[:, :, 1].sum()
    got = condition(joint_distribution(lung()), {"Z": 1})
    assert got.scope == ("X1", "X2", "Y1", "Y2")
    assert np.allclose(got.probs, oracle, atol=1e-12)


def test_zero_probability_evidence():
    d = Distribution(("A", "B"), np.array([[0.0, 0.0], [0.3, 0.7]]))
    with pytest.raises(ZeroProbabilityEvidence):
        condition(d, {"A": 0})


# -- interventional queries ------------------------------------------------------


def test_l2_with_empty_x_is_marginal():
    m = lung()
    q = interventional_query(m, ["Y1"], [], [], "L2")
    assert q.allclose(marginalize(joint_distribution(m), ["Y1"]), atol=1e-15)


@pytest.mark.parametrize("z", [0, 1])
def test_do_z_equals_conditioning_on_z(z):
    m = lung()
    a = interventional_query(m, ["Y1"], ["Z"], [z], "L2")
    b = interventional_query(m, ["Y1"], ["Z"], [z], "L1")
    J = enumerate_joint(m).sum(axis=(0, 1, 4))
    assert np.allclose(a.probs, J[z] / J[z].sum(), atol=1e-12)
    assert np.allclose(a.probs, b.probs, atol=1e-12)


def test_confounder_separates_seeing_from_doing():
    m = confounded_chain()
    seen = interventional_query(m, ["B"], ["A"], [1], "L1")
    done = interventional_query(m, ["B"], ["A"], [1], "L2")
    # Hand derivation: B = (A & U_B) xor C, A = C xor U_A.
    assert np.allclose(seen.probs, [0.5859375, 0.4140625], atol=1e-12)
    assert np.allclose(done.probs, [0.54, 0.46], atol=1e-12)
    assert np.abs(seen.probs - done.probs).max() >= 1e-3


def test_query_sets_must_be_disjoint():
    with pytest.raises(OverlapError):
        interventional_query(lung(), ["Z"], ["Z"], [0])


def test_l1_zero_evidence_raises():
    m = Scm(
        [Variable("A", BIN), Variable("B", BIN)],
        [Variable("U", BIN, "exo")],
        [Mechanism("A", (), (), [0]), Mechanism("B", ("A",), ("U",), [0, 1, 1, 0])],
        {"U": [0.5, 0.5]},
    )
    with pytest.raises(ZeroProbabilityEvidence):
        interventional_query(m, ["B"], ["A"], [1], "L1")


# -- serialization ------------------------------------------------------------------


def test_json_round_trip():
    m = chain_with_mediator()
    doc = json.loads(json.dumps(m.to_dict()))
    assert Scm.from_dict(doc) == m


def test_generated_model_serializes_byte_identically():
    p = GenParams(n_endo=3, seed=11)
    a = json.dumps(random_scm(p).to_dict())
    b = json.dumps(random_scm(p).to_dict())
    assert a == b


@pytest.mark.parametrize(
    "doc, field",
    [
        ([], "<root>"),
        ({"mechanisms": [], "exo_dist": {}}, "variables"),
        ({"variables": [{"name": "A", "kind": "endo"}], "mechanisms": [], "exo_dist": {}}, "variables[0].domain"),
        ({"variables": [{"name": "A", "kind": "side", "domain": ["0"]}], "mechanisms": [], "exo_dist": {}}, "variables[0].kind"),
        (
            {"variables": [], "mechanisms": [{"child": "A", "table": [0, "x"]}], "exo_dist": {}},
            "mechanisms[0].table",
        ),
        ({"variables": [], "mechanisms": [], "exo_dist": {"U": "0.5"}}, "exo_dist.U"),
    ],
)
def test_malformed_documents_name_the_field(doc, field):
    with pytest.raises(InputError) as err:
        Scm.from_dict(doc)
    assert err.value.field == field


def test_induced_graph_type():
    assert isinstance(induced_graph(lung()), CausalGraph)
