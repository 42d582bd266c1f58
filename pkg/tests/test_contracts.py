import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from civi import syntax as S
from civi.certificate import certify
from civi.contracts import (
    check_inductive,
    cti_is_genuine,
    lower,
    make_contract,
    model_check_fulfillment,
)
from civi.errors import AlphabetViolation, BridgeMismatch, ChainIllFormed, RuleSideConditionFailed
from civi.evaluator import evaluate
from civi.inference import houdini
from civi.loader import load_entry, load_text
from civi.rules import compose_contracts, prove, same_formula
from conftest import rms
from randomsys import Gen, instance

# lowering


def test_lower_tm_contract(toy):
    ob = lower(toy.contract("TM_contract"))
    assert sorted(ob.system.var_names) == sorted(toy.component("ToyTM").var_names + toy.component("ToyB").var_names)
    assert ob.assume == S.TRUE
    assert same_formula(ob.guarantee, toy.formulas["ToyR"])


def test_lower_rm_contract(toy):
    ob = lower(toy.contract("RM_contract"))
    assert sorted(ob.system.var_names) == sorted(toy.component("ToyB").var_names + ("rmState",))
    assert same_formula(ob.assume, toy.formulas["ToyR"])
    assert ob.guarantee == toy.formulas["Consistent"]


def test_lower_state_contract_is_identity(toy):
    c = toy.contract("RM_noabort")
    ob = lower(c)
    assert ob.system == c.component and ob.assume == c.assume and ob.guarantee == c.guarantee


def test_alphabet_violation():
    reg = load_text(
        """
        fluent seen(RMs) var seen {
          Init == seen = [r \\in RMs |-> FALSE]
          Vote(rm \\in RMs) == seen' = [seen EXCEPT ![rm] = TRUE]
        }
        component Quiet {
          CONSTANT RMs
          VARIABLES q : BOOLEAN
          Init == q = FALSE
          Ping(rm \\in RMs) == q' = TRUE
        }
        contract K hybrid
          assume \\A r \\in RMs : ~seen(r)
          component Quiet
          guarantee TRUE
        """
    )
    with pytest.raises(AlphabetViolation):
        lower(reg.contract("K"))


# inductive checks


def test_noabort_proved(toy, two):
    assert check_inductive(lower(toy.contract("RM_noabort")), two).proved


def test_i_tm_proved(toy, two):
    res = check_inductive(lower(toy.contract("TM_contract")), two)
    assert res.proved and res.states > 0


def test_global_naive_consecution_cti(toy, two):
    ob = lower(toy.contract("Global_naive"))
    res = check_inductive(ob, two)
    assert not res.proved and res.cti.kind == "consecution"
    assert cti_is_genuine(res.cti, ob, two)
    again = check_inductive(ob, two)
    assert again.cti == res.cti


def test_initiation_and_safety_ctis(toy, two):
    ob = lower(toy.contract("RM_noabort"))
    bad_init = check_inductive(ob, two, invariant=toy.formula('\\A r \\in RMs : rmState[r] = "prepared"'))
    assert bad_init.cti.kind == "initiation" and cti_is_genuine(bad_init.cti, ob.with_invariant(toy.formula('\\A r \\in RMs : rmState[r] = "prepared"')), two)
    weak = toy.formula("TRUE")
    unsafe = make_contract("state", "U", S.TRUE, (toy.component("ToyRM"),), toy.formulas["Consistent"], weak)
    res = check_inductive(lower(unsafe), two)
    assert res.cti.kind == "safety"


# fulfillment


def test_noabort_fulfilled(toy, two):
    assert model_check_fulfillment(toy.contract("RM_noabort"), two).holds


def test_toy2pc_fulfils_consistent(toy, two):
    assert model_check_fulfillment(toy.contract("Global_naive"), two).holds


def test_dropped_assumption_violation(toy, two):
    res = model_check_fulfillment(toy.contract("RM_unassumed"), two)
    assert not res.holds
    last = res.trace[-1][1]["rmState"]
    assert sorted(last[r] for r in ("r1", "r2")) == ["abort", "commit"]
    assert not evaluate(toy.formulas["Consistent"], res.trace[-1][1], two)
    assert res.trace == model_check_fulfillment(toy.contract("RM_unassumed"), two).trace


# rules


@pytest.fixture(scope="module")
def toy_leaves():
    toy = load_entry("toy2pc")
    inst = rms(2)
    return toy, inst, prove(toy.contract("TM_contract"), inst), prove(toy.contract("RM_contract"), inst)


def test_hybrid_comp(toy_leaves):
    toy, inst, tm, rm = toy_leaves
    step = compose_contracts(tm, rm, "hybrid-comp", inst)
    c = step.contract
    assert c.kind == "hybrid" and c.assume == S.TRUE
    assert {"ToyTM", "ToyRM"} <= set(c.component.parts)
    assert any(p.startswith("fluent:") for p in c.component.parts)
    assert set(S.conjuncts(c.invariant)) == set(S.conjuncts(tm.invariant)) | set(S.conjuncts(rm.invariant))
    assert check_inductive(lower(c), inst).proved


def test_hybrid_safe(toy_leaves):
    toy, inst, tm, rm = toy_leaves
    step = compose_contracts(tm, rm, "hybrid-safe", inst)
    c = step.contract
    assert c.invariant is None
    assert set(c.component.parts) == {"ToyTM", "ToyRM"}
    assert model_check_fulfillment(c, inst).holds


def test_bridge_mismatch(toy_leaves):
    toy, inst, tm, rm = toy_leaves
    weak = make_contract("hybrid", "RM_weak", S.Always(toy.sfls["rho1"]), rm.contract.operands, S.TRUE, S.TRUE)
    with pytest.raises(BridgeMismatch):
        compose_contracts(tm, prove(weak, inst), "hybrid-comp", inst)
    with pytest.raises(RuleSideConditionFailed):
        compose_contracts(tm, rm, "sfl-comp", inst)


def test_state_level_bridge_rules(toy, two):
    tm, rm = prove(toy.contract("TM_state"), two), prove(toy.contract("RM_state"), two)
    b = compose_contracts(tm, rm, "bridge-comp", two)
    assert check_inductive(lower(b.contract), two).proved
    a = compose_contracts(tm, rm, "aux-comp", two)
    assert "enabled" in a.note
    assert model_check_fulfillment(a.contract, two).holds


# certification


def test_certify_toy(toy, two):
    cert = certify(toy.chain("toy2pc"), two)
    assert cert.proved and cert.recheck.proved
    inv = cert.conclusion.invariant
    assert set(S.conjuncts(inv)) >= set(S.conjuncts(toy.formulas["I_TM"])) | set(S.conjuncts(toy.formulas["I_RM"]))


def test_certify_single_leaf(toy, two):
    cert = certify([toy.contract("RM_noabort")], two)
    assert cert.proved and cert.recheck is cert.leaves[0].result
    bad = certify([toy.contract("Global_naive")], two)
    assert not bad.proved and bad.cti.kind == "consecution"


def test_certify_twophase_one(twophase, one):
    chain = twophase.chain("twophase")
    assert [c.kind for c in chain] == ["action", "action", "hybrid"]
    cert = certify(chain, one)
    assert cert.proved
    assert [s.rule for s in cert.steps] == ["sfl-comp", "hybrid-comp"]


def test_chain_shape(toy):
    with pytest.raises(ChainIllFormed):
        certify([toy.contract("RM_contract"), toy.contract("TM_contract")], rms(1))
    with pytest.raises(ChainIllFormed):
        certify([], rms(1))


def test_certificate_json_is_stable(toy, one):
    a = certify(toy.chain("toy2pc"), one).dumps(include_run=False)
    b = certify(toy.chain("toy2pc"), one).dumps(include_run=False)
    assert a == b and '"verdict": "proved"' in a


# properties


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_cti_is_genuine(seed, n):
    g = Gen(seed)
    c, _ = g.state_contract(invariant="strengthened")
    ob = lower(c)
    res = check_inductive(ob, instance(n))
    if not res.proved:
        assert cti_is_genuine(res.cti, ob, instance(n))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_proved_implies_fulfilled(seed, n):
    g = Gen(seed)
    c, _ = g.state_contract(invariant="strengthened")
    if check_inductive(lower(c), instance(n)).proved:
        assert model_check_fulfillment(c, instance(n)).holds


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_houdini_result_is_inductive(seed):
    g = Gen(seed)
    c, _ = g.state_contract()
    res = houdini(c.with_invariant(None), instance(2))
    if res.success:
        assert check_inductive(lower(c), instance(2), invariant=res.invariant).proved
