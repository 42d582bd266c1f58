import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from civi import syntax as S
from civi.compose import EMPTY, compose, compose_all
from civi.errors import ParamMismatch, SharedVariable, SignatureMismatch
from civi.evaluator import action_arg_tuples, enumerate_states, step_holds
from civi.loader import load_text
from conftest import rms
from randomsys import Gen, brute_reachable, fast_reachable


def project(keys, names, keep):
    idx = [names.index(n) for n in keep]
    return {tuple(k[i] for i in idx) for k in keys}


def test_prepare_body_is_conjunction(toy):
    rm, tm = toy.component("ToyRM"), toy.component("ToyTM")
    c = compose(rm, tm)
    prep = c.action("Prepare")
    parts = S.conjuncts(prep.body)
    assert len(parts) == len(S.conjuncts(rm.action("Prepare").body)) + len(S.conjuncts(tm.action("Prepare").body))


@pytest.mark.parametrize("n", [1, 2])
def test_composition_matches_monolith(toy, n):
    inst = rms(n)
    c = compose(toy.component("ToyRM"), toy.component("ToyTM"))
    mono = toy.component("Toy2PC")
    names = ["rmState", "tmState", "tmPrepared"]
    got = project(fast_reachable(c, inst), list(c.var_names), names)
    want = project(brute_reachable(mono, inst), list(mono.var_names), names)
    assert got == want
    assert len(got) == len(fast_reachable(mono, inst))


def test_transition_relations_match(toy, one):
    c = compose(toy.component("ToyRM"), toy.component("ToyTM"))
    mono = toy.component("Toy2PC")
    states = list(enumerate_states(mono, one))
    for a in mono.actions:
        for args in action_arg_tuples(a, one):
            for s in states:
                for t in states:
                    assert step_holds(a, args, s, t, one) == step_holds(c.action(a.name), args, s, t, one)


def test_empty_component_is_unit(toy, two):
    rm = toy.component("ToyRM")
    assert compose(rm, EMPTY) is rm and compose(EMPTY, rm) is rm
    assert compose_all([rm]) is rm
    assert fast_reachable(compose_all([rm, EMPTY]), two) == fast_reachable(rm, two)


def test_shared_variable(toy):
    rm = toy.component("ToyRM")
    with pytest.raises(SharedVariable):
        compose(rm, rm.renamed("ToyRM_copy"))


def test_param_and_signature_mismatch():
    reg = load_text(
        """
        component A {
          CONSTANT RMs
          VARIABLES a : BOOLEAN
          Init == a = FALSE
          Go(rm \\in RMs) == a' = TRUE
        }
        component B {
          VARIABLES b : BOOLEAN
          Init == b = FALSE
          Go(n \\in Nat) == b' = (n = 0)
        }
        component C {
          CONSTANT RMs
          VARIABLES c : BOOLEAN
          Init == c = FALSE
          Go(n \\in Nat) == c' = (n = 0)
        }
        """
    )
    with pytest.raises(ParamMismatch):
        compose(reg.component("A"), reg.component("B"))
    with pytest.raises(SignatureMismatch):
        compose(reg.component("A"), reg.component("C"))


def test_three_way_product(toy, one):
    rm, b, tm = (toy.component(n) for n in ("ToyRM", "ToyB", "ToyTM"))
    c = compose_all([rm, b, tm])
    assert fast_reachable(c, one) == brute_reachable(c, one)
    # fold order does not matter
    other = compose_all([tm, rm, b])
    names = list(c.var_names)
    assert project(fast_reachable(other, one), list(other.var_names), names) == fast_reachable(c, one)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_alphabet_and_frame_laws(seed):
    g = Gen(seed)
    c1, _ = g.component("P", tag="p")
    c2, _ = g.component("Q", tag="q")
    c = compose(c1, c2)
    assert c.alphabet == c1.alphabet | c2.alphabet
    inst = rms(1)
    states = list(enumerate_states(c, inst))
    for a in c.actions:
        if c2.has_action(a.name):
            continue
        for args in action_arg_tuples(a, inst):
            for s in states:
                for t in states:
                    if step_holds(a, args, s, t, inst):
                        assert all(s[v] == t[v] for v in c2.var_names)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fold_order_irrelevant(seed):
    g = Gen(seed)
    cs = [g.component(n, tag=n.lower())[0] for n in ("P", "Q", "R")]
    inst = rms(1)
    left = compose_all(cs)
    right = compose_all([cs[2], cs[0], cs[1]])
    names = list(left.var_names)
    assert project(fast_reachable(right, inst), list(right.var_names), names) == fast_reachable(left, inst)
