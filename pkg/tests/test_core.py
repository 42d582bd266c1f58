import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from civi.errors import EvalError, MissingNextState, OutOfBounds, StateSpaceOverflow
from civi.evaluator import enumerate_states, evaluate, state_count, step_holds
from civi.loader import load_entry, load_text
from civi.model import State
from civi.parser import parse_expr
from civi.sorts import FnVal, Instance
from conftest import rms


def rm_state(**kw):
    return FnVal(kw)


def test_toyrm_has_16_states(toy, two):
    states = list(enumerate_states(toy.component("ToyRM"), two))
    assert len(states) == 16
    assert state_count(toy.component("ToyRM"), two) == 16


def test_toy2pc_has_192_states(toy, two):
    c = toy.component("Toy2PC")
    assert state_count(c, two) == 192
    assert sum(1 for _ in enumerate_states(c, two)) == 192


def test_single_literal_enum_adds_no_states(two):
    reg = load_text(
        """
        component One {
          CONSTANT RMs
          VARIABLES flag : [RMs -> BOOLEAN], fixed : {"only"}
          Init == flag = [r \\in RMs |-> FALSE] /\\ fixed = "only"
        }
        """
    )
    assert state_count(reg.component("One"), two) == 4


def test_consistent_false_on_abort_commit(toy, two):
    s = {"rmState": rm_state(r1="abort", r2="commit")}
    assert evaluate(toy.formulas["Consistent"], s, two) is False


def test_reflexive_equality(two):
    assert evaluate(parse_expr("x = x"), {"x": 3}, two) is True
    assert evaluate(parse_expr("x = x"), {"x": frozenset({"r1"})}, two) is True


def test_toytm_init(toy, two):
    s = {"tmState": "init", "tmPrepared": frozenset()}
    assert evaluate(toy.component("ToyTM").init, s, two) is True


def test_prepare_step(toy, two):
    prep = toy.component("ToyRM").action("Prepare")
    s = {"rmState": rm_state(r1="working", r2="working")}
    t = {"rmState": rm_state(r1="prepared", r2="working")}
    assert step_holds(prep, ("r1",), s, t, two)
    assert not step_holds(prep, ("r1",), s, s, two)


def test_commit_needs_all_prepared(toy, two):
    tm = toy.component("ToyTM")
    commit = tm.action("Commit")
    s = {"tmState": "init", "tmPrepared": frozenset({"r1"})}
    assert not any(step_holds(commit, ("r1",), s, t, two) for t in enumerate_states(tm, two))


def test_primed_without_next_is_an_error(two):
    with pytest.raises(MissingNextState):
        evaluate(parse_expr("x' = x"), {"x": 1}, two)


def test_nat_overflow_is_an_error():
    inst = Instance({}, nat_bound=2)
    with pytest.raises(OutOfBounds):
        evaluate(parse_expr("x + 1 = 0"), {"x": 2}, inst)
    assert isinstance(OutOfBounds("x"), EvalError)


def test_ceiling_overflow(toy, two):
    with pytest.raises(StateSpaceOverflow):
        list(enumerate_states(toy.component("Toy2PC"), two, ceiling=100))


def test_empty_binding_needs_flag():
    with pytest.raises(Exception):
        Instance({"RMs": ()})
    assert Instance({"RMs": ()}, allow_empty=True).atoms("RMs") == ()


def test_atoms_ordered():
    assert Instance({"RMs": ("r2", "r1")}).atoms("RMs") == ("r1", "r2")


def test_state_is_immutable_mapping():
    s = State(x=1)
    assert s.updated(x=2)["x"] == 2 and s["x"] == 1
    assert hash(s) == hash(State({"x": 1}))


# properties

TOY = load_entry("toy2pc")


PREDICATES = [
    "Consistent",
    "NoAbort",
    '\\E r \\in RMs : rmState[r] = "prepared"',
    '\\A r \\in RMs : rmState[r] \\in {"working", "abort"}',
    '(\\E r \\in RMs : rmState[r] = "commit") => Consistent',
]


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PREDICATES), st.integers(1, 3))
def test_enumeration_partitions(text, n):
    toy = TOY
    inst = rms(n)
    f = toy.formula(text)
    states = list(enumerate_states(toy.component("ToyRM"), inst))
    keys = {tuple(sorted(s.items(), key=str)) for s in map(dict, states)}
    assert len(keys) == len(states) == 4**n
    pos = sum(1 for s in states if evaluate(f, s, inst))
    g = toy.formula(f"~({text})")
    neg = sum(1 for s in states if evaluate(g, s, inst))
    assert pos + neg == len(states)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(PREDICATES), st.data())
def test_evaluation_is_deterministic(text, data):
    toy = TOY
    inst = rms(2)
    states = list(enumerate_states(toy.component("ToyRM"), inst))
    s = data.draw(st.sampled_from(states))
    f = toy.formula(text)
    assert len({evaluate(f, s, inst) for _ in range(3)}) == 1


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_step_implies_closed_body(data):
    toy = TOY
    inst = rms(2)
    c = toy.component("Toy2PC")
    a = data.draw(st.sampled_from(c.actions))
    states = list(enumerate_states(c, inst))
    s = data.draw(st.sampled_from(states))
    closed = parse_expr(f"\\E {a.formals[0][0]} \\in RMs : TRUE")
    for t in states:
        for r in inst.atoms("RMs"):
            if step_holds(a, (r,), s, t, inst):
                from civi import syntax as S

                body = S.Quant("E", ((a.formals[0][0], S.Name("RMs")),), a.body)
                assert evaluate(body, s, inst, next=t)
    assert evaluate(closed, s, inst)
