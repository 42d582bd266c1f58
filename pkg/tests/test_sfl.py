
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from civi import syntax as S
from civi.contracts import model_check_fulfillment, make_contract
from civi.evaluator import enumerate_states, evaluate, state_count
from civi.loader import load_entry, load_text
from civi.model import ActionEvent
from civi.rules import same_formula
from civi.sfl import (
    accepts,
    build_B,
    build_R,
    build_T,
    check_trace,
    fluent_run,
    fluent_values,
    trace_verdicts,
    validate_fluent,
)
from civi.sorts import FnVal, Instance
from conftest import rms
from randomsys import Gen, fast_reachable, mutate_fluent

TOY = load_entry("toy2pc")


def ev(name, *args):
    return ActionEvent(name, args)


SIGMA1 = (ev("Prepare", "r1"),)
SIGMA2 = (ev("Prepare", "r1"), ev("Prepare", "r2"), ev("Commit", "r2"))


def test_once_prepare_after_sigma1(toy, two):
    assert fluent_run(toy.fluents["oncePrepare"], SIGMA1, two) == FnVal({"r1": True, "r2": False})


def test_once_commit_after_sigma2(toy, two):
    assert fluent_run(toy.fluents["onceCommit"], SIGMA2, two) == FnVal({"r1": False, "r2": True})


def test_empty_trace_gives_initial_value(toy, two):
    for f in toy.fluents.values():
        assert fluent_run(f, (), two) == FnVal({"r1": False, "r2": False})


def test_events_outside_alphabet_stutter(toy, two):
    vals = fluent_values(toy.fluents["onceAbort"], SIGMA2, two)
    assert len(vals) == 4 and len(set(vals)) == 1


@pytest.mark.parametrize("name", ["rho1", "rho2"])
def test_sigma2_satisfies_both(toy, two, name):
    assert check_trace(S.Always(toy.sfls[name]), SIGMA2, two)
    assert all(trace_verdicts(toy.sfls[name], SIGMA2, two))


def test_commit_alone_breaks_rho1(toy, two):
    trace = (ev("Commit", "r1"),)
    assert not check_trace(S.Always(toy.sfls["rho1"]), trace, two)
    assert trace_verdicts(toy.sfls["rho1"], trace, two) == [True, False]


def test_finite_until_and_next(toy, two):
    p = toy.sfl("\\A r \\in RMs : oncePrepare(r)")
    u = S.Until(S.TRUE, p)
    assert not check_trace(u, SIGMA1, two)
    assert check_trace(u, SIGMA2, two)
    assert not check_trace(S.NextOp(S.TRUE), (), two)
    assert check_trace(S.NextOp(S.TRUE), SIGMA1, two)


def test_R_of_rho_is_toyR(toy):
    assert same_formula(build_R(toy.sfls["rho"]), toy.formulas["ToyR"])


def test_R_of_single_atom(toy):
    phi = toy.sfl("\\A r \\in RMs : oncePrepare(r)")
    r = build_R(phi)
    assert r.body == S.Apply(S.Name("oncePrepare"), (S.Name("r"),))
    assert build_R(phi, {"oncePrepare": "x"}).body == S.Apply(S.Name("x"), (S.Name("r"),))
    assert build_R(S.TRUE) == S.TRUE


@pytest.mark.parametrize("n", [1, 2])
def test_B_of_rho_is_toyB(toy, n):
    inst = rms(n)
    b = build_B(toy.sfls["rho"])
    tb = toy.component("ToyB")
    assert sorted(b.var_names) == sorted(tb.var_names)
    assert b.alphabet == tb.alphabet
    names = list(tb.var_names)
    idx = [list(b.var_names).index(v) for v in names]
    got = {tuple(k[i] for i in idx) for k in fast_reachable(b, inst)}
    assert got == fast_reachable(tb, inst)
    from civi.evaluator import action_arg_tuples, step_holds

    states = list(enumerate_states(tb, inst))
    for a in tb.actions:
        for args in action_arg_tuples(a, inst):
            for s in states:
                for t in states:
                    assert step_holds(a, args, s, t, inst) == step_holds(b.action(a.name), args, s, t, inst)


def test_B_of_single_fluent(toy):
    f = toy.fluents["oncePrepare"]
    assert build_B(toy.sfl("\\A r \\in RMs : oncePrepare(r)")) == f.machine


def test_B_state_count(toy, one):
    assert state_count(build_B(toy.sfls["rho"]), one) == 2 * 2 * 2


def test_T_with_toyrm_is_consistent(toy, two):
    T = build_T(S.Always(toy.sfls["rho"]))
    c = make_contract("state", "T_RM", S.TRUE, (T, toy.component("ToyRM")), toy.formulas["Consistent"])
    assert model_check_fulfillment(c, two).holds


def _component_traces(comp, inst, depth):
    """Every trace of `comp` up to `depth` steps, by exploring its runs."""
    from civi.contracts import _Checker, lower

    ob = lower(make_contract("state", "all", S.TRUE, (comp,), S.TRUE, S.TRUE))
    ck = _Checker(ob, inst, None)
    layer = [((), s) for s in ck.search(ob.system.init)]
    out = [()]
    for _ in range(depth):
        nxt = []
        for tr, s in layer:
            for name, args, succ in ck.successors(s):
                for t in succ:
                    nxt.append((tr + (ActionEvent(name, args),), t))
        out.extend(tr for tr, _ in nxt)
        layer = nxt
    return out


def test_toytm_language_included_in_T(toy, one):
    T = build_T(S.Always(toy.sfls["rho"]))
    traces = _component_traces(toy.component("ToyTM"), one, 5)
    assert len(traces) > 10
    assert all(accepts(T, tr, one) for tr in traces)


def test_T_of_true_is_B(toy):
    assert build_T(S.Always(S.TRUE)).vars == ()
    phi = toy.sfl("\\A r \\in RMs : oncePrepare(r) \\/ TRUE")
    t = build_T(S.Always(phi))
    assert t.var_names == build_B(phi).var_names


def test_validate_once_prepare(toy, two):
    rep = validate_fluent(toy.fluents["oncePrepare"], two)
    assert rep.ok and rep.states_checked == 4


def test_validate_catches_nondeterminism(two):
    reg = load_text(
        """
        fluent sloppy(RMs) var x {
          Init == x = [r \\in RMs |-> FALSE]
          Prepare(rm \\in RMs) == x' = x \\/ x' = [x EXCEPT ![rm] = TRUE]
        }
        """
    )
    rep = validate_fluent(reg.fluents["sloppy"], two)
    p = rep.first("determinism")
    assert p is not None
    action, args, s, t0, t1 = p.witness
    assert action == "Prepare" and t0 != t1


def test_current_leader_validates(mongo):
    inst = Instance({"Server": ("s1",)}, nat_bound=2)
    assert validate_fluent(mongo.fluents["currentLeader"], inst).ok


@pytest.mark.parametrize("kind", ["determinism", "enabledness", "initial-state"])
def test_mutations_are_reported(toy, two, kind):
    bad = mutate_fluent(toy.fluents["onceCommit"], kind)
    rep = validate_fluent(bad, two)
    assert rep.first(kind) is not None


# properties


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["rho1", "rho2", "rho"]))
def test_R_B_decoupling(seed, name):
    g = Gen(seed)
    inst = rms(g.choice((1, 2)))
    trace = g.trace(inst)
    phi = TOY.sfls[name]
    B = build_B(phi)
    R = build_R(phi)
    runs = {f.name: fluent_values(f, trace, inst) for f in TOY.fluents.values()}
    induced = [{v: runs[v][i] for v in B.var_names} for i in range(len(trace) + 1)]
    assert check_trace(S.Always(phi), trace, inst) == all(evaluate(R, s, inst) for s in induced)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unique_run(seed):
    g = Gen(seed)
    inst = rms(2)
    trace = g.trace(inst)
    for f in TOY.fluents.values():
        vals = fluent_values(f, trace, inst)
        assert len(vals) == len(trace) + 1
        assert vals == fluent_values(f, trace, inst)
        assert accepts(f.machine, trace, inst)
