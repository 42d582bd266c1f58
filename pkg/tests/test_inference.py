
from hypothesis import given, settings
from hypothesis import strategies as st

from civi import syntax as S
from civi.contracts import check_inductive, lower, make_contract
from civi.evaluator import evaluate
from civi.inference import generate_pool, houdini, load_pool
from civi.parser import parse_expr
from randomsys import Gen, instance


def test_tm_pool_has_prepared_implication(toy, two):
    pool = generate_pool(lower(toy.contract("TM_contract")), two)
    assert parse_expr("\\A r \\in RMs : r \\in tmPrepared => oncePrepare[r]") in pool


def test_rm_pool_has_commit_equivalence(toy, two):
    pool = generate_pool(lower(toy.contract("RM_contract")), two)
    assert parse_expr('\\A r \\in RMs : onceCommit[r] <=> rmState[r] = "commit"') in pool


def test_zero_budget(toy, two):
    assert generate_pool(lower(toy.contract("TM_contract")), two, budget=0) == []


def test_pool_is_deterministic_and_capped(toy, two):
    ob = lower(toy.contract("RM_contract"))
    assert generate_pool(ob, two, budget=50) == generate_pool(ob, two)[:50]
    assert len(generate_pool(ob, two, budget=50)) == 50


def test_houdini_rm(toy, two):
    c = toy.contract("RM_contract").with_invariant(None)
    res = houdini(c, two)
    assert res.success and res.recheck.proved
    ob = lower(c)
    assert check_inductive(ob, two, invariant=res.invariant).proved
    assert res.kept[0] == ob.guarantee


def test_houdini_tm(toy, two):
    res = houdini(toy.contract("TM_contract").with_invariant(None), two)
    assert res.success
    assert parse_expr("\\A r \\in RMs : r \\in tmPrepared => oncePrepare[r]") in res.kept


def test_guarantee_alone_with_empty_pool(toy, two):
    no_abort = toy.formulas["NoAbort"]
    c = make_contract("state", "K", no_abort, (toy.component("ToyRM"),), no_abort)
    res = houdini(c, two, pool=[])
    assert res.success and res.invariant == no_abort


def test_contradictory_pool(toy, two):
    pool = [parse_expr('\\A r \\in RMs : rmState[r] = "abort"'), parse_expr('tmState = "commit"')]
    res = houdini(toy.contract("Global_naive").with_invariant(None), two, pool=pool)
    assert not res.success
    assert {why for _, why in res.dropped if _ in pool} == {"initiation"}
    assert res.ctis[-1].kind == "consecution"


def test_pool_file(toy, two):
    text = "# extra candidates\n\\A r \\in RMs : rmState[r] /= \"abort\"\n\nNoAbort\n"
    pool = load_pool(text, toy)
    assert pool[1] == toy.formulas["NoAbort"] and len(pool) == 2


def test_every_drop_is_justified(toy, two):
    c = toy.contract("RM_contract").with_invariant(None)
    pool = generate_pool(lower(c), two)
    seen = []
    res = houdini(c, two, on_cti=lambda cti, killed: seen.append((cti, killed)))
    dropped = {id(p) for p, _ in res.dropped}
    kept = set(map(id, res.kept))
    ob = lower(c)
    for p, why in res.dropped:
        assert why == "initiation" or why.startswith("consecution")
    for cti, killed in seen:
        assert killed
        for p in killed:
            assert not evaluate(p, cti.successor, two)
    assert len(res.dropped) + len(res.kept) >= len(pool)
    assert not (dropped & kept)
    assert all(p in res.kept or id(p) in dropped or p in S.conjuncts(ob.guarantee) for p in [ob.guarantee])


def test_twophase_rm_pool_has_local_prepare_fact(twophase, two):
    pool = generate_pool(lower(twophase.contract("RM_contract")), two)
    assert parse_expr('\\A r \\in RMs : onceSndPrepare[r] => rmState[r] /= "working"') in pool


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_descent(seed):
    g = Gen(seed)
    c, _ = g.state_contract()
    sizes = []
    res = houdini(c.with_invariant(None), instance(2), on_cti=lambda cti, killed: sizes.append(len(killed)))
    assert all(k > 0 for k in sizes)
    assert res.iterations <= res.pool_size + 2
    if res.success:
        assert check_inductive(lower(c), instance(2), invariant=res.invariant).proved
