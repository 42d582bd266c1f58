"""Composition rules over proved contracts.

Each rule takes two proof steps and returns a proof step for the composed
contract. The `*-comp` rules conjoin the premises' invariants; the `*-safe`
rules and `aux-comp` conclude without one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import syntax as S
from .compose import compose_all, widen
from .contracts import (
    ActionContract,
    Contract,
    HybridContract,
    InductiveResult,
    StateContract,
    check_inductive,
    lower,
    tracked_fluents,
)
from .errors import BridgeMismatch, CompositionError, RuleSideConditionFailed, SpecError
from .printer import show
from .sfl import alphabet, all_actions_enabled, fluent_machine, fluents_of, strip_always

RULES = ("naive-comp", "bridge-comp", "aux-comp", "sfl-comp", "sfl-safe", "hybrid-comp", "hybrid-safe")

_KINDS = {
    "naive-comp": ("state", "state"),
    "bridge-comp": ("state", "state"),
    "aux-comp": ("state", "state"),
    "sfl-comp": ("action", "action"),
    "sfl-safe": ("action", "action"),
    "hybrid-comp": ("action", "hybrid"),
    "hybrid-safe": ("action", "hybrid"),
}

_NEEDS_INVARIANT = {"naive-comp", "bridge-comp", "sfl-comp", "hybrid-comp"}


@dataclass(frozen=True)
class ProofStep:
    """A node of a proof tree: a leaf discharged by the checker, or a rule application."""

    rule: str
    contract: Contract
    premises: tuple["ProofStep", ...] = ()
    result: InductiveResult | None = field(default=None, compare=False, repr=False)
    note: str = ""

    @property
    def invariant(self) -> S.Expr | None:
        return self.contract.invariant

    @property
    def proved(self) -> bool:
        if self.rule == "leaf":
            return self.result is not None and self.result.proved
        return all(p.proved for p in self.premises)

    def leaves(self) -> list["ProofStep"]:
        if self.rule == "leaf":
            return [self]
        out = []
        for p in self.premises:
            out.extend(p.leaves())
        return out

    def to_json(self) -> dict:
        d = {"rule": self.rule, "conclusion": self.contract.to_json()}
        if self.premises:
            d["premises"] = [p.contract.name for p in self.premises]
        if self.note:
            d["note"] = self.note
        return d


def prove(contract: Contract, instance, invariant: S.Expr | None = None, ceiling: int | None = None) -> ProofStep:
    """Discharge a contract with its (or the given) invariant."""
    if invariant is not None:
        contract = contract.with_invariant(invariant)
    if contract.invariant is None:
        raise SpecError(f"contract {contract.name} has no invariant to check")
    res = check_inductive(lower(contract), instance, ceiling=ceiling)
    return ProofStep("leaf", contract, result=res)


# canonical forms ---------------------------------------------------------------------


def canonical(e: S.Expr) -> S.Expr:
    """Sorted, flattened conjunctions and disjunctions with bound names replaced by their binding depth."""
    return _canon(e, 0)


def _canon(e: S.Expr, depth: int) -> S.Expr:
    if isinstance(e, S.Quant):
        m = {}
        binders = []
        d = depth
        for name, dom in e.binders:
            dom2 = S.substitute(dom, m) if m else dom
            new = f"_b{d}"
            d += 1
            m[name] = S.Name(new)
            binders.append((new, _canon(dom2, depth)))
        body = _canon(S.substitute(e.body, m), d)
        return S.Quant(e.kind, tuple(binders), body)
    if isinstance(e, (S.And, S.Or)):
        items = []
        for it in e.items:
            c = _canon(it, depth)
            if type(c) is type(e):
                items.extend(c.items)
            else:
                items.append(c)
        uniq = {show(i): i for i in items}
        ordered = [uniq[k] for k in sorted(uniq)]
        if len(ordered) == 1:
            return ordered[0]
        return type(e)(tuple(ordered))
    if isinstance(e, S.Always):
        return _canon(e.arg, depth)
    kids = {}
    from dataclasses import fields

    for f in fields(e):
        if f.name in ("loc", "ref"):
            continue
        v = getattr(e, f.name)
        if isinstance(v, S.Expr):
            kids[f.name] = _canon(v, depth)
        elif isinstance(v, tuple) and v and all(isinstance(x, S.Expr) for x in v):
            kids[f.name] = tuple(_canon(x, depth) for x in v)
    return replace(e, **kids) if kids else e


def same_formula(a: S.Expr, b: S.Expr) -> bool:
    return show(canonical(a)) == show(canonical(b))


# rule application -------------------------------------------------------------------------


def _conj_invariants(*invs) -> S.Expr:
    items: list[S.Expr] = []
    for inv in invs:
        for c in S.conjuncts(inv):
            if c not in items:
                items.append(c)
    return S.conj(items)


def _check_disjoint(ops1, ops2, rule) -> None:
    v1 = {v for c in ops1 for v in c.var_names}
    v2 = {v for c in ops2 for v in c.var_names}
    shared = v1 & v2
    if shared:
        raise RuleSideConditionFailed(f"{rule}: components share variable {sorted(shared)[0]!r}")


def _compose_ops(ops, rule):
    ops = tuple(widen(list(ops)))
    try:
        compose_all(ops)
    except CompositionError as exc:
        raise RuleSideConditionFailed(f"{rule}: {exc}") from None
    return ops


def _bridge_machines(rho: S.Expr, p1: Contract, p2: Contract, rule: str):
    """Fluent machines for the bridge, named the way both premises' lowerings name them."""
    present = set(tracked_fluents(p1.component)) | set(tracked_fluents(p2.component))
    r1 = lower(p1).renaming
    r2 = lower(p2).renaming
    out = []
    for f in fluents_of(rho):
        if f.name in present:
            continue
        v1, v2 = r1.get(f.name, f.var), r2.get(f.name, f.var)
        if v1 != v2:
            raise RuleSideConditionFailed(f"{rule}: fluent {f.name} is tracked as {v1} and as {v2}")
        out.append(fluent_machine(f, v1))
    return out


def compose_contracts(p1: ProofStep, p2: ProofStep, rule: str, instance=None, name: str | None = None) -> ProofStep:
    """Apply `rule` to two proved steps."""
    if rule not in RULES:
        raise SpecError(f"unknown rule {rule!r} (known: {', '.join(RULES)})")
    c1, c2 = p1.contract, p2.contract
    want = _KINDS[rule]
    if (c1.kind, c2.kind) != want:
        raise RuleSideConditionFailed(f"{rule} needs {want[0]} and {want[1]} premises, got {c1.kind} and {c2.kind}")
    for p in (p1, p2):
        if not p.proved:
            raise RuleSideConditionFailed(f"{rule}: premise {p.contract.name} is not proved")
        if rule in _NEEDS_INVARIANT and p.invariant is None:
            raise RuleSideConditionFailed(f"{rule}: premise {p.contract.name} carries no invariant")
    if not same_formula(c1.guarantee, c2.assume):
        raise BridgeMismatch(
            f"{rule}: guarantee of {c1.name} ({show(c1.guarantee)}) does not match assumption of {c2.name} ({show(c2.assume)})"
        )
    name = name or f"{c1.name}+{c2.name}"
    inv = _conj_invariants(c1.invariant, c2.invariant) if rule in _NEEDS_INVARIANT else None
    ops1, ops2 = c1.operands, c2.operands

    if rule == "naive-comp":
        _check_disjoint(ops1, ops2, rule)
        ops = _compose_ops(ops1 + ops2, rule)
        concl = StateContract(name, c1.assume, ops, c2.guarantee, inv)
        return ProofStep(rule, concl, (p1, p2))

    if rule in ("bridge-comp", "aux-comp"):
        names2 = {o.name for o in ops2}
        bridge = [o for o in ops1 if o.name in names2]
        if not bridge:
            raise RuleSideConditionFailed(f"{rule}: premises share no bridge component")
        bnames = {o.name for o in bridge}
        left = [o for o in ops1 if o.name not in bnames]
        right = [o for o in ops2 if o.name not in bnames]
        _check_disjoint(left, right, rule)
        if rule == "bridge-comp":
            ops = _compose_ops(left + bridge + right, rule)
            return ProofStep(rule, StateContract(name, c1.assume, ops, c2.guarantee, inv), (p1, p2))
        note = _auxiliary_witness(bridge, instance, rule)
        ops = _compose_ops(left + right, rule)
        return ProofStep(rule, StateContract(name, c1.assume, ops, c2.guarantee, None), (p1, p2), note=note)

    rho = strip_always(c1.guarantee)
    acts = alphabet(rho)
    for c in (c1, c2):
        missing = acts - c.component.alphabet
        if missing:
            raise RuleSideConditionFailed(f"{rule}: bridge actions {sorted(missing)} are not actions of {c.name}")
    _check_disjoint(ops1, ops2, rule)
    safe = rule.endswith("-safe")
    if safe:
        ops = _compose_ops(ops1 + ops2, rule)
    else:
        ops = _compose_ops(ops1 + tuple(_bridge_machines(rho, c1, c2, rule)) + ops2, rule)
    cls = ActionContract if rule.startswith("sfl") else HybridContract
    return ProofStep(rule, cls(name, c1.assume, ops, c2.guarantee, inv), (p1, p2))


def _auxiliary_witness(bridge, instance, rule) -> str:
    if all(o.origin == "fluent" for o in bridge):
        return "bridge built from fluent machines"
    if instance is None:
        raise RuleSideConditionFailed(f"{rule}: an instance is needed to check that the bridge is auxiliary")
    b = compose_all(widen(bridge))
    witness = all_actions_enabled(b, instance)
    if witness is not None:
        action, args, _ = witness
        raise RuleSideConditionFailed(f"{rule}: bridge action {action}{args} is disabled in some state")
    return "every bridge action enabled in every state"
