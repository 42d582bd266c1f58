"""Assume-guarantee contracts, their lowering to state obligations, and the two checkers.

Three flavours share one shape (assumption, operands, guarantee, optional
invariant) and differ in which parts are fluent formulas:

* state contracts: every part is a state formula;
* action contracts: assumption and guarantee are fluent formulas;
* hybrid contracts: fluent assumption, state guarantee.

Lowering adds the fluent machines the formulas need and translates the
fluent formulas to state formulas over their variables, so that every
contract is checked as a state contract.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import ClassVar, Mapping, Sequence

from . import syntax as S
from .compose import compose_all, widen
from .errors import AlphabetViolation, SpecError
from .evaluator import ActionStepper, Compiler, action_arg_tuples, search_states, state_ceiling
from .model import ActionDecl, ActionEvent, Component, format_state
from .printer import show
from .sfl import alphabet, build_bridge, fluents_of, strip_always
from .sorts import value_key
from .typecheck import check_formula

FLUENT_PART = "fluent:"


@dataclass(frozen=True)
class Contract:
    name: str
    assume: S.Expr
    operands: tuple[Component, ...]
    guarantee: S.Expr
    invariant: S.Expr | None = None
    kind: ClassVar[str] = "state"

    @property
    def component(self) -> Component:
        return compose_all(self.operands)

    @property
    def operand_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.operands)

    def with_invariant(self, inv: S.Expr | None) -> "Contract":
        return replace(self, invariant=inv)

    def renamed(self, name: str) -> "Contract":
        return replace(self, name=name)

    def __str__(self):
        comps = " || ".join(self.operand_names) or "Empty"
        return f"<{show(self.assume)}> {comps} <{show(self.guarantee)}>"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "assume": show(self.assume),
            "components": list(self.operand_names),
            "guarantee": show(self.guarantee),
            "invariant": show(self.invariant) if self.invariant is not None else None,
        }


@dataclass(frozen=True)
class StateContract(Contract):
    kind: ClassVar[str] = "state"


@dataclass(frozen=True)
class ActionContract(Contract):
    kind: ClassVar[str] = "action"


@dataclass(frozen=True)
class HybridContract(Contract):
    kind: ClassVar[str] = "hybrid"


CONTRACT_TYPES = {"state": StateContract, "action": ActionContract, "hybrid": HybridContract}


def make_contract(kind: str, name: str, assume, operands, guarantee, invariant=None) -> Contract:
    ops = tuple(widen(list(operands)))
    c = CONTRACT_TYPES[kind](name, assume, ops, guarantee, invariant)
    _check_contract(c)
    return c


def _check_contract(c: Contract) -> None:
    comp = c.component
    state_parts = []
    if c.kind == "state":
        state_parts = [("assumption", c.assume), ("guarantee", c.guarantee)]
    elif c.kind == "hybrid":
        state_parts = [("guarantee", c.guarantee)]
    for what, e in state_parts:
        if S.has_primes(e) or S.is_temporal(e) or S.fluent_atoms(e):
            raise SpecError(f"{what} of {c.name} must be a state formula", e.loc)
        check_formula(e, comp.var_sorts, comp.params)
    if c.kind != "state":
        for what, e in (("assumption", c.assume), ("guarantee", c.guarantee)):
            if c.kind == "hybrid" and what == "guarantee":
                continue
            if S.is_temporal(strip_always(e)):
                raise SpecError(f"{what} of {c.name} must be a safety formula []p with p free of temporal operators", e.loc)
    if c.invariant is not None and (S.has_primes(c.invariant) or S.is_temporal(c.invariant)):
        raise SpecError(f"invariant of {c.name} must be a state formula", c.invariant.loc)


def contract_from_decl(d, reg) -> Contract:
    """Build a contract from its declaration, resolving names against a registry."""
    from .loader import _inline, composite
    from .sfl import link

    ops = composite(reg, d.components)
    comp = compose_all(ops)
    shadow = set(comp.var_names)

    def state(e):
        return reg.inline(e, shadow)

    def fluent(e):
        return link(_inline(e, reg.sfls, set()), reg.fluents, reg.constants | comp.params)

    if d.kind == "state":
        assume, guarantee = state(d.assume), state(d.guarantee)
    elif d.kind == "action":
        assume, guarantee = fluent(d.assume), fluent(d.guarantee)
    else:
        assume, guarantee = fluent(d.assume), state(d.guarantee)
    inv = None
    if d.invariant is not None:
        inv = reg.inline(d.invariant, shadow | {f.var for f in reg.fluents.values()})
    try:
        return make_contract(d.kind, d.name, assume, ops, guarantee, inv)
    except SpecError as exc:
        if exc.loc is None and d.loc is not None:
            raise type(exc)(f"in contract {d.name}: {exc}") from None
        raise


# lowering ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Obligation:
    """A state contract over the lowered system, ready for checking.

    `system` is the composition of the operands with any fluent machines;
    `assume` and `guarantee` are state formulas over its variables.
    """

    contract: Contract
    system: Component
    assume: S.Expr
    guarantee: S.Expr
    invariant: S.Expr | None = None
    renaming: Mapping[str, str] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.contract.name

    def with_invariant(self, inv: S.Expr | None) -> "Obligation":
        if inv is not None:
            check_lowered_state(inv, self.system, "invariant")
        return replace(self, invariant=inv)

    def d_form(self) -> Component:
        """The system restricted to assumption states: init and every action strengthened by the assumption."""
        return restrict(self.system, self.assume)

    def initiation(self, inv: S.Expr | None = None) -> S.Expr:
        inv = self._inv(inv)
        return S.Implies(S.conj([self.system.init, self.assume]), inv)

    def consecution(self, inv: S.Expr | None = None) -> S.Expr:
        inv = self._inv(inv)
        names = self.system.var_names
        pre = S.conj([inv, self.system.next_formula(), self.assume, S.prime_vars(self.assume, names)])
        return S.Implies(pre, S.prime_vars(inv, names))

    def safety(self, inv: S.Expr | None = None) -> S.Expr:
        return S.Implies(self._inv(inv), self.guarantee)

    def _inv(self, inv):
        inv = inv if inv is not None else self.invariant
        if inv is None:
            raise SpecError(f"obligation {self.name} has no invariant")
        return inv

    def describe(self) -> str:
        lines = [
            f"obligation {self.name} ({self.contract.kind} contract)",
            f"  system: {' || '.join(self.system.parts)}",
            f"  assume: {show(self.assume)}",
            f"  guarantee: {show(self.guarantee)}",
        ]
        if self.invariant is not None:
            lines.append(f"  invariant: {show(self.invariant)}")
        return "\n".join(lines)


def restrict(c: Component, a: S.Expr) -> Component:
    if a == S.TRUE:
        return c
    ap = S.prime_vars(a, c.var_names)
    acts = tuple(ActionDecl(x.name, x.formals, S.conj([x.body, ap]), loc=x.loc) for x in c.actions)
    return replace(c, init=S.conj([c.init, a]), actions=acts)


def check_lowered_state(e: S.Expr, system: Component, what: str) -> None:
    if S.has_primes(e) or S.is_temporal(e) or S.fluent_atoms(e):
        raise SpecError(f"{what} must be a state formula", e.loc)
    check_formula(e, system.var_sorts, system.params)


def tracked_fluents(c: Component) -> list[str]:
    """Names of fluents whose machines are already operands of `c`."""
    return [p[len(FLUENT_PART):] for p in c.parts if p.startswith(FLUENT_PART)]


def _fluent_vars(c: Component, phi: S.Expr) -> dict[str, str]:
    tracked = set(tracked_fluents(c))
    out = {}
    for f in fluents_of(phi):
        if f.name in tracked:
            prefixed = f"{f.name}_{f.var}"
            out[f.name] = prefixed if prefixed in c.var_names else f.var
    return out


def lower(contract: Contract) -> Obligation:
    """Turn any contract into a state obligation over a system that tracks the fluents it needs."""
    c = contract.component
    if contract.kind == "state":
        ob = Obligation(contract, c, contract.assume, contract.guarantee)
        return ob.with_invariant(contract.invariant)
    alpha = strip_always(contract.assume)
    missing = alphabet(alpha) - c.alphabet
    if missing:
        raise AlphabetViolation(f"assumption of {contract.name} mentions actions {sorted(missing)} the components do not have")
    parts = [alpha]
    gamma = None
    if contract.kind == "action":
        gamma = strip_always(contract.guarantee)
        missing = alphabet(gamma) - c.alphabet
        if missing:
            raise AlphabetViolation(f"guarantee of {contract.name} mentions actions {sorted(missing)} the components do not have")
        parts.append(gamma)
    present = _fluent_vars(c, S.conj(parts))
    avoid = set(c.var_names)
    b_alpha = build_bridge(alpha, avoid, c.params, skip=present, renaming=present)
    renaming = dict(b_alpha.renaming)
    comps = [b_alpha.component, c]
    if gamma is not None:
        avoid |= set(b_alpha.component.var_names)
        b_gamma = build_bridge(gamma, avoid, c.params, skip=set(renaming), renaming=renaming)
        renaming.update(b_gamma.renaming)
        comps.append(b_gamma.component)
    system = compose_all(widen(comps), name=f"D_{contract.name}")
    from .sfl import build_R

    A = build_R(alpha, renaming)
    G = build_R(gamma, renaming) if gamma is not None else contract.guarantee
    check_lowered_state(A, system, "assumption")
    check_lowered_state(G, system, "guarantee")
    ob = Obligation(contract, system, A, G, renaming=renaming)
    return ob.with_invariant(contract.invariant)


# inductive checking -------------------------------------------------------------------------


@dataclass(frozen=True)
class Cti:
    """A counterexample to induction: which condition failed and the witnessing state(s)."""

    kind: str  # initiation | consecution | safety
    state: Mapping
    successor: Mapping | None = None
    action: str | None = None
    args: tuple = ()

    @property
    def event(self) -> ActionEvent | None:
        return ActionEvent(self.action, self.args) if self.action else None

    def describe(self, sorts=None) -> str:
        head = {
            "initiation": "initial state violating the invariant",
            "consecution": f"invariant not preserved by {self.event}",
            "safety": "invariant state violating the guarantee",
        }[self.kind]
        out = [f"CTI ({self.kind}): {head}", format_state(self.state, sorts)]
        if self.successor is not None:
            out.append(f"-- {self.event} -->")
            out.append(format_state(self.successor, sorts, primed=True))
        return "\n".join(out)

    def to_json(self, sorts=None) -> dict:
        d = {"kind": self.kind, "state": format_state(self.state, sorts)}
        if self.successor is not None:
            d["action"] = str(self.event)
            d["successor"] = format_state(self.successor, sorts)
        return d


@dataclass
class InductiveResult:
    proved: bool
    cti: Cti | None = None
    obligation: Obligation | None = None
    states: int = 0
    transitions: int = 0
    seconds: float = 0.0

    @property
    def verdict(self) -> str:
        return "proved" if self.proved else f"cti:{self.cti.kind}"

    def __bool__(self):
        return self.proved


def _state_key(t: Mapping, names) -> tuple:
    return tuple(value_key(t[n]) for n in names)


class _Checker:
    """Compiled pieces shared by the inductive checker and the invariant-inference loop."""

    def __init__(self, ob: Obligation, instance, ceiling=None):
        ob.system.params and instance.require(ob.system.params)
        self.ob = ob
        self.inst = instance
        self.ceiling = state_ceiling(ceiling)
        self.sys = ob.system
        self.names = self.sys.var_names
        self.comp = Compiler(instance, self.names)
        self.A = self.comp.compile(ob.assume)
        self.steppers = [
            (a, ActionStepper(self.sys, a, self.comp, instance), action_arg_tuples(a, instance)) for a in self.sys.actions
        ]

    def holds(self, e: S.Expr, s: Mapping) -> bool:
        return bool(self.comp.compile(e)(s, None, {}))

    def search(self, constraint: S.Expr):
        return search_states(self.sys.vars, constraint, self.inst, self.comp, self.ceiling)

    def successors(self, s: Mapping):
        """(action, args, t) with t satisfying the assumption, in declaration order."""
        A = self.A
        for a, st, arg_list in self.steppers:
            for args in arg_list:
                succ = [t for t in st.successors(s, args) if A(t, None, {})]
                if succ:
                    succ.sort(key=lambda t: _state_key(t, self.names))
                    yield a.name, args, succ


def check_inductive(ob: Obligation, instance, invariant: S.Expr | None = None, ceiling: int | None = None) -> InductiveResult:
    """Check initiation, consecution (relative to the assumption) and safety of an invariant.

    Conditions are checked in that order, states in canonical order, and the
    first failure is returned, so the reported CTI is deterministic.
    """
    start = time.perf_counter()
    if invariant is not None:
        ob = ob.with_invariant(invariant)
    inv = ob._inv(None)
    ck = _Checker(ob, instance, ceiling)
    res = InductiveResult(False, obligation=ob)

    for s in ck.search(S.conj([ob.system.init, ob.assume, S.Not(inv)])):
        res.cti = Cti("initiation", s)
        res.seconds = time.perf_counter() - start
        return res

    I = ck.comp.compile(inv)
    for s in ck.search(S.conj([inv, ob.assume])):
        res.states += 1
        for name, args, succ in ck.successors(s):
            res.transitions += len(succ)
            for t in succ:
                if not I(t, None, {}):
                    res.cti = Cti("consecution", s, t, name, args)
                    res.seconds = time.perf_counter() - start
                    return res

    for s in ck.search(S.conj([inv, S.Not(ob.guarantee)])):
        res.cti = Cti("safety", s)
        res.seconds = time.perf_counter() - start
        return res

    res.proved = True
    res.seconds = time.perf_counter() - start
    return res


def cti_is_genuine(cti: Cti, ob: Obligation, instance) -> bool:
    """Re-evaluate a CTI from scratch against the obligation's formulas."""
    from .evaluator import evaluate, step_holds

    inv = ob._inv(None)
    s = cti.state
    if cti.kind == "initiation":
        return bool(evaluate(ob.system.init, s, instance) and evaluate(ob.assume, s, instance) and not evaluate(inv, s, instance))
    if cti.kind == "safety":
        return bool(evaluate(inv, s, instance) and not evaluate(ob.guarantee, s, instance))
    t = cti.successor
    return bool(
        evaluate(inv, s, instance)
        and evaluate(ob.assume, s, instance)
        and evaluate(ob.assume, t, instance)
        and step_holds(ob.system.action(cti.action), cti.args, s, t, instance)
        and not evaluate(inv, t, instance)
    )


# explicit-state fulfillment check ------------------------------------------------------------


@dataclass
class FulfillmentResult:
    holds: bool
    trace: list = field(default_factory=list)  # [(event | None, state), ...]
    states: int = 0
    obligation: Obligation | None = None
    seconds: float = 0.0

    def describe(self, sorts=None) -> str:
        if self.holds:
            return f"holds ({self.states} reachable states)"
        out = [f"violation after {len(self.trace) - 1} step(s):"]
        for i, (ev, s) in enumerate(self.trace):
            label = "initial state" if ev is None else str(ev)
            out.append(f"[{i}] {label}")
            out.append(format_state(s, sorts))
        return "\n".join(out)


def model_check_fulfillment(contract: Contract | Obligation, instance, ceiling: int | None = None) -> FulfillmentResult:
    """Breadth-first search of the system restricted to assumption states, checking the guarantee everywhere.

    For fluent assumptions this explores the tableau of the assumption in
    parallel with the components, which accepts exactly the traces on which
    the assumption always holds.
    """
    start = time.perf_counter()
    ob = contract if isinstance(contract, Obligation) else lower(contract)
    ck = _Checker(ob, instance, ceiling)
    names = ck.names
    G = ck.comp.compile(ob.guarantee)
    parent: dict = {}
    queue: deque = deque()
    for s in ck.search(S.conj([ob.system.init, ob.assume])):
        k = tuple(s[n] for n in names)
        if k not in parent:
            parent[k] = (None, None, s)
            queue.append((k, s))
    res = FulfillmentResult(True, obligation=ob)
    while queue:
        k, s = queue.popleft()
        res.states += 1
        if res.states > ck.ceiling:
            from .errors import StateSpaceOverflow

            raise StateSpaceOverflow(res.states, ck.ceiling, "reachable states")
        if not G(s, None, {}):
            res.holds = False
            res.trace = _path(parent, k)
            break
        for name, args, succ in ck.successors(s):
            for t in succ:
                kt = tuple(t[n] for n in names)
                if kt not in parent:
                    parent[kt] = (k, ActionEvent(name, args), t)
                    queue.append((kt, t))
    res.seconds = time.perf_counter() - start
    return res


def _path(parent, k) -> list:
    out = []
    while k is not None:
        prev, ev, s = parent[k]
        out.append((ev, s))
        k = prev
    out.reverse()
    return out


def reachable_states(ob: Obligation, instance, ceiling: int | None = None) -> list[dict]:
    """All states reachable in the assumption-restricted system, in BFS order."""
    ck = _Checker(ob, instance, ceiling)
    names = ck.names
    seen = {}
    queue: deque = deque()
    for s in ck.search(S.conj([ob.system.init, ob.assume])):
        k = tuple(s[n] for n in names)
        if k not in seen:
            seen[k] = s
            queue.append(s)
    while queue:
        s = queue.popleft()
        for _, _, succ in ck.successors(s):
            for t in succ:
                kt = tuple(t[n] for n in names)
                if kt not in seen:
                    seen[kt] = t
                    queue.append(t)
    return list(seen.values())


def contracts_from(seq: Sequence) -> list[Contract]:
    return [c for c in seq if isinstance(c, Contract)]
