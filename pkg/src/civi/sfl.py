"""Simple fluent logic over finite action traces.

A fluent is a deterministic machine with one boolean-function variable
whose value after a trace prefix is what a fluent atom reads. This module
holds the trace semantics (`check_trace`), the translation of formulas into
state formulas over fluent variables (`build_R`), and the two machines
built from a formula: the bridge machine `build_B` that tracks every fluent
it mentions and the tableau `build_T` whose traces are exactly the models
of an always-formula.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import syntax as S
from .compose import compose_all, widen
from .errors import (
    ArityMismatch,
    EvalError,
    FreeVariable,
    IllSorted,
    NoInitialState,
    NonDeterministicFluent,
    SharedVariable,
    SpecError,
    UnknownFluent,
)
from .evaluator import ActionStepper, Compiler, action_arg_tuples, enumerate_states, initial_states
from .model import ActionDecl, ActionEvent, Component
from .sorts import BOOL, NAT, AtomSort, BoolSort, FnSort, Instance, NatSort, Sort, conforms, values_of


def fluent_var_sort(arg_sorts: Sequence[Sort]) -> Sort:
    """Curried boolean function sort: `[A -> [B -> BOOLEAN]]` for two arguments."""
    out: Sort = BOOL
    for s in reversed(tuple(arg_sorts)):
        out = FnSort((s,), out)
    return out


@dataclass(frozen=True)
class Fluent:
    name: str
    arg_sorts: tuple[Sort, ...]
    var: str
    machine: Component = field(compare=False)

    @property
    def var_sort(self) -> Sort:
        return fluent_var_sort(self.arg_sorts)

    @property
    def alphabet(self) -> frozenset[str]:
        return self.machine.alphabet

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)

    @property
    def params(self) -> frozenset[str]:
        return self.machine.params


def make_fluent(name: str, arg_sorts, var: str, init: S.Expr, actions: Sequence[ActionDecl], params=()) -> Fluent:
    """Package a fluent's machine; parameters default to those its sorts mention."""
    arg_sorts = tuple(arg_sorts)
    ps = set(params)
    for s in arg_sorts:
        if isinstance(s, AtomSort):
            ps.add(s.param)
    for a in actions:
        for _, s in a.formals:
            if isinstance(s, AtomSort):
                ps.add(s.param)
    machine = Component(
        name,
        frozenset(ps),
        ((var, fluent_var_sort(arg_sorts)),),
        init,
        tuple(actions),
        origin="fluent",
        parts=(f"fluent:{name}",),
    )
    return Fluent(name, arg_sorts, var, machine)


# formula helpers -------------------------------------------------------------------


def fluents_of(phi: S.Expr) -> list[Fluent]:
    """Distinct fluents mentioned by `phi`, in order of first occurrence."""
    out: list[Fluent] = []
    seen: set[str] = set()
    for atom in S.fluent_atoms(phi):
        if atom.ref is None:
            raise UnknownFluent(f"fluent atom {atom.fluent} is not linked to a declaration", atom.loc)
        if atom.fluent not in seen:
            seen.add(atom.fluent)
            out.append(atom.ref)
    return out


def alphabet(phi: S.Expr) -> frozenset[str]:
    acts: frozenset = frozenset()
    for f in fluents_of(phi):
        acts |= f.alphabet
    return acts


def params_of(phi: S.Expr) -> frozenset[str]:
    ps: set[str] = set()
    for f in fluents_of(phi):
        ps |= f.params
    for node in S.walk(phi):
        if isinstance(node, S.Quant):
            for _, dom in node.binders:
                if isinstance(dom, S.Name) and dom.id not in ("Nat", "BOOLEAN"):
                    ps.add(dom.id)
    return frozenset(ps)


def desugar(phi: S.Expr) -> S.Expr:
    """Rewrite into the core connectives: negation, disjunction, existential, until and next."""

    def fix(e):
        if isinstance(e, S.And):
            return S.Not(S.Or(tuple(S.Not(i) for i in e.items)))
        if isinstance(e, S.Implies):
            return S.Or((S.Not(e.left), e.right))
        if isinstance(e, S.Iff):
            a, b = e.left, e.right
            both = S.Not(S.Or((S.Not(a), S.Not(b))))
            neither = S.Not(S.Or((a, b)))
            return S.Or((both, neither))
        if isinstance(e, S.Quant) and e.kind == "A":
            return S.Not(S.Quant("E", e.binders, S.Not(e.body)))
        if isinstance(e, S.Always):
            return S.Not(S.Until(S.TRUE, S.Not(e.arg)))
        if isinstance(e, S.Eventually):
            return S.Until(S.TRUE, e.arg)
        return None

    return S.transform(phi, fix)


def strip_always(phi: S.Expr) -> S.Expr:
    """`[]p` -> `p`; anything else unchanged."""
    while isinstance(phi, S.Always):
        phi = phi.arg
    return phi


# linking -------------------------------------------------------------------------


def _binder_sort(dom: S.Expr, params) -> Sort:
    if isinstance(dom, S.Name):
        if dom.id == "Nat":
            return NAT
        if dom.id == "BOOLEAN":
            return BOOL
        if dom.id in params:
            return AtomSort(dom.id)
    raise SpecError("SFL quantifiers range over a parameter, Nat or BOOLEAN", dom.loc)


def link(phi: S.Expr, fluents: Mapping[str, Fluent], params: Iterable[str] = ()) -> S.Expr:
    """Attach fluent declarations to atoms and check arities, argument sorts and scoping."""
    params = set(params)
    for f in fluents.values():
        params |= f.params
    for node in S.walk(phi):
        if isinstance(node, S.Quant):
            for _, dom in node.binders:
                if isinstance(dom, S.Name) and dom.id not in ("Nat", "BOOLEAN"):
                    params.add(dom.id)
    if S.has_primes(phi):
        raise SpecError("SFL formulas cannot mention primed variables", phi.loc)

    def go(e: S.Expr, bound: dict) -> S.Expr:
        if isinstance(e, S.FluentAtom):
            f = fluents.get(e.fluent)
            if f is None:
                raise UnknownFluent(f"unknown fluent {e.fluent!r}", e.loc)
            if len(e.args) != f.arity:
                raise ArityMismatch(f"fluent {f.name} takes {f.arity} argument(s), got {len(e.args)}", e.loc)
            for a, want in zip(e.args, f.arg_sorts):
                if a not in bound:
                    raise FreeVariable(a, e.loc)
                if bound[a] != want:
                    raise IllSorted(f"argument {a} of {f.name}", e.loc, expected=want, found=bound[a])
            return S.FluentAtom(e.fluent, e.args, ref=f, loc=e.loc)
        if isinstance(e, S.Name):
            if e.id not in bound and e.id not in params and e.id not in ("Nat", "BOOLEAN"):
                raise FreeVariable(e.id, e.loc)
            return e
        if isinstance(e, S.Quant):
            inner = dict(bound)
            binders = []
            for n, dom in e.binders:
                inner[n] = _binder_sort(dom, params)
                binders.append((n, dom))
            return S.Quant(e.kind, tuple(binders), go(e.body, inner), loc=e.loc)
        if isinstance(e, (S.FnCons, S.SetFilter, S.SetMap)):
            raise SpecError("SFL formulas cannot build functions or sets", e.loc)
        return _map_children(e, lambda c: go(c, bound))

    linked = go(phi, {})
    _typecheck(linked, params)
    return linked


def _map_children(e: S.Expr, fn) -> S.Expr:
    from dataclasses import fields, replace

    changes = {}
    for f in fields(e):
        if f.name in ("loc", "ref"):
            continue
        v = getattr(e, f.name)
        if isinstance(v, S.Expr):
            changes[f.name] = fn(v)
        elif isinstance(v, tuple) and v and all(isinstance(x, S.Expr) for x in v):
            changes[f.name] = tuple(fn(x) for x in v)
    return replace(e, **changes) if changes else e


def _typecheck(phi: S.Expr, params) -> None:
    from .typecheck import check_formula

    def flatten(e):
        if isinstance(e, S.Until):
            return S.And((e.left, e.right))
        if isinstance(e, (S.NextOp, S.Always, S.Eventually)):
            return e.arg
        return None

    flat = S.transform(phi, flatten)
    vars_ = {f.var: f.var_sort for f in fluents_of(phi)}
    check_formula(build_R(flat), vars_, params)


# trace semantics -------------------------------------------------------------------


def _unique_init(machine: Component, instance: Instance) -> dict:
    inits = list(initial_states(machine, instance))
    if not inits:
        raise NoInitialState(f"fluent {machine.name} has no initial state")
    if len(inits) > 1:
        raise NonDeterministicFluent(f"fluent {machine.name} has {len(inits)} initial states")
    return inits[0]


@functools.lru_cache(maxsize=256)
def _steppers(machine: Component, instance: Instance):
    comp = Compiler(instance, machine.var_names)
    return comp, {a.name: ActionStepper(machine, a, comp, instance) for a in machine.actions}


def fluent_step(f: Fluent, instance: Instance, value, event: ActionEvent):
    """The fluent value after `event`; events outside the alphabet leave it unchanged."""
    _, steppers = _steppers(f.machine, instance)
    st = steppers.get(event.name)
    if st is None:
        return value
    if len(event.args) != len(st.formals):
        raise ArityMismatch(f"{event.name} takes {len(st.formals)} argument(s) in fluent {f.name}, got {len(event.args)}")
    succ = st.successors({f.var: value}, tuple(event.args))
    if len(succ) != 1:
        what = "no successor" if not succ else f"{len(succ)} successors"
        raise NonDeterministicFluent(f"fluent {f.name} has {what} on {event}")
    return succ[0][f.var]


def fluent_run(f: Fluent, trace: Sequence[ActionEvent], instance: Instance):
    """Value of the fluent variable after running the machine on `trace`."""
    return fluent_values(f, trace, instance)[-1]


def fluent_values(f: Fluent, trace: Sequence[ActionEvent], instance: Instance) -> list:
    """Values after each prefix of `trace`, starting with the empty prefix."""
    v = _unique_init(f.machine, instance)[f.var]
    out = [v]
    for ev in trace:
        v = fluent_step(f, instance, v, ev)
        out.append(v)
    return out


def _read(value, args: tuple):
    for a in args:
        value = value[a]
    return value


def check_trace(phi: S.Expr, trace: Sequence[ActionEvent], instance: Instance, env: Mapping | None = None) -> bool:
    """Whether the finite trace satisfies `phi`, read at the empty prefix."""
    return trace_verdicts(phi, trace, instance, env, positions=(0,))[0]


def trace_verdicts(
    phi: S.Expr,
    trace: Sequence[ActionEvent],
    instance: Instance,
    env: Mapping | None = None,
    positions: Sequence[int] | None = None,
) -> list[bool]:
    """Truth of `phi` at each position (all of 0..len(trace) by default).

    Positions run over the prefixes of the trace, from empty to full. Until
    needs its witness inside the trace and next is false at the last position.
    """
    trace = tuple(trace)
    n = len(trace)
    runs = {f.name: fluent_values(f, trace, instance) for f in fluents_of(phi)}
    comp = Compiler(instance, ())

    def domain(dom: S.Expr):
        return tuple(comp.domain_values(dom, frozenset())({}, None, {}))

    def sat(e: S.Expr, i: int, b: dict) -> bool:
        if isinstance(e, S.FluentAtom):
            return bool(_read(runs[e.fluent][i], tuple(b[a] for a in e.args)))
        if isinstance(e, S.BoolLit):
            return e.value
        if isinstance(e, S.Not):
            return not sat(e.arg, i, b)
        if isinstance(e, S.And):
            return all(sat(x, i, b) for x in e.items)
        if isinstance(e, S.Or):
            return any(sat(x, i, b) for x in e.items)
        if isinstance(e, S.Implies):
            return (not sat(e.left, i, b)) or sat(e.right, i, b)
        if isinstance(e, S.Iff):
            return sat(e.left, i, b) == sat(e.right, i, b)
        if isinstance(e, S.Quant):
            return _quant(e, list(e.binders), i, b)
        if isinstance(e, S.NextOp):
            return i < n and sat(e.arg, i + 1, b)
        if isinstance(e, S.Until):
            for k in range(i, n + 1):
                if sat(e.right, k, b):
                    return True
                if not sat(e.left, k, b):
                    return False
            return False
        if isinstance(e, S.Always):
            return all(sat(e.arg, k, b) for k in range(i, n + 1))
        if isinstance(e, S.Eventually):
            return any(sat(e.arg, k, b) for k in range(i, n + 1))
        if S.fluent_atoms(e) or S.is_temporal(e):
            raise EvalError(f"unsupported SFL construct {type(e).__name__}")
        return bool(comp.compile(e, frozenset(b))({}, None, dict(b)))

    def _quant(e: S.Quant, binders, i, b) -> bool:
        if not binders:
            return sat(e.body, i, b)
        name, dom = binders[0]
        want = e.kind == "E"
        for v in domain(dom):
            inner = dict(b)
            inner[name] = v
            if _quant(e, binders[1:], i, inner) == want:
                return want
        return not want

    if positions is None:
        positions = range(n + 1)
    return [sat(phi, i, dict(env or {})) for i in positions]


# translation to state formulas -----------------------------------------------------------


def build_R(phi: S.Expr, renaming: Mapping[str, str] | None = None) -> S.Expr:
    """Replace each fluent atom `f(a, b)` with `v[a][b]`, `v` the fluent's (possibly renamed) variable."""
    renaming = renaming or {}

    def fix(e):
        if isinstance(e, S.FluentAtom):
            var = renaming.get(e.fluent)
            if var is None:
                if e.ref is None:
                    raise UnknownFluent(f"fluent atom {e.fluent} is not linked", e.loc)
                var = e.ref.var
            out: S.Expr = S.Name(var, loc=e.loc)
            for a in e.args:
                out = S.Apply(out, (S.Name(a),), loc=e.loc)
            return out
        return None

    return S.transform(phi, fix)


@dataclass(frozen=True)
class Bridge:
    """The machine tracking the fluents of a formula, plus how their variables were named."""

    component: Component
    renaming: Mapping[str, str]
    fluents: tuple[Fluent, ...]
    machines: tuple[Component, ...]

    def R(self, phi: S.Expr) -> S.Expr:
        return build_R(phi, self.renaming)


def fluent_machine(f: Fluent, var: str | None = None, params: Iterable[str] = ()) -> Component:
    m = f.machine
    if var and var != f.var:
        from dataclasses import replace

        m = replace(
            m,
            vars=((var, m.vars[0][1]),),
            init=S.rename_vars(m.init, {f.var: var}),
            actions=tuple(
                ActionDecl(a.name, a.formals, S.rename_vars(a.body, {f.var: var}), loc=a.loc) for a in m.actions
            ),
        )
    return m.with_params(params)


def build_bridge(
    phi: S.Expr,
    avoid: Iterable[str] = (),
    params: Iterable[str] = (),
    skip: Iterable[str] = (),
    renaming: Mapping[str, str] | None = None,
) -> Bridge:
    """Composition of the machines of every fluent in `phi`.

    Variables colliding with a name in `avoid` are prefixed with the fluent
    name. Fluents listed in `skip` are assumed to be tracked elsewhere under
    the variable given in `renaming` (or their own).
    """
    avoid = set(avoid)
    skip = set(skip)
    fl = fluents_of(phi)
    params = set(params)
    for f in fl:
        params |= f.params
    names: dict[str, str] = dict(renaming or {})
    machines = []
    used: dict[str, str] = {}
    for f in fl:
        if f.name in skip:
            names.setdefault(f.name, f.var)
            continue
        var = f.var
        if var in avoid:
            var = f"{f.name}_{f.var}"
        if var in used:
            raise SharedVariable(var)
        used[var] = f.name
        names[f.name] = var
        machines.append(fluent_machine(f, var, params))
    machines = widen(machines)
    comp = compose_all(machines)
    if machines:
        comp = comp.renamed("B_" + "_".join(m.name for m in machines)) if len(machines) > 1 else comp
    return Bridge(comp, names, tuple(fl), tuple(machines))


def build_B(phi: S.Expr, avoid: Iterable[str] = (), params: Iterable[str] = ()) -> Component:
    return build_bridge(phi, avoid, params).component


def build_T(phi: S.Expr, avoid: Iterable[str] = (), params: Iterable[str] = ()) -> Component:
    """Tableau of `[]p` for a non-temporal `p`: the bridge machine constrained to states where `p` holds."""
    body = strip_always(phi)
    if S.is_temporal(body):
        raise SpecError("tableau construction needs a formula of the form []p with p free of temporal operators", phi.loc)
    br = build_bridge(body, avoid, params)
    r = br.R(body)
    vars_ = br.component.var_names
    rp = S.prime_vars(r, vars_)
    c = br.component
    from dataclasses import replace

    acts = tuple(ActionDecl(a.name, a.formals, S.conj([a.body, rp]), loc=a.loc) for a in c.actions)
    if not c.vars:
        params = set(params) | params_of(body)
        return Component("T", frozenset(params), (), S.conj([r]) if r != S.TRUE else S.TRUE, (), origin="tableau")
    return replace(c, name="T_" + c.name, init=S.conj([c.init, r]), actions=acts, origin="tableau")


def accepts(machine: Component, trace: Sequence[ActionEvent], instance: Instance) -> bool:
    """Trace membership: events outside the machine's alphabet stutter, others must have a successor."""
    comp = Compiler(instance, machine.var_names)
    current = {tuple(s[v] for v in machine.var_names): s for s in initial_states(machine, instance, compiler=comp)}
    if not current:
        return False
    steppers = {a.name: ActionStepper(machine, a, comp, instance) for a in machine.actions}
    for ev in trace:
        st = steppers.get(ev.name)
        if st is None:
            continue
        nxt = {}
        for s in current.values():
            for t in st.successors(s, tuple(ev.args)):
                nxt[tuple(t[v] for v in machine.var_names)] = t
        if not nxt:
            return False
        current = nxt
    return True


# fluent validation ---------------------------------------------------------------------


@dataclass(frozen=True)
class FluentProblem:
    kind: str  # single-variable | sort-shape | initial-state | determinism | enabledness
    detail: str
    witness: tuple = ()


@dataclass(frozen=True)
class FluentReport:
    fluent: str
    instance: Instance
    problems: tuple[FluentProblem, ...] = ()
    states_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.problems

    def first(self, kind: str | None = None) -> FluentProblem | None:
        for p in self.problems:
            if kind is None or p.kind == kind:
                return p
        return None

    def __str__(self):
        if self.ok:
            return f"fluent {self.fluent}: ok ({self.states_checked} states, {self.instance.describe()})"
        lines = [f"fluent {self.fluent}: {len(self.problems)} problem(s)"]
        lines += [f"  {p.kind}: {p.detail}" for p in self.problems]
        return "\n".join(lines)


def validate_fluent(f: Fluent, instance: Instance, limit: int = 1) -> FluentReport:
    """Check the fluent's machine is a one-variable boolean function that steps deterministically on every action.

    `limit` bounds how many witnesses of each kind are collected.
    """
    m = f.machine
    probs: list[FluentProblem] = []
    if len(m.vars) != 1 or m.vars[0][0] != f.var:
        probs.append(FluentProblem("single-variable", f"machine must declare exactly the variable {f.var}"))
        return FluentReport(f.name, instance, tuple(probs))
    sort = m.vars[0][1]
    if sort != f.var_sort:
        probs.append(FluentProblem("sort-shape", f"variable sort {sort} is not {f.var_sort}"))
        return FluentReport(f.name, instance, tuple(probs))
    for s in f.arg_sorts:
        if not isinstance(s, (AtomSort, NatSort, BoolSort)):
            probs.append(FluentProblem("sort-shape", f"argument sort {s} is not a parameter or Nat"))
    instance.require(m.params)
    comp = Compiler(instance, m.var_names)
    inits = list(initial_states(m, instance, compiler=comp))
    if len(inits) != 1:
        probs.append(FluentProblem("initial-state", f"{len(inits)} initial states", tuple(inits[:2])))
    counts = {"determinism": 0, "enabledness": 0}
    n = 0
    for a in m.actions:
        st = ActionStepper(m, a, comp, instance)
        arg_list = action_arg_tuples(a, instance)
        for s in enumerate_states(m, instance):
            if a is m.actions[0]:
                n += 1
            for args in arg_list:
                succ = st.successors(s, args)
                if len(succ) > 1 and counts["determinism"] < limit:
                    counts["determinism"] += 1
                    probs.append(
                        FluentProblem(
                            "determinism",
                            f"{ActionEvent(a.name, args)} has {len(succ)} successors",
                            (a.name, args, s, succ[0], succ[1]),
                        )
                    )
                elif not succ and counts["enabledness"] < limit:
                    counts["enabledness"] += 1
                    probs.append(
                        FluentProblem("enabledness", f"{ActionEvent(a.name, args)} is disabled", (a.name, args, s))
                    )
    if not m.actions:
        n = sum(1 for _ in enumerate_states(m, instance))
    return FluentReport(f.name, instance, tuple(probs), n)


def all_actions_enabled(c: Component, instance: Instance) -> tuple | None:
    """First (action, args, state) where an action has no successor, or None if every action is always enabled."""
    comp = Compiler(instance, c.var_names)
    for a in c.actions:
        st = ActionStepper(c, a, comp, instance)
        arg_list = action_arg_tuples(a, instance)
        for s in enumerate_states(c, instance):
            for args in arg_list:
                if not st.successors(s, args):
                    return (a.name, args, s)
    return None


def conforms_fluent_value(f: Fluent, value, instance: Instance) -> bool:
    return conforms(value, f.var_sort, instance)


def domain_tuples(f: Fluent, instance: Instance) -> list[tuple]:
    import itertools

    return list(itertools.product(*(values_of(s, instance) for s in f.arg_sorts)))
