"""Explicit-state evaluation.

Formulas are compiled once into Python closures `f(s, t, b)` where `s` and
`t` map variable names to values (current and next state) and `b` holds
bound variables (quantifiers, action formals). Everything above this module
works in terms of these closures plus a pruned depth-first state search.
"""

from __future__ import annotations

import itertools
import os
from typing import Callable, Iterable, Iterator, Mapping

from . import syntax as S
from .errors import ArityMismatch, EvalError, MissingNextState, OutOfBounds, StateSpaceOverflow
from .model import ActionDecl, Component
from .sorts import FnVal, Instance, RecVal, Sort, conforms, values_of

DEFAULT_CEILING = 10**8

Compiled = Callable[[Mapping, Mapping | None, dict], object]


def state_ceiling(override: int | None = None) -> int:
    if override is not None:
        return override
    raw = os.environ.get("CIVI_STATE_CEILING")
    if raw:
        try:
            return int(float(raw))
        except ValueError:
            pass
    return DEFAULT_CEILING


# compilation -------------------------------------------------------------------


class Compiler:
    """Turns AST nodes into closures for one instance and one set of state variables."""

    def __init__(self, instance: Instance, var_names: Iterable[str]):
        self.inst = instance
        self.vars = frozenset(var_names)
        self._cache: dict = {}

    def compile(self, e: S.Expr, bound: frozenset = frozenset()) -> Compiled:
        key = (id(e), bound)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is e:
            return hit[1]
        fn = self._c(e, bound)
        self._cache[key] = (e, fn)
        return fn

    def domain_values(self, dom: S.Expr, bound: frozenset):
        """A quantifier domain as a closure returning an ordered tuple of values."""
        if isinstance(dom, S.Name) and dom.id not in bound and dom.id not in self.vars:
            vals = tuple(self._named_set(dom.id, dom.loc))
            return lambda s, t, b: vals
        f = self._c(dom, bound)
        from .sorts import value_key

        return lambda s, t, b: tuple(sorted(f(s, t, b), key=value_key))

    def _named_set(self, name: str, loc):
        if name == "Nat":
            return range(self.inst.nat_bound + 1)
        if name == "BOOLEAN":
            return (False, True)
        if name in self.inst.params:
            return self.inst.params[name]
        raise EvalError(f"{loc}: unbound name {name!r}" if loc else f"unbound name {name!r}")

    def _c(self, e: S.Expr, bound: frozenset) -> Compiled:
        c = self._c
        if isinstance(e, S.BoolLit):
            v = e.value
            return lambda s, t, b: v
        if isinstance(e, (S.NatLit, S.StrLit)):
            v = e.value
            return lambda s, t, b: v
        if isinstance(e, S.Name):
            n = e.id
            if n in bound:
                return lambda s, t, b: b[n]
            if n in self.vars:
                return lambda s, t, b: s[n]
            vals = frozenset(self._named_set(n, e.loc))
            return lambda s, t, b: vals
        if isinstance(e, S.Prime):
            n = e.id

            def prime(s, t, b):
                if t is None:
                    raise MissingNextState(f"{n}' evaluated without a next state")
                return t[n]

            return prime
        if isinstance(e, S.Apply):
            fn = c(e.fn, bound)
            if len(e.args) == 1:
                a0 = c(e.args[0], bound)
                return lambda s, t, b: fn(s, t, b)[a0(s, t, b)]
            args = [c(a, bound) for a in e.args]
            return lambda s, t, b: fn(s, t, b)[tuple(a(s, t, b) for a in args)]
        if isinstance(e, S.FnCons):
            return self._fncons(e, bound)
        if isinstance(e, S.Except):
            return self._except(e, bound)
        if isinstance(e, S.SetEnum):
            items = [c(x, bound) for x in e.elems]
            return lambda s, t, b: frozenset(x(s, t, b) for x in items)
        if isinstance(e, S.SetFilter):
            dom = self.domain_values(e.domain, bound)
            pred = c(e.pred, bound | {e.var})
            var = e.var

            def setfilter(s, t, b):
                out = []
                old = b.get(var, _MISSING)
                for v in dom(s, t, b):
                    b[var] = v
                    if pred(s, t, b):
                        out.append(v)
                _restore(b, var, old)
                return frozenset(out)

            return setfilter
        if isinstance(e, S.SetMap):
            dom = self.domain_values(e.domain, bound)
            body = c(e.expr, bound | {e.var})
            var = e.var

            def setmap(s, t, b):
                out = []
                old = b.get(var, _MISSING)
                for v in dom(s, t, b):
                    b[var] = v
                    out.append(body(s, t, b))
                _restore(b, var, old)
                return frozenset(out)

            return setmap
        if isinstance(e, S.BinOp):
            return self._binop(e, bound)
        if isinstance(e, S.And):
            items = [c(x, bound) for x in e.items]
            if len(items) == 2:
                x0, x1 = items
                return lambda s, t, b: bool(x0(s, t, b)) and bool(x1(s, t, b))

            def conj(s, t, b):
                for x in items:
                    if not x(s, t, b):
                        return False
                return True

            return conj
        if isinstance(e, S.Or):
            items = [c(x, bound) for x in e.items]

            def disj(s, t, b):
                for x in items:
                    if x(s, t, b):
                        return True
                return False

            return disj
        if isinstance(e, S.Not):
            x = c(e.arg, bound)
            return lambda s, t, b: not x(s, t, b)
        if isinstance(e, S.Implies):
            l, r = c(e.left, bound), c(e.right, bound)
            return lambda s, t, b: (not l(s, t, b)) or bool(r(s, t, b))
        if isinstance(e, S.Iff):
            l, r = c(e.left, bound), c(e.right, bound)
            return lambda s, t, b: bool(l(s, t, b)) == bool(r(s, t, b))
        if isinstance(e, S.Quant):
            return self._quant(e, bound)
        if isinstance(e, S.TupleCons):
            items = [c(x, bound) for x in e.elems]
            return lambda s, t, b: tuple(x(s, t, b) for x in items)
        if isinstance(e, S.RecordCons):
            names = [n for n, _ in e.fields]
            items = [c(x, bound) for _, x in e.fields]
            return lambda s, t, b: RecVal(zip(names, [x(s, t, b) for x in items]))
        if isinstance(e, S.Field):
            r = c(e.rec, bound)
            name = e.name
            return lambda s, t, b: r(s, t, b)[name]
        if isinstance(e, S.IfThenElse):
            cond, th, el = c(e.cond, bound), c(e.then, bound), c(e.other, bound)
            return lambda s, t, b: th(s, t, b) if cond(s, t, b) else el(s, t, b)
        raise EvalError(f"cannot evaluate {type(e).__name__} as a state formula")

    def _fncons(self, e: S.FnCons, bound):
        doms = [self.domain_values(d, bound) for _, d in e.binders]
        names = [n for n, _ in e.binders]
        body = self._c(e.body, bound | set(names))
        if len(names) == 1:
            n0, d0 = names[0], doms[0]

            def fncons1(s, t, b):
                old = b.get(n0, _MISSING)
                out = {}
                for v in d0(s, t, b):
                    b[n0] = v
                    out[v] = body(s, t, b)
                _restore(b, n0, old)
                return FnVal(out)

            return fncons1

        def fncons(s, t, b):
            olds = [b.get(n, _MISSING) for n in names]
            out = {}
            for combo in itertools.product(*(d(s, t, b) for d in doms)):
                for n, v in zip(names, combo):
                    b[n] = v
                out[combo] = body(s, t, b)
            for n, old in zip(names, olds):
                _restore(b, n, old)
            return FnVal(out)

        return fncons

    def _except(self, e: S.Except, bound):
        base = self._c(e.fn, bound)
        updates = []
        for path, val in e.updates:
            steps = []
            for step in path:
                if isinstance(step, str):
                    steps.append((True, step))
                elif len(step) == 1:
                    steps.append((False, self._c(step[0], bound)))
                else:
                    parts = [self._c(x, bound) for x in step]
                    steps.append((False, _tuple_of(parts)))
            updates.append((steps, self._c(val, bound)))

        def except_(s, t, b):
            cur = base(s, t, b)
            for steps, val in updates:
                keys = [(is_field, step if is_field else step(s, t, b)) for is_field, step in steps]
                cur = _update_path(cur, keys, val(s, t, b))
            return cur

        return except_

    def _binop(self, e: S.BinOp, bound):
        l, r = self._c(e.left, bound), self._c(e.right, bound)
        op = e.op
        if op == "=":
            return lambda s, t, b: l(s, t, b) == r(s, t, b)
        if op == "/=":
            return lambda s, t, b: l(s, t, b) != r(s, t, b)
        if op == "\\in":
            return lambda s, t, b: l(s, t, b) in r(s, t, b)
        if op == "\\notin":
            return lambda s, t, b: l(s, t, b) not in r(s, t, b)
        if op == "\\subseteq":
            return lambda s, t, b: l(s, t, b) <= r(s, t, b)
        if op == "\\cup":
            return lambda s, t, b: l(s, t, b) | r(s, t, b)
        if op == "\\cap":
            return lambda s, t, b: l(s, t, b) & r(s, t, b)
        if op == "\\":
            return lambda s, t, b: l(s, t, b) - r(s, t, b)
        if op == "<":
            return lambda s, t, b: l(s, t, b) < r(s, t, b)
        if op == "<=":
            return lambda s, t, b: l(s, t, b) <= r(s, t, b)
        if op == ">":
            return lambda s, t, b: l(s, t, b) > r(s, t, b)
        if op == ">=":
            return lambda s, t, b: l(s, t, b) >= r(s, t, b)
        bound_ = self.inst.nat_bound
        if op == "+":

            def plus(s, t, b):
                v = l(s, t, b) + r(s, t, b)
                if v > bound_:
                    raise OutOfBounds(f"natural {v} exceeds natBound {bound_}")
                return v

            return plus
        if op == "-":

            def minus(s, t, b):
                v = l(s, t, b) - r(s, t, b)
                if v < 0:
                    raise OutOfBounds(f"natural subtraction below zero ({v})")
                return v

            return minus
        raise EvalError(f"unknown operator {op}")

    def _quant(self, e: S.Quant, bound):
        # one binder at a time so later domains may mention earlier binders
        names = [n for n, _ in e.binders]
        doms = []
        inner = bound
        for n, d in e.binders:
            doms.append(self.domain_values(d, inner))
            inner = inner | {n}
        body = self._c(e.body, inner)
        universal = e.kind == "A"

        def rec(i, s, t, b):
            if i == len(names):
                return bool(body(s, t, b))
            n = names[i]
            for v in doms[i](s, t, b):
                b[n] = v
                if rec(i + 1, s, t, b) != universal:
                    return not universal
            return universal

        if len(names) == 1:
            n0, d0 = names[0], doms[0]

            def quant1(s, t, b):
                old = b.get(n0, _MISSING)
                res = universal
                for v in d0(s, t, b):
                    b[n0] = v
                    if bool(body(s, t, b)) != universal:
                        res = not universal
                        break
                _restore(b, n0, old)
                return res

            return quant1

        def quant(s, t, b):
            olds = [b.get(n, _MISSING) for n in names]
            res = rec(0, s, t, b)
            for n, old in zip(names, olds):
                _restore(b, n, old)
            return res

        return quant


_MISSING = object()


def _restore(b: dict, name: str, old) -> None:
    if old is _MISSING:
        b.pop(name, None)
    else:
        b[name] = old


def _tuple_of(parts):
    return lambda s, t, b: tuple(p(s, t, b) for p in parts)


def _update_path(cur, keys, value):
    if not keys:
        return value
    (is_field, k), rest = keys[0], keys[1:]
    if is_field:
        if not isinstance(cur, RecVal):
            raise EvalError("EXCEPT field update on a non-record")
        return cur.updated(k, _update_path(cur[k], rest, value))
    if not isinstance(cur, FnVal):
        raise EvalError("EXCEPT index update on a non-function")
    if k not in cur:
        raise EvalError(f"EXCEPT index {k!r} outside the function domain")
    return cur.updated(k, _update_path(cur[k], rest, value))


# convenience evaluation -----------------------------------------------------------------


def evaluate(formula: S.Expr, state: Mapping, instance: Instance, next: Mapping | None = None, env: Mapping | None = None):
    """Denotation of `formula` at `state` (and `next` for primed references)."""
    var_names = set(state) | set(next or ())
    b = dict(env or {})
    comp = Compiler(instance, var_names)
    return comp.compile(formula, frozenset(b))(state, next, b)


def step_holds(action: ActionDecl, args, s: Mapping, t: Mapping, instance: Instance) -> bool:
    args = tuple(args)
    if len(args) != len(action.formals):
        raise ArityMismatch(f"{action.name} takes {len(action.formals)} argument(s), got {len(args)}")
    b = dict(zip(action.formal_names, args))
    comp = Compiler(instance, set(s) | set(t))
    return bool(comp.compile(action.body, frozenset(b))(s, t, b))


def action_arg_tuples(action: ActionDecl, instance: Instance) -> list[tuple]:
    spaces = [values_of(sort, instance) for _, sort in action.formals]
    return list(itertools.product(*spaces))


# state search --------------------------------------------------------------------------


def enumerate_states(component: Component, instance: Instance, ceiling: int | None = None) -> Iterator[dict]:
    """Every type-correct state of the component in canonical order."""
    ceiling = state_ceiling(ceiling)
    instance.require(component.params)
    spaces = [values_of(sort, instance) for _, sort in component.vars]
    total = 1
    for sp in spaces:
        total *= len(sp)
    if total > ceiling:
        raise StateSpaceOverflow(total, ceiling)
    names = component.var_names
    for combo in itertools.product(*spaces):
        yield dict(zip(names, combo))


def state_count(component: Component, instance: Instance) -> int:
    n = 1
    for _, sort in component.vars:
        n *= len(values_of(sort, instance))
    return n


def split_conjuncts(e: S.Expr) -> list[S.Expr]:
    """Conjuncts, with universal quantifiers distributed over conjunctive bodies."""
    out = []
    for c in S.conjuncts(e):
        if isinstance(c, S.Quant) and c.kind == "A":
            parts = split_conjuncts(c.body)
            if len(parts) > 1:
                out.extend(S.Quant("A", c.binders, p, loc=c.loc) for p in parts)
                continue
        out.append(c)
    return out


class StateSearch:
    """Depth-first enumeration of the states satisfying a prime-free constraint.

    Variables are assigned in declaration order and each conjunct is tested
    as soon as all variables it mentions are assigned, so results come out in
    the same lexicographic order as `enumerate_states` but whole subtrees are
    skipped. Equations `v = e` whose right side is already determined fix `v`
    to a single candidate. The ceiling bounds the number of search nodes.
    """

    def __init__(self, component_vars: tuple[tuple[str, Sort], ...], constraint: S.Expr, compiler: Compiler, instance: Instance):
        self.vars = list(component_vars)
        self.inst = instance
        names = [n for n, _ in self.vars]
        pos = {n: i for i, n in enumerate(names)}
        self.checks: list[list] = [[] for _ in range(len(names) + 1)]
        self.fixers: dict[int, Compiled] = {}
        for conj in split_conjuncts(constraint):
            mentioned = S.free_names(conj) & set(names)
            depth = max((pos[n] + 1 for n in mentioned), default=0)
            fixed = self._fixer(conj, pos)
            if fixed is not None and fixed[0] not in self.fixers:
                idx, rhs = fixed
                self.fixers[idx] = compiler.compile(rhs)
            self.checks[depth].append(compiler.compile(conj))
        self.spaces = [values_of(sort, instance) for _, sort in self.vars]
        self.sorts = [sort for _, sort in self.vars]

    @staticmethod
    def _fixer(conj, pos):
        if not isinstance(conj, S.BinOp) or conj.op != "=":
            return None
        for lhs, rhs in ((conj.left, conj.right), (conj.right, conj.left)):
            if isinstance(lhs, S.Name) and lhs.id in pos:
                idx = pos[lhs.id]
                deps = S.free_names(rhs) & set(pos)
                if all(pos[d] < idx for d in deps) and not S.has_primes(rhs):
                    return idx, rhs
        return None

    def run(self, ceiling: int | None = None) -> Iterator[dict]:
        ceiling = state_ceiling(ceiling)
        names = [n for n, _ in self.vars]
        n = len(names)
        s: dict = {}
        b: dict = {}
        visited = [0]
        for chk in self.checks[0]:
            if not chk(s, None, b):
                return

        def rec(i):
            if i == n:
                yield dict(s)
                return
            name = names[i]
            fixer = self.fixers.get(i)
            if fixer is not None:
                v = fixer(s, None, b)
                cands = (v,) if conforms(v, self.sorts[i], self.inst) else ()
            else:
                cands = self.spaces[i]
            checks = self.checks[i + 1]
            for v in cands:
                visited[0] += 1
                if visited[0] > ceiling:
                    raise StateSpaceOverflow(visited[0], ceiling, "search")
                s[name] = v
                ok = True
                for chk in checks:
                    if not chk(s, None, b):
                        ok = False
                        break
                if ok:
                    yield from rec(i + 1)
            s.pop(name, None)

        yield from rec(0)


def search_states(component_vars, constraint: S.Expr, instance: Instance, compiler: Compiler | None = None, ceiling=None) -> Iterator[dict]:
    if compiler is None:
        compiler = Compiler(instance, [n for n, _ in component_vars])
    return StateSearch(tuple(component_vars), constraint, compiler, instance).run(ceiling)


# successor generation -------------------------------------------------------------------


class ActionStepper:
    """Computes the successors of a state under one action with bound arguments.

    The body is split into disjunctive branches; within a branch, `v' = e`
    equations with an unprimed right side fix `v'` directly, unprimed
    conjuncts act as guards on the current state, and everything else is
    filtered after the candidate successor is built. Variables a branch does
    not fix range over their whole value space.
    """

    def __init__(self, component: Component, action: ActionDecl, compiler: Compiler, instance: Instance):
        self.component = component
        self.action = action
        self.inst = instance
        self.names = component.var_names
        self.sorts = dict(component.vars)
        formals = frozenset(action.formal_names)
        self.formals = action.formal_names
        self.branches = []
        for branch in _dnf_branches(action.body):
            guards, defs, rest = [], {}, []
            for c in branch:
                if not S.has_primes(c):
                    guards.append(compiler.compile(c, formals))
                    continue
                d = _prime_def(c)
                if d is not None and d[0] not in defs and d[0] in self.sorts:
                    defs[d[0]] = compiler.compile(d[1], formals)
                else:
                    rest.append(compiler.compile(c, formals))
            free = [v for v in self.names if v not in defs]
            free_spaces = [values_of(self.sorts[v], instance) for v in free]
            self.branches.append((guards, defs, rest, free, free_spaces))

    def successors(self, s: Mapping, args: tuple) -> list[dict]:
        b = dict(zip(self.formals, args))
        seen = set()
        out = []
        for guards, defs, rest, free, free_spaces in self.branches:
            if not all(g(s, None, b) for g in guards):
                continue
            base = {}
            ok = True
            for v, f in defs.items():
                val = f(s, None, b)
                if not conforms(val, self.sorts[v], self.inst):
                    ok = False
                    break
                base[v] = val
            if not ok:
                continue
            for combo in itertools.product(*free_spaces) if free else ((),):
                t = dict(base)
                t.update(zip(free, combo))
                t = {v: t[v] for v in self.names}
                if all(r(s, t, b) for r in rest):
                    key = tuple(t[v] for v in self.names)
                    if key not in seen:
                        seen.add(key)
                        out.append(t)
        return out


def _prime_def(c: S.Expr):
    if isinstance(c, S.BinOp) and c.op == "=":
        for lhs, rhs in ((c.left, c.right), (c.right, c.left)):
            if isinstance(lhs, S.Prime) and not S.has_primes(rhs):
                return lhs.id, rhs
    return None


def _dnf_branches(body: S.Expr, limit: int = 64) -> list[list[S.Expr]]:
    """Conjunct lists whose disjunction is `body`; only primed disjunctions are split."""
    branches: list[list[S.Expr]] = [[]]
    for c in S.conjuncts(body):
        if isinstance(c, S.Or) and S.has_primes(c) and len(branches) * len(c.items) <= limit:
            alts = []
            for item in c.items:
                alts.extend(_dnf_branches(item, limit))
            branches = [br + alt for br in branches for alt in alts]
        else:
            for br in branches:
                br.append(c)
    return branches


class Stepper:
    """Successor generation for a whole component, cached per action."""

    def __init__(self, component: Component, instance: Instance, compiler: Compiler | None = None):
        self.component = component
        self.inst = instance
        self.compiler = compiler or Compiler(instance, component.var_names)
        self.actions = [(a, ActionStepper(component, a, self.compiler, instance), action_arg_tuples(a, instance)) for a in component.actions]

    def steps(self, s: Mapping) -> Iterator[tuple[str, tuple, dict]]:
        for a, st, arg_list in self.actions:
            for args in arg_list:
                for t in st.successors(s, args):
                    yield a.name, args, t

    def successors_for(self, name: str, args: tuple, s: Mapping) -> list[dict]:
        for a, st, _ in self.actions:
            if a.name == name:
                return st.successors(s, tuple(args))
        return []


def initial_states(component: Component, instance: Instance, extra: S.Expr = S.TRUE, compiler=None, ceiling=None) -> Iterator[dict]:
    constraint = S.conj([component.init, extra])
    return search_states(component.vars, constraint, instance, compiler or Compiler(instance, component.var_names), ceiling)


def state_key(state: Mapping, names) -> tuple:
    return tuple(state[n] for n in names)
