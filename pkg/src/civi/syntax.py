"""Formula and term AST shared by state formulas and SFL formulas.

Names stay unresolved (`Name`) in the tree; whether a name is a state
variable, a parameter, a bound variable or a definition is decided by the
context that consumes the formula. Source locations never take part in
equality, so a reparsed pretty-print compares equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any, Callable, Iterator


@dataclass(frozen=True)
class Loc:
    line: int
    col: int
    path: str | None = None

    def __str__(self):
        where = f"{self.path}:" if self.path else ""
        return f"{where}{self.line}:{self.col}"


@dataclass(frozen=True)
class Expr:
    loc: Loc | None = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class NatLit(Expr):
    value: int


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class Name(Expr):
    id: str


@dataclass(frozen=True)
class Prime(Expr):
    """`v'` -- the value of state variable `v` in the successor state."""

    id: str


@dataclass(frozen=True)
class Apply(Expr):
    fn: Expr
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class FnCons(Expr):
    """`[x \\in D, y \\in E |-> body]`"""

    binders: tuple[tuple[str, Expr], ...]
    body: Expr


# an EXCEPT path step is a tuple of index expressions (`[a]`, `[a, b]`) or a
# record field name (`.f`)
PathStep = Any


@dataclass(frozen=True)
class Except(Expr):
    fn: Expr
    updates: tuple[tuple[tuple[PathStep, ...], Expr], ...]


@dataclass(frozen=True)
class SetEnum(Expr):
    elems: tuple[Expr, ...]


@dataclass(frozen=True)
class SetFilter(Expr):
    """`{x \\in D : pred}`"""

    var: str
    domain: Expr
    pred: Expr


@dataclass(frozen=True)
class SetMap(Expr):
    """`{expr : x \\in D}`"""

    expr: Expr
    var: str
    domain: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Or(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class Implies(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Iff(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Quant(Expr):
    """`\\A x, y \\in D : body` -- kind is "A" or "E"."""

    kind: str
    binders: tuple[tuple[str, Expr], ...]
    body: Expr


@dataclass(frozen=True)
class TupleCons(Expr):
    elems: tuple[Expr, ...]


@dataclass(frozen=True)
class RecordCons(Expr):
    fields: tuple[tuple[str, Expr], ...]


@dataclass(frozen=True)
class Field(Expr):
    rec: Expr
    name: str


@dataclass(frozen=True)
class IfThenElse(Expr):
    cond: Expr
    then: Expr
    other: Expr


# temporal / fluent nodes (SFL only)


@dataclass(frozen=True)
class FluentAtom(Expr):
    fluent: str
    args: tuple[str, ...]
    ref: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Until(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class NextOp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Always(Expr):
    arg: Expr


@dataclass(frozen=True)
class Eventually(Expr):
    arg: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)

TEMPORAL = (Until, NextOp, Always, Eventually)


def children(e: Expr) -> Iterator[Expr]:
    for f in fields(e):
        if f.name in ("loc", "ref"):
            continue
        yield from _exprs_in(getattr(e, f.name))


def _exprs_in(v) -> Iterator[Expr]:
    if isinstance(v, Expr):
        yield v
    elif isinstance(v, tuple):
        for x in v:
            yield from _exprs_in(x)


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(list(children(node))))


def transform(e: Expr, fn: Callable[[Expr], Expr | None]) -> Expr:
    """Bottom-up rebuild: `fn` may return a replacement node or None to keep it."""
    kwargs = {}
    changed = False
    for f in fields(e):
        if f.name in ("loc", "ref"):
            continue
        old = getattr(e, f.name)
        new = _transform_value(old, fn)
        if new is not old:
            changed = True
        kwargs[f.name] = new
    node = replace(e, **kwargs) if changed else e
    out = fn(node)
    return node if out is None else out


def _transform_value(v, fn):
    if isinstance(v, Expr):
        return transform(v, fn)
    if isinstance(v, tuple):
        items = tuple(_transform_value(x, fn) for x in v)
        if all(a is b for a, b in zip(items, v)):
            return v
        return items
    return v


def conj(items) -> Expr:
    """Flattened conjunction; TRUE for an empty list."""
    flat: list[Expr] = []
    for it in items:
        if isinstance(it, And):
            flat.extend(it.items)
        elif it == TRUE:
            continue
        else:
            flat.append(it)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(items) -> Expr:
    flat: list[Expr] = []
    for it in items:
        if isinstance(it, Or):
            flat.extend(it.items)
        else:
            flat.append(it)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, And):
        out = []
        for it in e.items:
            out.extend(conjuncts(it))
        return out
    if e == TRUE:
        return []
    return [e]


# free names ------------------------------------------------------------------


def free_names(e: Expr) -> set[str]:
    """Unprimed names occurring free (not bound by a quantifier/comprehension)."""
    out: set[str] = set()
    _free(e, frozenset(), out)
    return out


def _free(e: Expr, bound: frozenset, out: set) -> None:
    if isinstance(e, Name):
        if e.id not in bound:
            out.add(e.id)
        return
    if isinstance(e, Quant):
        inner = bound
        for name, dom in e.binders:
            _free(dom, inner, out)
            inner = inner | {name}
        _free(e.body, inner, out)
        return
    if isinstance(e, FnCons):
        inner = bound
        for name, dom in e.binders:
            _free(dom, bound, out)
            inner = inner | {name}
        _free(e.body, inner, out)
        return
    if isinstance(e, SetFilter):
        _free(e.domain, bound, out)
        _free(e.pred, bound | {e.var}, out)
        return
    if isinstance(e, SetMap):
        _free(e.domain, bound, out)
        _free(e.expr, bound | {e.var}, out)
        return
    if isinstance(e, FluentAtom):
        for a in e.args:
            if a not in bound:
                out.add(a)
        return
    for c in children(e):
        _free(c, bound, out)


def primed_names(e: Expr) -> set[str]:
    return {n.id for n in walk(e) if isinstance(n, Prime)}


def has_primes(e: Expr) -> bool:
    return any(isinstance(n, Prime) for n in walk(e))


def is_temporal(e: Expr) -> bool:
    return any(isinstance(n, TEMPORAL) for n in walk(e))


def fluent_atoms(e: Expr) -> list[FluentAtom]:
    return [n for n in walk(e) if isinstance(n, FluentAtom)]


# substitution -----------------------------------------------------------------

_fresh_counter = [0]


def _fresh(base: str, avoid: set[str]) -> str:
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Capture-avoiding substitution of free unprimed names."""
    if not mapping:
        return e
    repl_free: set[str] = set()
    for v in mapping.values():
        repl_free |= free_names(v)
    return _subst(e, dict(mapping), repl_free)


def _subst(e: Expr, m: dict, repl_free: set) -> Expr:
    if not m:
        return e
    if isinstance(e, Name):
        return m.get(e.id, e)
    if isinstance(e, FluentAtom):
        new_args = []
        for a in e.args:
            r = m.get(a)
            if r is None:
                new_args.append(a)
            elif isinstance(r, Name):
                new_args.append(r.id)
            else:
                raise ValueError("fluent arguments can only be renamed to names")
        return replace(e, args=tuple(new_args))
    if isinstance(e, (Quant, FnCons)):
        new_binders = []
        m2 = dict(m)
        for name, dom in e.binders:
            dom2 = _subst(dom, m2 if isinstance(e, Quant) else m, repl_free)
            m2.pop(name, None)
            if name in repl_free and m2:
                fresh = _fresh(name, repl_free | free_names(e.body) | set(m2))
                m2[name] = Name(fresh)
                name = fresh
            new_binders.append((name, dom2))
        return replace(e, binders=tuple(new_binders), body=_subst(e.body, m2, repl_free))
    if isinstance(e, SetFilter):
        m2 = dict(m)
        m2.pop(e.var, None)
        var = e.var
        if var in repl_free and m2:
            fresh = _fresh(var, repl_free | free_names(e.pred) | set(m2))
            m2[var] = Name(fresh)
            var = fresh
        return replace(e, var=var, domain=_subst(e.domain, m, repl_free), pred=_subst(e.pred, m2, repl_free))
    if isinstance(e, SetMap):
        m2 = dict(m)
        m2.pop(e.var, None)
        var = e.var
        if var in repl_free and m2:
            fresh = _fresh(var, repl_free | free_names(e.expr) | set(m2))
            m2[var] = Name(fresh)
            var = fresh
        return replace(e, var=var, domain=_subst(e.domain, m, repl_free), expr=_subst(e.expr, m2, repl_free))
    kwargs = {}
    for f in fields(e):
        if f.name in ("loc", "ref"):
            continue
        kwargs[f.name] = _subst_value(getattr(e, f.name), m, repl_free)
    return replace(e, **kwargs)


def _subst_value(v, m, repl_free):
    if isinstance(v, Expr):
        return _subst(v, m, repl_free)
    if isinstance(v, tuple):
        return tuple(_subst_value(x, m, repl_free) for x in v)
    return v


def prime_vars(e: Expr, variables) -> Expr:
    """Replace free occurrences of the given state variables with their primed form."""
    variables = set(variables)
    return substitute(e, {v: Prime(v) for v in variables})


def rename_vars(e: Expr, renaming: dict[str, str]) -> Expr:
    """Rename state variables (primed and unprimed occurrences)."""
    if not renaming:
        return e
    e = substitute(e, {old: Name(new) for old, new in renaming.items()})

    def fix(node):
        if isinstance(node, Prime) and node.id in renaming:
            return Prime(renaming[node.id], loc=node.loc)
        return None

    return transform(e, fix)
