"""Parallel composition of components.

Shared actions (same name) synchronize: their bodies are conjoined after the
second operand's formals are renamed to the first operand's. An action owned
by one side leaves the other side's variables unchanged.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from . import syntax as S
from .errors import ParamMismatch, SharedVariable, SignatureMismatch
from .model import EMPTY, ActionDecl, Component


def is_unit(c: Component) -> bool:
    return not c.vars and not c.actions and c.init == S.TRUE


def _frame(vars_: Iterable[str]) -> list[S.Expr]:
    return [S.BinOp("=", S.Prime(v), S.Name(v)) for v in vars_]


def _fresh_formals(names: Sequence[str], taken: set[str]) -> list[str]:
    out = []
    used = set(taken)
    for n in names:
        cand = n
        k = 1
        while cand in used:
            cand = f"{n}_{k}"
            k += 1
        used.add(cand)
        out.append(cand)
    return out


def _rename(body: S.Expr, old: Sequence[str], new: Sequence[str]) -> S.Expr:
    m = {o: S.Name(n) for o, n in zip(old, new) if o != n}
    return S.substitute(body, m) if m else body


def compose(c1: Component, c2: Component, name: str | None = None) -> Component:
    """`c1 || c2`. The empty component is a two-sided unit."""
    if is_unit(c2):
        return c1
    if is_unit(c1):
        return c2
    shared_vars = set(c1.var_names) & set(c2.var_names)
    if shared_vars:
        raise SharedVariable(sorted(shared_vars)[0])
    if c1.params != c2.params:
        raise ParamMismatch(
            f"{c1.name} has parameters {sorted(c1.params)} but {c2.name} has {sorted(c2.params)}"
        )
    all_vars = set(c1.var_names) | set(c2.var_names)
    actions: list[ActionDecl] = []
    for a in c1.actions:
        formals = [n for n, _ in a.formals]
        new = _fresh_formals(formals, all_vars)
        body1 = _rename(a.body, formals, new)
        if c2.has_action(a.name):
            b = c2.action(a.name)
            if a.signature != b.signature:
                raise SignatureMismatch(a.name, [str(s) for s in a.signature], [str(s) for s in b.signature])
            body2 = _rename(b.body, b.formal_names, new)
            body = S.conj([body1, body2])
        else:
            body = S.conj([body1, *_frame(c2.var_names)])
        actions.append(ActionDecl(a.name, tuple(zip(new, a.signature)), body, loc=a.loc))
    for b in c2.actions:
        if c1.has_action(b.name):
            continue
        formals = list(b.formal_names)
        new = _fresh_formals(formals, all_vars)
        body = S.conj([_rename(b.body, formals, new), *_frame(c1.var_names)])
        actions.append(ActionDecl(b.name, tuple(zip(new, b.signature)), body, loc=b.loc))
    origin = c1.origin if c1.origin == c2.origin else "composite"
    return Component(
        name or f"{c1.name}_{c2.name}",
        c1.params,
        c1.vars + c2.vars,
        S.conj([c1.init, c2.init]),
        tuple(actions),
        origin=origin,
        parts=c1.parts + c2.parts,
    )


def compose_all(components: Sequence[Component], name: str | None = None) -> Component:
    """Left fold of `compose`; the empty sequence yields the empty component."""
    comps = [c for c in components if not is_unit(c)]
    if not comps:
        return EMPTY
    acc = comps[0]
    for c in comps[1:]:
        acc = compose(acc, c)
    if name and len(comps) > 1:
        acc = acc.renamed(name)
    return acc


def widen(components: Sequence[Component]) -> list[Component]:
    """Give every component the union of all their parameters."""
    params: frozenset = frozenset()
    for c in components:
        params |= c.params
    return [c if c.params == params or is_unit(c) else c.with_params(params) for c in components]
