"""Canonical DSL text for formulas, sorts and declarations.

Output always re-parses to an equal AST: a child whose precedence is not
strictly higher than its parent's gets parentheses, quantifiers are
parenthesized whenever they are not the whole formula, and conjunctions and
disjunctions are printed inline (never as bullet lists) so layout cannot
change the parse.
"""

from __future__ import annotations

from . import syntax as S
from .parser import (
    P_AND,
    P_ARITH,
    P_ATOM,
    P_IFF,
    P_IMPLIES,
    P_OR,
    P_POSTFIX,
    P_PREFIX,
    P_QUANT,
    P_REL,
    P_SET,
    P_UNTIL,
    REL_OPS,
    SET_OPS,
    ChainDecl,
    ComponentDecl,
    ConstantDecl,
    ContractDecl,
    FluentDecl,
    FormulaDecl,
    IncludeDecl,
    InstanceDecl,
    SpecFile,
)
from .sorts import AtomSort, NatSort, Sort


def prec(e: S.Expr) -> int:
    if isinstance(e, S.Quant):
        return P_QUANT
    if isinstance(e, S.Iff):
        return P_IFF
    if isinstance(e, S.Implies):
        return P_IMPLIES
    if isinstance(e, S.Or):
        return P_OR
    if isinstance(e, S.And):
        return P_AND
    if isinstance(e, S.Until):
        return P_UNTIL
    if isinstance(e, (S.Not, S.Always, S.Eventually, S.NextOp)):
        return P_PREFIX
    if isinstance(e, S.BinOp):
        if e.op in REL_OPS:
            return P_REL
        if e.op in SET_OPS:
            return P_SET
        return P_ARITH
    if isinstance(e, (S.Apply, S.Field, S.Prime)):
        return P_POSTFIX
    if isinstance(e, S.IfThenElse):
        return P_QUANT
    return P_ATOM


def show(e: S.Expr) -> str:
    """Render a formula or term on one line."""
    return _show(e)


def _wrap(child: S.Expr, above: int) -> str:
    text = _show(child)
    if prec(child) <= above:
        return f"({text})"
    return text


def _binders(binders) -> str:
    groups: list[tuple[list[str], S.Expr]] = []
    for name, dom in binders:
        if groups and groups[-1][1] == dom:
            groups[-1][0].append(name)
        else:
            groups.append(([name], dom))
    return ", ".join(f"{', '.join(names)} \\in {_wrap(dom, P_SET - 1)}" for names, dom in groups)


def _show(e: S.Expr) -> str:
    if isinstance(e, S.BoolLit):
        return "TRUE" if e.value else "FALSE"
    if isinstance(e, S.NatLit):
        return str(e.value)
    if isinstance(e, S.StrLit):
        return f'"{e.value}"'
    if isinstance(e, S.Name):
        return e.id
    if isinstance(e, S.Prime):
        return f"{e.id}'"
    if isinstance(e, S.Apply):
        return f"{_wrap(e.fn, P_POSTFIX - 1)}[{', '.join(_show(a) for a in e.args)}]"
    if isinstance(e, S.Field):
        return f"{_wrap(e.rec, P_POSTFIX - 1)}.{e.name}"
    if isinstance(e, S.FnCons):
        return f"[{_binders(e.binders)} |-> {_show(e.body)}]"
    if isinstance(e, S.Except):
        ups = []
        for path, val in e.updates:
            steps = "".join(f".{st}" if isinstance(st, str) else f"[{', '.join(_show(x) for x in st)}]" for st in path)
            ups.append(f"!{steps} = {_show(val)}")
        return f"[{_show(e.fn)} EXCEPT {', '.join(ups)}]"
    if isinstance(e, S.SetEnum):
        return "{" + ", ".join(_show(x) for x in e.elems) + "}"
    if isinstance(e, S.SetFilter):
        return "{" + f"{e.var} \\in {_wrap(e.domain, P_SET - 1)} : {_show(e.pred)}" + "}"
    if isinstance(e, S.SetMap):
        return "{" + f"{_wrap(e.expr, P_REL)} : {e.var} \\in {_wrap(e.domain, P_SET - 1)}" + "}"
    if isinstance(e, S.BinOp):
        p = prec(e)
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p)}"
    if isinstance(e, S.And):
        return " /\\ ".join(_wrap(x, P_AND) for x in e.items)
    if isinstance(e, S.Or):
        return " \\/ ".join(_wrap(x, P_OR) for x in e.items)
    if isinstance(e, S.Not):
        return f"~{_wrap(e.arg, P_PREFIX - 1)}"
    if isinstance(e, S.Always):
        return f"[]{_wrap(e.arg, P_PREFIX - 1)}"
    if isinstance(e, S.Eventually):
        return f"<>{_wrap(e.arg, P_PREFIX - 1)}"
    if isinstance(e, S.NextOp):
        return f"X {_wrap(e.arg, P_PREFIX - 1)}"
    if isinstance(e, S.Until):
        return f"{_wrap(e.left, P_UNTIL)} U {_wrap(e.right, P_UNTIL)}"
    if isinstance(e, S.Implies):
        return f"{_wrap(e.left, P_IMPLIES)} => {_wrap(e.right, P_IMPLIES)}"
    if isinstance(e, S.Iff):
        return f"{_wrap(e.left, P_IFF)} <=> {_wrap(e.right, P_IFF)}"
    if isinstance(e, S.Quant):
        q = "\\A" if e.kind == "A" else "\\E"
        return f"{q} {_binders(e.binders)} : {_show(e.body)}"
    if isinstance(e, S.TupleCons):
        return "<<" + ", ".join(_show(x) for x in e.elems) + ">>"
    if isinstance(e, S.RecordCons):
        return "[" + ", ".join(f"{n} |-> {_show(x)}" for n, x in e.fields) + "]"
    if isinstance(e, S.IfThenElse):
        return f"IF {_show(e.cond)} THEN {_show(e.then)} ELSE {_show(e.other)}"
    if isinstance(e, S.FluentAtom):
        return f"{e.fluent}({', '.join(e.args)})"
    raise TypeError(f"cannot print {type(e).__name__}")


def show_block(e: S.Expr, indent: int = 4) -> str:
    """Multi-line rendering with one top-level conjunct per line (for reports)."""
    parts = S.conjuncts(e) if isinstance(e, S.And) else [e]
    if len(parts) <= 1:
        return " " * indent + show(e)
    pad = " " * indent
    return "\n".join(f"{pad}/\\ {_wrap(p, P_AND)}" for p in parts)


def show_sort(sort: Sort) -> str:
    return str(sort)


def _formal(name: str, sort: Sort) -> str:
    if isinstance(sort, AtomSort):
        return f"{name} \\in {sort.param}"
    if isinstance(sort, NatSort):
        return f"{name} \\in Nat"
    return f"{name} \\in {sort}"


def _action_text(name, formals, body) -> str:
    head = name
    if formals:
        head += "(" + ", ".join(_formal(n, s) for n, s in formals) + ")"
    return f"  {head} == {show(body)}"


def show_decl(d) -> str:
    if isinstance(d, ConstantDecl):
        return "CONSTANT " + ", ".join(d.names)
    if isinstance(d, ComponentDecl):
        lines = [f"component {d.name} {{"]
        if d.constants:
            lines.append("  CONSTANT " + ", ".join(d.constants))
        if d.vars:
            lines.append("  VARIABLES " + ", ".join(f"{n} : {s}" for n, s in d.vars))
        lines.append(f"  Init == {show(d.init)}")
        for a in d.actions:
            lines.append(_action_text(a.name, a.formals, a.body))
        lines.append("}")
        return "\n".join(lines)
    if isinstance(d, FluentDecl):
        args = ", ".join(s.param if isinstance(s, AtomSort) else str(s) for s in d.arg_sorts)
        lines = [f"fluent {d.name}({args}) var {d.var} {{"]
        if d.constants:
            lines.append("  CONSTANT " + ", ".join(d.constants))
        lines.append(f"  Init == {show(d.init)}")
        for a in d.actions:
            lines.append(_action_text(a.name, a.formals, a.body))
        lines.append("}")
        return "\n".join(lines)
    if isinstance(d, FormulaDecl):
        return f"{d.kind} {d.name} == {show(d.expr)}"
    if isinstance(d, ContractDecl):
        text = (
            f"contract {d.name} {d.kind}\n  assume {show(d.assume)}\n  component {' || '.join(d.components)}\n"
            f"  guarantee {show(d.guarantee)}"
        )
        if d.invariant is not None:
            text += f"\n  invariant {show(d.invariant)}"
        return text
    if isinstance(d, InstanceDecl):
        return show_instance(d)
    if isinstance(d, ChainDecl):
        return f"chain {d.name} == {', '.join(d.contracts)}"
    if isinstance(d, IncludeDecl):
        return f'include "{d.path}"'
    if isinstance(d, SpecFile):
        return "\n\n".join(show_decl(x) for x in d.decls) + ("\n" if d.decls else "")
    raise TypeError(f"cannot print {type(d).__name__}")


def show_instance(d) -> str:
    """Accepts an InstanceDecl or a sorts.Instance."""
    from .sorts import Instance

    if isinstance(d, Instance):
        name, bindings, nat_bound, allow_empty = None, sorted(d.params.items()), d.nat_bound, d.allow_empty
    else:
        name, bindings, nat_bound, allow_empty = d.name, d.bindings, d.nat_bound, d.allow_empty
    parts = [f"{p} = {{{', '.join(atoms)}}}" for p, atoms in bindings]
    if nat_bound != 2:
        parts.append(f"natBound = {nat_bound}")
    if allow_empty:
        parts.append("allowEmpty")
    head = f"instance {name} == " if name else "instance "
    return head + ", ".join(parts)


def pretty_print(x) -> str:
    """Canonical text for any parsed declaration, spec file, formula or sort."""
    if isinstance(x, S.Expr):
        return show(x)
    if isinstance(x, Sort):
        return str(x)
    return show_decl(x)
