"""Static sort inference and checking for formulas and components."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from . import syntax as S
from .errors import IllSorted, SpecError, UnboundName
from .sorts import (
    BOOL,
    NAT,
    AtomSort,
    BoolSort,
    EnumSort,
    FnSort,
    NatSort,
    RecordSort,
    SetSort,
    Sort,
    TupleSort,
    check_sort_wellformed,
)


class _Any(Sort):
    """Element sort of the empty set literal; unifies with anything."""

    def __str__(self):
        return "?"

    def __eq__(self, other):
        return isinstance(other, _Any)

    def __hash__(self):
        return 17


ANY = _Any()


class LitEnum(EnumSort):
    """Sort of string literals not yet tied to a declared enumeration."""


def _enum_join(a: EnumSort, b: EnumSort, loc, what) -> Sort:
    la, lb = set(a.literals), set(b.literals)
    merged = tuple(list(a.literals) + [x for x in b.literals if x not in la])
    a_lit, b_lit = isinstance(a, LitEnum), isinstance(b, LitEnum)
    if a_lit and b_lit:
        return LitEnum(merged)
    if a_lit != b_lit:
        decl, lit = (b, a) if a_lit else (a, b)
        if not set(lit.literals) <= set(decl.literals):
            raise IllSorted(f"incompatible {what}", loc, expected=decl, found=lit)
        return decl
    if not (la <= lb or lb <= la):
        raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
    return EnumSort(merged)

COMPARE_OPS = {"<", "<=", ">", ">="}
EQ_OPS = {"=", "/="}
MEMBER_OPS = {"\\in", "\\notin"}
SET_OPS = {"\\cup", "\\cap", "\\"}
ARITH_OPS = {"+", "-"}


def join(a: Sort, b: Sort, loc=None, what="operands") -> Sort:
    """Least common sort of `a` and `b`, or IllSorted."""
    if isinstance(a, _Any):
        return b
    if isinstance(b, _Any):
        return a
    if isinstance(a, EnumSort) and isinstance(b, EnumSort):
        return _enum_join(a, b, loc, what)
    if type(a) is not type(b):
        raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
    if isinstance(a, AtomSort):
        if a.param != b.param:
            raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
        return a
    if isinstance(a, SetSort):
        return SetSort(join(a.elem, b.elem, loc, what))
    if isinstance(a, FnSort):
        if len(a.args) != len(b.args):
            raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
        return FnSort(tuple(join(x, y, loc, what) for x, y in zip(a.args, b.args)), join(a.result, b.result, loc, what))
    if isinstance(a, TupleSort):
        if len(a.elems) != len(b.elems):
            raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
        return TupleSort(tuple(join(x, y, loc, what) for x, y in zip(a.elems, b.elems)))
    if isinstance(a, RecordSort):
        if [n for n, _ in a.fields] != [n for n, _ in b.fields]:
            if sorted(n for n, _ in a.fields) != sorted(n for n, _ in b.fields):
                raise IllSorted(f"incompatible {what}", loc, expected=a, found=b)
            bd = dict(b.fields)
            return RecordSort(tuple((n, join(s, bd[n], loc, what)) for n, s in a.fields))
        return RecordSort(tuple((n, join(s, t, loc, what)) for (n, s), (_, t) in zip(a.fields, b.fields)))
    return a


def fits(value_sort: Sort, target: Sort) -> bool:
    """True when a value of `value_sort` may be stored where `target` is declared."""
    if isinstance(value_sort, _Any):
        return True
    if isinstance(value_sort, EnumSort) and isinstance(target, EnumSort):
        return set(value_sort.literals) <= set(target.literals)
    if isinstance(value_sort, EnumSort) != isinstance(target, EnumSort) or (
        not isinstance(target, EnumSort) and type(value_sort) is not type(target)
    ):
        return False
    if isinstance(target, AtomSort):
        return value_sort.param == target.param
    if isinstance(target, SetSort):
        return fits(value_sort.elem, target.elem)
    if isinstance(target, FnSort):
        return (
            len(value_sort.args) == len(target.args)
            and all(fits(a, b) and fits(b, a) for a, b in zip(value_sort.args, target.args))
            and fits(value_sort.result, target.result)
        )
    if isinstance(target, TupleSort):
        return len(value_sort.elems) == len(target.elems) and all(fits(a, b) for a, b in zip(value_sort.elems, target.elems))
    if isinstance(target, RecordSort):
        vd = dict(value_sort.fields)
        return set(vd) == {n for n, _ in target.fields} and all(fits(vd[n], s) for n, s in target.fields)
    return True


@dataclass
class Scope:
    """What names mean while checking a formula."""

    vars: Mapping[str, Sort]
    params: frozenset
    primes: bool = False
    bound: Mapping[str, Sort] | None = None

    def lookup(self, name: str, loc):
        if self.bound and name in self.bound:
            return self.bound[name]
        if name in self.vars:
            return self.vars[name]
        if name in self.params:
            return SetSort(AtomSort(name))
        if name == "Nat":
            return SetSort(NAT)
        if name == "BOOLEAN":
            return SetSort(BOOL)
        raise UnboundName(name, loc)

    def bind(self, pairs) -> "Scope":
        b = dict(self.bound or {})
        b.update(pairs)
        return Scope(self.vars, self.params, self.primes, b)


def infer(e: S.Expr, sc: Scope) -> Sort:
    loc = e.loc
    if isinstance(e, S.BoolLit):
        return BOOL
    if isinstance(e, S.NatLit):
        return NAT
    if isinstance(e, S.StrLit):
        return LitEnum((e.value,))
    if isinstance(e, S.Name):
        return sc.lookup(e.id, loc)
    if isinstance(e, S.Prime):
        if not sc.primes:
            raise IllSorted(f"primed variable {e.id}' not allowed here", loc)
        if e.id not in sc.vars:
            raise UnboundName(e.id + "'", loc)
        return sc.vars[e.id]
    if isinstance(e, S.Apply):
        fs = infer(e.fn, sc)
        if not isinstance(fs, FnSort):
            raise IllSorted("application of a non-function", loc, expected="function", found=fs)
        if len(e.args) != len(fs.args):
            raise IllSorted(f"function expects {len(fs.args)} argument(s)", loc, expected=len(fs.args), found=len(e.args))
        for a, want in zip(e.args, fs.args):
            join(want, infer(a, sc), a.loc or loc, "function argument")
        return fs.result
    if isinstance(e, S.FnCons):
        arg_sorts = []
        inner = sc
        for name, dom in e.binders:
            arg_sorts.append(_elem(infer(dom, sc), dom.loc or loc))
            inner = inner.bind({name: arg_sorts[-1]})
        return FnSort(tuple(arg_sorts), infer(e.body, inner))
    if isinstance(e, S.Except):
        base = infer(e.fn, sc)
        for path, val in e.updates:
            leaf = _path_sort(base, path, sc, loc)
            vs = infer(val, sc)
            if not fits(vs, leaf):
                raise IllSorted("EXCEPT value", val.loc or loc, expected=leaf, found=vs)
        return base
    if isinstance(e, S.SetEnum):
        elem: Sort = ANY
        for x in e.elems:
            elem = join(elem, infer(x, sc), x.loc or loc, "set elements")
        return SetSort(elem)
    if isinstance(e, S.SetFilter):
        d = _elem(infer(e.domain, sc), loc)
        _want_bool(e.pred, sc.bind({e.var: d}))
        return SetSort(d)
    if isinstance(e, S.SetMap):
        d = _elem(infer(e.domain, sc), loc)
        return SetSort(infer(e.expr, sc.bind({e.var: d})))
    if isinstance(e, S.BinOp):
        return _binop(e, sc)
    if isinstance(e, (S.And, S.Or)):
        for it in e.items:
            _want_bool(it, sc)
        return BOOL
    if isinstance(e, S.Not):
        _want_bool(e.arg, sc)
        return BOOL
    if isinstance(e, (S.Implies, S.Iff)):
        _want_bool(e.left, sc)
        _want_bool(e.right, sc)
        return BOOL
    if isinstance(e, S.Quant):
        inner = sc
        for name, dom in e.binders:
            inner = inner.bind({name: _elem(infer(dom, inner), dom.loc or loc)})
        _want_bool(e.body, inner)
        return BOOL
    if isinstance(e, S.TupleCons):
        return TupleSort(tuple(infer(x, sc) for x in e.elems))
    if isinstance(e, S.RecordCons):
        names = [n for n, _ in e.fields]
        if len(set(names)) != len(names):
            raise IllSorted("duplicate record field", loc)
        return RecordSort(tuple((n, infer(x, sc)) for n, x in e.fields))
    if isinstance(e, S.Field):
        rs = infer(e.rec, sc)
        if not isinstance(rs, RecordSort):
            raise IllSorted("field access on a non-record", loc, expected="record", found=rs)
        fs = rs.field_sort(e.name)
        if fs is None:
            raise IllSorted(f"record has no field {e.name!r}", loc)
        return fs
    if isinstance(e, S.IfThenElse):
        _want_bool(e.cond, sc)
        return join(infer(e.then, sc), infer(e.other, sc), loc, "IF branches")
    if isinstance(e, S.FluentAtom):
        raise IllSorted(f"fluent {e.fluent} used in a state formula", loc)
    if isinstance(e, S.TEMPORAL):
        raise IllSorted("temporal operator in a state formula", loc)
    raise IllSorted(f"unsupported expression {type(e).__name__}", loc)


def _elem(s: Sort, loc) -> Sort:
    if not isinstance(s, SetSort):
        raise IllSorted("quantifier domain is not a set", loc, expected="set", found=s)
    return s.elem


def _want_bool(e: S.Expr, sc: Scope) -> None:
    s = infer(e, sc)
    if not isinstance(s, BoolSort):
        raise IllSorted("expected a formula", e.loc, expected=BOOL, found=s)


def _path_sort(base: Sort, path, sc: Scope, loc) -> Sort:
    cur = base
    for step in path:
        if isinstance(step, str):
            if not isinstance(cur, RecordSort) or cur.field_sort(step) is None:
                raise IllSorted(f"EXCEPT path .{step}", loc, expected="record with that field", found=cur)
            cur = cur.field_sort(step)
        else:
            if not isinstance(cur, FnSort):
                raise IllSorted("EXCEPT path index", loc, expected="function", found=cur)
            if len(step) != len(cur.args):
                raise IllSorted("EXCEPT index arity", loc, expected=len(cur.args), found=len(step))
            for a, want in zip(step, cur.args):
                join(want, infer(a, sc), a.loc or loc, "EXCEPT index")
            cur = cur.result
    return cur


def _binop(e: S.BinOp, sc: Scope) -> Sort:
    op, loc = e.op, e.loc
    ls, rs = infer(e.left, sc), infer(e.right, sc)
    if op in EQ_OPS:
        join(ls, rs, loc, "sides of equality")
        return BOOL
    if op in MEMBER_OPS:
        if not isinstance(rs, SetSort):
            raise IllSorted("membership in a non-set", loc, expected="set", found=rs)
        join(rs.elem, ls, loc, "element and set")
        return BOOL
    if op == "\\subseteq":
        if not isinstance(ls, SetSort) or not isinstance(rs, SetSort):
            raise IllSorted("\\subseteq needs sets", loc, expected="set", found=ls if not isinstance(ls, SetSort) else rs)
        join(ls, rs, loc, "sets")
        return BOOL
    if op in SET_OPS:
        if not isinstance(ls, SetSort) or not isinstance(rs, SetSort):
            raise IllSorted(f"{op} needs sets", loc, expected="set", found=ls if not isinstance(ls, SetSort) else rs)
        return join(ls, rs, loc, "sets")
    if op in COMPARE_OPS or op in ARITH_OPS:
        for s in (ls, rs):
            if not isinstance(s, NatSort):
                raise IllSorted(f"{op} needs naturals", loc, expected=NAT, found=s)
        return BOOL if op in COMPARE_OPS else NAT
    raise IllSorted(f"unknown operator {op}", loc)


# public entry points -----------------------------------------------------------


@dataclass(frozen=True)
class SortReport:
    component: str
    formulas_checked: int
    ok: bool = True

    def __str__(self):
        return f"{self.component}: {self.formulas_checked} formula(s) well-sorted"


def check_formula(e: S.Expr, vars: Mapping[str, Sort], params, *, primes: bool = False, bound=None) -> None:
    """Raise unless `e` is a well-sorted boolean formula in the given scope."""
    sc = Scope(dict(vars), frozenset(params), primes, dict(bound or {}))
    _want_bool(e, sc)


def formula_sort(e: S.Expr, vars: Mapping[str, Sort], params, *, primes: bool = False, bound=None) -> Sort:
    return infer(e, Scope(dict(vars), frozenset(params), primes, dict(bound or {})))


def sortcheck(component) -> SortReport:
    """Check every formula of a component; raise IllSorted / UnboundName on the first problem."""
    for name, sort in component.vars:
        check_sort_wellformed(sort, component.loc)
        for p in _sort_params(sort):
            if p not in component.params:
                raise UnboundName(p, component.loc)
    vars = dict(component.vars)
    check_formula(component.init, vars, component.params)
    n = 1
    for a in component.actions:
        for fname, fsort in a.formals:
            for p in _sort_params(fsort):
                if p not in component.params:
                    raise UnboundName(p, a.loc)
        check_formula(a.body, vars, component.params, primes=True, bound=dict(a.formals))
        n += 1
    return SortReport(component.name, n)


def _sort_params(sort: Sort):
    if isinstance(sort, AtomSort):
        yield sort.param
    elif isinstance(sort, SetSort):
        yield from _sort_params(sort.elem)
    elif isinstance(sort, FnSort):
        for a in sort.args:
            yield from _sort_params(a)
        yield from _sort_params(sort.result)
    elif isinstance(sort, TupleSort):
        for s in sort.elems:
            yield from _sort_params(s)
    elif isinstance(sort, RecordSort):
        for _, s in sort.fields:
            yield from _sort_params(s)


def sort_params(sort: Sort) -> set[str]:
    return set(_sort_params(sort))


def check_state_formula(e: S.Expr, component, what: str = "formula", extra_vars=None) -> None:
    """A non-temporal, prime-free formula over the component's vars and params."""
    if S.has_primes(e):
        raise SpecError(f"{what} may not mention primed variables", e.loc)
    vars = dict(component.vars)
    if extra_vars:
        vars.update(extra_vars)
    check_formula(e, vars, component.params)
