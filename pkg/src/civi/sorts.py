"""Sorts, runtime values, and finite value spaces.

Values are plain hashable Python objects so states can live in sets:

    BoolSort    -> bool
    AtomSort    -> str (an atom of the instantiated parameter)
    EnumSort    -> str (the literal)
    NatSort     -> int in 0..nat_bound
    SetSort     -> frozenset
    FnSort      -> FnVal (keys are single values, or tuples for multi-argument sorts)
    TupleSort   -> tuple
    RecordSort  -> RecVal
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .errors import IllSorted, SpecError


class Sort:
    __slots__ = ()

    def is_finite_elem(self) -> bool:
        return True


@dataclass(frozen=True)
class BoolSort(Sort):
    def __str__(self):
        return "BOOLEAN"


@dataclass(frozen=True)
class AtomSort(Sort):
    param: str

    def __str__(self):
        return self.param


@dataclass(frozen=True)
class EnumSort(Sort):
    literals: tuple[str, ...]

    def __post_init__(self):
        if not self.literals:
            raise SpecError("enumeration sort needs at least one literal")
        if len(set(self.literals)) != len(self.literals):
            raise SpecError(f"duplicate literal in enumeration sort {self.literals}")

    def __str__(self):
        return "{" + ", ".join(f'"{lit}"' for lit in self.literals) + "}"


@dataclass(frozen=True)
class NatSort(Sort):
    def __str__(self):
        return "Nat"


@dataclass(frozen=True)
class SetSort(Sort):
    elem: Sort

    def __str__(self):
        return f"SUBSET {_wrap(self.elem)}"


@dataclass(frozen=True)
class FnSort(Sort):
    args: tuple[Sort, ...]
    result: Sort

    def __post_init__(self):
        if not self.args:
            raise SpecError("function sort needs at least one argument sort")

    def __str__(self):
        return "[" + ", ".join(str(a) for a in self.args) + " -> " + str(self.result) + "]"


@dataclass(frozen=True)
class TupleSort(Sort):
    elems: tuple[Sort, ...]

    def __str__(self):
        return "<<" + ", ".join(str(e) for e in self.elems) + ">>"


@dataclass(frozen=True)
class RecordSort(Sort):
    fields: tuple[tuple[str, Sort], ...]

    def field_sort(self, name: str) -> Sort | None:
        for fname, fsort in self.fields:
            if fname == name:
                return fsort
        return None

    def __str__(self):
        return "[" + ", ".join(f"{n} : {s}" for n, s in self.fields) + "]"


def _wrap(sort: Sort) -> str:
    return f"({sort})" if isinstance(sort, SetSort) else str(sort)


BOOL = BoolSort()
NAT = NatSort()


class FnVal:
    """Immutable finite function. Keys are argument values (tuples for arity > 1)."""

    __slots__ = ("_d", "_h")

    def __init__(self, mapping):
        self._d = dict(mapping)
        self._h = None

    def __getitem__(self, key):
        return self._d[key]

    def get(self, key, default=None):
        return self._d.get(key, default)

    def __contains__(self, key):
        return key in self._d

    def keys(self):
        return self._d.keys()

    def items(self):
        return self._d.items()

    def __len__(self):
        return len(self._d)

    def __iter__(self):
        return iter(self._d)

    def updated(self, key, value) -> "FnVal":
        d = dict(self._d)
        d[key] = value
        return FnVal(d)

    def __eq__(self, other):
        return type(other) is FnVal and self._d == other._d

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {v!r}" for k, v in sorted(self._d.items(), key=lambda kv: value_key(kv[0])))
        return f"FnVal({{{inner}}})"


class RecVal:
    """Immutable record value."""

    __slots__ = ("_d", "_h")

    def __init__(self, mapping):
        self._d = dict(mapping)
        self._h = None

    def __getitem__(self, name):
        return self._d[name]

    def keys(self):
        return self._d.keys()

    def items(self):
        return self._d.items()

    def updated(self, name, value) -> "RecVal":
        d = dict(self._d)
        d[name] = value
        return RecVal(d)

    def __eq__(self, other):
        return type(other) is RecVal and self._d == other._d

    def __hash__(self):
        if self._h is None:
            self._h = hash(("rec", frozenset(self._d.items())))
        return self._h

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self._d.items()))
        return f"RecVal({inner})"


def value_key(v):
    """Total ordering key over heterogeneous values, used for canonical printing."""
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, str):
        return (2, v)
    if isinstance(v, frozenset):
        return (3, tuple(sorted(value_key(x) for x in v)))
    if isinstance(v, tuple):
        return (4, tuple(value_key(x) for x in v))
    if isinstance(v, FnVal):
        return (5, tuple(sorted((value_key(k), value_key(x)) for k, x in v.items())))
    if isinstance(v, RecVal):
        return (6, tuple(sorted((k, value_key(x)) for k, x in v.items())))
    raise TypeError(f"not a civi value: {v!r}")


@dataclass(frozen=True)
class Instance:
    """Finite instantiation: each parameter bound to a set of atoms, plus a ceiling for naturals."""

    params: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    nat_bound: int = 2
    allow_empty: bool = False

    def __post_init__(self):
        normalized = {k: tuple(sorted(set(v))) for k, v in dict(self.params).items()}
        object.__setattr__(self, "params", _FrozenDict(normalized))
        if self.nat_bound < 0:
            raise SpecError("natBound must be non-negative")
        if not self.allow_empty:
            for name, atoms in normalized.items():
                if not atoms:
                    raise SpecError(f"parameter {name} bound to the empty set (use allowEmpty)")

    def atoms(self, param: str) -> tuple[str, ...]:
        try:
            return self.params[param]
        except KeyError:
            raise SpecError(f"parameter {param!r} is not bound by the instance") from None

    def require(self, params) -> None:
        missing = sorted(set(params) - set(self.params))
        if missing:
            raise SpecError(f"instance does not bind parameter(s): {', '.join(missing)}")

    def with_params(self, **updates) -> "Instance":
        merged = dict(self.params)
        merged.update({k: tuple(v) for k, v in updates.items()})
        return Instance(merged, self.nat_bound, self.allow_empty)

    def describe(self) -> str:
        parts = [f"{k} = {{{', '.join(v)}}}" for k, v in sorted(self.params.items())]
        parts.append(f"natBound = {self.nat_bound}")
        return ", ".join(parts)

    def to_json(self) -> dict:
        return {
            "params": {k: list(v) for k, v in sorted(self.params.items())},
            "natBound": self.nat_bound,
            "allowEmpty": self.allow_empty,
        }


class _FrozenDict(dict):
    def __hash__(self):
        return hash(frozenset(self.items()))

    def _immutable(self, *a, **k):
        raise TypeError("instance bindings are immutable")

    __setitem__ = __delitem__ = update = pop = popitem = clear = setdefault = _immutable

    def __reduce__(self):
        return (_FrozenDict, (dict(self),))


# value spaces -------------------------------------------------------------


def values_of(sort: Sort, inst: Instance) -> list:
    """Every value of `sort` under `inst`, in canonical (enumeration) order."""
    return _values(sort, inst)


_space_cache: dict = {}


def _values(sort: Sort, inst: Instance) -> list:
    key = (sort, inst)
    cached = _space_cache.get(key)
    if cached is not None:
        return cached
    if isinstance(sort, BoolSort):
        out = [False, True]
    elif isinstance(sort, AtomSort):
        out = list(inst.atoms(sort.param))
    elif isinstance(sort, EnumSort):
        out = list(sort.literals)
    elif isinstance(sort, NatSort):
        out = list(range(inst.nat_bound + 1))
    elif isinstance(sort, SetSort):
        elems = _values(sort.elem, inst)
        out = []
        for mask in range(1 << len(elems)):
            out.append(frozenset(e for i, e in enumerate(elems) if mask >> i & 1))
    elif isinstance(sort, FnSort):
        keys = fn_domain(sort, inst)
        ranges = _values(sort.result, inst)
        out = [FnVal(zip(keys, combo)) for combo in itertools.product(ranges, repeat=len(keys))]
    elif isinstance(sort, TupleSort):
        out = list(itertools.product(*(_values(s, inst) for s in sort.elems)))
    elif isinstance(sort, RecordSort):
        names = [n for n, _ in sort.fields]
        spaces = [_values(s, inst) for _, s in sort.fields]
        out = [RecVal(zip(names, combo)) for combo in itertools.product(*spaces)]
    else:
        raise TypeError(f"unknown sort {sort!r}")
    if len(_space_cache) > 4096:
        _space_cache.clear()
    _space_cache[key] = out
    return out


def space_size(sort: Sort, inst: Instance) -> int:
    if isinstance(sort, BoolSort):
        return 2
    if isinstance(sort, AtomSort):
        return len(inst.atoms(sort.param))
    if isinstance(sort, EnumSort):
        return len(sort.literals)
    if isinstance(sort, NatSort):
        return inst.nat_bound + 1
    if isinstance(sort, SetSort):
        return 2 ** space_size(sort.elem, inst)
    if isinstance(sort, FnSort):
        n = 1
        for a in sort.args:
            n *= space_size(a, inst)
        return space_size(sort.result, inst) ** n
    if isinstance(sort, TupleSort):
        n = 1
        for s in sort.elems:
            n *= space_size(s, inst)
        return n
    if isinstance(sort, RecordSort):
        n = 1
        for _, s in sort.fields:
            n *= space_size(s, inst)
        return n
    raise TypeError(f"unknown sort {sort!r}")


def fn_domain(sort: FnSort, inst: Instance) -> list:
    if len(sort.args) == 1:
        return list(_values(sort.args[0], inst))
    return list(itertools.product(*(_values(a, inst) for a in sort.args)))


def conforms(value, sort: Sort, inst: Instance) -> bool:
    """True iff `value` is a type-correct value of `sort` under `inst`."""
    if isinstance(sort, BoolSort):
        return isinstance(value, bool)
    if isinstance(sort, AtomSort):
        return isinstance(value, str) and value in inst.atoms(sort.param)
    if isinstance(sort, EnumSort):
        return isinstance(value, str) and value in sort.literals
    if isinstance(sort, NatSort):
        return isinstance(value, int) and not isinstance(value, bool) and 0 <= value <= inst.nat_bound
    if isinstance(sort, SetSort):
        return isinstance(value, frozenset) and all(conforms(v, sort.elem, inst) for v in value)
    if isinstance(sort, FnSort):
        if not isinstance(value, FnVal):
            return False
        dom = fn_domain(sort, inst)
        if len(value) != len(dom):
            return False
        return all(k in value and conforms(value[k], sort.result, inst) for k in dom)
    if isinstance(sort, TupleSort):
        return (
            isinstance(value, tuple)
            and len(value) == len(sort.elems)
            and all(conforms(v, s, inst) for v, s in zip(value, sort.elems))
        )
    if isinstance(sort, RecordSort):
        if not isinstance(value, RecVal) or set(value.keys()) != {n for n, _ in sort.fields}:
            return False
        return all(conforms(value[n], s, inst) for n, s in sort.fields)
    return False


def check_sort_wellformed(sort: Sort, loc=None) -> None:
    """Reject sort shapes the toolkit cannot enumerate (sets of functions)."""
    if isinstance(sort, SetSort):
        if _contains_fn(sort.elem):
            raise IllSorted("sets of functions are not supported", loc, expected="enumerable element sort", found=sort.elem)
        check_sort_wellformed(sort.elem, loc)
    elif isinstance(sort, FnSort):
        for a in sort.args:
            if isinstance(a, (FnSort, SetSort)):
                raise IllSorted("function argument sorts must be scalar", loc, expected="scalar sort", found=a)
            check_sort_wellformed(a, loc)
        check_sort_wellformed(sort.result, loc)
    elif isinstance(sort, TupleSort):
        for s in sort.elems:
            check_sort_wellformed(s, loc)
    elif isinstance(sort, RecordSort):
        names = [n for n, _ in sort.fields]
        if len(set(names)) != len(names):
            raise IllSorted("duplicate record field", loc)
        for _, s in sort.fields:
            check_sort_wellformed(s, loc)


def _contains_fn(sort: Sort) -> bool:
    if isinstance(sort, FnSort):
        return True
    if isinstance(sort, SetSort):
        return _contains_fn(sort.elem)
    if isinstance(sort, TupleSort):
        return any(_contains_fn(s) for s in sort.elems)
    if isinstance(sort, RecordSort):
        return any(_contains_fn(s) for _, s in sort.fields)
    return False


def format_value(v) -> str:
    """Render a value in DSL syntax."""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if isinstance(v, frozenset):
        return "{" + ", ".join(format_value(x) for x in sorted(v, key=value_key)) + "}"
    if isinstance(v, tuple):
        return "<<" + ", ".join(format_value(x) for x in v) + ">>"
    if isinstance(v, FnVal):
        items = sorted(v.items(), key=lambda kv: value_key(kv[0]))
        return "[" + ", ".join(f"{_fmt_key(k)} |-> {format_value(x)}" for k, x in items) + "]"
    if isinstance(v, RecVal):
        return "[" + ", ".join(f"{k} |-> {format_value(x)}" for k, x in v.items()) + "]"
    return repr(v)


def _fmt_key(k) -> str:
    if isinstance(k, tuple):
        return "<<" + ", ".join(format_value(x) for x in k) + ">>"
    return format_value(k)


def format_literal_value(v, sort: Sort) -> str:
    """Render a value so that it re-parses as a DSL expression of `sort`."""
    if isinstance(sort, EnumSort):
        return f'"{v}"'
    if isinstance(sort, SetSort):
        return "{" + ", ".join(format_literal_value(x, sort.elem) for x in sorted(v, key=value_key)) + "}"
    if isinstance(sort, TupleSort):
        return "<<" + ", ".join(format_literal_value(x, s) for x, s in zip(v, sort.elems)) + ">>"
    if isinstance(sort, RecordSort):
        return "[" + ", ".join(f"{n} |-> {format_literal_value(v[n], s)}" for n, s in sort.fields) + "]"
    if isinstance(sort, FnSort):
        items = sorted(v.items(), key=lambda kv: value_key(kv[0]))
        return "[" + ", ".join(f"{_fmt_key(k)} |-> {format_literal_value(x, sort.result)}" for k, x in items) + "]"
    return format_value(v)
