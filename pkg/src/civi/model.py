"""Components (parameterized symbolic transition systems), actions, states and traces."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from . import syntax as S
from .errors import SpecError
from .sorts import AtomSort, NatSort, Sort, format_literal_value, format_value, value_key


@dataclass(frozen=True)
class ActionDecl:
    name: str
    formals: tuple[tuple[str, Sort], ...]
    body: S.Expr
    loc: S.Loc | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        names = [n for n, _ in self.formals]
        if len(set(names)) != len(names):
            raise SpecError(f"action {self.name} has duplicate formal names", self.loc)
        for n, s in self.formals:
            if not isinstance(s, (AtomSort, NatSort)):
                raise SpecError(f"formal {n} of {self.name} must range over a parameter or Nat", self.loc)

    @property
    def signature(self) -> tuple[Sort, ...]:
        return tuple(s for _, s in self.formals)

    @property
    def formal_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.formals)


@dataclass(frozen=True)
class Component:
    """A PSTS: parameters, sorted state variables, an initial predicate and named actions.

    The transition relation is implicit: the disjunction over actions of each
    body existentially closed over its formals.
    """

    name: str
    params: frozenset[str]
    vars: tuple[tuple[str, Sort], ...]
    init: S.Expr
    actions: tuple[ActionDecl, ...] = ()
    origin: str = field(default="user", compare=False)
    parts: tuple[str, ...] = field(default=(), compare=False)
    loc: S.Loc | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", frozenset(self.params))
        names = [v for v, _ in self.vars]
        if len(set(names)) != len(names):
            raise SpecError(f"component {self.name} declares a variable twice", self.loc)
        acts = [a.name for a in self.actions]
        if len(set(acts)) != len(acts):
            raise SpecError(f"component {self.name} declares an action twice", self.loc)
        if not self.parts:
            object.__setattr__(self, "parts", (self.name,))
        for a in self.actions:
            clash = set(a.formal_names) & set(names)
            if clash:
                raise SpecError(f"formal {sorted(clash)[0]!r} of {a.name} shadows a state variable", a.loc)

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.vars)

    @property
    def var_sorts(self) -> dict[str, Sort]:
        return dict(self.vars)

    @property
    def alphabet(self) -> frozenset[str]:
        return frozenset(a.name for a in self.actions)

    def action(self, name: str) -> ActionDecl:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def has_action(self, name: str) -> bool:
        return any(a.name == name for a in self.actions)

    def with_params(self, params: Iterable[str]) -> "Component":
        return replace(self, params=frozenset(self.params) | frozenset(params))

    def renamed(self, name: str) -> "Component":
        return replace(self, name=name)

    def next_formula(self) -> S.Expr:
        """The explicit transition relation, for display."""
        branches = []
        for a in self.actions:
            body = a.body
            if a.formals:
                body = S.Quant("E", tuple((n, _sort_domain(s)) for n, s in a.formals), body)
            branches.append(body)
        return S.disj(branches)


def _sort_domain(sort: Sort) -> S.Expr:
    if isinstance(sort, AtomSort):
        return S.Name(sort.param)
    return S.Name("Nat")


EMPTY = Component("Empty", frozenset(), (), S.TRUE, (), origin="unit")


def empty_component(params: Iterable[str] = ()) -> Component:
    return Component("Empty", frozenset(params), (), S.TRUE, (), origin="unit")


@dataclass(frozen=True)
class ActionEvent:
    name: str
    args: tuple = ()

    def __str__(self):
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(format_value(a) for a in self.args)})"


ActionTrace = tuple  # tuple[ActionEvent, ...]


class State(Mapping):
    """Immutable total assignment of values to state variables."""

    __slots__ = ("_d", "_h")

    def __init__(self, mapping=(), **kw):
        self._d = dict(mapping, **kw)
        self._h = None

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other):
        if isinstance(other, State):
            return self._d == other._d
        if isinstance(other, Mapping):
            return self._d == dict(other)
        return NotImplemented

    def __repr__(self):
        return "State(" + ", ".join(f"{k}={format_value(v)}" for k, v in self._d.items()) + ")"

    def updated(self, **kw) -> "State":
        d = dict(self._d)
        d.update(kw)
        return State(d)

    def project(self, names: Iterable[str]) -> "State":
        return State({n: self._d[n] for n in names})


def format_state(state: Mapping, sorts: Mapping[str, Sort] | None = None, primed: bool = False) -> str:
    """DSL-syntax rendering: a conjunction of `var = value` equations."""
    tick = "'" if primed else ""
    lines = []
    for name in state:
        v = state[name]
        text = format_literal_value(v, sorts[name]) if sorts and name in sorts else format_value(v)
        lines.append(f"/\\ {name}{tick} = {text}")
    return "\n".join(lines) if lines else "TRUE"


def parse_event(text: str) -> tuple[str, tuple[str, ...]]:
    """Split `Name(a, b)` into its name and raw argument strings."""
    text = text.strip()
    if "(" not in text:
        return text, ()
    if not text.endswith(")"):
        raise SpecError(f"malformed event {text!r}")
    name, rest = text.split("(", 1)
    raw = rest[:-1].strip()
    args = tuple(a.strip() for a in raw.split(",")) if raw else ()
    return name.strip(), args


def sorted_values(values) -> list:
    return sorted(values, key=value_key)
