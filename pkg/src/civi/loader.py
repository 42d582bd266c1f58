"""Link parsed `.civ` files into components, fluents, contracts, instances and chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import syntax as S
from .compose import widen
from .errors import DuplicateName, SpecError, UnboundName
from .model import ActionDecl, Component
from .parser import (
    ChainDecl,
    ComponentDecl,
    ConstantDecl,
    ContractDecl,
    FluentDecl,
    FormulaDecl,
    IncludeDecl,
    InstanceDecl,
    SpecFile,
    _check_duplicates,
    parse,
    parse_expr,
)
from .sfl import Fluent, link, make_fluent
from .sorts import Instance
from .typecheck import check_formula, sort_params, sortcheck

SPECS_DIR = Path(__file__).parent / "specs"


@dataclass
class Registry:
    """Everything declared by a set of specification files."""

    constants: set[str] = field(default_factory=set)
    components: dict[str, Component] = field(default_factory=dict)
    fluents: dict[str, Fluent] = field(default_factory=dict)
    formulas: dict[str, S.Expr] = field(default_factory=dict)
    sfls: dict[str, S.Expr] = field(default_factory=dict)
    contracts: dict = field(default_factory=dict)
    instances: dict[str, Instance] = field(default_factory=dict)
    chains: dict[str, tuple[str, ...]] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    decls: list = field(default_factory=list)

    def component(self, name: str) -> Component:
        if name in self.components:
            return self.components[name]
        if name in self.fluents:
            return self.fluents[name].machine
        raise UnboundName(name)

    def contract(self, name: str):
        try:
            return self.contracts[name]
        except KeyError:
            raise UnboundName(name) from None

    def instance(self, name: str | None = None) -> Instance:
        if name is None:
            if "default" in self.instances:
                return self.instances["default"]
            if len(self.instances) == 1:
                return next(iter(self.instances.values()))
            raise SpecError("no default instance declared")
        try:
            return self.instances[name]
        except KeyError:
            raise UnboundName(name) from None

    def chain(self, name: str | None = None):
        if name is None:
            if len(self.chains) != 1:
                raise SpecError(f"expected exactly one chain, found {len(self.chains)}")
            name = next(iter(self.chains))
        try:
            names = self.chains[name]
        except KeyError:
            raise UnboundName(name) from None
        return [self.contract(n) for n in names]

    def formula(self, text: str, vars_=(), extra: Iterable[str] = ()) -> S.Expr:
        """Parse a state formula and inline the named definitions it uses."""
        e = parse_expr(text)
        return self.inline(e, set(vars_) | set(extra))

    def sfl(self, text: str) -> S.Expr:
        e = parse_expr(text, sfl=True)
        e = _inline(e, self.sfls, set())
        return link(e, self.fluents, self.constants)

    def inline(self, e: S.Expr, shadow: set[str]) -> S.Expr:
        return _inline(e, self.formulas, shadow)


def _inline(e: S.Expr, defs: Mapping[str, S.Expr], shadow: set[str]) -> S.Expr:
    names = (S.free_names(e) & set(defs)) - shadow
    if not names:
        return e
    return S.substitute(e, {n: defs[n] for n in names})


def _expand_defs(raw: Mapping[str, FormulaDecl]) -> dict[str, S.Expr]:
    done: dict[str, S.Expr] = {}
    active: list[str] = []

    def go(name: str) -> S.Expr:
        if name in done:
            return done[name]
        if name in active:
            cycle = " -> ".join(active[active.index(name):] + [name])
            raise SpecError(f"definitions are cyclic: {cycle}", raw[name].loc)
        active.append(name)
        e = raw[name].expr
        deps = S.free_names(e) & set(raw)
        if deps:
            e = S.substitute(e, {d: go(d) for d in deps})
        active.pop()
        done[name] = e
        return e

    for n in raw:
        go(n)
    return done


# file gathering --------------------------------------------------------------------------


def _gather(path: Path, seen: set[Path], out: list[SpecFile]) -> None:
    path = path.resolve()
    if path in seen:
        return
    seen.add(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    sf = parse(text, str(path))
    for inc in sf.of(IncludeDecl):
        _gather(path.parent / inc.path, seen, out)
    out.append(sf)


def load_files(paths: Iterable[str | Path]) -> Registry:
    files: list[SpecFile] = []
    seen: set[Path] = set()
    for p in paths:
        _gather(Path(p), seen, files)
    return link_files(files)


def load_text(text: str, path: str | None = None) -> Registry:
    sf = parse(text, path)
    files: list[SpecFile] = []
    seen: set[Path] = set()
    base = Path(path).parent if path else Path.cwd()
    for inc in sf.of(IncludeDecl):
        _gather(base / inc.path, seen, files)
    files.append(sf)
    return link_files(files)


def entry_files(entry: str) -> list[Path]:
    d = SPECS_DIR / entry
    if not d.is_dir():
        known = sorted(p.name for p in SPECS_DIR.iterdir() if p.is_dir())
        raise SpecError(f"unknown bundled entry {entry!r} (known: {', '.join(known)})")
    return sorted(d.glob("*.civ"))


def load_entry(entry: str) -> Registry:
    """Load a bundled corpus entry such as `toy2pc`."""
    return load_files(entry_files(entry))


def bundled_entries() -> list[str]:
    return sorted(p.name for p in SPECS_DIR.iterdir() if p.is_dir() and any(p.glob("*.civ")))


# linking -----------------------------------------------------------------------------------


def link_files(files: list[SpecFile]) -> Registry:
    decls = [d for sf in files for d in sf.decls if not isinstance(d, IncludeDecl)]
    _check_duplicates(decls)
    reg = Registry(files=[sf.path or "<text>" for sf in files], decls=decls)
    for d in decls:
        if isinstance(d, ConstantDecl):
            reg.constants.update(d.names)
        elif isinstance(d, ComponentDecl):
            reg.constants.update(d.constants)
        elif isinstance(d, FluentDecl):
            reg.constants.update(d.constants)
    formula_decls = {d.name: d for d in decls if isinstance(d, FormulaDecl) and d.kind == "formula"}
    sfl_decls = {d.name: d for d in decls if isinstance(d, FormulaDecl) and d.kind == "sfl"}
    clash = set(formula_decls) & set(sfl_decls)
    if clash:
        raise DuplicateName(f"definition {sorted(clash)[0]!r} declared twice")
    reg.formulas = _expand_defs(formula_decls)

    for d in decls:
        if isinstance(d, ComponentDecl):
            reg.components[d.name] = _component(d, reg)
        elif isinstance(d, FluentDecl):
            if d.name in reg.components:
                raise DuplicateName(f"component {d.name!r} declared twice", d.loc)
            reg.fluents[d.name] = _fluent(d, reg)

    raw_sfl = _expand_defs(sfl_decls)
    for name, e in raw_sfl.items():
        reg.sfls[name] = link(e, reg.fluents, reg.constants)

    for d in decls:
        if isinstance(d, InstanceDecl):
            inst = Instance(dict(d.bindings), d.nat_bound, d.allow_empty)
            key = d.name or "default"
            if key in reg.instances:
                raise DuplicateName(f"instance {key!r} declared twice", d.loc)
            reg.instances[key] = inst

    from .contracts import contract_from_decl

    for d in decls:
        if isinstance(d, ContractDecl):
            reg.contracts[d.name] = contract_from_decl(d, reg)
    for d in decls:
        if isinstance(d, ChainDecl):
            for n in d.contracts:
                if n not in reg.contracts:
                    raise UnboundName(n, d.loc)
            reg.chains[d.name] = d.contracts
    return reg


def _params_for(constants, vars_, actions, exprs, reg: Registry) -> frozenset:
    ps = set(constants)
    for _, s in vars_:
        ps |= sort_params(s)
    for a in actions:
        for _, s in a.formals:
            ps |= sort_params(s)
    for e in exprs:
        ps |= S.free_names(e) & reg.constants
    return frozenset(ps)


def _actions(decl_actions, vars_: set[str], reg: Registry) -> tuple[ActionDecl, ...]:
    out = []
    for a in decl_actions:
        shadow = vars_ | {n for n, _ in a.formals}
        out.append(ActionDecl(a.name, a.formals, reg.inline(a.body, shadow), loc=a.loc))
    return tuple(out)


def _component(d: ComponentDecl, reg: Registry) -> Component:
    names = {v for v, _ in d.vars}
    init = reg.inline(d.init, names)
    actions = _actions(d.actions, names, reg)
    params = _params_for(d.constants, d.vars, actions, [init] + [a.body for a in actions], reg)
    c = Component(d.name, params, d.vars, init, actions, loc=d.loc)
    sortcheck(c)
    return c


def _fluent(d: FluentDecl, reg: Registry) -> Fluent:
    names = {d.var}
    init = reg.inline(d.init, names)
    actions = _actions(d.actions, names, reg)
    from .sfl import fluent_var_sort

    params = _params_for(
        d.constants, [(d.var, fluent_var_sort(d.arg_sorts))], actions, [init] + [a.body for a in actions], reg
    )
    f = make_fluent(d.name, d.arg_sorts, d.var, init, actions, params)
    sortcheck(f.machine)
    return f


def composite(reg: Registry, names: Iterable[str]) -> tuple[Component, ...]:
    """Look up operands by name and give them a common parameter set."""
    return tuple(widen([reg.component(n) for n in names]))


def check_state(e: S.Expr, comp: Component, what: str) -> None:
    if S.has_primes(e) or S.is_temporal(e) or S.fluent_atoms(e):
        raise SpecError(f"{what} must be a state formula", e.loc)
    check_formula(e, comp.var_sorts, comp.params)


def instance_from_cli(specs: Iterable[str], nat_bound: int | None = None, base: Instance | None = None) -> Instance:
    """Build an instance from `Param=a,b` strings, overriding `base`."""
    params = dict(base.params) if base else {}
    allow_empty = base.allow_empty if base else False
    for spec in specs:
        if "=" not in spec:
            raise SpecError(f"instance binding {spec!r} must look like Param=a,b")
        k, v = spec.split("=", 1)
        atoms = tuple(a.strip() for a in v.split(",") if a.strip())
        if not atoms:
            allow_empty = True
        params[k.strip()] = atoms
    nb = nat_bound if nat_bound is not None else (base.nat_bound if base else 2)
    return Instance(params, nb, allow_empty)


__all__ = [
    "Registry",
    "load_files",
    "load_text",
    "load_entry",
    "entry_files",
    "bundled_entries",
    "link_files",
    "composite",
    "instance_from_cli",
    "SPECS_DIR",
]
