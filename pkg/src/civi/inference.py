"""Invariant inference: template candidates filtered by a Houdini-style fixpoint.

Candidates are small universally quantified formulas over the obligation's
variables. Starting from those true in every initial state, the loop
repeatedly scans the states satisfying all surviving candidates and drops
every candidate falsified by some assumption-respecting step. The guarantee
is kept in the set throughout; if it is ever falsified, inference fails.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import syntax as S
from .contracts import Contract, Cti, InductiveResult, Obligation, _Checker, check_inductive, lower
from .evaluator import split_conjuncts
from .printer import show
from .sorts import AtomSort, BoolSort, EnumSort, FnSort, RecordSort, SetSort

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 4000
MAX_RECORD_ATOMS = 16


def _binder_name(param: str, taken: set[str]) -> str:
    base = param[0].lower() if param else "x"
    name = base
    k = 1
    while name in taken:
        name = f"{base}{k}"
        k += 1
    return name


def _atoms(system, param: str, r: str) -> tuple[list[tuple[S.Expr, str]], list[S.Expr]]:
    """Unary atoms over `r \\in param` (each tagged with a group) and global atoms.

    Atoms in one group are pairwise exclusive, so templates never pair them.
    """
    rn = S.Name(r)
    unary: list[tuple[S.Expr, str]] = []
    glob: list[S.Expr] = []
    for v, sort in system.vars:
        vn = S.Name(v)
        if isinstance(sort, FnSort) and sort.args == (AtomSort(param),):
            app = S.Apply(vn, (rn,))
            if isinstance(sort.result, BoolSort):
                unary.append((app, v))
            elif isinstance(sort.result, EnumSort):
                unary.extend((S.BinOp("=", app, S.StrLit(lit)), v) for lit in sort.result.literals)
        elif isinstance(sort, SetSort) and sort.elem == AtomSort(param):
            unary.append((S.BinOp("\\in", rn, vn), v))
            glob.append(S.BinOp("=", vn, S.Name(param)))
        elif isinstance(sort, SetSort) and isinstance(sort.elem, RecordSort):
            unary.extend((a, f"{v}#{i}") for i, a in enumerate(_record_atoms(sort.elem, param, rn, vn)))
        elif isinstance(sort, EnumSort):
            glob.extend(S.BinOp("=", vn, S.StrLit(lit)) for lit in sort.literals)
        elif isinstance(sort, BoolSort):
            glob.append(vn)
    return unary, glob


def _record_atoms(rs: RecordSort, param: str, rn: S.Expr, vn: S.Expr) -> list[S.Expr]:
    atom_fields = [n for n, s in rs.fields if s == AtomSort(param)]
    if len(atom_fields) != 1:
        return []
    others = [(n, s) for n, s in rs.fields if n != atom_fields[0]]
    if not all(isinstance(s, EnumSort) for _, s in others):
        return []
    combos = list(itertools.product(*(s.literals for _, s in others)))
    if len(combos) > MAX_RECORD_ATOMS:
        return []
    out = []
    for combo in combos:
        vals = dict(zip((n for n, _ in others), combo))
        fields_ = tuple((n, rn if n == atom_fields[0] else S.StrLit(vals[n])) for n, _ in rs.fields)
        out.append(S.BinOp("\\in", S.RecordCons(fields_), vn))
    return out


def _params(system) -> list[str]:
    return sorted(system.params)


_NEGATED_OP = {"=": "/=", "\\in": "\\notin"}


def _neg(a: S.Expr) -> S.Expr:
    if isinstance(a, S.BinOp) and a.op in _NEGATED_OP:
        return S.BinOp(_NEGATED_OP[a.op], a.left, a.right)
    return S.Not(a)


def _lits(atoms: Sequence[S.Expr]) -> list[S.Expr]:
    out = []
    for a in atoms:
        out.append(a)
        out.append(_neg(a))
    return out


def generate_pool(ob: Obligation | Contract, instance=None, budget: int = DEFAULT_BUDGET) -> list[S.Expr]:
    """Candidate invariants for an obligation, simplest first, at most `budget` of them.

    The guarantee's and assumption's conjuncts come first, then single-atom
    facts, implications and equivalences between two atoms about the same
    element, implications from an element atom to a global atom, existential
    to universal implications, and implications from two atoms to a third.
    """
    if budget <= 0:
        return []
    if isinstance(ob, Contract):
        ob = lower(ob)
    system = ob.system
    out: list[S.Expr] = []
    seen: set = set()

    def add(e: S.Expr) -> bool:
        if e not in seen:
            seen.add(e)
            out.append(e)
        return len(out) >= budget

    for e in split_conjuncts(ob.guarantee) + split_conjuncts(ob.assume):
        if add(e):
            return out
    taken = set(system.var_names) | set(system.params)
    gens = []
    all_glob: list[S.Expr] = []
    for p in _params(system):
        r = _binder_name(p, taken)
        unary, glob = _atoms(system, p, r)
        all_glob.extend(g for g in glob if g not in all_glob)
        gens.append((p, r, unary, glob))

    def forall(p, r, body):
        return S.Quant("A", ((r, S.Name(p)),), body)

    def exists(p, r, body):
        return S.Quant("E", ((r, S.Name(p)),), body)

    for g in _lits(all_glob):
        if add(g):
            return out
    for p, r, unary, _ in gens:
        for a, _g in unary:
            for la in (a, _neg(a)):
                if add(forall(p, r, la)):
                    return out
    for p, r, unary, _ in gens:
        for (a, ga), (b, gb) in itertools.permutations(unary, 2):
            if ga == gb:
                continue
            for la, lb in ((a, b), (a, _neg(b)), (_neg(a), b), (_neg(a), _neg(b))):
                if add(forall(p, r, S.Implies(la, lb))):
                    return out
        for (a, ga), (b, gb) in itertools.combinations(unary, 2):
            if ga != gb and add(forall(p, r, S.Iff(a, b))):
                return out
    for p, r, unary, _ in gens:
        for a, _g in unary:
            for la in (a, _neg(a)):
                for g in _lits(all_glob):
                    if add(forall(p, r, S.Implies(la, g))):
                        return out
    for p, r, unary, _ in gens:
        for (a, ga), (b, gb) in itertools.permutations(unary, 2):
            if ga == gb:
                continue
            for lb in (b, _neg(b)):
                if add(S.Implies(exists(p, r, a), forall(p, r, lb))):
                    return out
    for p, r, unary, _ in gens:
        for (a, ga), (b, gb) in itertools.combinations(unary, 2):
            if ga == gb:
                continue
            for c, gc in unary:
                if gc in (ga, gb):
                    continue
                for lc in (c, _neg(c)):
                    if add(forall(p, r, S.Implies(S.And((a, b)), lc))):
                        return out
    return out


# Houdini ----------------------------------------------------------------------------------------


@dataclass
class HoudiniResult:
    success: bool
    invariant: S.Expr | None
    kept: list[S.Expr] = field(default_factory=list)
    dropped: list[tuple[S.Expr, str]] = field(default_factory=list)
    iterations: int = 0
    pool_size: int = 0
    ctis: list[Cti] = field(default_factory=list)
    recheck: InductiveResult | None = None
    seconds: float = 0.0
    reason: str = ""

    def summary(self) -> str:
        if self.success:
            return (
                f"inferred invariant with {len(self.kept)} conjunct(s) from a pool of {self.pool_size} "
                f"in {self.iterations} iteration(s)"
            )
        return f"inference failed after {self.iterations} iteration(s): {self.reason}"


def houdini(
    ob: Obligation | Contract,
    instance,
    pool: Iterable[S.Expr] | None = None,
    budget: int = DEFAULT_BUDGET,
    ceiling: int | None = None,
    max_iterations: int = 1000,
    on_cti: Callable[[Cti, list[S.Expr]], None] | None = None,
) -> HoudiniResult:
    """Largest inductive subset of the pool (plus the guarantee), relative to the assumption."""
    start = time.perf_counter()
    if isinstance(ob, Contract):
        ob = lower(ob)
    cands = list(pool) if pool is not None else generate_pool(ob, instance, budget)
    G = ob.guarantee
    H = [G] + [p for p in cands if p != G]
    res = HoudiniResult(False, None, pool_size=len(cands))
    ck = _Checker(ob, instance, ceiling)
    comp = ck.comp
    compiled = {id(p): comp.compile(p) for p in H}

    def dropping(p, why):
        res.dropped.append((p, why))
        log.debug("drop %s (%s)", show(p), why)

    # initiation filter
    alive = list(H)
    for s in ck.search(S.conj([ob.system.init, ob.assume])):
        keep = []
        for p in alive:
            if compiled[id(p)](s, None, {}):
                keep.append(p)
            else:
                dropping(p, "initiation")
                if p is G:
                    res.ctis.append(Cti("initiation", s))
                    res.reason = "guarantee fails in an initial state"
                    res.seconds = time.perf_counter() - start
                    return res
        alive = keep

    while True:
        res.iterations += 1
        if res.iterations > max_iterations:
            res.reason = "iteration limit reached"
            break
        bad: dict[int, Cti] = {}
        fns = [(p, compiled[id(p)]) for p in alive]
        for s in ck.search(S.conj([ob.assume] + alive)):
            for name, args, succ in ck.successors(s):
                for t in succ:
                    cti = None
                    for p, f in fns:
                        if id(p) not in bad and not f(t, None, {}):
                            cti = cti or Cti("consecution", s, t, name, args)
                            bad[id(p)] = cti
                if len(bad) == len(fns):
                    break
        if not bad:
            res.success = True
            break
        killed = [p for p in alive if id(p) in bad]
        # one callback per distinct step, with the candidates it falsified
        groups: dict[int, tuple[Cti, list]] = {}
        for p in killed:
            groups.setdefault(id(bad[id(p)]), (bad[id(p)], []))[1].append(p)
        for cti, ps in groups.values():
            res.ctis.append(cti)
            if on_cti is not None:
                on_cti(cti, ps)
        for p in killed:
            dropping(p, f"consecution via {bad[id(p)].event}")
        if id(G) in bad:
            res.reason = f"guarantee not preserved by {bad[id(G)].event}"
            alive = [p for p in alive if id(p) not in bad]
            break
        alive = [p for p in alive if id(p) not in bad]

    res.kept = alive if res.success else []
    if res.success:
        # G is kept whole, so its conjuncts in the pool add nothing
        g_parts = set(S.conjuncts(G))
        res.kept = [G] + [p for p in alive if p is not G and p not in g_parts]
        alive = res.kept
        res.invariant = S.conj(alive)
        res.recheck = check_inductive(ob, instance, invariant=res.invariant, ceiling=ceiling)
        if not res.recheck.proved:
            res.success = False
            res.reason = "result failed the independent re-check"
    res.seconds = time.perf_counter() - start
    return res


def load_pool(text: str, registry=None) -> list[S.Expr]:
    """One candidate per non-empty, non-comment line."""
    from .parser import parse_expr

    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        e = parse_expr(line)
        if registry is not None:
            e = registry.inline(e, set())
        out.append(e)
    return out
