"""Seeded generators of small random components, predicates, contracts and traces."""

from __future__ import annotations

import random

from civi.contracts import make_contract
from civi.loader import load_text
from civi.model import ActionEvent
from civi.parser import parse_expr
from civi.sorts import Instance

ACTIONS = ("Prepare", "Commit", "Abort")

# kind -> (sort text, init value text)
VAR_KINDS = {
    "st": ('[RMs -> {"a", "b", "c"}]', '[r \\in RMs |-> "a"]'),
    "flag": ("[RMs -> BOOLEAN]", "[r \\in RMs |-> FALSE]"),
    "set": ("SUBSET RMs", "{}"),
    "mode": ('{"p", "q"}', '"p"'),
}


def instance(n: int) -> Instance:
    return Instance({"RMs": tuple(f"r{i}" for i in range(1, n + 1))})


class Gen(random.Random):
    def var_kinds(self, k: int | None = None) -> list[str]:
        k = k or self.choice((1, 2))
        return self.sample(sorted(VAR_KINDS), k)

    # literals over one element r (None for global kinds)
    def literal(self, kind: str, var: str, r: str) -> str:
        if kind == "st":
            op = self.choice(("=", "/="))
            return f'{var}[{r}] {op} "{self.choice("abc")}"'
        if kind == "flag":
            return self.choice((f"{var}[{r}]", f"~{var}[{r}]"))
        if kind == "set":
            return self.choice((f"{r} \\in {var}", f"{r} \\notin {var}"))
        return self.choice((f'{var} = "p"', f'{var} = "q"'))

    def guard(self, kind: str, var: str) -> str:
        return self.literal(kind, var, "rm")

    def update(self, kind: str, var: str) -> str:
        if kind == "st":
            return f'{var}\' = [{var} EXCEPT ![rm] = "{self.choice("abc")}"]'
        if kind == "flag":
            return f"{var}' = [{var} EXCEPT ![rm] = {self.choice(('TRUE', 'FALSE'))}]"
        if kind == "set":
            return self.choice((f"{var}' = {var} \\cup {{rm}}", f"{var}' = {var} \\ {{rm}}"))
        return f'{var}\' = "{self.choice("pq")}"'

    def component_text(self, name: str, kinds: list[str], tag: str, actions=None) -> tuple[str, list[tuple[str, str]]]:
        vars_ = [(k, f"{k}_{tag}") for k in kinds]
        actions = actions or [a for a in ACTIONS if self.random() < 0.75] or [self.choice(ACTIONS)]
        lines = [f"component {name} {{", "  CONSTANT RMs"]
        lines.append("  VARIABLES " + ", ".join(f"{v} : {VAR_KINDS[k][0]}" for k, v in vars_))
        lines.append("  Init == " + " /\\ ".join(f"{v} = {VAR_KINDS[k][1]}" for k, v in vars_))
        for a in actions:
            k, v = self.choice(vars_)
            parts = []
            if self.random() < 0.5:
                gk, gv = self.choice(vars_)
                parts.append(self.guard(gk, gv))
            parts.append(self.update(k, v))
            others = [w for _, w in vars_ if w != v]
            if others:
                parts.append(f"UNCHANGED <<{', '.join(others)}>>")
            lines.append(f"  {a}(rm \\in RMs) == " + " /\\ ".join(parts))
        lines.append("}")
        return "\n".join(lines), vars_

    def component(self, name: str = "C", kinds=None, tag: str = "c", actions=None):
        text, vars_ = self.component_text(name, kinds or self.var_kinds(), tag, actions)
        return load_text(text).component(name), vars_

    def predicate_text(self, vars_) -> str:
        shape = self.randrange(4)
        k1, v1 = self.choice(vars_)
        k2, v2 = self.choice(vars_)
        if shape == 0:
            return f"\\A r \\in RMs : {self.literal(k1, v1, 'r')}"
        if shape == 1:
            return f"\\A r \\in RMs : {self.literal(k1, v1, 'r')} => {self.literal(k2, v2, 'r')}"
        if shape == 2:
            return f"\\A r1, r2 \\in RMs : ~({self.literal(k1, v1, 'r1')} /\\ {self.literal(k2, v2, 'r2')})"
        return f"(\\E r \\in RMs : {self.literal(k1, v1, 'r')}) => (\\A r \\in RMs : {self.literal(k2, v2, 'r')})"

    def predicate(self, vars_):
        return parse_expr(self.predicate_text(vars_))

    def state_contract(self, name: str = "K", with_assumption: bool = True, invariant: str = "guarantee"):
        """A random state contract; the invariant is the guarantee, optionally strengthened."""
        comp, vars_ = self.component()
        assume = self.predicate(vars_) if with_assumption and self.random() < 0.4 else parse_expr("TRUE")
        g = self.predicate(vars_)
        inv = g
        if invariant == "strengthened" and self.random() < 0.5:
            inv = parse_expr(f"({self.predicate_text(vars_)}) /\\ ({_text(g)})")
        return make_contract("state", name, assume, (comp,), g, inv), vars_

    def trace(self, inst: Instance, max_len: int = 8, actions=ACTIONS) -> tuple[ActionEvent, ...]:
        atoms = inst.atoms("RMs")
        n = self.randint(0, max_len)
        return tuple(ActionEvent(self.choice(actions), (self.choice(atoms),)) for _ in range(n))


def _text(e) -> str:
    from civi.printer import show

    return show(e)


def brute_reachable(comp, inst) -> set:
    """Reachable states by brute force: all type-correct pairs tested with step_holds."""
    from civi.evaluator import action_arg_tuples, enumerate_states, evaluate, step_holds

    names = comp.var_names
    key = lambda s: tuple(s[n] for n in names)  # noqa: E731
    states = list(enumerate_states(comp, inst))
    seen = {key(s) for s in states if evaluate(comp.init, s, inst)}
    by_key = {key(s): s for s in states}
    frontier = list(seen)
    while frontier:
        nxt = []
        for k in frontier:
            s = by_key[k]
            for a in comp.actions:
                for args in action_arg_tuples(a, inst):
                    for t in states:
                        kt = key(t)
                        if kt not in seen and step_holds(a, args, s, t, inst):
                            seen.add(kt)
                            nxt.append(kt)
        frontier = nxt
    return seen


def fast_reachable(comp, inst) -> set:
    """Reachable states through the successor engine used by the checker."""
    from civi.contracts import lower, reachable_states

    t = parse_expr("TRUE")
    c = make_contract("state", "reach", t, (comp,), t, t)
    return {tuple(s[n] for n in comp.var_names) for s in reachable_states(lower(c), inst)}


# fluent mutations

MUTATIONS = ("determinism", "enabledness", "initial-state")


def mutate_fluent(f, kind: str, action: str | None = None):
    """A copy of fluent `f` broken in the way `kind` names.

    determinism: one action may also stutter; enabledness: one action only
    fires from the initial value; initial-state: any value is initial.
    """
    from dataclasses import replace

    from civi import syntax as S
    from civi.model import ActionDecl
    from civi.sfl import make_fluent

    m = f.machine
    v = S.Name(f.var)
    init_rhs = next(c.right for c in S.conjuncts(m.init) if isinstance(c, S.BinOp) and c.op == "=")
    init = m.init
    actions = list(m.actions)
    if kind == "initial-state":
        init = S.TRUE
    else:
        i = next(k for k, a in enumerate(actions) if action in (None, a.name))
        a = actions[i]
        if kind == "determinism":
            body = S.Or((a.body, S.BinOp("=", S.Prime(f.var), v)))
        else:
            body = S.conj([S.BinOp("=", v, init_rhs), a.body])
        actions[i] = ActionDecl(a.name, a.formals, body)
    g = make_fluent(f.name, f.arg_sorts, f.var, init, actions, m.params)
    return replace(g, machine=replace(g.machine, params=m.params))
