"""Lexer and recursive-descent parser for `.civ` specification files.

The grammar is documented in docs/DSL.md. Parsing produces declaration
records whose formulas keep names unresolved; `loader.link` turns a set of
parsed files into components, fluents and contracts.

TLA-style bullet lists are supported: a `/\\` or `\\/` that starts an
operand opens a list whose items are the lines whose bullet sits in the same
column. Any token at or left of that column ends the current item, except
inside brackets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import syntax as S
from .errors import DuplicateName, ParseError
from .sorts import (
    BOOL,
    NAT,
    AtomSort,
    EnumSort,
    FnSort,
    RecordSort,
    SetSort,
    Sort,
    TupleSort,
)

# tokens ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUM STR OP EOF
    text: str
    line: int
    col: int

    def __str__(self):
        return "end of input" if self.kind == "EOF" else repr(self.text)


BACKSLASH_WORDS = {
    "A": "\\A",
    "E": "\\E",
    "in": "\\in",
    "notin": "\\notin",
    "subseteq": "\\subseteq",
    "cup": "\\cup",
    "union": "\\cup",
    "cap": "\\cap",
    "intersect": "\\cap",
    "setminus": "\\",
    "neq": "/=",
    "lnot": "~",
    "neg": "~",
    "land": "/\\",
    "lor": "\\/",
    "equiv": "<=>",
}

# longest first
SYMBOLS = [
    "<=>",
    "|->",
    "==",
    "=>",
    "/\\",
    "\\/",
    "/=",
    "<=",
    ">=",
    "<<",
    ">>",
    "->",
    "||",
    "[]",
    "<>",
    "(",
    ")",
    "[",
    "]",
    "{",
    "}",
    ",",
    ":",
    ".",
    "!",
    "'",
    "=",
    "<",
    ">",
    "~",
    "+",
    "-",
    "@",
]

RESERVED = {
    "EXCEPT",
    "UNCHANGED",
    "IF",
    "THEN",
    "ELSE",
    "TRUE",
    "FALSE",
    "SUBSET",
    "CONSTANT",
    "CONSTANTS",
    "VARIABLE",
    "VARIABLES",
    "U",
    "X",
    "BOOLEAN",
}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUM = re.compile(r"[0-9]+")


def tokenize(text: str, path: str | None = None) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 4 - (col - 1) % 4 if ch == "\t" else 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"' and text[j] != "\n":
                j += 1
            if j >= n or text[j] != '"':
                raise ParseError("unterminated string", S.Loc(line, col, path))
            toks.append(Token("STR", text[i + 1 : j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        m = _IDENT.match(text, i)
        if m:
            toks.append(Token("IDENT", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NUM.match(text, i)
        if m:
            toks.append(Token("NUM", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        if ch == "\\":
            if text.startswith("\\/", i):
                toks.append(Token("OP", "\\/", line, col))
                i += 2
                col += 2
                continue
            m = re.compile(r"[A-Za-z]+").match(text, i + 1)
            if m and m.group() in BACKSLASH_WORDS:
                toks.append(Token("OP", BACKSLASH_WORDS[m.group()], line, col))
                col += m.end() - i
                i = m.end()
                continue
            if m:
                raise ParseError(f"unknown operator \\{m.group()}", S.Loc(line, col, path))
            toks.append(Token("OP", "\\", line, col))
            i += 1
            col += 1
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token("OP", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", S.Loc(line, col, path))
    toks.append(Token("EOF", "", line, col))
    return toks


# declarations --------------------------------------------------------------------


@dataclass(frozen=True)
class ActionDef:
    name: str
    formals: tuple[tuple[str, Sort], ...]
    body: S.Expr
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ConstantDecl:
    names: tuple[str, ...]
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ComponentDecl:
    name: str
    constants: tuple[str, ...]
    vars: tuple[tuple[str, Sort], ...]
    init: S.Expr
    actions: tuple[ActionDef, ...]
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FluentDecl:
    name: str
    arg_sorts: tuple[Sort, ...]
    var: str
    constants: tuple[str, ...]
    init: S.Expr
    actions: tuple[ActionDef, ...]
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class FormulaDecl:
    kind: str  # "formula" | "sfl"
    name: str
    expr: S.Expr
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ContractDecl:
    name: str
    kind: str  # "state" | "action" | "hybrid"
    assume: S.Expr
    components: tuple[str, ...]
    guarantee: S.Expr
    invariant: S.Expr | None = None
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class InstanceDecl:
    name: str | None
    bindings: tuple[tuple[str, tuple[str, ...]], ...]
    nat_bound: int = 2
    allow_empty: bool = False
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ChainDecl:
    name: str
    contracts: tuple[str, ...]
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class IncludeDecl:
    path: str
    loc: S.Loc | None = field(default=None, compare=False)


@dataclass(frozen=True)
class SpecFile:
    path: str | None
    decls: tuple = ()

    def of(self, kind) -> list:
        return [d for d in self.decls if isinstance(d, kind)]


DECL_KIND = {
    ConstantDecl: "constant",
    ComponentDecl: "component",
    FluentDecl: "component",
    FormulaDecl: "definition",
    ContractDecl: "contract",
    InstanceDecl: "instance",
    ChainDecl: "chain",
}

CONTRACT_KINDS = ("state", "action", "hybrid")

# expression precedence (higher binds tighter)
P_QUANT, P_IFF, P_IMPLIES, P_OR, P_AND, P_UNTIL, P_PREFIX, P_REL, P_SET, P_ARITH, P_POSTFIX, P_ATOM = range(1, 13)
REL_OPS = {"=", "/=", "\\in", "\\notin", "<", "<=", ">", ">=", "\\subseteq"}
SET_OPS = {"\\cup", "\\cap", "\\"}
ARITH_OPS = {"+", "-"}
PREFIX_OPS = {"~", "[]", "<>"}


class Parser:
    def __init__(self, text: str, path: str | None = None, *, sfl: bool = False):
        self.path = path
        self.toks = tokenize(text, path)
        self.i = 0
        self.barrier: int | None = None
        self.sfl = sfl

    # token helpers

    def loc(self, tok: Token | None = None) -> S.Loc:
        tok = tok or self.toks[self.i]
        return S.Loc(tok.line, tok.col, self.path)

    def peek(self, k: int = 0) -> Token:
        tok = self.toks[min(self.i + k, len(self.toks) - 1)]
        if self.barrier is not None and tok.kind != "EOF" and tok.col <= self.barrier:
            return Token("EOF", "", tok.line, tok.col)
        return tok

    def raw(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind in ("OP", "IDENT") and tok.text == text

    def at_ident(self, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == "IDENT" and tok.text not in RESERVED

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind == "EOF" and self.raw().kind != "EOF":
            raise ParseError(f"unexpected {self.raw()} (item ended by layout)", self.loc(self.raw()))
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise ParseError(f"unexpected {self.peek()}", self.loc(self.raw()), expected=[text])
        return self.advance()

    def ident(self, what: str = "identifier") -> str:
        if not self.at_ident():
            raise ParseError(f"unexpected {self.peek()}", self.loc(self.raw()), expected=[what])
        return self.advance().text

    def error(self, expected) -> ParseError:
        return ParseError(f"unexpected {self.peek()}", self.loc(self.raw()), expected=expected)

    # files

    def parse_file(self) -> SpecFile:
        decls = []
        while self.peek().kind != "EOF":
            decls.append(self.declaration())
        _check_duplicates(decls)
        return SpecFile(self.path, tuple(decls))

    def declaration(self):
        tok = self.peek()
        loc = self.loc()
        word = tok.text if tok.kind == "IDENT" else None
        if word in ("CONSTANT", "CONSTANTS"):
            self.advance()
            return ConstantDecl(self.name_list(), loc=loc)
        if word == "component":
            self.advance()
            return self.component_body(self.ident("component name"), loc)
        if word == "fluent":
            self.advance()
            return self.fluent_decl(loc)
        if word in ("formula", "sfl"):
            self.advance()
            name = self.ident("definition name")
            self.expect("==")
            expr = self.with_mode(word == "sfl", self.expr)
            return FormulaDecl(word, name, expr, loc=loc)
        if word == "contract":
            self.advance()
            return self.contract_decl(loc)
        if word == "instance":
            self.advance()
            return self.instance_decl(loc)
        if word == "chain":
            self.advance()
            name = self.ident("chain name")
            self.expect("==")
            items = [self.ident("contract name")]
            while self.at(","):
                self.advance()
                items.append(self.ident("contract name"))
            return ChainDecl(name, tuple(items), loc=loc)
        if word == "include":
            self.advance()
            tok = self.peek()
            if tok.kind != "STR":
                raise self.error(["file name string"])
            self.advance()
            return IncludeDecl(tok.text, loc=loc)
        raise self.error(["CONSTANT", "component", "fluent", "formula", "sfl", "contract", "instance", "chain", "include"])

    def with_mode(self, sfl: bool, fn, *args):
        saved = self.sfl
        self.sfl = sfl
        try:
            return fn(*args)
        finally:
            self.sfl = saved

    def name_list(self) -> tuple[str, ...]:
        """Identifiers separated by optional commas, all on the current line or continued after a comma."""
        first = self.peek()
        names = [self.ident()]
        line = first.line
        while True:
            if self.at(","):
                self.advance()
                tok = self.peek()
                names.append(self.ident())
                line = tok.line
            elif self.at_ident() and self.peek().line == line:
                names.append(self.advance().text)
            else:
                break
        seen = set()
        for n in names:
            if n in seen:
                raise DuplicateName(f"constant {n!r} declared twice", self.loc(first))
            seen.add(n)
        return tuple(names)

    def component_body(self, name: str, loc):
        constants, vars, init, actions = self.block_items(allow_vars=True)
        if init is None:
            raise ParseError(f"component {name} has no Init", loc)
        return ComponentDecl(name, constants, vars, init, actions, loc=loc)

    def block_items(self, allow_vars: bool):
        self.expect("{")
        constants: list[str] = []
        vars: list[tuple[str, Sort]] = []
        init = None
        actions: list[ActionDef] = []
        while not self.at("}"):
            tok = self.peek()
            if tok.kind == "EOF":
                raise self.error(["}"])
            if tok.text in ("CONSTANT", "CONSTANTS"):
                self.advance()
                for c in self.name_list():
                    if c in constants:
                        raise DuplicateName(f"constant {c!r} declared twice", self.loc(tok))
                    constants.append(c)
            elif tok.text in ("VARIABLES", "VARIABLE"):
                if not allow_vars:
                    raise ParseError("fluent blocks declare their variable in the header", self.loc(tok))
                self.advance()
                while True:
                    vloc = self.loc()
                    vname = self.ident("variable name")
                    self.expect(":")
                    sort = self.sort()
                    if any(v == vname for v, _ in vars):
                        raise DuplicateName(f"variable {vname!r} declared twice", vloc)
                    vars.append((vname, sort))
                    if not self.at(","):
                        break
                    self.advance()
            elif tok.kind == "IDENT" and tok.text == "Init":
                self.advance()
                self.expect("==")
                if init is not None:
                    raise DuplicateName("Init defined twice", self.loc(tok))
                init = self.expr()
            elif self.at_ident():
                aloc = self.loc()
                aname = self.advance().text
                formals: list[tuple[str, Sort]] = []
                if self.at("("):
                    self.advance()
                    formals = self.formals()
                    self.expect(")")
                self.expect("==")
                body = self.expr()
                if any(a.name == aname for a in actions):
                    raise DuplicateName(f"action {aname!r} defined twice", aloc)
                actions.append(ActionDef(aname, tuple(formals), body, loc=aloc))
            else:
                raise self.error(["CONSTANT", "VARIABLES", "Init", "action definition", "}"])
        self.expect("}")
        return tuple(constants), tuple(vars), init, tuple(actions)

    def formals(self) -> list[tuple[str, Sort]]:
        out: list[tuple[str, Sort]] = []
        pending: list[str] = []
        while True:
            pending.append(self.ident("formal name"))
            if self.at(","):
                self.advance()
                continue
            self.expect("\\in")
            dom = self.scalar_domain()
            out.extend((p, dom) for p in pending)
            pending = []
            if not self.at(","):
                break
            self.advance()
        return out

    def scalar_domain(self) -> Sort:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "Nat":
            self.advance()
            return NAT
        if tok.kind == "IDENT" and tok.text == "BOOLEAN":
            self.advance()
            return BOOL
        return AtomSort(self.ident("parameter name"))

    def fluent_decl(self, loc):
        name = self.ident("fluent name")
        self.expect("(")
        args = [self.scalar_domain()]
        while self.at(","):
            self.advance()
            args.append(self.scalar_domain())
        self.expect(")")
        if not (self.peek().kind == "IDENT" and self.peek().text == "var"):
            raise self.error(["var"])
        self.advance()
        var = self.ident("fluent variable")
        constants, _, init, actions = self.block_items(allow_vars=False)
        if init is None:
            raise ParseError(f"fluent {name} has no Init", loc)
        return FluentDecl(name, tuple(args), var, constants, init, actions, loc=loc)

    def contract_decl(self, loc):
        name = self.ident("contract name")
        kind = self.ident("contract kind")
        if kind not in CONTRACT_KINDS:
            raise ParseError(f"unknown contract kind {kind!r}", loc, expected=CONTRACT_KINDS)
        self.keyword("assume")
        assume = self.with_mode(kind != "state", self.expr)
        self.keyword("component")
        comps = [self.ident("component name")]
        while self.at("||"):
            self.advance()
            comps.append(self.ident("component name"))
        self.keyword("guarantee")
        guarantee = self.with_mode(kind == "action", self.expr)
        inv = None
        if self.peek().kind == "IDENT" and self.peek().text == "invariant":
            self.advance()
            inv = self.with_mode(False, self.expr)
        return ContractDecl(name, kind, assume, tuple(comps), guarantee, inv, loc=loc)

    def keyword(self, word: str) -> None:
        tok = self.peek()
        if not (tok.kind == "IDENT" and tok.text == word):
            raise self.error([word])
        self.advance()

    def instance_decl(self, loc):
        name = None
        if self.at_ident() and self.at("==", 1):
            name = self.advance().text
            self.advance()
        bindings: list[tuple[str, tuple[str, ...]]] = []
        nat_bound = 2
        allow_empty = False
        while True:
            tok = self.peek()
            if tok.kind == "IDENT" and tok.text == "allowEmpty":
                self.advance()
                allow_empty = True
            elif tok.kind == "IDENT" and tok.text == "natBound":
                self.advance()
                self.expect("=")
                num = self.peek()
                if num.kind != "NUM":
                    raise self.error(["number"])
                self.advance()
                nat_bound = int(num.text)
            else:
                pname = self.ident("parameter name")
                self.expect("=")
                self.expect("{")
                atoms: list[str] = []
                if not self.at("}"):
                    atoms.append(self.ident("atom"))
                    while self.at(","):
                        self.advance()
                        atoms.append(self.ident("atom"))
                self.expect("}")
                if any(p == pname for p, _ in bindings):
                    raise DuplicateName(f"parameter {pname!r} bound twice", self.loc(tok))
                bindings.append((pname, tuple(atoms)))
            if not self.at(","):
                break
            self.advance()
        return InstanceDecl(name, tuple(bindings), nat_bound, allow_empty, loc=loc)

    # sorts

    def sort(self) -> Sort:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "BOOLEAN":
            self.advance()
            return BOOL
        if tok.kind == "IDENT" and tok.text == "Nat":
            self.advance()
            return NAT
        if tok.kind == "IDENT" and tok.text == "SUBSET":
            self.advance()
            return SetSort(self.sort())
        if self.at("{"):
            self.advance()
            lits = []
            while True:
                s = self.peek()
                if s.kind != "STR":
                    raise self.error(["string literal"])
                self.advance()
                lits.append(s.text)
                if not self.at(","):
                    break
                self.advance()
            self.expect("}")
            try:
                return EnumSort(tuple(lits))
            except Exception as exc:
                raise ParseError(str(exc), self.loc(tok)) from None
        if self.at("<<"):
            self.advance()
            elems = [self.sort()]
            while self.at(","):
                self.advance()
                elems.append(self.sort())
            self.expect(">>")
            return TupleSort(tuple(elems))
        if self.at("["):
            self.advance()
            if self.at_ident() and self.at(":", 1):
                fields = []
                while True:
                    fname = self.ident("field name")
                    self.expect(":")
                    fields.append((fname, self.sort()))
                    if not self.at(","):
                        break
                    self.advance()
                self.expect("]")
                return RecordSort(tuple(fields))
            args = [self.sort()]
            while self.at(","):
                self.advance()
                args.append(self.sort())
            self.expect("->")
            res = self.sort()
            self.expect("]")
            return FnSort(tuple(args), res)
        if self.at_ident():
            return AtomSort(self.advance().text)
        raise self.error(["sort"])

    # expressions

    def expr(self) -> S.Expr:
        if self.at("\\A") or self.at("\\E"):
            return self.quantifier()
        return self.iff()

    def quantifier(self) -> S.Expr:
        loc = self.loc()
        kind = "A" if self.advance().text == "\\A" else "E"
        binders = self.binders(":")
        self.expect(":")
        body = self.expr()
        return S.Quant(kind, tuple(binders), body, loc=loc)

    def binders(self, stop: str) -> list[tuple[str, S.Expr]]:
        out: list[tuple[str, S.Expr]] = []
        pending: list[str] = []
        while True:
            pending.append(self.ident("bound variable"))
            if self.at(","):
                self.advance()
                continue
            self.expect("\\in")
            dom = self.set_level()
            out.extend((p, dom) for p in pending)
            pending = []
            if not self.at(","):
                break
            self.advance()
        return out

    def iff(self) -> S.Expr:
        left = self.implies()
        while self.at("<=>"):
            loc = self.loc()
            self.advance()
            right = self.implies_or_quant()
            left = S.Iff(left, right, loc=loc)
        return left

    def implies_or_quant(self) -> S.Expr:
        if self.at("\\A") or self.at("\\E"):
            return self.quantifier()
        return self.implies()

    def implies(self) -> S.Expr:
        left = self.disjunction()
        if self.at("=>"):
            loc = self.loc()
            self.advance()
            right = self.implies_or_quant()
            return S.Implies(left, right, loc=loc)
        return left

    def disjunction(self) -> S.Expr:
        first = self.conjunction()
        items = [first]
        loc = self.loc()
        while self.at("\\/"):
            self.advance()
            items.append(self.operand(self.conjunction))
        if len(items) == 1:
            return first
        return S.Or(tuple(items), loc=first.loc or loc)

    def conjunction(self) -> S.Expr:
        first = self.until()
        items = [first]
        while self.at("/\\"):
            self.advance()
            items.append(self.operand(self.until))
        if len(items) == 1:
            return first
        return S.And(tuple(items), loc=first.loc)

    def operand(self, fn) -> S.Expr:
        if self.at("\\A") or self.at("\\E"):
            return self.quantifier()
        return fn()

    def until(self) -> S.Expr:
        left = self.prefix()
        if self.sfl:
            while self.at("U"):
                loc = self.loc()
                self.advance()
                right = self.operand(self.prefix)
                left = S.Until(left, right, loc=loc)
        return left

    def prefix(self) -> S.Expr:
        tok = self.peek()
        loc = self.loc()
        if self.at("~"):
            self.advance()
            return S.Not(self.operand(self.prefix), loc=loc)
        if self.at("[]") or self.at("<>") or (tok.kind == "IDENT" and tok.text == "X"):
            if not self.sfl:
                raise ParseError(f"temporal operator {tok.text} outside an SFL formula", loc)
            self.advance()
            arg = self.operand(self.prefix)
            if tok.text == "[]":
                return S.Always(arg, loc=loc)
            if tok.text == "<>":
                return S.Eventually(arg, loc=loc)
            return S.NextOp(arg, loc=loc)
        return self.relational()

    def relational(self) -> S.Expr:
        left = self.set_level()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in REL_OPS:
            loc = self.loc()
            self.advance()
            right = self.set_level()
            return S.BinOp(tok.text, left, right, loc=loc)
        return left

    def set_level(self) -> S.Expr:
        left = self.arith()
        while self.peek().kind == "OP" and self.peek().text in SET_OPS:
            tok = self.advance()
            right = self.arith()
            left = S.BinOp(tok.text, left, right, loc=S.Loc(tok.line, tok.col, self.path))
        return left

    def arith(self) -> S.Expr:
        left = self.postfix()
        while self.peek().kind == "OP" and self.peek().text in ARITH_OPS:
            tok = self.advance()
            right = self.postfix()
            left = S.BinOp(tok.text, left, right, loc=S.Loc(tok.line, tok.col, self.path))
        return left

    def postfix(self) -> S.Expr:
        e = self.atom()
        while True:
            if self.at("["):
                loc = self.loc()
                self.advance()
                saved, self.barrier = self.barrier, None
                args = [self.expr()]
                while self.at(","):
                    self.advance()
                    args.append(self.expr())
                self.expect("]")
                self.barrier = saved
                e = S.Apply(e, tuple(args), loc=loc)
            elif self.at(".") and self.peek(1).kind == "IDENT":
                loc = self.loc()
                self.advance()
                e = S.Field(e, self.advance().text, loc=loc)
            elif self.at("'"):
                if not isinstance(e, S.Name):
                    raise ParseError("only variables can be primed", self.loc())
                self.advance()
                e = S.Prime(e.id, loc=e.loc)
            else:
                return e

    def bracketed(self, fn, close: str):
        saved, self.barrier = self.barrier, None
        try:
            out = fn()
            self.expect(close)
            return out
        finally:
            self.barrier = saved

    def atom(self) -> S.Expr:
        tok = self.peek()
        loc = self.loc()
        if tok.kind == "NUM":
            self.advance()
            return S.NatLit(int(tok.text), loc=loc)
        if tok.kind == "STR":
            self.advance()
            return S.StrLit(tok.text, loc=loc)
        if tok.kind == "IDENT":
            if tok.text == "TRUE":
                self.advance()
                return S.BoolLit(True, loc=loc)
            if tok.text == "FALSE":
                self.advance()
                return S.BoolLit(False, loc=loc)
            if tok.text == "IF":
                self.advance()
                cond = self.expr()
                self.keyword("THEN")
                then = self.expr()
                self.keyword("ELSE")
                other = self.expr()
                return S.IfThenElse(cond, then, other, loc=loc)
            if tok.text == "UNCHANGED":
                self.advance()
                return self.unchanged(loc)
            if tok.text in RESERVED and tok.text not in ("BOOLEAN",):
                raise self.error(["expression"])
            self.advance()
            if self.at("("):
                if not self.sfl:
                    raise ParseError(f"{tok.text}(...) is a fluent atom and needs an SFL context", loc)
                self.advance()
                saved, self.barrier = self.barrier, None
                args = [self.ident("fluent argument")]
                while self.at(","):
                    self.advance()
                    args.append(self.ident("fluent argument"))
                self.expect(")")
                self.barrier = saved
                return S.FluentAtom(tok.text, tuple(args), loc=loc)
            return S.Name(tok.text, loc=loc)
        if self.at("("):
            self.advance()
            return self.bracketed(self.expr, ")")
        if self.at("/\\") or self.at("\\/"):
            return self.bullets()
        if self.at("\\A") or self.at("\\E"):
            return self.quantifier()
        if self.at("{"):
            self.advance()
            return self.bracketed(lambda: self.set_body(loc), "}")
        if self.at("<<"):
            self.advance()

            def tup():
                items = []
                if not self.at(">>"):
                    items.append(self.expr())
                    while self.at(","):
                        self.advance()
                        items.append(self.expr())
                return S.TupleCons(tuple(items), loc=loc)

            return self.bracketed(tup, ">>")
        if self.at("["):
            self.advance()
            return self.bracketed(lambda: self.bracket_body(loc), "]")
        if self.at("~") or self.at("[]") or self.at("<>"):
            return self.prefix()
        raise self.error(["expression"])

    def bullets(self) -> S.Expr:
        tok = self.peek()
        op, col = tok.text, tok.col
        items = []
        while self.at(op) and self.peek().col == col:
            self.advance()
            saved, self.barrier = self.barrier, col
            try:
                items.append(self.expr())
            finally:
                self.barrier = saved
        loc = S.Loc(tok.line, tok.col, self.path)
        if len(items) == 1:
            return items[0]
        return S.And(tuple(items), loc=loc) if op == "/\\" else S.Or(tuple(items), loc=loc)

    def unchanged(self, loc) -> S.Expr:
        names: list[str] = []
        if self.at("<<"):
            self.advance()
            saved, self.barrier = self.barrier, None
            names.append(self.ident("variable"))
            while self.at(","):
                self.advance()
                names.append(self.ident("variable"))
            self.expect(">>")
            self.barrier = saved
        else:
            names.append(self.ident("variable"))
        eqs = [S.BinOp("=", S.Prime(n, loc=loc), S.Name(n, loc=loc), loc=loc) for n in names]
        return eqs[0] if len(eqs) == 1 else S.And(tuple(eqs), loc=loc)

    def set_body(self, loc) -> S.Expr:
        if self.at("}"):
            return S.SetEnum((), loc=loc)
        if self.at_ident() and self.at("\\in", 1):
            start = self.i
            var = self.advance().text
            self.advance()
            dom = self.set_level()
            if self.at(":"):
                self.advance()
                pred = self.expr()
                return S.SetFilter(var, dom, pred, loc=loc)
            self.i = start
        first = self.expr()
        if self.at(":"):
            self.advance()
            var = self.ident("bound variable")
            self.expect("\\in")
            dom = self.set_level()
            return S.SetMap(first, var, dom, loc=loc)
        elems = [first]
        while self.at(","):
            self.advance()
            elems.append(self.expr())
        return S.SetEnum(tuple(elems), loc=loc)

    def bracket_body(self, loc) -> S.Expr:
        if self.at_ident() and self.at("|->", 1):
            fields = []
            while True:
                fname = self.ident("field name")
                self.expect("|->")
                fields.append((fname, self.expr()))
                if not self.at(","):
                    break
                self.advance()
            return S.RecordCons(tuple(fields), loc=loc)
        if self.at_ident() and (self.at("\\in", 1) or self.at(",", 1)):
            binders = self.binders("|->")
            self.expect("|->")
            body = self.expr()
            return S.FnCons(tuple(binders), body, loc=loc)
        fn = self.expr()
        self.keyword("EXCEPT")
        updates = []
        while True:
            self.expect("!")
            path = []
            while True:
                if self.at("["):
                    self.advance()
                    idx = [self.expr()]
                    while self.at(","):
                        self.advance()
                        idx.append(self.expr())
                    self.expect("]")
                    path.append(tuple(idx))
                elif self.at("."):
                    self.advance()
                    path.append(self.ident("field name"))
                else:
                    break
            if not path:
                raise self.error(["[", "."])
            self.expect("=")
            updates.append((tuple(path), self.expr()))
            if not self.at(","):
                break
            self.advance()
        return S.Except(fn, tuple(updates), loc=loc)


def _check_duplicates(decls) -> None:
    seen: dict[tuple[str, str], object] = {}
    for d in decls:
        kind = DECL_KIND.get(type(d))
        if kind is None:
            continue
        names = d.names if isinstance(d, ConstantDecl) else (d.name,)
        for n in names:
            if n is None:
                continue
            if (kind, n) in seen:
                raise DuplicateName(f"{kind} {n!r} declared twice", d.loc)
            seen[(kind, n)] = d


# entry points ---------------------------------------------------------------------


def parse(text: str, path: str | None = None) -> SpecFile:
    """Parse a whole `.civ` file."""
    return Parser(text, path).parse_file()


def parse_expr(text: str, *, sfl: bool = False, path: str | None = None) -> S.Expr:
    """Parse a single formula or term."""
    p = Parser(text, path, sfl=sfl)
    e = p.expr()
    if p.raw().kind != "EOF":
        raise ParseError(f"trailing input {p.raw()}", p.loc(p.raw()))
    return e


def parse_sort(text: str) -> Sort:
    p = Parser(text)
    s = p.sort()
    if p.raw().kind != "EOF":
        raise ParseError(f"trailing input {p.raw()}", p.loc(p.raw()))
    return s
