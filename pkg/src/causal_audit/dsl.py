"""Text format for protocol files.

    const acct, ping;
    thread S1 {
      store { mem = hash((alice, secret)); P = (); }
      program {
        1: uid = recv(j);
        2: send(j, pubkey(S1));
        3: s = recv(j);
        4: (uid, pwd, J) = dec(pvtkey(S1), s);
        5: t = hash((uid, pwd));
        assert mem = t;
        6: insert(P, (acct, J));
      }
    }
    property { type = access_control; matrix = P; account = acct; owner = U1; thread = S1; }

Identifiers in a program resolve, in order, to a variable bound by an earlier
step, a location of the thread's store, a declared thread, or a constant
(declared with `const` or appearing in some store). In a binder pattern an
identifier that resolves to nothing is a fresh variable. `_` is a wildcard.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import terms as T
from .kernel import DEFAULT_REGISTRY, PrimitiveRegistry
from .lang import (
    Assert, Call, GAnd, GAtLeast, GEq, GNot, GOr, GTerm, InitialConfiguration, LangError, Lit, Loc,
    PAny, PCon, PEq, Prim, Program, PVar, Recv, Send, Step, ValidationError, Var,
)
from .terms import Store


class ParseError(LangError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class PropertyBlock:
    entries: tuple = ()  # ((key, term), ...) in source order

    def get(self, key: str, default=None):
        for k, v in self.entries:
            if k == key:
                return v
        return default

    def name(self, key: str, default: str | None = None) -> str | None:
        v = self.get(key)
        if v is None:
            return default
        if v[0] in (T.CONST, T.THREAD):
            return v[1]
        if v[0] == T.INT:
            return str(v[1])
        raise ValidationError(f"property field {key} must be a name")


@dataclass(frozen=True)
class ProtocolDocument:
    config: InitialConfiguration
    constants: frozenset = frozenset()
    prop: PropertyBlock | None = None


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(//|\#)[^\n]*)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*(:[A-Za-z_][A-Za-z0-9_]*)?)
  | (?P<op>!=|[{}();,=:])
    """,
    re.VERBOSE,
)

KEYWORDS = {"thread", "store", "program", "property", "const", "assert", "send", "recv", "and", "or", "not", "atleast"}
PURE_CTORS = {"tuple": T.TUPLE, "enc": T.ENC, "sig": T.SIG, "hash": T.HASH}


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    line: int


def tokenize(src: str) -> list[Tok]:
    out = []
    line = 1
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(line, f"unexpected character {src[pos]!r}")
        kind = m.lastgroup
        text = m.group(kind)
        if kind == "nl":
            line += 1
        elif kind not in ("ws", "comment"):
            out.append(Tok(kind, text, line))
        pos = m.end()
    out.append(Tok("eof", "", line))
    return out


# Untyped syntax tree produced by the term parser: ("id", name) | ("int", v) | ("tup", [..]) | ("call", name, [..])

class _Parser:
    def __init__(self, src: str, registry: PrimitiveRegistry):
        self.toks = tokenize(src)
        self.i = 0
        self.reg = registry

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def eat(self, text: str) -> Tok:
        if not self.at(text):
            raise ParseError(self.tok.line, f"expected {text!r}, found {self.tok.text or 'end of file'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Tok:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError(t.line, f"expected identifier, found {t.text or 'end of file'!r}")
        self.i += 1
        return t

    # raw terms
    def raw(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return ("int", int(t.text))
        if t.text == "(":
            self.i += 1
            items = []
            trailing = False
            while not self.at(")"):
                items.append(self.raw())
                trailing = False
                if self.at(","):
                    self.eat(",")
                    trailing = True
                else:
                    break
            self.eat(")")
            if len(items) == 1 and not trailing:
                return items[0]
            return ("tup", items)
        name = self.ident()
        if self.at("("):
            self.eat("(")
            args = []
            while not self.at(")"):
                args.append(self.raw())
                if not self.at(","):
                    break
                self.eat(",")
            self.eat(")")
            return ("call", name.text, args, name.line)
        return ("id", name.text, name.line)

    def raw_list(self):
        """A binder may be a bare comma list: `a, b, c = ...`."""
        first = self.raw()
        if not self.at(","):
            return first
        items = [first]
        while self.at(","):
            self.eat(",")
            items.append(self.raw())
        return ("tup", items)


def _norm_ctor(name: str, args: list, line: int):
    # enc(k, a, b) == enc(k, (a, b)); hash(a, b) == hash((a, b))
    if name in ("enc", "sig"):
        if len(args) < 2:
            raise ParseError(line, f"{name} needs a key and a payload")
        if len(args) > 2:
            return [args[0], ("tup", args[1:])]
        return args
    if name == "hash" and len(args) > 1:
        return [("tup", args)]
    return args


class _Scope:
    def __init__(self, doc: "_DocBuilder", tid: str, store: Store):
        self.doc = doc
        self.tid = tid
        self.store = store
        self.bound: set[str] = set()

    def resolve(self, name: str, line: int):
        if name in self.bound:
            return Var(name)
        if name in self.store:
            return Loc(name)
        if name in self.doc.threads:
            return Lit(T.thread(name))
        if name in self.doc.constants:
            return Lit(T.const(name))
        return None

    def expr(self, raw):
        kind = raw[0]
        if kind == "int":
            return Lit(T.integer(raw[1]))
        if kind == "id":
            e = self.resolve(raw[1], raw[2])
            if e is None:
                raise ValidationError(f"{self.tid}, line {raw[2]}: unbound identifier {raw[1]!r}")
            return e
        if kind == "tup":
            return Call("tuple", tuple(self.expr(r) for r in raw[1]))
        name, args, line = raw[1], raw[2], raw[3]
        if name not in self.doc.reg:
            raise ValidationError(f"{self.tid}, line {line}: unknown primitive {name!r}")
        if not self.doc.reg.get(name).pure:
            raise ValidationError(f"{self.tid}, line {line}: {name} can only be used as a whole step")
        args = _norm_ctor(name, args, line)
        return Call(name, tuple(self.expr(a) for a in args))

    def pattern(self, raw, fresh: list, top: bool = False):
        kind = raw[0]
        if kind == "id":
            name = raw[1]
            if name == "_":
                return PAny()
            if not top:
                e = self.resolve(name, raw[2])
                if e is not None:
                    return PEq(e)
            if name in fresh:
                raise ValidationError(f"{self.tid}, line {raw[2]}: {name!r} bound twice in one pattern")
            fresh.append(name)
            return PVar(name)
        if kind == "int":
            return PEq(Lit(T.integer(raw[1])))
        if kind == "tup":
            return PCon(T.TUPLE, tuple(self.pattern(r, fresh) for r in raw[1]))
        name, args, line = raw[1], raw[2], raw[3]
        if name in PURE_CTORS:
            args = _norm_ctor(name, args, line)
            if name == "tuple":
                return PCon(T.TUPLE, tuple(self.pattern(r, fresh) for r in args))
            return PCon(PURE_CTORS[name], tuple(self.pattern(r, fresh) for r in args))
        return PEq(self.expr(raw))


class _DocBuilder:
    def __init__(self, reg: PrimitiveRegistry):
        self.reg = reg
        self.threads: list[str] = []
        self.constants: set[str] = set()
        self.raw_threads: list = []  # (tid, line, store_raw, program_raw)
        self.prop_raw = None


def _store_term(raw, threads, constants: set, line: int, reg: PrimitiveRegistry):
    kind = raw[0]
    if kind == "int":
        return T.integer(raw[1])
    if kind == "id":
        if raw[1] in threads:
            return T.thread(raw[1])
        constants.add(raw[1])
        return T.const(raw[1])
    if kind == "tup":
        return T.tup(*(_store_term(r, threads, constants, line, reg) for r in raw[1]))
    name, args = raw[1], raw[2]
    if name not in reg or not reg.get(name).pure:
        raise ValidationError(f"line {raw[3]}: {name!r} is not allowed in a store value")
    args = tuple(_store_term(a, threads, constants, line, reg) for a in _norm_ctor(name, args, raw[3]))
    return reg.get(name).fn(args, T.EMPTY_STORE, None)[1]


def parse_document(src: str, registry: PrimitiveRegistry | None = None) -> ProtocolDocument:
    reg = registry or DEFAULT_REGISTRY
    p = _Parser(src, reg)
    doc = _DocBuilder(reg)

    # pass 1: collect raw syntax
    while p.tok.kind != "eof":
        t = p.tok
        if p.at("const"):
            p.eat("const")
            doc.constants.add(p.ident().text)
            while p.at(","):
                p.eat(",")
                doc.constants.add(p.ident().text)
            p.eat(";")
        elif p.at("thread"):
            p.eat("thread")
            name = p.ident()
            if name.text in doc.threads:
                raise ValidationError(f"line {name.line}: duplicate thread {name.text!r}")
            p.eat("{")
            store_raw, prog_raw = [], []
            while not p.at("}"):
                if p.at("store"):
                    p.eat("store")
                    p.eat("{")
                    while not p.at("}"):
                        loc = p.ident()
                        p.eat("=")
                        store_raw.append((loc.text, p.raw(), loc.line))
                        p.eat(";")
                    p.eat("}")
                elif p.at("program"):
                    p.eat("program")
                    p.eat("{")
                    while not p.at("}"):
                        prog_raw.append(_raw_stmt(p))
                    p.eat("}")
                else:
                    raise ParseError(p.tok.line, f"expected 'store' or 'program', found {p.tok.text!r}")
            p.eat("}")
            doc.threads.append(name.text)
            doc.raw_threads.append((name.text, name.line, store_raw, prog_raw))
        elif p.at("property"):
            p.eat("property")
            p.eat("{")
            entries = []
            while not p.at("}"):
                key = p.tok
                if key.kind != "ident":
                    raise ParseError(key.line, f"expected a property key, found {key.text!r}")
                p.i += 1
                p.eat("=")
                entries.append((key.text, p.raw(), key.line))
                p.eat(";")
            p.eat("}")
            if doc.prop_raw is not None:
                raise ValidationError(f"line {t.line}: more than one property block")
            doc.prop_raw = entries
        else:
            raise ParseError(t.line, f"expected 'thread', 'const' or 'property', found {t.text!r}")

    # pass 2: stores (their identifiers become constants), then programs
    stores = {}
    for tid, line, store_raw, _ in doc.raw_threads:
        d = {}
        for loc, raw, ln in store_raw:
            if loc in d:
                raise ValidationError(f"{tid}, line {ln}: duplicate store location {loc!r}")
            d[loc] = _store_term(raw, doc.threads, doc.constants, ln, reg)
        stores[tid] = Store(d)
    programs = {}
    for tid, line, _, prog_raw in doc.raw_threads:
        programs[tid] = _build_program(doc, tid, stores[tid], prog_raw)
    cfg = InitialConfiguration.build(programs, stores)
    prop = None
    if doc.prop_raw is not None:
        prop = PropertyBlock(tuple((k, _store_term(raw, doc.threads, set(), ln, reg)) for k, raw, ln in doc.prop_raw))
    return ProtocolDocument(cfg, frozenset(doc.constants), prop)


def parse_protocol(src: str, registry: PrimitiveRegistry | None = None) -> InitialConfiguration:
    return parse_document(src, registry).config


def _raw_stmt(p: _Parser):
    if p.at("assert"):
        t = p.eat("assert")
        g = _raw_guard(p)
        p.eat(";")
        return ("assert", g, t.line)
    t = p.tok
    if t.kind != "int":
        raise ParseError(t.line, f"expected a line number or 'assert', found {t.text!r}")
    p.i += 1
    p.eat(":")
    binder = None
    # a binder is present iff an '=' follows at bracket depth 0 before ';'
    depth = 0
    k = p.i
    while True:
        tk = p.toks[k]
        if tk.kind == "eof" or (tk.text == ";" and depth == 0):
            break
        if tk.text == "(":
            depth += 1
        elif tk.text == ")":
            depth -= 1
        elif tk.text == "=" and depth == 0:
            binder = True
            break
        k += 1
    if binder:
        binder = p.raw_list()
        p.eat("=")
    action = _raw_action(p)
    p.eat(";")
    return ("step", int(t.text), binder, action, t.line)


def _raw_action(p: _Parser):
    if p.at("send") or p.at("recv"):
        kw = p.tok.text
        line = p.tok.line
        p.i += 1
        p.eat("(")
        args = []
        while not p.at(")"):
            args.append(p.raw())
            if not p.at(","):
                break
            p.eat(",")
        p.eat(")")
        if kw == "recv":
            if len(args) > 1:
                raise ParseError(line, "recv takes at most one (advisory) argument")
            return ("recv", args[0] if args else None, line)
        if not args:
            return ("send", None, ("int", 0), line)
        payload = args[1] if len(args) == 2 else (("tup", args[1:]) if len(args) > 2 else ("int", 0))
        return ("send", args[0], payload, line)
    return ("prim", p.raw(), p.tok.line)


def _raw_guard(p: _Parser):
    items = [_raw_conj(p)]
    while p.at("or"):
        p.eat("or")
        items.append(_raw_conj(p))
    return items[0] if len(items) == 1 else ("or", items)


def _raw_conj(p: _Parser):
    items = [_raw_neg(p)]
    while p.at("and"):
        p.eat("and")
        items.append(_raw_neg(p))
    return items[0] if len(items) == 1 else ("and", items)


def _raw_neg(p: _Parser):
    if p.at("not"):
        p.eat("not")
        return ("not", _raw_neg(p))
    if p.at("atleast"):
        line = p.eat("atleast").line
        p.eat("(")
        k = p.tok
        if k.kind != "int":
            raise ParseError(k.line, "atleast needs an integer threshold")
        p.i += 1
        items = []
        while p.at(","):
            p.eat(",")
            items.append(_raw_guard(p))
        p.eat(")")
        if not items:
            raise ParseError(line, "atleast needs at least one condition")
        return ("atleast", int(k.text), items)
    if p.at("("):
        save = p.i
        try:
            left = p.raw()
        except ParseError:
            left = None
        if left is not None and (p.at("=") or p.at("!=")):
            return _raw_cmp(p, left)
        if left is not None and (p.at(";") or p.at(")") or p.at(",") or p.at("and") or p.at("or")):
            return ("term", left)
        p.i = save
        p.eat("(")
        g = _raw_guard(p)
        p.eat(")")
        return g
    left = p.raw()
    if p.at("=") or p.at("!="):
        return _raw_cmp(p, left)
    return ("term", left)


def _raw_cmp(p: _Parser, left):
    op = p.tok.text
    p.i += 1
    right = p.raw()
    g = ("eq", left, right)
    return ("not", g) if op == "!=" else g


def _build_guard(scope: _Scope, g):
    kind = g[0]
    if kind == "eq":
        return GEq(scope.expr(g[1]), scope.expr(g[2]))
    if kind == "term":
        return GTerm(scope.expr(g[1]))
    if kind == "not":
        return GNot(_build_guard(scope, g[1]))
    if kind == "and":
        return GAnd(tuple(_build_guard(scope, h) for h in g[1]))
    if kind == "or":
        return GOr(tuple(_build_guard(scope, h) for h in g[1]))
    if kind == "atleast":
        return GAtLeast(g[1], tuple(_build_guard(scope, h) for h in g[2]))
    raise AssertionError(kind)


def _advisory(raw) -> str | None:
    if raw is None:
        return None
    if raw[0] == "id":
        return None if raw[1] == "_" else raw[1]
    raise ValidationError("send/recv peer must be an identifier")


def _build_program(doc: _DocBuilder, tid: str, store: Store, prog_raw: list) -> Program:
    scope = _Scope(doc, tid, store)
    steps = []
    lines: set[int] = set()
    last = 0
    for stmt in prog_raw:
        if stmt[0] == "assert":
            steps.append(Assert(_build_guard(scope, stmt[1]), f"{last}.5"))
            continue
        _, line, binder_raw, action_raw, src_line = stmt
        if line in lines:
            raise ValidationError(f"{tid}: duplicate line number {line} (source line {src_line})")
        if line <= 0:
            raise ValidationError(f"{tid}: line numbers must be positive, got {line}")
        lines.add(line)
        last = line
        kind = action_raw[0]
        if kind == "send":
            action = Send(_advisory(action_raw[1]), scope.expr(action_raw[2]))
        elif kind == "recv":
            action = Recv(_advisory(action_raw[1]))
        else:
            action = _build_prim(scope, action_raw[1], src_line)
        binder = None
        if binder_raw is not None:
            fresh: list[str] = []
            binder = scope.pattern(binder_raw, fresh, top=True)
            scope.bound.update(fresh)
        steps.append(Step(line, binder, action))
    return Program(tuple(steps))


def _build_prim(scope: _Scope, raw, src_line: int) -> Prim:
    if raw[0] != "call":
        return Prim("id", (scope.expr(raw),))
    name, args, line = raw[1], raw[2], raw[3]
    if name not in scope.doc.reg:
        raise ValidationError(f"{scope.tid}, line {line}: unknown primitive {name!r}")
    prim = scope.doc.reg.get(name)
    args = _norm_ctor(name, args, line)
    out = []
    for k, a in enumerate(args):
        if k in prim.loc_args:
            if a[0] != "id" or a[1] not in scope.store:
                raise ValidationError(f"{scope.tid}, line {line}: {name} argument {k + 1} must be a store location")
            out.append(Loc(a[1]))
        else:
            out.append(scope.expr(a))
    if len(out) < prim.min_args or (prim.max_args is not None and len(out) > prim.max_args):
        raise ValidationError(f"{scope.tid}, line {line}: wrong number of arguments to {name}")
    return Prim(name, tuple(out))


# Printing --------------------------------------------------------------------------

def _fmt_term(t) -> str:
    return T.show(t)


def _fmt_expr(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Loc):
        return e.name
    if isinstance(e, Lit):
        return _fmt_term(e.term)
    if e.fn == "tuple":
        inner = ", ".join(_fmt_expr(a) for a in e.args)
        return f"({inner},)" if len(e.args) == 1 else f"({inner})"
    return f"{e.fn}({', '.join(_fmt_expr(a) for a in e.args)})"


_CTOR_NAME = {v: k for k, v in PURE_CTORS.items()}


def _fmt_pattern(p) -> str:
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, PAny):
        return "_"
    if isinstance(p, PEq):
        return _fmt_expr(p.expr)
    inner = ", ".join(_fmt_pattern(q) for q in p.items)
    if p.ctor == T.TUPLE:
        return f"({inner},)" if len(p.items) == 1 else f"({inner})"
    return f"{_CTOR_NAME[p.ctor]}({inner})"


def _fmt_guard(g, top: bool = True) -> str:
    if isinstance(g, GEq):
        return f"{_fmt_expr(g.left)} = {_fmt_expr(g.right)}"
    if isinstance(g, GTerm):
        return _fmt_expr(g.expr)
    if isinstance(g, GNot):
        if isinstance(g.inner, GEq):
            return f"{_fmt_expr(g.inner.left)} != {_fmt_expr(g.inner.right)}"
        return f"not {_fmt_guard(g.inner, False)}"
    if isinstance(g, GAtLeast):
        return f"atleast({g.k}, {', '.join(_fmt_guard(h) for h in g.items)})"
    word = " and " if isinstance(g, GAnd) else " or "
    s = word.join(_fmt_guard(h, False) for h in g.items)
    return s if top else f"({s})"


def format_step(s) -> str:
    if isinstance(s, Assert):
        return f"assert {_fmt_guard(s.guard)};"
    a = s.action
    if isinstance(a, Send):
        body = f"send({a.target or '_'}, {_fmt_expr(a.payload)})"
    elif isinstance(a, Recv):
        body = f"recv({a.sender or ''})"
    elif a.name == "id":
        body = _fmt_expr(a.args[0])
    else:
        body = f"{a.name}({', '.join(_fmt_expr(x) for x in a.args)})"
    if s.binder is None:
        return f"{s.line}: {body};"
    return f"{s.line}: {_fmt_pattern(s.binder)} = {body};"


def _collect_consts(cfg: InitialConfiguration) -> set[str]:
    found: set[str] = set()

    def term(t):
        for u in T.subterms(t):
            if u[0] == T.CONST:
                found.add(u[1])

    def expr(e):
        if isinstance(e, Lit):
            term(e.term)
        elif isinstance(e, Call):
            for a in e.args:
                expr(a)

    def pat(p):
        if isinstance(p, PEq):
            expr(p.expr)
        elif isinstance(p, PCon):
            for q in p.items:
                pat(q)

    def guard(g):
        if isinstance(g, GEq):
            expr(g.left)
            expr(g.right)
        elif isinstance(g, GTerm):
            expr(g.expr)
        elif isinstance(g, GNot):
            guard(g.inner)
        else:
            for h in g.items:
                guard(h)

    for prog in cfg.programs:
        for s in prog.steps:
            if isinstance(s, Assert):
                guard(s.guard)
                continue
            if s.binder is not None:
                pat(s.binder)
            a = s.action
            if isinstance(a, Send):
                expr(a.payload)
            elif isinstance(a, Prim):
                for x in a.args:
                    expr(x)
    return found


def format_protocol(cfg: InitialConfiguration, prop: PropertyBlock | None = None) -> str:
    """Render a configuration in the protocol syntax (parse(format(c)) == c)."""
    out = []
    consts = sorted(_collect_consts(cfg))
    if consts:
        out.append(f"const {', '.join(consts)};")
        out.append("")
    for tid in cfg.threads:
        store = cfg.store(tid)
        prog = cfg.program(tid)
        out.append(f"thread {tid} {{")
        if len(store):
            out.append("  store {")
            for loc in store:
                out.append(f"    {loc} = {_fmt_term(store[loc])};")
            out.append("  }")
        out.append("  program {")
        for s in prog.steps:
            out.append(f"    {format_step(s)}")
        out.append("  }")
        out.append("}")
        out.append("")
    if prop is not None:
        body = " ".join(f"{k} = {_fmt_term(v)};" for k, v in prop.entries)
        out.append(f"property {{ {body} }}")
    return "\n".join(out).rstrip() + "\n"
