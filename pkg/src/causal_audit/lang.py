"""Abstract syntax of the thread language: expressions, patterns, guards, steps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from . import terms as T
from .terms import Store, Term


class LangError(Exception):
    pass


class ValidationError(LangError):
    pass


class NonBijectiveRenaming(LangError):
    pass


# Term-with-variables ------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Loc:
    """Read of a thread-local store location, evaluated when the step runs."""
    name: str


@dataclass(frozen=True)
class Lit:
    term: Term


@dataclass(frozen=True)
class Call:
    """Pure primitive application (constructors, dec, keyowner, ...)."""
    fn: str
    args: tuple


Expr = Union[Var, Loc, Lit, Call]


# Patterns -------------------------------------------------------------------

@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PAny:
    pass


@dataclass(frozen=True)
class PEq:
    """Component that must equal the value of an expression."""
    expr: Expr


@dataclass(frozen=True)
class PCon:
    ctor: str  # one of terms.TUPLE, ENC, SIG, HASH
    items: tuple


Pattern = Union[PVar, PAny, PEq, PCon]


# Guards -------------------------------------------------------------------------

@dataclass(frozen=True)
class GEq:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class GNot:
    inner: object


@dataclass(frozen=True)
class GAnd:
    items: tuple


@dataclass(frozen=True)
class GOr:
    items: tuple


@dataclass(frozen=True)
class GAtLeast:
    k: int
    items: tuple


@dataclass(frozen=True)
class GTerm:
    expr: Expr


Guard = Union[GEq, GNot, GAnd, GOr, GAtLeast, GTerm]


# Actions and steps ----------------------------------------------------------

@dataclass(frozen=True)
class Prim:
    name: str
    args: tuple


@dataclass(frozen=True)
class Send:
    target: str | None
    payload: Expr


@dataclass(frozen=True)
class Recv:
    sender: str | None


Action = Union[Prim, Send, Recv]


@dataclass(frozen=True)
class Step:
    line: int
    binder: Pattern | None
    action: Action


@dataclass(frozen=True)
class Assert:
    guard: Guard
    anchor: str = ""


@dataclass(frozen=True)
class Program:
    steps: tuple = ()
    result: Expr = Lit(T.ZERO)

    @property
    def lines(self) -> tuple[int, ...]:
        return tuple(s.line for s in self.steps if isinstance(s, Step))

    def numbered(self) -> tuple[Step, ...]:
        return tuple(s for s in self.steps if isinstance(s, Step))

    def step_at(self, line: int) -> Step:
        for s in self.steps:
            if isinstance(s, Step) and s.line == line:
                return s
        raise KeyError(line)


@dataclass(frozen=True)
class InitialConfiguration:
    """The triple <I, programs, stores>; threads keep declaration order."""
    threads: tuple[str, ...] = ()
    programs: tuple[Program, ...] = ()
    stores: tuple[Store, ...] = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if not (len(self.threads) == len(self.programs) == len(self.stores)):
            raise ValidationError("threads, programs and stores must align")
        if len(set(self.threads)) != len(self.threads):
            raise ValidationError("duplicate thread identifier")
        object.__setattr__(self, "_index", {t: k for k, t in enumerate(self.threads)})

    @classmethod
    def build(cls, programs: Mapping[str, Program], stores: Mapping[str, Store] | None = None):
        tids = tuple(programs)
        stores = stores or {}
        return cls(tids, tuple(programs[t] for t in tids), tuple(stores.get(t, T.EMPTY_STORE) for t in tids))

    def index(self, tid: str) -> int:
        return self._index[tid]

    def program(self, tid: str) -> Program:
        return self.programs[self._index[tid]]

    def store(self, tid: str) -> Store:
        return self.stores[self._index[tid]]

    def with_programs(self, programs: Mapping[str, Program]) -> InitialConfiguration:
        return InitialConfiguration(self.threads, tuple(programs.get(t, self.program(t)) for t in self.threads), self.stores)

    def total_steps(self) -> int:
        return sum(len(p.lines) for p in self.programs)


# Free variables and substitution ----------------------------------------------

def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= expr_vars(a)
        return out
    return set()


def pattern_binds(p: Pattern | None) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PCon):
        out: list[str] = []
        for q in p.items:
            out.extend(pattern_binds(q))
        return out
    return []


def _sub_expr(e: Expr, x: str, t: Term) -> Expr:
    if isinstance(e, Var):
        return Lit(t) if e.name == x else e
    if isinstance(e, Call):
        return Call(e.fn, tuple(_sub_expr(a, x, t) for a in e.args))
    return e


def _sub_pattern(p, x: str, t: Term):
    if isinstance(p, PEq):
        return PEq(_sub_expr(p.expr, x, t))
    if isinstance(p, PCon):
        return PCon(p.ctor, tuple(_sub_pattern(q, x, t) for q in p.items))
    return p


def _sub_guard(g, x: str, t: Term):
    if isinstance(g, GEq):
        return GEq(_sub_expr(g.left, x, t), _sub_expr(g.right, x, t))
    if isinstance(g, GNot):
        return GNot(_sub_guard(g.inner, x, t))
    if isinstance(g, (GAnd, GOr)):
        return type(g)(tuple(_sub_guard(h, x, t) for h in g.items))
    if isinstance(g, GAtLeast):
        return GAtLeast(g.k, tuple(_sub_guard(h, x, t) for h in g.items))
    if isinstance(g, GTerm):
        return GTerm(_sub_expr(g.expr, x, t))
    raise TypeError(g)


def _sub_action(a: Action, x: str, t: Term) -> Action:
    if isinstance(a, Prim):
        return Prim(a.name, tuple(_sub_expr(e, x, t) for e in a.args))
    if isinstance(a, Send):
        return Send(a.target, _sub_expr(a.payload, x, t))
    return a


def substitute(e: Program, x: str, t: Term) -> Program:
    """Capture-avoiding e[t/x]: stops at the first step that rebinds x."""
    out = []
    steps = list(e.steps)
    for k, s in enumerate(steps):
        if isinstance(s, Assert):
            out.append(Assert(_sub_guard(s.guard, x, t), s.anchor))
            continue
        binder = _sub_pattern(s.binder, x, t) if s.binder is not None else None
        out.append(Step(s.line, binder, _sub_action(s.action, x, t)))
        if x in pattern_binds(s.binder):
            out.extend(steps[k + 1:])
            return Program(tuple(out), e.result)
    return Program(tuple(out), _sub_expr(e.result, x, t))


def bind_pattern_to(p: Pattern | None, value: Term) -> dict[str, Term]:
    """Bindings a dummified step gives its binder: each fresh variable gets the
    matching projection of `value`, no equality checks."""
    out: dict[str, Term] = {}

    def walk(q, path):
        if isinstance(q, PVar):
            out[q.name] = T.part(value, path) if T.is_opaque(value) or not path else _proj(value, path)
        elif isinstance(q, PCon):
            for k, sub in enumerate(q.items):
                walk(sub, path + (k,))

    walk(p, ())
    return out


def _proj(value: Term, path: tuple) -> Term:
    # a concrete value projected along a pattern path; used only for send binders (value 0)
    return T.part(value, path) if T.is_opaque(value) else value


# Renaming ---------------------------------------------------------------------

def _rename_anchor(anchor: str, mapping: Mapping[int, int]) -> str:
    if anchor.endswith(".5") and anchor[:-2].isdigit():
        b = int(anchor[:-2])
        return f"{mapping.get(b, b)}.5"
    return anchor


def renumber(cfg: InitialConfiguration, pi: Mapping[str, Mapping[int, int]]) -> InitialConfiguration:
    """Rename line numbers per thread; each map must be injective on the thread's lines."""
    programs = {}
    for tid in cfg.threads:
        prog = cfg.program(tid)
        mapping = dict(pi.get(tid, {}))
        lines = prog.lines
        unknown = set(mapping) - set(lines)
        if unknown:
            raise NonBijectiveRenaming(f"{tid}: lines {sorted(unknown)} do not exist")
        image = [mapping.get(b, b) for b in lines]
        if len(set(image)) != len(image):
            raise NonBijectiveRenaming(f"{tid}: renaming collides")
        steps = []
        for s in prog.steps:
            if isinstance(s, Step):
                steps.append(replace(s, line=mapping.get(s.line, s.line)))
            else:
                steps.append(replace(s, anchor=_rename_anchor(s.anchor, mapping)))
        programs[tid] = Program(tuple(steps), prog.result)
    return cfg.with_programs(programs)


def step_shape(s) -> tuple:
    """Structure of a step with its line number and anchor erased."""
    if isinstance(s, Step):
        return ("step", s.binder, s.action)
    return ("assert", s.guard)


def same_program(a: Program, b: Program) -> bool:
    return [step_shape(s) for s in a.steps] == [step_shape(s) for s in b.steps] and a.result == b.result
