"""Two-phase cause analysis: Lamport causes, dummification, actual causes."""

from __future__ import annotations

import multiprocessing
import os
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import terms as T
from .kernel import (
    DEFAULT_BUDGET,
    EMPTY_PATH,
    ExplosionBudgetExceeded,
    KernelError,
    LatticeReplay,
    Machine,
    PathCondition,
    PrimitiveRegistry,
    UnknownLabel,
    UnrealizableLog,
    branches,
    replay_labels,
)
from .labels import Label, Local, Sync
from .lang import InitialConfiguration, Program, Send, Step, bind_pattern_to, substitute
from .logs import canonical_form, is_projected_prefix, is_projected_sublog, log_to_json, projections
from .properties import PropertySpec, check_extension_closed_trace
from .semantics import ContainsProjectedSublog, explore, find_violation, replay_log
from .traces import Trace

EXACT_LIMIT = 20  # exact phase-2 search enumerates at most 2**20 sublogs


class CauseError(Exception):
    pass


class NotExtensionClosed(CauseError):
    pass


class NoViolation(CauseError):
    pass


@dataclass(frozen=True)
class LamportCause:
    log: tuple
    witness: Trace = field(compare=False, repr=False)


@dataclass(frozen=True)
class ActualCause:
    sublog: tuple
    parent: LamportCause = field(compare=False, repr=False)
    parent_index: int = 0


def _status_fn(prop: PropertySpec, cfg: InitialConfiguration):
    return lambda steps, path: prop.status(cfg, steps, path)


# Phase 1 ---------------------------------------------------------------------------------

def phase1_sufficient(
    cfg: InitialConfiguration,
    l: Sequence[Label],
    p: PropertySpec,
    registry: PrimitiveRegistry | None = None,
) -> bool:
    """Every trace containing l as a projected prefix violates p.

    Under reordering closure and extension closure this is decided by one
    replay of l: traces containing l are extensions of reorderings of it.
    """
    m = Machine(cfg, registry)
    try:
        node = replay_labels(m, canonical_form(l))
    except (UnrealizableLog, UnknownLabel):
        return False
    status = _status_fn(p, cfg)
    for st, steps in node:
        for _, v in branches(lambda path: status(steps, path), st.path):
            if not v:
                return False
    return True


def _maximal_labels(cut: frozenset, proj: dict) -> list:
    """Labels of `cut` that are last in the cut's projection of every thread they mention."""
    out = []
    for lab in cut:
        ok = True
        for t in lab.threads:
            seq = proj[t]
            k = seq.index(lab)
            if k + 1 < len(seq) and seq[k + 1] in cut:
                ok = False
                break
        if ok:
            out.append(lab)
    return out


def lamport_causes(
    cfg: InitialConfiguration,
    t: Trace,
    p: PropertySpec,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
    stats: dict | None = None,
) -> list[LamportCause]:
    """All minimal sufficient projected prefixes of log(t), canonically ordered."""
    if not p.violates(t):
        raise NoViolation("the witness trace does not violate the property")
    check = check_extension_closed_trace(p, t)
    if not check:
        raise NotExtensionClosed("violation disappears along the witness trace")
    full = frozenset(t.labels)
    proj = projections(t.labels)
    memo: dict = {}
    minimal = []
    stack = [full]
    memo[full] = True
    while stack:
        cut = stack.pop()
        children = []
        for lab in sorted(_maximal_labels(cut, proj), key=lambda x: x.sort_key()):
            child = cut - {lab}
            if child not in memo:
                if len(memo) >= budget:
                    raise ExplosionBudgetExceeded(len(memo))
                memo[child] = phase1_sufficient(cfg, tuple(x for x in t.labels if x in child), p, registry)
                if memo[child]:
                    stack.append(child)
            if memo[child]:
                children.append(child)
        if not children:
            minimal.append(cut)
    if stats is not None:
        stats["lamport_candidates"] = len(memo)
    logs = sorted({canonical_form([x for x in t.labels if x in cut]) for cut in minimal}, key=_log_key)
    return [LamportCause(l, t) for l in logs]


def _log_key(l: Sequence[Label]) -> tuple:
    return (len(l), tuple(lab.sort_key() for lab in l))


# Dummification ------------------------------------------------------------------------------

def _lines_by_thread(a_d: Sequence[Label]) -> dict[str, set]:
    out: dict[str, set] = {}
    for lab in a_d:
        for ep in lab.endpoints:
            out.setdefault(ep.thread, set()).add(ep.line)
    return out


def dummify(cfg: InitialConfiguration, a_d: Sequence[Label]) -> InitialConfiguration:
    """Drop every step not named by a_d; its binder becomes f(i,b) (0 for a send)."""
    keep = _lines_by_thread(a_d)
    for tid, lines in keep.items():
        if tid not in cfg.threads:
            raise UnknownLabel(f"thread {tid} is not in the configuration")
        missing = lines - set(cfg.program(tid).lines)
        if missing:
            raise UnknownLabel(f"{tid} has no line(s) {sorted(missing)}")
    programs = {}
    for tid in cfg.threads:
        prog = cfg.program(tid)
        lines = keep.get(tid, set())
        steps = list(prog.steps)
        result = prog.result
        k = 0
        while k < len(steps):
            s = steps[k]
            if isinstance(s, Step) and s.line not in lines:
                value = T.ZERO if isinstance(s.action, Send) else T.dummy(tid, s.line)
                rest = Program(tuple(steps[k + 1:]), result)
                for x, v in bind_pattern_to(s.binder, value).items():
                    rest = substitute(rest, x, v)
                steps = steps[:k] + list(rest.steps)
                result = rest.result
                continue
            k += 1
        programs[tid] = Program(tuple(steps), result)
    return cfg.with_programs(programs)


# Phase 2 ---------------------------------------------------------------------------------

def phase2_sufficient(
    cfg: InitialConfiguration,
    a_d: Sequence[Label],
    p: PropertySpec,
    registry: PrimitiveRegistry | None = None,
) -> bool:
    """Under every dummy resolution a_d is realisable and every trace containing it violates p."""
    m = Machine(cfg, registry)
    order = canonical_form(a_d)
    rep = LatticeReplay(m, order, _status_fn(p, cfg), p.writer_predicate(cfg, registry), auto_skip=True)
    return rep.sufficient((1 << len(order)) - 1)


def _compatible(p: PathCondition, q: PathCondition) -> bool:
    r = p
    for atom, v in q.facts.items():
        known = r.get(atom)
        if known is None:
            r = r.assume(atom, v)
            if r is None:
                return False
        elif known != v:
            return False
    return True


def phase2_sufficient_explore(
    cfg: InitialConfiguration,
    a_d: Sequence[Label],
    p: PropertySpec,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
) -> bool:
    """Reference route: transform the programs and explore all their traces."""
    dcfg = dummify(cfg, a_d)
    containing = list(explore(dcfg, ContainsProjectedSublog(tuple(a_d)), por=True, budget=budget, registry=registry))
    for t in containing:
        if not p.violates(t):
            return False
    leaves = [t.path or EMPTY_PATH for t in explore(dcfg, por=True, maximal=True, budget=budget, registry=registry)]
    paths = [t.path or EMPTY_PATH for t in containing]
    return all(any(_compatible(leaf, q) for q in paths) for leaf in leaves)


# Sublog search ---------------------------------------------------------------------------

def _mask_log(order: Sequence[Label], mask: int) -> tuple:
    return tuple(lab for k, lab in enumerate(order) if (mask >> k) & 1)


def _minimal_masks(masks) -> list[int]:
    masks = sorted(set(masks), key=lambda m: (bin(m).count("1"), m))
    out: list[int] = []
    for m in masks:
        if not any(f & m == f for f in out):
            out.append(m)
    return out


def _search_task(args):
    cfg, order, prop, registry, prefix, budget = args
    rep = LatticeReplay(Machine(cfg, registry), order, _status_fn(prop, cfg), prop.writer_predicate(cfg, registry))
    return rep.search(prefix, budget)


def _split_prefixes(n: int, jobs: int) -> list[tuple]:
    depth = 0
    while (1 << depth) < jobs * 4 and depth < n:
        depth += 1
    return [tuple((v >> k) & 1 for k in range(depth)) for v in range(1 << depth)]


def exact_search(
    cfg: InitialConfiguration,
    order: Sequence[Label],
    p: PropertySpec,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    registry: PrimitiveRegistry | None = None,
) -> list[int]:
    order = tuple(order)
    if jobs <= 1 or len(order) < 4:
        return _minimal_masks(_search_task((cfg, order, p, registry, (), budget)))
    tasks = [(cfg, order, p, registry, pre, budget) for pre in _split_prefixes(len(order), jobs)]
    try:
        ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
            parts = list(pool.map(_search_task, tasks))
    except (OSError, TypeError, AttributeError, ImportError):
        parts = [_search_task(t) for t in tasks]
    found = [m for part in parts for m in part]
    return _minimal_masks(found)


class _Oracle:
    """Memoised sufficiency of include-masks over a fixed order."""

    def __init__(self, rep: LatticeReplay, budget: int):
        self.rep = rep
        self.memo: dict[int, bool] = {}
        self.budget = budget

    def __call__(self, mask: int) -> bool:
        v = self.memo.get(mask)
        if v is None:
            if len(self.memo) >= self.budget:
                raise ExplosionBudgetExceeded(len(self.memo))
            v = self.memo[mask] = self.rep.sufficient(mask)
        return v


def _bits(mask: int) -> list[int]:
    out = []
    k = 0
    while mask >> k:
        if (mask >> k) & 1:
            out.append(k)
        k += 1
    return out


def _ddmin(test, mask: int) -> int:
    """Shrink a sufficient mask to a 1-minimal one (delta debugging)."""
    items = _bits(mask)
    n = 2
    while len(items) >= 2:
        size = max(1, len(items) // n)
        chunks = [items[k:k + size] for k in range(0, len(items), size)]
        reduced = False
        for c in chunks:
            rest = [x for x in items if x not in c]
            m = sum(1 << x for x in rest)
            if test(m):
                items = rest
                n = max(n - 1, 2)
                reduced = True
                break
        if not reduced:
            if n >= len(items):
                break
            n = min(len(items), n * 2)
    changed = True
    while changed:
        changed = False
        for x in list(items):
            rest = [y for y in items if y != x]
            if test(sum(1 << y for y in rest)):
                items = rest
                changed = True
                break
    return sum(1 << x for x in items)


def _minimal_hitting_sets(sets: list[frozenset]) -> list[frozenset]:
    hs = [frozenset()]
    for s in sets:
        nxt = set()
        for h in hs:
            if h & s:
                nxt.add(h)
            else:
                for x in s:
                    nxt.add(h | {x})
        ordered = sorted(nxt, key=lambda h: (len(h), sorted(h)))
        hs = []
        for h in ordered:
            if not any(g <= h for g in hs):
                hs.append(h)
    return hs


def greedy_search(
    cfg: InitialConfiguration,
    order: Sequence[Label],
    p: PropertySpec,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
) -> list[int]:
    """1-minimal sufficient masks: shrink, then look for alternatives avoiding each found one."""
    order = tuple(order)
    rep = LatticeReplay(Machine(cfg, registry), order, _status_fn(p, cfg), p.writer_predicate(cfg, registry))
    test = _Oracle(rep, budget)
    full = (1 << len(order)) - 1
    if not test(full):
        return []
    found = [_ddmin(test, full)]
    tried: set = set()
    while True:
        progress = False
        for h in _minimal_hitting_sets([frozenset(_bits(m)) for m in found]):
            if h in tried:
                continue
            tried.add(h)
            cand = full & ~sum(1 << x for x in h)
            if test(cand):
                new = _ddmin(test, cand)
                if new not in found:
                    found.append(new)
                    progress = True
                    break
        if not progress:
            break
    return _minimal_masks(found)


def is_one_minimal(cfg, a_d: Sequence[Label], p: PropertySpec, registry=None) -> bool:
    """a_d is sufficient and dropping any single label breaks sufficiency."""
    if not phase2_sufficient(cfg, a_d, p, registry):
        return False
    return all(not phase2_sufficient(cfg, [x for x in a_d if x != lab], p, registry) for lab in a_d)


def actual_causes(
    cfg: InitialConfiguration,
    lc: LamportCause,
    p: PropertySpec,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    registry: PrimitiveRegistry | None = None,
    stats: dict | None = None,
    parent_index: int = 0,
) -> list[ActualCause]:
    order = canonical_form(lc.log)
    exhaustive = True
    used = mode
    if mode not in ("exact", "greedy"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "exact" and len(order) > EXACT_LIMIT:
        used, exhaustive = "greedy", False
    masks = None
    if used == "exact":
        try:
            masks = exact_search(cfg, order, p, budget, jobs, registry)
        except ExplosionBudgetExceeded:
            used, exhaustive = "greedy", False
    if masks is None:
        masks = greedy_search(cfg, order, p, budget, registry)
        if mode == "greedy":
            exhaustive = False
    if stats is not None:
        stats["mode"] = used
        stats["exhaustive"] = stats.get("exhaustive", True) and exhaustive
    logs = sorted({canonical_form(_mask_log(order, m)) for m in masks}, key=_log_key)
    return [ActualCause(l, lc, parent_index) for l in logs]


def program_cause(ac) -> frozenset:
    """Threads mentioned by the actual cause."""
    log = ac.sublog if isinstance(ac, ActualCause) else ac
    return frozenset(t for lab in log for t in lab.threads)


# Report ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class CauseReport:
    violation: bool
    witness: Trace | None = field(default=None, compare=False, repr=False)
    lamport_causes: tuple = ()
    actual_causes: tuple = ()
    thread_order: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False)
    accountability: dict | None = field(default=None, compare=False)

    @property
    def program_causes(self) -> list[frozenset]:
        return [program_cause(ac) for ac in self.actual_causes]

    def ordered(self, threads) -> list[str]:
        rank = {t: k for k, t in enumerate(self.thread_order)}
        return sorted(threads, key=lambda t: (rank.get(t, len(rank)), t))

    def to_json(self) -> dict:
        out = {
            "violation": self.violation,
            "lamport": [log_to_json(lc.log) for lc in self.lamport_causes],
            "actual": [
                {
                    "sublog": log_to_json(ac.sublog),
                    "program_cause": self.ordered(program_cause(ac)),
                    "lamport_index": ac.parent_index,
                }
                for ac in self.actual_causes
            ],
        }
        if self.accountability is not None:
            out["accountability"] = self.accountability
        out["diagnostics"] = dict(self.diagnostics)
        return out


def analyze(
    cfg: InitialConfiguration,
    p: PropertySpec,
    log: Sequence[Label] | None = None,
    mode: str = "exact",
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
    registry: PrimitiveRegistry | None = None,
    por: bool = True,
) -> CauseReport:
    """Witness (replayed from `log` or searched for), then both phases."""
    if log is not None:
        t = replay_log(cfg, log, registry)
        if not p.violates(t):
            return CauseReport(False, t, thread_order=cfg.threads, diagnostics={"log_labels": len(t), "source": "log"})
        source = "log"
    else:
        t = find_violation(cfg, p, budget, registry, por=por)
        if t is None:
            return CauseReport(False, None, thread_order=cfg.threads, diagnostics={"source": "search"})
        source = "search"
    stats: dict = {"exhaustive": True}
    lcs = lamport_causes(cfg, t, p, budget, registry, stats)
    acs: list[ActualCause] = []
    for k, lc in enumerate(lcs):
        acs.extend(actual_causes(cfg, lc, p, mode, budget, jobs, registry, stats, parent_index=k))
    diagnostics = {
        "source": source,
        "log_labels": len(t),
        "lamport_candidates": stats.get("lamport_candidates", 0),
        "lamport_labels": [len(lc.log) for lc in lcs],
        "requested_mode": mode,
        "mode": stats.get("mode", mode),
        "exhaustive": stats.get("exhaustive", True),
    }
    return CauseReport(True, t, tuple(lcs), tuple(acs), cfg.threads, diagnostics)


__all__ = [
    "ActualCause",
    "CauseError",
    "CauseReport",
    "EXACT_LIMIT",
    "LamportCause",
    "NoViolation",
    "NotExtensionClosed",
    "actual_causes",
    "analyze",
    "dummify",
    "exact_search",
    "greedy_search",
    "is_one_minimal",
    "lamport_causes",
    "phase1_sufficient",
    "phase2_sufficient",
    "phase2_sufficient_explore",
    "program_cause",
]
