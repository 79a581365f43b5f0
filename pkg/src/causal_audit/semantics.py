"""Labelled small-step semantics and the trace explorer."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

from .kernel import (
    DEFAULT_BUDGET,
    ExplosionBudgetExceeded,
    Machine,
    PrimitiveRegistry,
    UnknownLabel,
    UnrealizableLog,
    branches,
    replay_labels,
)
from .labels import Label, Local
from .lang import InitialConfiguration
from .logs import canonical_form, is_projected_sublog, projections
from .traces import Trace


# Log constraints ----------------------------------------------------------------------

@dataclass(frozen=True)
class Any:
    def prune(self, counts: dict, label: Label) -> bool:
        return False

    def accepts(self, labels: Sequence[Label]) -> bool:
        return True


@dataclass(frozen=True)
class ContainsProjectedPrefix:
    """Traces whose log has `log` as a projected prefix."""
    log: tuple

    def __post_init__(self):
        object.__setattr__(self, "_proj", projections(self.log))

    def prune(self, counts: dict, label: Label) -> bool:
        # counts: labels per thread executed before `label`
        for t in label.threads:
            want = self._proj.get(t, ())
            k = counts.get(t, 0)
            if k < len(want) and want[k] != label:
                return True
        return False

    def accepts(self, labels: Sequence[Label]) -> bool:
        got = projections(labels)
        return all(got.get(t, ())[: len(seq)] == seq for t, seq in self._proj.items())


@dataclass(frozen=True)
class ContainsProjectedSublog:
    log: tuple

    def prune(self, counts: dict, label: Label) -> bool:
        return False

    def accepts(self, labels: Sequence[Label]) -> bool:
        return is_projected_sublog(self.log, labels)


@dataclass(frozen=True)
class OnlyLabels:
    """Traces using only the given labels."""
    labels: frozenset

    def prune(self, counts: dict, label: Label) -> bool:
        return label not in self.labels

    def accepts(self, labels: Sequence[Label]) -> bool:
        return True


ANY = Any()


# Stepping -------------------------------------------------------------------------------

def initial_states(cfg: InitialConfiguration, registry: PrimitiveRegistry | None = None):
    return Machine(cfg, registry).initial()


def enabled_steps(cfg: InitialConfiguration, state=None, registry: PrimitiveRegistry | None = None):
    """Labelled successors [(label, state)] of `state` (default: the initial state).

    Asserts are silent and run eagerly; an undetermined assert forks the state.
    """
    m = Machine(cfg, registry)
    states = m.initial() if state is None else [state]
    out = []
    for st in states:
        for lab, nxt, _ in m.successors(st):
            out.append((lab, nxt))
    return out


def _materialize(cons) -> tuple:
    out = []
    while cons is not None:
        out.append(cons[0])
        cons = cons[1]
    out.reverse()
    return tuple(out)


def explore(
    cfg: InitialConfiguration,
    constraint=ANY,
    por: bool = True,
    maximal: bool = False,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
) -> Iterator[Trace]:
    """Yield the traces of cfg (every prefix, or only maximal ones) accepted by `constraint`.

    With por on, one trace per reordering-equivalence class (label set + dummy
    resolution) is produced.
    """
    from .traces import TraceStep

    m = Machine(cfg, registry)
    seen: set = set()
    count = 0
    stack = []
    for st in m.initial():
        stack.append((st, None, frozenset(), {}))
    # depth-first, successors pushed in reverse so traversal order is deterministic
    while stack:
        st, cons, labset, counts = stack.pop()
        count += 1
        if count > budget:
            raise ExplosionBudgetExceeded(count)
        succ = m.successors(st)
        if not maximal or not succ:
            steps = _materialize(cons)
            if constraint.accepts([s.label for s in steps]):
                yield Trace(cfg, steps, st.path)
        children = []
        for lab, nxt, msg in succ:
            if constraint.prune(counts, lab):
                continue
            ls = labset | {lab}
            if por:
                key = (ls, nxt.path)
                if key in seen:
                    continue
                seen.add(key)
            c2 = dict(counts)
            for t in lab.threads:
                c2[t] = c2.get(t, 0) + 1
            step = TraceStep(lab, tuple(th.store for th in nxt.threads), msg)
            children.append((nxt, (step, cons), ls, c2))
        stack.extend(reversed(children))


def log_of(t: Trace) -> tuple:
    return t.labels


def replay_log(cfg: InitialConfiguration, l: Sequence[Label], registry: PrimitiveRegistry | None = None) -> Trace:
    """Rebuild the trace realising l (in canonical order)."""
    order = canonical_form(l)
    m = Machine(cfg, registry)
    try:
        node = replay_labels(m, order)
    except UnknownLabel as e:
        bad = next((lab for lab in order if _unknown(m, lab)), None)
        raise UnrealizableLog(bad, str(e)) from None
    st, steps = node[0]
    return Trace(cfg, steps, st.path)


def _unknown(m: Machine, lab: Label) -> bool:
    try:
        m.plan_label(lab)
    except UnknownLabel:
        return True
    return False


def validate_trace(t: Trace, registry: PrimitiveRegistry | None = None) -> bool:
    """Re-execute t's labels and compare every snapshot."""
    try:
        node = replay_labels(Machine(t.initial, registry), t.labels)
    except UnrealizableLog:
        return False
    return any(tuple(s.stores for s in steps) == tuple(s.stores for s in t.steps) for _, steps in node)


def trace_violates(prop, t: Trace) -> bool:
    """Every dummy resolution of t violates prop."""
    return all(v for _, v in branches(lambda path: prop.status(t.initial, t.steps, path), t.path or _empty_path()))


def _empty_path():
    from .kernel import EMPTY_PATH
    return EMPTY_PATH


def find_violation(
    cfg: InitialConfiguration,
    prop,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
    por: bool = True,
    stats: dict | None = None,
) -> Trace | None:
    """First violating trace in depth-first order, or None after exhausting cfg.

    For store-based properties whole states are deduplicated (the verdict is
    a function of the current stores); otherwise label-set caching is used.
    With por on and a store-based property, a state with an enabled local
    step that cannot write a watched location expands only that step: it is
    independent of every other thread and invisible to the verdict. With por
    off nothing is cached or reduced. `stats["states"]` receives the visit count.
    """
    from .traces import TraceStep

    m = Machine(cfg, registry)
    seen: set = set()
    count = 0
    stack = [(st, None, frozenset()) for st in reversed(m.initial())]
    store_based = getattr(prop, "store_based", False)
    writes = prop.writer_predicate(cfg, registry) if por and store_based else None
    while stack:
        st, cons, labset = stack.pop()
        count += 1
        if count > budget:
            raise ExplosionBudgetExceeded(count)
        if store_based:
            bad = any(v for _, v in branches(lambda p: prop.state_status(cfg, tuple(th.store for th in st.threads), p), st.path))
        else:
            steps = _materialize(cons)
            bad = any(v for _, v in branches(lambda p: prop.status(cfg, steps, p), st.path))
        if bad:
            if stats is not None:
                stats["states"] = count
            return Trace(cfg, _materialize(cons), st.path)
        children = []
        succ = m.successors(st)
        if writes is not None:
            quiet = next((lab for lab, _, _ in succ if isinstance(lab, Local) and not writes(lab)), None)
            if quiet is not None:
                succ = [x for x in succ if x[0] == quiet]
        for lab, nxt, msg in succ:
            ls = labset | {lab}
            if por:
                key = nxt if store_based else (ls, nxt.path)
                if key in seen:
                    continue
                seen.add(key)
            step = TraceStep(lab, tuple(th.store for th in nxt.threads), msg)
            children.append((nxt, (step, cons), ls))
        stack.extend(reversed(children))
    if stats is not None:
        stats["states"] = count
    return None


__all__ = [
    "ANY",
    "Any",
    "ContainsProjectedPrefix",
    "ContainsProjectedSublog",
    "OnlyLabels",
    "enabled_steps",
    "explore",
    "find_violation",
    "initial_states",
    "log_of",
    "replay_log",
    "trace_violates",
    "validate_trace",
]
