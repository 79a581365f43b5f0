"""Trace properties (the violation predicate) and closure checks."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

from . import terms as T
from .dsl import PropertyBlock
from .kernel import (
    DEFAULT_BUDGET,
    DEFAULT_REGISTRY,
    Ctx,
    MissingLocation,
    PrimitiveRegistry,
    equal_under,
    match,
)
from .labels import Label, Local, Sync
from .lang import InitialConfiguration, Lit, PCon, PEq, Prim, PVar, Step, ValidationError
from .logs import projections
from .semantics import explore, trace_violates
from .traces import Trace


class PropertySpec:
    """Base class: `status` decides violation of a finite trace for one dummy resolution.

    status may raise kernel.Undetermined; callers fork on it.
    """

    name = "property"
    declared_safety_complement = True
    declared_reordering_closed = True
    store_based = False

    def status(self, initial: InitialConfiguration, steps: tuple, path) -> bool:
        raise NotImplementedError

    def violates(self, t: Trace) -> bool:
        return trace_violates(self, t)

    def writer_predicate(self, cfg: InitialConfiguration, registry: PrimitiveRegistry | None = None):
        """label -> bool: can firing this label change the verdict? None = unknown."""
        return None


@dataclass(frozen=True)
class AccessControlProperty(PropertySpec):
    """Violated when a matrix ever holds (account, k) with k not the owner."""
    matrix: str
    account: tuple
    owner: str
    thread: str | None = None

    name = "access_control"
    store_based = True

    def _stores(self, initial: InitialConfiguration, stores):
        if self.thread is not None:
            if self.thread not in initial.threads:
                raise MissingLocation(f"{self.thread}.{self.matrix}")
            s = stores[initial.index(self.thread)]
            if self.matrix not in s:
                raise MissingLocation(f"{self.thread}.{self.matrix}")
            return (s,)
        found = tuple(s for s in stores if self.matrix in s)
        if not found:
            raise MissingLocation(self.matrix)
        return found

    def _bad_entry(self, entry, path) -> bool:
        ctx = Ctx(None, None, path)
        pat = PCon(T.TUPLE, (PEq(Lit(self.account)), PVar("k")))
        env = match(pat, entry, (), T.EMPTY_STORE, ctx, DEFAULT_REGISTRY)
        if env is None:
            return False
        return not equal_under(env[-1][1], T.thread(self.owner), path)

    def state_status(self, initial: InitialConfiguration, stores, path) -> bool:
        for s in self._stores(initial, stores):
            m = s[self.matrix]
            entries = m[1] if m[0] == T.TUPLE else (m,)
            for e in entries:
                if self._bad_entry(e, path):
                    return True
        return False

    def status(self, initial: InitialConfiguration, steps: tuple, path) -> bool:
        if self.state_status(initial, initial.stores, path):
            return True
        last = None
        for s in steps:
            if s.stores is last:
                continue
            last = s.stores
            if self.state_status(initial, s.stores, path):
                return True
        return False

    def writer_predicate(self, cfg: InitialConfiguration, registry: PrimitiveRegistry | None = None):
        reg = registry or DEFAULT_REGISTRY
        owners = {self.thread} if self.thread is not None else {t for t in cfg.threads if self.matrix in cfg.store(t)}

        def writes(label: Label) -> bool:
            if not isinstance(label, Local) or label.thread not in owners:
                return False
            try:
                step = cfg.program(label.thread).step_at(label.line)
            except KeyError:
                return True
            return isinstance(step, Step) and isinstance(step.action, Prim) and not reg.get(step.action.name).pure

        return writes


@dataclass(frozen=True)
class NeverSend(PropertySpec):
    """Violated when some synchronisation transfers `value`."""
    value: tuple

    name = "never_send"

    def status(self, initial: InitialConfiguration, steps: tuple, path) -> bool:
        for s in steps:
            if s.message is not None and equal_under(s.message, self.value, path):
                return True
        return False

    def writer_predicate(self, cfg: InitialConfiguration, registry: PrimitiveRegistry | None = None):
        return lambda label: isinstance(label, Sync)


@dataclass(frozen=True)
class LabelOrderProperty(PropertySpec):
    """Violated when `first` occurs before `second` in the global order.

    Deliberately sensitive to interleaving: not reordering-closed.
    """
    first: Label
    second: Label

    name = "label_order"
    declared_reordering_closed = False

    def status(self, initial, steps, path) -> bool:
        labels = [s.label for s in steps]
        if self.first in labels and self.second in labels:
            return labels.index(self.first) < labels.index(self.second)
        return False


@dataclass(frozen=True)
class NeverViolated(PropertySpec):
    name = "never"

    def status(self, initial, steps, path) -> bool:
        return False


@dataclass(frozen=True)
class PredicateProperty(PropertySpec):
    """Wraps a plain function status(initial, steps, path) -> bool."""
    fn: Callable = field(compare=False)
    label: str = "custom"

    @property
    def name(self):  # type: ignore[override]
        return self.label

    def status(self, initial, steps, path) -> bool:
        return self.fn(initial, steps, path)


# Configuration blocks -------------------------------------------------------------------

def _never_send_from(block: PropertyBlock) -> PropertySpec:
    v = block.get("value")
    if v is None:
        raise ValidationError("never_send needs `value = <term>`")
    return NeverSend(v)


BUILTINS: dict[str, Callable[[PropertyBlock], PropertySpec]] = {
    "never_send": _never_send_from,
    "never": lambda block: NeverViolated(),
}


def register_builtin(name: str, factory: Callable[[PropertyBlock], PropertySpec]) -> None:
    BUILTINS[name] = factory


def property_from_block(block: PropertyBlock) -> PropertySpec:
    kind = block.name("type")
    if kind == "access_control":
        for key in ("matrix", "account", "owner"):
            if block.get(key) is None:
                raise ValidationError(f"access_control property needs `{key}`")
        return AccessControlProperty(
            matrix=block.name("matrix"),
            account=block.get("account"),
            owner=block.name("owner"),
            thread=block.name("thread"),
        )
    if kind and kind.startswith("builtin:"):
        name = kind.split(":", 1)[1]
        if name not in BUILTINS:
            raise ValidationError(f"unknown builtin property {name!r}")
        return BUILTINS[name](block)
    raise ValidationError(f"unknown property type {kind!r}")


# Closure checks ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Confirmed:
    bound: int  # number of traces examined

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Counterexample:
    first: Trace
    second: Trace | None = None

    def __bool__(self) -> bool:
        return False


def check_reordering_closed(
    p: PropertySpec,
    cfg: InitialConfiguration,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
):
    """Exhaustively compare verdicts inside every reordering-equivalence class."""
    verdicts: dict = {}
    n = 0
    for t in explore(cfg, por=False, budget=budget, registry=registry):
        n += 1
        key = (frozenset(projections(t.labels).items()), t.path)
        v = p.violates(t)
        if key in verdicts:
            other, ov = verdicts[key]
            if ov != v:
                return Counterexample(other, t)
        else:
            verdicts[key] = (t, v)
    return Confirmed(n)


def check_extension_closed_trace(p: PropertySpec, t: Trace):
    """Along t's prefixes: once violated, violated for every longer prefix."""
    seen_violation = False
    for k in range(len(t) + 1):
        v = p.violates(t.prefix(k))
        if seen_violation and not v:
            return Counterexample(t.prefix(k - 1), t.prefix(k))
        seen_violation = seen_violation or v
    return Confirmed(len(t) + 1)


def check_extension_closed(
    p: PropertySpec,
    cfg: InitialConfiguration,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
):
    n = 0
    for t in explore(cfg, por=False, maximal=True, budget=budget, registry=registry):
        n += 1
        r = check_extension_closed_trace(p, t)
        if not r:
            return r
    return Confirmed(n)
