"""Norms: necessity of the prescribed programs and harmless-deviant classification."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .kernel import DEFAULT_BUDGET, PrimitiveRegistry
from .labels import Label
from .lang import InitialConfiguration, Program, same_program, step_shape
from .properties import Confirmed, Counterexample, PropertySpec
from .semantics import find_violation

NORM_FOLLOWER = "Norm-Follower"
DEVIANT_HARMLESS = "Deviant-Harmless"
DEVIANT_IMPLICATED = "Deviant-Implicated"


class MismatchedDomains(ValueError):
    pass


@dataclass(frozen=True)
class NormMap:
    """thread id -> prescribed program."""
    norms: Mapping[str, Program] = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg: InitialConfiguration) -> NormMap:
        return cls(dict(zip(cfg.threads, cfg.programs)))

    @property
    def threads(self) -> frozenset:
        return frozenset(self.norms)

    def __getitem__(self, tid: str) -> Program:
        return self.norms[tid]

    def check_domain(self, cfg: InitialConfiguration) -> None:
        if self.threads != frozenset(cfg.threads):
            missing = sorted(frozenset(cfg.threads) - self.threads)
            extra = sorted(self.threads - frozenset(cfg.threads))
            raise MismatchedDomains(f"norms and actuals differ: missing {missing}, extra {extra}")


def check_necessity(
    threads: Iterable[str],
    norms: NormMap,
    stores: Mapping[str, tuple] | Sequence,
    p: PropertySpec,
    budget: int = DEFAULT_BUDGET,
    registry: PrimitiveRegistry | None = None,
    por: bool = True,
):
    """Confirmed when no trace of the norms violates p, else Counterexample(trace)."""
    tids = tuple(threads)
    if frozenset(tids) != norms.threads:
        raise MismatchedDomains("norm map and thread set differ")
    if isinstance(stores, Mapping):
        stores = tuple(stores[t] for t in tids)
    cfg = InitialConfiguration(tids, tuple(norms[t] for t in tids), tuple(stores))
    stats: dict = {}
    t = find_violation(cfg, p, budget, registry, por=por, stats=stats)
    if t is None:
        return Confirmed(stats.get("states", 0))
    return Counterexample(t)


def _own_lines(sublog: Sequence[Label], tid: str) -> list[int]:
    return [lab.line_of(tid) for lab in sublog if lab.mentions(tid)]


def classify(tid: str, sublog: Sequence[Label], actual: Program, norm: Program) -> str:
    """Classification of one thread of one actual cause.

    The actual steps at the lines a_d|tid uses, in order, must coincide
    structurally with the first steps of the norm.
    """
    if same_program(actual, norm):
        return NORM_FOLLOWER
    lines = _own_lines(sublog, tid)
    prescribed = norm.numbered()
    if len(lines) > len(prescribed):
        return DEVIANT_IMPLICATED
    for line, want in zip(lines, prescribed):
        try:
            got = actual.step_at(line)
        except KeyError:
            return DEVIANT_IMPLICATED
        if step_shape(got) != step_shape(want):
            return DEVIANT_IMPLICATED
    return DEVIANT_HARMLESS


def classify_cause(sublog: Sequence[Label], actuals: InitialConfiguration, norms: NormMap) -> dict[str, str]:
    norms.check_domain(actuals)
    tids = sorted({t for lab in sublog for t in lab.threads}, key=actuals.index)
    return {t: classify(t, sublog, actuals.program(t), norms[t]) for t in tids}


def harmless_deviants(report, actuals: InitialConfiguration, norms: NormMap) -> dict[str, str]:
    """Classification of every program-cause member across the report's actual causes.

    A thread implicated by any actual cause is reported as implicated.
    """
    norms.check_domain(actuals)
    out: dict[str, str] = {}
    for ac in report.actual_causes:
        for t, c in classify_cause(ac.sublog, actuals, norms).items():
            if out.get(t) != DEVIANT_IMPLICATED:
                out[t] = c
    return {t: out[t] for t in sorted(out, key=actuals.index)}


def accountability_json(report, actuals: InitialConfiguration, norms: NormMap, necessity=None) -> dict:
    out: dict = {
        "classification": harmless_deviants(report, actuals, norms),
        "per_cause": [classify_cause(ac.sublog, actuals, norms) for ac in report.actual_causes],
    }
    if necessity is not None:
        out["necessity"] = "confirmed" if necessity else "counterexample"
    return out


__all__ = [
    "DEVIANT_HARMLESS",
    "DEVIANT_IMPLICATED",
    "MismatchedDomains",
    "NORM_FOLLOWER",
    "NormMap",
    "accountability_json",
    "check_necessity",
    "classify",
    "classify_cause",
    "harmless_deviants",
]
