"""Logs: projection, projected prefix/sublog, reordering equivalence, canonical order."""

from __future__ import annotations

import heapq
import json
from collections.abc import Iterable, Mapping, Sequence

from .labels import Label, Local, Sync, label_from_json, label_to_json

Log = tuple  # tuple[Label, ...]


class LogError(ValueError):
    pass


class DistinctInitialConfigurations(LogError):
    pass


class InconsistentProjections(LogError):
    pass


def threads_of(*logs: Iterable[Label]) -> list[str]:
    seen: dict[str, None] = {}
    for log in logs:
        for lab in log:
            for t in lab.threads:
                seen.setdefault(t, None)
    return sorted(seen)


def project(l: Sequence[Label], i: str) -> Log:
    return tuple(lab for lab in l if lab.mentions(i))


def projections(l: Sequence[Label]) -> dict[str, Log]:
    out: dict[str, list] = {}
    for lab in l:
        for t in lab.threads:
            out.setdefault(t, []).append(lab)
    return {t: tuple(v) for t, v in out.items()}


def is_projected_prefix(l1: Sequence[Label], l2: Sequence[Label]) -> bool:
    p1 = projections(l1)
    p2 = projections(l2)
    for t, seq in p1.items():
        other = p2.get(t, ())
        if len(seq) > len(other) or other[: len(seq)] != seq:
            return False
    return True


def _is_subsequence(a: Sequence, b: Sequence) -> bool:
    it = iter(b)
    return all(any(x == y for y in it) for x in a)


def is_projected_sublog(l1: Sequence[Label], l2: Sequence[Label]) -> bool:
    p1 = projections(l1)
    p2 = projections(l2)
    return all(_is_subsequence(seq, p2.get(t, ())) for t, seq in p1.items())


def projections_equal(l1: Sequence[Label], l2: Sequence[Label]) -> bool:
    return projections(l1) == projections(l2)


def reordering_equivalent(t1, t2) -> bool:
    """Traces with equal per-thread projections of their logs."""
    if t1.initial != t2.initial:
        raise DistinctInitialConfigurations("traces start from different configurations")
    return projections_equal(t1.labels, t2.labels)


def merge_projections(parts: Mapping[str, Sequence[Label]]) -> Log:
    """The canonical interleaving of per-thread projections.

    Every label must appear in the list of each thread it mentions, in an
    order consistent across threads.
    """
    succ: dict[Label, set] = {}
    indeg: dict[Label, int] = {}
    for tid, seq in parts.items():
        seen = set()
        for lab in seq:
            if not lab.mentions(tid):
                raise InconsistentProjections(f"{lab} listed under {tid} but does not mention it")
            if lab in seen:
                raise InconsistentProjections(f"{lab} repeated in the projection of {tid}")
            seen.add(lab)
            succ.setdefault(lab, set())
            indeg.setdefault(lab, 0)
        for a, b in zip(seq, seq[1:]):
            if b not in succ[a]:
                succ[a].add(b)
                indeg[b] += 1
    for lab in succ:
        for t in lab.threads:
            if t in parts and lab not in parts[t]:
                raise InconsistentProjections(f"{lab} missing from the projection of {t}")
    return _kahn(succ, indeg)


def _kahn(succ: dict, indeg: dict) -> Log:
    heap = [(lab.sort_key(), n, lab) for n, lab in enumerate(succ) if indeg[lab] == 0]
    # sort_key is a total order on distinct labels; n only breaks impossible ties
    heapq.heapify(heap)
    out = []
    indeg = dict(indeg)
    order = {lab: n for n, lab in enumerate(succ)}
    while heap:
        _, _, lab = heapq.heappop(heap)
        out.append(lab)
        for nxt in succ[lab]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, (nxt.sort_key(), order[nxt], nxt))
    if len(out) != len(succ):
        raise InconsistentProjections("projections order labels cyclically")
    return tuple(out)


def canonical_form(l: Sequence[Label]) -> Log:
    """Least interleaving (by label sort key) with the same projections as l."""
    return merge_projections(projections(l))


# JSON -------------------------------------------------------------------------------

def log_to_json(l: Sequence[Label]) -> list:
    return [label_to_json(lab) for lab in l]


def log_from_json(obj) -> Log:
    """Accepts a JSON array of labels or an object mapping thread -> projection."""
    if isinstance(obj, list):
        return tuple(label_from_json(x) for x in obj)
    if isinstance(obj, dict):
        return merge_projections({str(t): [label_from_json(x) for x in v] for t, v in obj.items()})
    raise LogError("a log is a JSON array of labels or an object of per-thread projections")


def load_log(path) -> Log:
    with open(path, encoding="utf-8") as fh:
        return log_from_json(json.load(fh))


def show_log(l: Sequence[Label]) -> str:
    return ", ".join(str(lab) for lab in l)


__all__ = [
    "DistinctInitialConfigurations",
    "InconsistentProjections",
    "Local",
    "LogError",
    "Sync",
    "canonical_form",
    "is_projected_prefix",
    "is_projected_sublog",
    "load_log",
    "log_from_json",
    "log_to_json",
    "merge_projections",
    "project",
    "projections",
    "projections_equal",
    "reordering_equivalent",
    "show_log",
    "threads_of",
]
