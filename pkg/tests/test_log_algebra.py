import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_audit.dsl import parse_document
from causal_audit.labels import Local, sync
from causal_audit.logs import (
    DistinctInitialConfigurations,
    InconsistentProjections,
    canonical_form,
    is_projected_prefix,
    is_projected_sublog,
    log_from_json,
    log_to_json,
    merge_projections,
    project,
    projections,
    reordering_equivalent,
)
from causal_audit.semantics import explore

from gen import gen_protocol


def test_project_notary(main_log):
    assert project(main_log, "N1") == (sync("U1", 3, "N1", 1), sync("N1", 2, "U1", 6))
    assert project((), "N1") == ()
    assert project(main_log, "Nobody") == ()


def test_lamport_cause_is_projected_prefix(main_report, main_log):
    l = main_report.lamport_causes[0].log
    assert is_projected_prefix(l, main_log)
    assert is_projected_prefix(l, l)


def test_swapped_notary_labels_not_prefix(main_report, main_log):
    l = list(main_report.lamport_causes[0].log)
    a, b = (k for k, lab in enumerate(l) if lab.mentions("N1"))
    l[a], l[b] = l[b], l[a]
    assert not is_projected_prefix(l, main_log)


def test_actual_cause_is_sublog(main_report):
    l = main_report.lamport_causes[0].log
    for ac in main_report.actual_causes:
        assert is_projected_sublog(ac.sublog, l)
    assert is_projected_sublog((), l)
    assert not is_projected_sublog((Local("S1", 99),), l)


def _two_interleavings():
    cfg = parse_document("thread A { program { 1: x = id(1); } } thread B { program { 1: y = id(2); } }").config
    return list(explore(cfg, por=False, maximal=True))


def test_reordering_equivalence_examples():
    t1, t2 = _two_interleavings()
    assert t1.labels != t2.labels
    assert reordering_equivalent(t1, t1)
    assert reordering_equivalent(t1, t2)


def test_reordering_equivalence_distinguishes_partners():
    src = "thread A { program { 1: send(B, 1); } } thread B { program { 1: x = recv(A); } } thread C { program { 1: y = recv(A); } }"
    cfg = parse_document(src).config
    by_label = {t.labels: t for t in explore(cfg, por=False, maximal=True)}
    assert not reordering_equivalent(by_label[(sync("A", 1, "B", 1),)], by_label[(sync("A", 1, "C", 1),)])


def test_reordering_requires_same_configuration():
    t1, _ = _two_interleavings()
    other = parse_document("thread A { program { } }").config
    (t3,) = list(explore(other, maximal=True))
    with pytest.raises(DistinctInitialConfigurations):
        reordering_equivalent(t1, t3)


def test_canonical_single_thread():
    l = (Local("A", 3), Local("A", 1), Local("A", 2))
    assert canonical_form(l) == l


def _random_linearisation(parts, rng):
    pos = {t: 0 for t in parts}

    def head(u):
        return parts[u][pos[u]] if pos[u] < len(parts[u]) else None

    out = []
    total = len({lab for seq in parts.values() for lab in seq})
    while len(out) < total:
        ready = {head(t) for t in parts if head(t) is not None}
        ready = sorted((lab for lab in ready if all(head(u) == lab for u in lab.threads)), key=lambda x: x.sort_key())
        lab = rng.choice(ready)
        out.append(lab)
        for u in lab.threads:
            pos[u] += 1
    return out


def test_canonical_case_study_interleavings(main_log):
    parts = projections(main_log)
    rng = random.Random(0)
    for _ in range(5):
        out = _random_linearisation(parts, rng)
        assert projections(out) == parts
        assert canonical_form(out) == canonical_form(main_log)


def test_merge_rejects_cycles_and_missing():
    a, b = sync("A", 1, "B", 1), sync("B", 2, "A", 2)
    with pytest.raises(InconsistentProjections):
        merge_projections({"A": [a, b], "B": [b, a]})
    with pytest.raises(InconsistentProjections):
        merge_projections({"A": [a], "B": []})


def test_json_roundtrip(fixtures_dir, main_log):
    assert log_from_json(log_to_json(main_log)) == main_log
    assert log_to_json([Local("S1", 6)]) == [{"local": {"t": "S1", "b": 6}}]
    assert log_to_json([sync("U1", 10, "Adversary", 3)]) == [{"sync": {"s": {"t": "U1", "b": 10}, "r": {"t": "Adversary", "b": 3}}}]
    parts = json.loads((fixtures_dir / "notaries_log.json").read_text())
    assert set(parts) == set(projections(main_log))


# Random logs drawn from real executions ----------------------------------------------------

@st.composite
def trace_logs(draw):
    rng = draw(st.randoms(use_true_random=False))
    cfg = parse_document(gen_protocol(rng, max_threads=3, max_steps=4)).config
    traces = list(explore(cfg, por=False, budget=100_000))
    return [t.labels for t in traces], rng


@settings(max_examples=100, deadline=None)
@given(trace_logs())
def test_canonical_form_laws(data):
    logs, rng = data
    l1 = logs[rng.randrange(len(logs))]
    l2 = logs[rng.randrange(len(logs))]
    c1 = canonical_form(l1)
    assert canonical_form(c1) == c1
    assert projections(c1) == projections(l1)
    assert (canonical_form(l1) == canonical_form(l2)) == (projections(l1) == projections(l2))


@settings(max_examples=100, deadline=None)
@given(trace_logs())
def test_containment_orders(data):
    logs, rng = data
    a, b, c = (logs[rng.randrange(len(logs))] for _ in range(3))
    for x in (a, b, c):
        assert is_projected_prefix(x, x) and is_projected_sublog(x, x)
    if is_projected_prefix(a, b):
        assert is_projected_sublog(a, b)
    if is_projected_prefix(a, b) and is_projected_prefix(b, c):
        assert is_projected_prefix(a, c)
    if is_projected_sublog(a, b) and is_projected_sublog(b, c):
        assert is_projected_sublog(a, c)
    # any prefix of a trace log is a projected prefix of it
    k = rng.randint(0, len(a))
    assert is_projected_prefix(a[:k], a)


@settings(max_examples=100, deadline=None)
@given(trace_logs())
def test_projection_distributes_over_concatenation(data):
    logs, rng = data
    l = logs[rng.randrange(len(logs))]
    k = rng.randint(0, len(l))
    for t in {t for lab in l for t in lab.threads}:
        assert project(l, t) == project(l[:k], t) + project(l[k:], t)


@settings(max_examples=50, deadline=None)
@given(st.randoms(use_true_random=False))
def test_reordering_equivalence_is_an_equivalence(rng):
    cfg = parse_document(gen_protocol(rng, max_threads=3, max_steps=3)).config
    traces = list(explore(cfg, por=False, budget=100_000))
    sample = [traces[rng.randrange(len(traces))] for _ in range(3)]
    a, b, c = sample
    assert reordering_equivalent(a, a)
    assert reordering_equivalent(a, b) == reordering_equivalent(b, a)
    if reordering_equivalent(a, b) and reordering_equivalent(b, c):
        assert reordering_equivalent(a, c)
