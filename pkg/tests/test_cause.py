import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_audit import terms as T
from causal_audit.cause import (
    ActualCause,
    NoViolation,
    NotExtensionClosed,
    actual_causes,
    analyze,
    dummify,
    exact_search,
    greedy_search,
    is_one_minimal,
    lamport_causes,
    phase1_sufficient,
    phase2_sufficient,
    phase2_sufficient_explore,
    program_cause,
)
from causal_audit.dsl import parse_document
from causal_audit.labels import Local, sync
from causal_audit.lang import renumber
from causal_audit.logs import canonical_form, is_projected_prefix, is_projected_sublog, projections
from causal_audit.properties import PredicateProperty, property_from_block
from causal_audit.semantics import find_violation, replay_log

from gen import gen_protocol

A = "Adversary"

# first actual cause of the recorded case-study run, label for label
FIG_A_D = {
    A: (sync("U1", 1, A, 1), sync(A, 2, "U1", 2), sync("U1", 10, A, 3), Local(A, 4), sync(A, 5, "S1", 1),
        sync("S1", 2, A, 6), Local(A, 7), sync(A, 8, "S1", 5)),
    "S1": (sync(A, 5, "S1", 1), sync("S1", 2, A, 6), sync(A, 8, "S1", 5), Local("S1", 6), Local("S1", 7), Local("S1", 8)),
    "U1": (sync("U1", 1, A, 1), sync(A, 2, "U1", 2), sync("U1", 3, "N1", 1), sync("U1", 4, "N2", 1),
           sync("N1", 2, "U1", 6), sync("N2", 2, "U1", 7), Local("U1", 9), sync("U1", 10, A, 3)),
    "N1": (sync("U1", 3, "N1", 1), sync("N1", 2, "U1", 6)),
    "N2": (sync("U1", 4, "N2", 1), sync("N2", 2, "U1", 7)),
}
PROGRAM_CAUSES = {
    frozenset({A, "U1", "S1", "N1", "N2"}),
    frozenset({A, "U1", "S1", "N1", "N3"}),
    frozenset({A, "U1", "S1", "N2", "N3"}),
}


def _doc(src):
    doc = parse_document(src)
    return doc.config, property_from_block(doc.prop)


# Phase 1 ------------------------------------------------------------------------------------

def test_lamport_cause_of_case_study(main_report, main_log):
    (lc,) = main_report.lamport_causes
    proj = projections(lc.log)
    full = projections(main_log)
    assert "U3" not in proj and "U3" in full
    assert proj["U2"] == (sync("U2", 1, "S1", 3), sync("S1", 4, "U2", 2))
    for t in proj:
        if t != "U2":
            assert proj[t] == full[t]
    assert len(lc.log) == 20


def test_phase1_examples(main_actual, main_report, main_log):
    cfg, p = main_actual
    l = main_report.lamport_causes[0].log
    assert phase1_sufficient(cfg, l, p)
    assert phase1_sufficient(cfg, main_log, p)
    assert not phase1_sufficient(cfg, [x for x in l if x != Local("S1", 8)], p)


def test_lamport_cause_remarks(remarks):
    cfg, p = remarks
    t = find_violation(cfg, p)
    (lc,) = lamport_causes(cfg, t, p)
    assert lc.log == t.labels and len(lc.log) == 4


def test_lamport_minimal_two_labels():
    cfg, p = _doc(
        "thread P { program { 1: x = id(1); 2: send(Net, x); } } thread Net { program { 1: m = recv(P); } }"
        " property { type = builtin:never_send; value = 1; }"
    )
    t = find_violation(cfg, p)
    (lc,) = lamport_causes(cfg, t, p)
    assert lc.log == (Local("P", 1), sync("P", 2, "Net", 1))


def test_lamport_cause_appendix(appendix_report):
    (lc,) = appendix_report.lamport_causes
    proj = projections(lc.log)
    for t in ("N4", "S2", "U4", "U3"):
        assert t not in proj
    assert len(lc.log) == 27


def test_no_violation_rejected(main_actual):
    cfg, p = main_actual
    with pytest.raises(NoViolation):
        lamport_causes(cfg, replay_log(cfg, ()), p)


def test_non_extension_closed_rejected():
    cfg = parse_document("thread A { program { 1: x = id(1); 2: y = id(2); 3: z = id(3); } }").config
    odd = PredicateProperty(lambda initial, steps, path: len(steps) % 2 == 1, "odd_length")
    t = replay_log(cfg, (Local("A", 1), Local("A", 2), Local("A", 3)))
    assert odd.violates(t)
    with pytest.raises(NotExtensionClosed):
        lamport_causes(cfg, t, odd)


# Dummification ------------------------------------------------------------------------------

def test_dummify_examples(main_actual, main_report, main_log):
    cfg, _ = main_actual
    a_d = main_report.actual_causes[0].sublog
    d = dummify(cfg, a_d)
    assert 8 not in d.program("U1").lines
    assert 3 not in d.program("S1").lines
    assert repr(T.dummy("U1", 8)) in repr(d.program("U1"))
    assert d.program("U3").steps == ()
    assert dummify(cfg, main_log) == cfg


def test_dummify_send_binder_gets_zero():
    cfg, _ = _doc(
        "thread A { program { 1: r = send(B, 5); 2: s = id(r); } } thread B { program { 1: x = recv(A); } }"
        " property { type = builtin:never; }"
    )
    d = dummify(cfg, (Local("A", 2),))
    step = d.program("A").step_at(2)
    assert step.action.args[0].term == T.ZERO


def test_dummify_unknown_line(main_actual):
    from causal_audit.kernel import UnknownLabel

    cfg, _ = main_actual
    with pytest.raises(UnknownLabel):
        dummify(cfg, (Local("S1", 42),))


# Phase 2 ------------------------------------------------------------------------------------

def test_fig_actual_cause_reproduced(main_report):
    a_d = main_report.actual_causes[0].sublog
    assert projections(a_d) == FIG_A_D


def test_phase2_examples(main_actual, main_report):
    cfg, p = main_actual
    a_d = main_report.actual_causes[0].sublog
    assert phase2_sufficient(cfg, a_d, p)
    assert not phase2_sufficient(cfg, [x for x in a_d if not x.mentions("S1")], p)
    assert not phase2_sufficient(cfg, [x for x in a_d if x != sync(A, 8, "S1", 5)], p)


def test_actual_causes_case_study(main_report):
    assert len(main_report.actual_causes) == 3
    assert set(main_report.program_causes) == PROGRAM_CAUSES
    assert all(len(ac.sublog) == 16 for ac in main_report.actual_causes)


def test_actual_cause_remarks(remarks):
    cfg, p = remarks
    r = analyze(cfg, p)
    (ac,) = r.actual_causes
    assert set(ac.sublog) == {Local("P", 1), sync("P", 4, "Net", 1)}


def test_greedy_is_subset_of_exact(main_report, main_greedy):
    exact = {ac.sublog for ac in main_report.actual_causes}
    assert {ac.sublog for ac in main_greedy.actual_causes} <= exact
    assert main_greedy.diagnostics["exhaustive"] is False


def test_exact_causes_are_one_minimal(main_actual, main_report):
    cfg, p = main_actual
    for ac in main_report.actual_causes:
        assert is_one_minimal(cfg, ac.sublog, p)


def test_program_cause_examples(main_report):
    assert program_cause(()) == frozenset()
    assert program_cause(main_report.actual_causes[0]) == frozenset({A, "U1", "S1", "N1", "N2"})
    assert program_cause(main_report.actual_causes[2]) == frozenset({A, "U1", "S1", "N2", "N3"})


def test_literal_figures_give_same_program_causes(fixtures_dir, main_log):
    doc = parse_document((fixtures_dir / "notaries_literal_actual.proto").read_text())
    p = property_from_block(doc.prop)
    r = analyze(doc.config, p, main_log, mode="exact")
    assert set(r.program_causes) == PROGRAM_CAUSES
    assert all(len(ac.sublog) == 14 for ac in r.actual_causes)


def test_appendix_program_causes(appendix_report):
    assert set(appendix_report.program_causes) == PROGRAM_CAUSES
    for ac in appendix_report.actual_causes:
        proj = projections(ac.sublog)
        assert not set(proj) & {"N4", "S2", "U4", "U3", "U2"}
    assert appendix_report.diagnostics["exhaustive"] is False


def _check_report(r):
    t = r.witness
    for ac in r.actual_causes:
        l = r.lamport_causes[ac.parent_index].log
        assert is_projected_sublog(ac.sublog, l)
        assert is_projected_prefix(l, t.labels)
        assert program_cause(ac) == {x for lab in ac.sublog for x in lab.threads}
    for a, b in itertools.combinations(r.actual_causes, 2):
        if a.parent_index == b.parent_index:
            assert not is_projected_sublog(a.sublog, b.sublog)
            assert not is_projected_sublog(b.sublog, a.sublog)


def test_case_study_report_structure(main_report, appendix_report):
    _check_report(main_report)
    _check_report(appendix_report)


def test_renaming_invariance(main_actual, main_log, main_report):
    cfg, p = main_actual
    pi = {t: {b: b for b in cfg.program(t).lines} for t in cfg.threads}
    pi["N1"] = {1: 2, 2: 1}

    def rename(lab):
        from causal_audit.labels import Endpoint, Sync

        if isinstance(lab, Local):
            return Local(lab.thread, pi[lab.thread][lab.line])
        s, r = lab.sender, lab.receiver
        return Sync(Endpoint(s.thread, pi[s.thread][s.line]), Endpoint(r.thread, pi[r.thread][r.line]))

    r2 = analyze(renumber(cfg, pi), p, [rename(x) for x in main_log], mode="exact")
    got = {canonical_form(ac.sublog) for ac in r2.actual_causes}
    want = {canonical_form([rename(x) for x in ac.sublog]) for ac in main_report.actual_causes}
    assert got == want
    assert [canonical_form(l.log) for l in r2.lamport_causes] == [
        canonical_form([rename(x) for x in l.log]) for l in main_report.lamport_causes
    ]


# Random configurations ----------------------------------------------------------------------

def _violating(rng, **kw):
    cfg, p = _doc(gen_protocol(rng, **kw))
    return cfg, p, find_violation(cfg, p, budget=200_000)


@settings(max_examples=80, deadline=None)
@given(st.randoms(use_true_random=False))
def test_every_violation_has_causes(rng):
    cfg, p, t = _violating(rng)
    if t is None:
        return
    r = analyze(cfg, p, t.labels)
    assert r.violation and r.lamport_causes
    parents = {ac.parent_index for ac in r.actual_causes}
    assert parents == set(range(len(r.lamport_causes)))
    _check_report(r)


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_greedy_subset_of_exact_random(rng):
    cfg, p, t = _violating(rng)
    if t is None:
        return
    for lc in lamport_causes(cfg, t, p):
        if len(lc.log) > 12:
            continue
        exact = {ac.sublog for ac in actual_causes(cfg, lc, p, "exact")}
        greedy = {ac.sublog for ac in actual_causes(cfg, lc, p, "greedy")}
        assert greedy and greedy <= exact
        for a_d in exact:
            assert is_one_minimal(cfg, a_d, p)


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_phase2_routes_agree(rng):
    cfg, p, t = _violating(rng, max_threads=3, max_steps=4)
    if t is None:
        return
    l = t.labels
    for _ in range(4):
        sub = [x for x in l if rng.random() < 0.6]
        assert phase2_sufficient(cfg, sub, p) == phase2_sufficient_explore(cfg, sub, p)


@settings(max_examples=25, deadline=None)
@given(st.randoms(use_true_random=False))
def test_parallel_search_matches_serial(rng):
    cfg, p, t = _violating(rng)
    if t is None:
        return
    order = canonical_form(t.labels)
    assert exact_search(cfg, order, p, jobs=1) == exact_search(cfg, order, p, jobs=3)


@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False))
def test_random_renaming_invariance(rng):
    cfg, p, t = _violating(rng, max_threads=3, max_steps=4)
    if t is None:
        return
    pi = {}
    for tid in cfg.threads:
        lines = list(cfg.program(tid).lines)
        img = [b + 100 for b in lines]
        rng.shuffle(img)
        pi[tid] = dict(zip(lines, img))
    from causal_audit.labels import Endpoint, Sync

    def rename(lab):
        if isinstance(lab, Local):
            return Local(lab.thread, pi[lab.thread][lab.line])
        return Sync(*(Endpoint(e.thread, pi[e.thread][e.line]) for e in (lab.sender, lab.receiver)))

    r1 = analyze(cfg, p, t.labels)
    r2 = analyze(renumber(cfg, pi), p, [rename(x) for x in t.labels])
    assert {canonical_form(ac.sublog) for ac in r2.actual_causes} == {
        canonical_form([rename(x) for x in ac.sublog]) for ac in r1.actual_causes
    }
