import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_audit import terms as T
from causal_audit.dsl import PropertyBlock, parse_document
from causal_audit.kernel import MissingLocation
from causal_audit.labels import Local
from causal_audit.lang import ValidationError
from causal_audit.properties import (
    AccessControlProperty,
    Confirmed,
    Counterexample,
    LabelOrderProperty,
    NeverSend,
    NeverViolated,
    check_extension_closed,
    check_extension_closed_trace,
    check_reordering_closed,
    property_from_block,
)
from causal_audit.semantics import explore, replay_log
from causal_audit.traces import Trace

from gen import gen_protocol

PING_PONG_WRITER = """
const acct, ping, pong;
thread U2 { program { 1: send(U3, ping); 2: _ = recv(U3); } }
thread U3 { program { 1: m = recv(U2); 2: send(U2, pong); } }
thread W {
  store { P = (); }
  program { 1: x = id(U2); 2: insert(P, (acct, x)); }
}
property { type = access_control; matrix = P; account = acct; owner = W; }
"""


def _doc(src):
    doc = parse_document(src)
    return doc.config, property_from_block(doc.prop)


def test_case_study_violates(main_actual, main_log):
    cfg, p = main_actual
    assert p.violates(replay_log(cfg, main_log))


def test_norm_traces_do_not_violate(main_norm):
    cfg, p = main_norm
    for t in itertools.islice(explore(cfg, maximal=True), 200):
        assert not p.violates(t)


def test_empty_trace_does_not_violate(main_actual):
    cfg, p = main_actual
    assert not p.violates(Trace(cfg, ()))


def test_missing_matrix():
    cfg = parse_document("thread A { program { } }").config
    p = AccessControlProperty("P", T.const("acct"), "A")
    with pytest.raises(MissingLocation):
        p.violates(Trace(cfg, ()))


def test_reordering_closed_access_control():
    cfg, p = _doc(PING_PONG_WRITER)
    verdict = check_reordering_closed(p, cfg)
    assert isinstance(verdict, Confirmed) and verdict.bound > 0
    assert any(p.violates(t) for t in explore(cfg, maximal=True))


def test_order_sensitive_property_is_caught():
    cfg = parse_document("thread A { program { 1: x = id(1); } } thread B { program { 1: y = id(2); } }").config
    verdict = check_reordering_closed(LabelOrderProperty(Local("A", 1), Local("B", 1)), cfg)
    assert isinstance(verdict, Counterexample)
    assert verdict.first.labels != verdict.second.labels


def test_constant_false_is_reordering_closed():
    cfg, _ = _doc(PING_PONG_WRITER)
    assert check_reordering_closed(NeverViolated(), cfg)


def test_verdict_is_pure(main_actual, main_log):
    cfg, p = main_actual
    t = replay_log(cfg, main_log)
    assert {p.violates(t) for _ in range(1000)} == {True}


def test_extension_closure_of_case_study(main_actual, main_log):
    cfg, p = main_actual
    assert check_extension_closed_trace(p, replay_log(cfg, main_log))


def test_never_send():
    cfg = parse_document(
        "thread P { program { 1: x = id(1); 2: send(Net, x); } } thread Net { program { 1: m = recv(P); } }"
    ).config
    p = NeverSend(T.integer(1))
    (t,) = list(explore(cfg, maximal=True))
    assert p.violates(t) and not p.violates(t.prefix(1))
    assert not NeverSend(T.integer(2)).violates(t)


def test_property_block_errors():
    with pytest.raises(ValidationError):
        property_from_block(PropertyBlock((("type", "access_control"),)))
    with pytest.raises(ValidationError):
        property_from_block(PropertyBlock((("type", "builtin:nope"),)))


def test_property_block_forms():
    doc = parse_document("property { type = builtin:never_send; value = 1; }")
    assert property_from_block(doc.prop) == NeverSend(T.integer(1))


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False), st.sampled_from(["never_send", "access_control"]))
def test_builtins_are_extension_and_reordering_closed(rng, kind):
    cfg, p = _doc(gen_protocol(rng, max_threads=3, max_steps=4, prop=kind))
    assert check_extension_closed(p, cfg, budget=200_000)
    assert check_reordering_closed(p, cfg, budget=200_000)
