import pytest
from hypothesis import given
from hypothesis import strategies as st

from causal_audit import terms as T
from causal_audit.algebra import (
    DEFAULT_REGISTRY,
    IllTypedArgument,
    PrimitiveRegistry,
    UnknownPrimitive,
    eval_primitive,
    is_failure,
    terms_equal,
)
from causal_audit.kernel import EMPTY_PATH, Undetermined, branches, compare, equal_under

REG = DEFAULT_REGISTRY
THREADS = ["A", "B", "S1", "U1"]

atoms = st.one_of(
    st.sampled_from(["acct", "alice", "pwd"]).map(T.const),
    st.sampled_from(THREADS).map(T.thread),
    st.integers(-3, 3).map(T.integer),
    st.builds(T.nonce, st.sampled_from(THREADS), st.integers(1, 4), st.integers(0, 2)),
    st.sampled_from(THREADS).map(T.pubkey),
    st.sampled_from(THREADS).map(T.pvtkey),
)
ground = st.recursive(
    atoms,
    lambda kids: st.one_of(
        st.lists(kids, max_size=3).map(lambda xs: T.tup(*xs)),
        st.builds(T.enc, kids, kids),
        st.builds(T.sig, kids, kids),
        st.builds(T.hashed, kids),
    ),
    max_leaves=8,
)


def ev(name, arg, store=T.EMPTY_STORE, thread="A", line=1):
    return eval_primitive(REG, name, store, arg, thread, line)


def test_dec_inverts_enc():
    m = T.tup(T.nonce("U1", 1), T.const("uid"), T.const("pwd"), T.thread("U1"))
    _, c = ev("enc", (T.pubkey("S1"), m))
    _, out = ev("dec", (T.pvtkey("S1"), c))
    assert out == m


def test_keyowner():
    assert ev("keyowner", T.pubkey("Adversary"))[1] == T.thread("Adversary")


def test_new_twice_unequal():
    _, a = ev("new", (), line=1)
    _, b = ev("new", (), line=2)
    assert terms_equal(a, b) is False


def test_new_many_returns_distinct_nonces():
    _, t = ev("new", T.integer(3))
    assert t[0] == T.TUPLE and len(set(t[1])) == 3


def test_sig_carries_payload_in_clear():
    assert ev("sig", (T.pvtkey("N1"), T.const("m")))[1] == T.sig(T.pvtkey("N1"), T.const("m"))


def test_insert_appends_to_matrix():
    store = T.Store({"P": T.tup()})
    entry = T.tup(T.const("acct"), T.thread("U1"))
    s2, r = ev("insert", ("P", entry), store=store)
    assert s2["P"] == T.tup(entry)
    assert store["P"] == T.tup()  # snapshot untouched
    assert r == T.ZERO


def test_unknown_primitive():
    with pytest.raises(UnknownPrimitive):
        ev("frobnicate", T.ZERO)


def test_wrong_arity():
    with pytest.raises(IllTypedArgument):
        ev("keyowner", (T.ZERO, T.ZERO))


def test_dec_wrong_key_is_failure():
    _, c = ev("enc", (T.pubkey("S1"), T.const("m")))
    _, out = ev("dec", (T.pvtkey("S2"), c))
    assert is_failure(out)


def test_custom_primitive_registration():
    reg = PrimitiveRegistry()
    reg.register("twice", lambda args, store, ctx: (store, T.tup(args[0], args[0])), min_args=1, max_args=1)
    assert eval_primitive(reg, "twice", T.EMPTY_STORE, T.ZERO)[1] == T.tup(T.ZERO, T.ZERO)
    assert "twice" in reg and "twice" not in REG


def test_equality_examples():
    assert terms_equal(T.tup(T.integer(1), T.integer(2)), T.tup(T.integer(1), T.integer(2)))
    mem = T.hashed(T.tup(T.const("alice"), T.const("secret")))
    _, t = ev("hash", T.tup(T.const("alice"), T.const("secret")))
    assert terms_equal(mem, t)
    assert terms_equal(T.dummy("U1", 8), T.thread("S1")) is None


def test_dummy_comparison_forks_both_ways():
    d = T.dummy("U1", 8)

    def f(path):
        return equal_under(d, T.thread("S1"), path)

    outcomes = sorted(v for _, v in branches(f, EMPTY_PATH))
    assert outcomes == [False, True]


def test_path_condition_keeps_resolutions_consistent():
    d = T.dummy("U1", 8)

    def f(path):
        return (equal_under(d, T.thread("S1"), path), equal_under(d, T.thread("S2"), path))

    results = {v for _, v in branches(f, EMPTY_PATH)}
    assert (True, True) not in results
    assert results == {(True, False), (False, True), (False, False)}


def test_same_dummy_equals_itself():
    assert terms_equal(T.dummy("A", 1), T.dummy("A", 1)) is True


def test_undetermined_raised_without_path_fact():
    with pytest.raises(Undetermined):
        equal_under(T.dummy("A", 1), T.ZERO, EMPTY_PATH)


@given(ground)
def test_roundtrip_enc_dec(m):
    for owner in THREADS:
        _, c = ev("enc", (T.pubkey(owner), m))
        assert ev("dec", (T.pvtkey(owner), c))[1] == m


@given(ground, st.sampled_from(THREADS), st.sampled_from(THREADS))
def test_non_malleable(m, i, j):
    if i == j:
        return
    _, c = ev("enc", (T.pubkey(i), m))
    assert is_failure(ev("dec", (T.pvtkey(j), c))[1])


@given(ground, ground, ground)
def test_equality_is_equivalence_on_ground_terms(a, b, c):
    assert terms_equal(a, a)
    assert terms_equal(a, b) == terms_equal(b, a)
    if terms_equal(a, b) and terms_equal(b, c):
        assert terms_equal(a, c)
    assert terms_equal(a, b) == (a == b)
    assert compare(a, b) in (True, False)


@given(st.lists(ground, max_size=4))
def test_store_snapshots_are_immutable(entries):
    s0 = T.Store({"P": T.tup()})
    history = [s0]
    for e in entries:
        history.append(ev("insert", ("P", e), store=history[-1])[0])
    for k, s in enumerate(history):
        assert s["P"] == T.tup(*entries[:k])
