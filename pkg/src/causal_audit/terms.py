"""Symbolic message terms and thread-local stores.

Terms are plain tagged tuples so they hash, compare and sort cheaply:

    ("c", name)              constant
    ("t", tid)               thread name
    ("i", value)             integer
    ("n", tid, line, k)      nonce created by `new` at (tid, line)
    ("tup", (t1, ..., tn))   tuple
    ("enc", key, payload)    ("sig", key, payload)    ("hash", payload)
    ("pk", tid)              ("sk", tid)
    ("fail", reason)         failed computation (e.g. decryption under the wrong key)
    ("dummy", tid, line)     the unknown value f(tid, line) of a dummified step
    ("part", base, path)     component of an opaque term reached through a pattern
    ("app", fn, args)        primitive applied to opaque arguments
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping

CONST = "c"
THREAD = "t"
INT = "i"
NONCE = "n"
TUPLE = "tup"
ENC = "enc"
SIG = "sig"
HASH = "hash"
PUB = "pk"
PVT = "sk"
FAIL = "fail"
DUMMY = "dummy"
PART = "part"
APP = "app"

OPAQUE = frozenset((DUMMY, PART, APP))

Term = tuple


def const(name: str) -> Term:
    return (CONST, name)


def thread(tid: str) -> Term:
    return (THREAD, tid)


def integer(value: int) -> Term:
    return (INT, int(value))


def nonce(tid: str, line: int, k: int = 0) -> Term:
    return (NONCE, tid, line, k)


def tup(*items: Term) -> Term:
    return (TUPLE, tuple(items))


def enc(key: Term, payload: Term) -> Term:
    return (ENC, key, payload)


def sig(key: Term, payload: Term) -> Term:
    return (SIG, key, payload)


def hashed(payload: Term) -> Term:
    return (HASH, payload)


def pubkey(tid: str) -> Term:
    return (PUB, tid)


def pvtkey(tid: str) -> Term:
    return (PVT, tid)


def failure(reason: str = "failure") -> Term:
    return (FAIL, reason)


def dummy(tid: str, line: int) -> Term:
    return (DUMMY, tid, line)


def part(base: Term, path: tuple) -> Term:
    if not path:
        return base
    if base[0] == PART:
        return (PART, base[1], base[2] + tuple(path))
    return (PART, base, tuple(path))


def app(fn: str, args: tuple) -> Term:
    return (APP, fn, tuple(args))


TRUE = const("true")
FALSE = const("false")
ZERO = integer(0)
UNIT = tup()


def is_opaque(t: Term) -> bool:
    return t[0] in OPAQUE


def contains_opaque(t: Term) -> bool:
    tag = t[0]
    if tag in OPAQUE:
        return True
    if tag == TUPLE:
        return any(contains_opaque(x) for x in t[1])
    if tag in (ENC, SIG):
        return contains_opaque(t[1]) or contains_opaque(t[2])
    if tag == HASH:
        return contains_opaque(t[1])
    return False


def subterms(t: Term) -> Iterator[Term]:
    yield t
    tag = t[0]
    if tag == TUPLE:
        for x in t[1]:
            yield from subterms(x)
    elif tag in (ENC, SIG):
        yield from subterms(t[1])
        yield from subterms(t[2])
    elif tag == HASH:
        yield from subterms(t[1])


def show(t: Term) -> str:
    """Render a term in the protocol-file syntax (opaque terms get a readable form)."""
    tag = t[0]
    if tag in (CONST, THREAD):
        return t[1]
    if tag == INT:
        return str(t[1])
    if tag == NONCE:
        return f"nonce({t[1]}, {t[2]}, {t[3]})"
    if tag == TUPLE:
        inner = ", ".join(show(x) for x in t[1])
        return f"({inner},)" if len(t[1]) == 1 else f"({inner})"
    if tag == ENC:
        return f"enc({show(t[1])}, {show(t[2])})"
    if tag == SIG:
        return f"sig({show(t[1])}, {show(t[2])})"
    if tag == HASH:
        return f"hash({show(t[1])})"
    if tag == PUB:
        return f"pubkey({t[1]})"
    if tag == PVT:
        return f"pvtkey({t[1]})"
    if tag == FAIL:
        return f"fail({t[1]})"
    if tag == DUMMY:
        return f"dummy({t[1]}, {t[2]})"
    if tag == PART:
        idx = ", ".join(str(k) for k in t[2])
        return f"part({show(t[1])}, {idx})"
    if tag == APP:
        return f"{t[1]}?({', '.join(show(a) for a in t[2])})"
    raise ValueError(f"not a term: {t!r}")


class Store(Mapping):
    """Immutable location -> term mapping; updates return a new store."""

    __slots__ = ("_d", "_h")

    def __init__(self, bindings: Mapping | None = None):
        self._d = dict(bindings or {})
        self._h = None

    def __getitem__(self, loc: str) -> Term:
        return self._d[loc]

    def __iter__(self):
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self) -> int:
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if isinstance(other, Store):
            return self._d == other._d
        return NotImplemented

    def set(self, loc: str, value: Term) -> Store:
        d = dict(self._d)
        d[loc] = value
        return Store(d)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={show(v)}" for k, v in sorted(self._d.items()))
        return f"Store({inner})"

    def __reduce__(self):
        return (Store, (self._d,))


EMPTY_STORE = Store()
