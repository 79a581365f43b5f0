# cython: language_level=3
"""Interpreter core: symbolic comparison, evaluation, matching, stepping and
the guided replay used by the cause search.

This file is the pure-Python implementation. The build compiles the same
source with Cython into `_kernel_c`; `kernel.py` picks whichever is present.
"""

from collections import namedtuple

from . import terms as T
from .labels import Endpoint, Local, Sync
from .lang import (
    Assert, Call, GAnd, GAtLeast, GEq, GNot, GOr, GTerm, Lit, Loc, PAny, PCon, PEq,
    Prim, PVar, Recv, Send, Step, Var, bind_pattern_to,
)
from .traces import TraceStep

OPAQUE = T.OPAQUE
TUPLE = T.TUPLE
ENC = T.ENC
SIG = T.SIG
HASH = T.HASH
ZERO = T.ZERO
TRUE = T.TRUE

DEFAULT_BUDGET = 2_000_000


class KernelError(Exception):
    pass


class Undetermined(Exception):
    """Raised when a result depends on an atom the path condition does not fix."""

    def __init__(self, atom):
        Exception.__init__(self, atom)
        self.atom = atom


class UnknownPrimitive(KernelError):
    pass


class IllTypedArgument(KernelError):
    pass


class MissingLocation(KernelError):
    pass


class UnboundVariable(KernelError):
    pass


class UnknownLabel(KernelError):
    pass


class UnrealizableLog(KernelError):
    def __init__(self, label, reason=""):
        KernelError.__init__(self, f"cannot realise {label}: {reason}" if reason else f"cannot realise {label}")
        self.label = label


class ExplosionBudgetExceeded(KernelError):
    def __init__(self, states):
        KernelError.__init__(self, f"state budget exceeded after {states} states")
        self.states = states


# Symbolic equality --------------------------------------------------------------

def eq_atom(a, b):
    return ("eq", a, b) if a <= b else ("eq", b, a)


def compare(a, b):
    """True, False, or a list of equality atoms whose conjunction decides a == b."""
    if a == b:
        return True
    ta = a[0]
    tb = b[0]
    if ta in OPAQUE or tb in OPAQUE:
        return [eq_atom(a, b)]
    if ta != tb:
        return False
    if ta == TUPLE:
        xs = a[1]
        ys = b[1]
        if len(xs) != len(ys):
            return False
        pairs = zip(xs, ys)
    elif ta == ENC or ta == SIG:
        pairs = ((a[1], b[1]), (a[2], b[2]))
    elif ta == HASH:
        pairs = ((a[1], b[1]),)
    else:
        return False
    atoms = []
    for x, y in pairs:
        r = compare(x, y)
        if r is False:
            return False
        if r is not True:
            atoms.extend(r)
    return atoms if atoms else True


def decide3(r, path, pending):
    """Resolve a compare() result against a path condition: True/False/None."""
    if r is True or r is False:
        return r
    unknown = None
    for atom in r:
        v = path.get(atom)
        if v is False:
            return False
        if v is None and unknown is None:
            unknown = atom
    if unknown is not None:
        pending.append(unknown)
        return None
    return True


def equal_under(a, b, path):
    pending = []
    r = decide3(compare(a, b), path, pending)
    if r is None:
        raise Undetermined(pending[0])
    return r


def terms_equal(a, b):
    """Three-valued structural equality: True, False, or None when unknown."""
    r = compare(a, b)
    if r is True or r is False:
        return r
    return None


def _consistent(facts):
    parent = {}

    def find(x):
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while x != root:
            nxt = parent.get(x, x)
            parent[x] = root
            x = nxt
        return root

    for atom, v in facts.items():
        if atom[0] == "eq" and v:
            ra = find(atom[1])
            rb = find(atom[2])
            parent.setdefault(atom[1], atom[1])
            parent.setdefault(atom[2], atom[2])
            if ra != rb:
                parent[ra] = rb
    classes = {}
    for x in list(parent):
        classes.setdefault(find(x), []).append(x)
    for members in classes.values():
        rigid = [m for m in members if m[0] not in OPAQUE]
        for k in range(1, len(rigid)):
            if compare(rigid[0], rigid[k]) is False:
                return False
    for atom, v in facts.items():
        if atom[0] == "eq" and not v and find(atom[1]) == find(atom[2]):
            return False
    return True


class PathCondition:
    """Truth values chosen so far for equality/shape atoms (one dummy resolution)."""

    __slots__ = ("facts", "_key")

    def __init__(self, facts=None):
        self.facts = dict(facts) if facts else {}
        self._key = None

    def get(self, atom):
        return self.facts.get(atom)

    def assume(self, atom, value):
        facts = dict(self.facts)
        facts[atom] = value
        if atom[0] == "eq" and not _consistent(facts):
            return None
        return PathCondition(facts)

    def key(self):
        if self._key is None:
            self._key = frozenset(self.facts.items())
        return self._key

    def items(self):
        return sorted(self.facts.items())

    def __len__(self):
        return len(self.facts)

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, PathCondition) and self.key() == other.key()

    def __repr__(self):
        return f"PathCondition({len(self.facts)} atoms)"

    def __reduce__(self):
        return (PathCondition, (self.facts,))


EMPTY_PATH = PathCondition()


def branches(fn, path):
    """Run fn(path), splitting on every undetermined atom. Returns [(path, result)]."""
    out = []
    todo = [path]
    while todo:
        p = todo.pop()
        try:
            r = fn(p)
        except Undetermined as u:
            for v in (False, True):
                q = p.assume(u.atom, v)
                if q is not None:
                    todo.append(q)
            continue
        out.append((p, r))
    return out


# Primitives -----------------------------------------------------------------------

Ctx = namedtuple("Ctx", "thread line path")
Primitive = namedtuple("Primitive", "fn pure min_args max_args loc_args")


class PrimitiveRegistry:
    """name -> evaluation rule fn(args, store, ctx) -> (store, term)."""

    def __init__(self, entries=None):
        self._p = dict(entries or {})

    def register(self, name, fn, pure=True, min_args=0, max_args=None, loc_args=()):
        self._p[name] = Primitive(fn, pure, min_args, max_args, tuple(loc_args))

    def get(self, name):
        try:
            return self._p[name]
        except KeyError:
            raise UnknownPrimitive(name) from None

    def __contains__(self, name):
        return name in self._p

    def names(self):
        return sorted(self._p)

    def copy(self):
        return PrimitiveRegistry(self._p)


def _payload(args):
    return args[0] if len(args) == 1 else (TUPLE, tuple(args))


def _p_id(args, store, ctx):
    return store, args[0]


def _p_tuple(args, store, ctx):
    return store, (TUPLE, tuple(args))


def _p_enc(args, store, ctx):
    return store, (ENC, args[0], _payload(args[1:]))


def _p_sig(args, store, ctx):
    return store, (SIG, args[0], _payload(args[1:]))


def _p_hash(args, store, ctx):
    return store, (HASH, _payload(args))


def _key_of(kind):
    def rule(args, store, ctx):
        a = args[0]
        if a[0] == T.THREAD:
            return store, (kind, a[1])
        if a[0] in OPAQUE:
            return store, T.app(kind, (a,))
        return store, T.failure("IllTypedArgument")
    return rule


def _p_dec(args, store, ctx):
    key, c = args
    if c[0] in OPAQUE:
        return store, T.app("dec", (key, c))
    if c[0] != ENC:
        return store, T.failure("DecryptionKeyMismatch")
    lock = c[1]
    if key[0] == T.PVT:
        ok = equal_under(lock, (T.PUB, key[1]), ctx.path)
    elif key[0] in OPAQUE and lock[0] == T.PUB:
        ok = equal_under(key, (T.PVT, lock[1]), ctx.path)
    elif key[0] in OPAQUE:
        return store, T.app("dec", (key, c))
    else:
        ok = False
    return store, (c[2] if ok else T.failure("DecryptionKeyMismatch"))


def _p_keyowner(args, store, ctx):
    k = args[0]
    if k[0] == T.PUB:
        return store, (T.THREAD, k[1])
    if k[0] in OPAQUE:
        return store, T.app("keyowner", (k,))
    return store, T.failure("UnknownKey")


def _p_new(args, store, ctx):
    if not args:
        return store, T.nonce(ctx.thread, ctx.line, 0)
    count = args[0]
    if count[0] != T.INT or count[1] < 1:
        raise IllTypedArgument("new(k) needs a positive integer")
    return store, (TUPLE, tuple(T.nonce(ctx.thread, ctx.line, k) for k in range(count[1])))


def _p_insert(args, store, ctx):
    loc = args[0][1]
    if loc not in store:
        raise MissingLocation(loc)
    old = store[loc]
    if old[0] != TUPLE:
        raise IllTypedArgument(f"insert target {loc} is not a tuple")
    return store.set(loc, (TUPLE, old[1] + (args[1],))), ZERO


def default_registry():
    reg = PrimitiveRegistry()
    reg.register("id", _p_id, min_args=1, max_args=1)
    reg.register("tuple", _p_tuple)
    reg.register("enc", _p_enc, min_args=2)
    reg.register("sig", _p_sig, min_args=2)
    reg.register("hash", _p_hash, min_args=1)
    reg.register("pubkey", _key_of(T.PUB), min_args=1, max_args=1)
    reg.register("pvtkey", _key_of(T.PVT), min_args=1, max_args=1)
    reg.register("dec", _p_dec, min_args=2, max_args=2)
    reg.register("keyowner", _p_keyowner, min_args=1, max_args=1)
    reg.register("new", _p_new, pure=False, min_args=0, max_args=1)
    reg.register("insert", _p_insert, pure=False, min_args=2, max_args=2, loc_args=(0,))
    return reg


DEFAULT_REGISTRY = default_registry()


def eval_primitive(reg, name, store, arg, thread="", line=0, path=EMPTY_PATH):
    """Apply primitive `name`; `arg` is one term or a Python tuple of terms."""
    prim = reg.get(name)
    if isinstance(arg, tuple) and (len(arg) == 0 or isinstance(arg[0], tuple)):
        args = arg
    else:
        args = (arg,)
    if len(args) < prim.min_args or (prim.max_args is not None and len(args) > prim.max_args):
        raise IllTypedArgument(f"{name} takes {prim.min_args}..{prim.max_args} arguments")
    return prim.fn(args, store, Ctx(thread, line, path))


# Evaluation, matching, guards ------------------------------------------------------

def lookup(env, name):
    for k in range(len(env) - 1, -1, -1):
        if env[k][0] == name:
            return env[k][1]
    raise UnboundVariable(name)


def eval_expr(e, env, store, ctx, reg):
    tp = type(e)
    if tp is Lit:
        return e.term
    if tp is Var:
        return lookup(env, e.name)
    if tp is Loc:
        try:
            return store[e.name]
        except KeyError:
            raise MissingLocation(e.name) from None
    if tp is Call:
        args = tuple([eval_expr(a, env, store, ctx, reg) for a in e.args])
        return reg.get(e.fn).fn(args, store, ctx)[1]
    raise TypeError(f"not an expression: {e!r}")


_SKELETONS = {}


def skeleton(p):
    sk = _SKELETONS.get(p)
    if sk is None:
        if type(p) is PCon:
            sk = (p.ctor, tuple([skeleton(q) for q in p.items]))
        else:
            sk = ("_",)
        _SKELETONS[p] = sk
    return sk


def match(p, v, env, store, ctx, reg):
    """Extend env by matching v against p; None on mismatch."""
    tp = type(p)
    if tp is PVar:
        return env + ((p.name, v),)
    if tp is PAny:
        return env
    if tp is PEq:
        other = eval_expr(p.expr, env, store, ctx, reg)
        return env if equal_under(v, other, ctx.path) else None
    items = p.items
    n = len(items)
    tag = v[0]
    if tag in OPAQUE:
        atom = ("shape", v, skeleton(p))
        known = ctx.path.get(atom)
        if known is None:
            raise Undetermined(atom)
        if not known:
            return None
        kids = [T.part(v, (k,)) for k in range(n)]
    elif tag != p.ctor:
        return None
    elif tag == TUPLE:
        if len(v[1]) != n:
            return None
        kids = v[1]
    elif tag == ENC or tag == SIG:
        kids = (v[1], v[2])
    else:
        kids = (v[1],)
    for k in range(n):
        env = match(items[k], kids[k], env, store, ctx, reg)
        if env is None:
            return None
    return env


def guard3(g, env, store, ctx, reg, pending):
    tp = type(g)
    if tp is GEq:
        a = eval_expr(g.left, env, store, ctx, reg)
        b = eval_expr(g.right, env, store, ctx, reg)
        return decide3(compare(a, b), ctx.path, pending)
    if tp is GTerm:
        return decide3(compare(eval_expr(g.expr, env, store, ctx, reg), TRUE), ctx.path, pending)
    if tp is GNot:
        r = guard3(g.inner, env, store, ctx, reg, pending)
        return None if r is None else not r
    if tp is GAtLeast:
        yes = 0
        unknown = 0
        for h in g.items:
            r = guard3(h, env, store, ctx, reg, pending)
            if r is None:
                unknown += 1
            elif r:
                yes += 1
        if yes >= g.k:
            return True
        if yes + unknown < g.k:
            return False
        return None
    if tp is GAnd or tp is GOr:
        stop = tp is GOr
        seen_unknown = False
        for h in g.items:
            r = guard3(h, env, store, ctx, reg, pending)
            if r is None:
                seen_unknown = True
            elif r is stop:
                return stop
        return None if seen_unknown else (not stop)
    raise TypeError(f"not a guard: {g!r}")


def eval_guard(g, env, store, ctx, reg):
    pending = []
    r = guard3(g, env, store, ctx, reg, pending)
    if r is None:
        raise Undetermined(pending[0])
    return r


# Machine ------------------------------------------------------------------------------

ThreadState = namedtuple("ThreadState", "pc env store stuck")
State = namedtuple("State", "threads path")


def _put(seq, i, v):
    return seq[:i] + (v,) + seq[i + 1:]


class Machine:
    """Step functions over a fixed initial configuration."""

    def __init__(self, cfg, registry=None):
        self.cfg = cfg
        self.tids = tuple(cfg.threads)
        self.n = len(self.tids)
        self.steps = [tuple(p.steps) for p in cfg.programs]
        self.reg = registry if registry is not None else DEFAULT_REGISTRY
        self.pos = []
        for steps in self.steps:
            self.pos.append({s.line: k for k, s in enumerate(steps) if type(s) is Step})
        self._locals = {}
        self._syncs = {}

    def local_label(self, i, line):
        key = (i, line)
        lab = self._locals.get(key)
        if lab is None:
            lab = self._locals[key] = Local(self.tids[i], line)
        return lab

    def sync_label(self, s, bs, r, br):
        key = (s, bs, r, br)
        lab = self._syncs.get(key)
        if lab is None:
            lab = self._syncs[key] = Sync(Endpoint(self.tids[s], bs), Endpoint(self.tids[r], br))
        return lab

    def initial(self):
        threads = tuple(ThreadState(0, (), store, False) for store in self.cfg.stores)
        return self.settle_all(State(threads, EMPTY_PATH), range(self.n))

    def settle(self, st, i):
        """Run the silent asserts at the head of thread i (forking on unknowns)."""
        steps = self.steps[i]
        th = st.threads[i]
        if th.stuck or th.pc >= len(steps) or type(steps[th.pc]) is not Assert:
            return [st]
        out = []
        todo = [st]
        while todo:
            s = todo.pop()
            th = s.threads[i]
            if th.stuck or th.pc >= len(steps) or type(steps[th.pc]) is not Assert:
                out.append(s)
                continue
            a = steps[th.pc]
            try:
                ok = eval_guard(a.guard, th.env, th.store, Ctx(self.tids[i], None, s.path), self.reg)
            except Undetermined as u:
                for v in (False, True):
                    p = s.path.assume(u.atom, v)
                    if p is not None:
                        todo.append(State(s.threads, p))
                continue
            th2 = th._replace(pc=th.pc + 1) if ok else th._replace(stuck=True)
            todo.append(State(_put(s.threads, i, th2), s.path))
        return out

    def settle_all(self, st, idxs):
        states = [st]
        for i in idxs:
            nxt = []
            for s in states:
                nxt.extend(self.settle(s, i))
            states = nxt
        return states

    def head(self, st, i):
        th = st.threads[i]
        steps = self.steps[i]
        if th.stuck or th.pc >= len(steps):
            return None
        s = steps[th.pc]
        return s if type(s) is Step else None

    def fire_local(self, st, i):
        th = st.threads[i]
        step = self.steps[i][th.pc]
        act = step.action
        prim = self.reg.get(act.name)
        fn = prim.fn
        locs = prim.loc_args
        reg = self.reg
        tid = self.tids[i]

        def run(path):
            ctx = Ctx(tid, step.line, path)
            args = tuple([
                ("loc", a.name) if k in locs else eval_expr(a, th.env, th.store, ctx, reg)
                for k, a in enumerate(act.args)
            ])
            store, value = fn(args, th.store, ctx)
            if step.binder is None:
                return ThreadState(th.pc + 1, th.env, store, False)
            env = match(step.binder, value, th.env, store, ctx, reg)
            if env is None:
                return ThreadState(th.pc + 1, th.env, store, True)
            return ThreadState(th.pc + 1, env, store, False)

        return [State(_put(st.threads, i, t2), p) for p, t2 in branches(run, st.path)]

    def fire_sync(self, st, s, r):
        ts = st.threads[s]
        tr = st.threads[r]
        ss = self.steps[s][ts.pc]
        sr = self.steps[r][tr.pc]
        reg = self.reg
        tid_s = self.tids[s]
        tid_r = self.tids[r]

        def run(path):
            msg = eval_expr(ss.action.payload, ts.env, ts.store, Ctx(tid_s, ss.line, path), reg)
            if ss.binder is None:
                ts2 = ThreadState(ts.pc + 1, ts.env, ts.store, False)
            else:
                env = match(ss.binder, ZERO, ts.env, ts.store, Ctx(tid_s, ss.line, path), reg)
                ts2 = ThreadState(ts.pc + 1, ts.env if env is None else env, ts.store, env is None)
            if sr.binder is None:
                tr2 = ThreadState(tr.pc + 1, tr.env, tr.store, False)
            else:
                env = match(sr.binder, msg, tr.env, tr.store, Ctx(tid_r, sr.line, path), reg)
                tr2 = ThreadState(tr.pc + 1, tr.env if env is None else env, tr.store, env is None)
            return ts2, tr2, msg

        out = []
        for p, (ts2, tr2, msg) in branches(run, st.path):
            threads = _put(_put(st.threads, s, ts2), r, tr2)
            out.append((State(threads, p), msg))
        return out

    def skip(self, st, i):
        """Dummify the head step of thread i: drop it, bind its binder to f(i,b) or 0."""
        th = st.threads[i]
        if th.stuck:
            return st
        step = self.steps[i][th.pc]
        env = th.env
        if step.binder is not None:
            value = ZERO if type(step.action) is Send else T.dummy(self.tids[i], step.line)
            env = env + tuple(bind_pattern_to(step.binder, value).items())
        return State(_put(st.threads, i, ThreadState(th.pc + 1, env, th.store, False)), st.path)

    def skip_to(self, states, i, line):
        """Dummify head steps of thread i until line `line` is at the head."""
        out = []
        todo = list(states)
        while todo:
            st = todo.pop()
            for s1 in self.settle(st, i):
                h = self.head(s1, i)
                if h is None or h.line == line:
                    out.append(s1)
                else:
                    todo.append(self.skip(s1, i))
        return out

    def successors(self, st):
        """All labelled successors of a settled state as (label, state, message)."""
        out = []
        heads = [self.head(st, i) for i in range(self.n)]
        for i in range(self.n):
            h = heads[i]
            if h is None:
                continue
            kind = type(h.action)
            if kind is Prim:
                lab = self.local_label(i, h.line)
                for s2 in self.fire_local(st, i):
                    for s3 in self.settle(s2, i):
                        out.append((lab, s3, None))
            elif kind is Send:
                for j in range(self.n):
                    hj = heads[j]
                    if j == i or hj is None or type(hj.action) is not Recv:
                        continue
                    lab = self.sync_label(i, h.line, j, hj.line)
                    for s2, msg in self.fire_sync(st, i, j):
                        for s3 in self.settle_all(s2, (i, j)):
                            out.append((lab, s3, msg))
        return out

    def ready(self, st, i, line, kind):
        th = st.threads[i]
        steps = self.steps[i]
        if th.stuck or th.pc >= len(steps):
            return False
        s = steps[th.pc]
        return type(s) is Step and s.line == line and type(s.action) is kind

    def plan_label(self, label):
        """Resolve a label to thread indices; raises UnknownLabel."""
        idx = {t: k for k, t in enumerate(self.tids)}
        if type(label) is Local:
            i = idx.get(label.thread)
            if i is None or label.line not in self.pos[i]:
                raise UnknownLabel(str(label))
            if type(self.steps[i][self.pos[i][label.line]].action) is not Prim:
                raise UnknownLabel(f"{label} is not a local step")
            return (0, i, label.line, label)
        s = idx.get(label.sender.thread)
        r = idx.get(label.receiver.thread)
        if s is None or r is None or s == r:
            raise UnknownLabel(str(label))
        if label.sender.line not in self.pos[s] or label.receiver.line not in self.pos[r]:
            raise UnknownLabel(str(label))
        if type(self.steps[s][self.pos[s][label.sender.line]].action) is not Send:
            raise UnknownLabel(f"{label}: sender line is not a send")
        if type(self.steps[r][self.pos[r][label.receiver.line]].action) is not Recv:
            raise UnknownLabel(f"{label}: receiver line is not a recv")
        return (1, s, label.sender.line, r, label.receiver.line, label)


def snapshot(st):
    return tuple([th.store for th in st.threads])


# Guided replay ----------------------------------------------------------------------

def replay_labels(machine, labels):
    """Fire `labels` in order from the initial configuration.

    Returns a list of (state, steps) branches, one per dummy resolution; raises
    UnrealizableLog at the first label that cannot fire in some branch.
    """
    plan = [machine.plan_label(lab) for lab in labels]
    node = [(st, ()) for st in machine.initial()]
    for entry in plan:
        nxt = []
        for st, steps in node:
            if entry[0] == 0:
                i, line, lab = entry[1], entry[2], entry[3]
                for s1 in machine.settle(st, i):
                    if not machine.ready(s1, i, line, Prim):
                        raise UnrealizableLog(lab, "thread not at that step")
                    for s2 in machine.fire_local(s1, i):
                        nxt.append((s2, steps + (TraceStep(lab, snapshot(s2), None),)))
            else:
                s, bs, r, br, lab = entry[1], entry[2], entry[3], entry[4], entry[5]
                for s1 in machine.settle_all(st, (s, r)):
                    if not (machine.ready(s1, s, bs, Send) and machine.ready(s1, r, br, Recv)):
                        raise UnrealizableLog(lab, "endpoints not ready")
                    for s2, msg in machine.fire_sync(s1, s, r):
                        nxt.append((s2, steps + (TraceStep(lab, snapshot(s2), msg),)))
        node = nxt
    return node


def _materialize(cons):
    out = []
    while cons is not None:
        out.append(cons[0])
        cons = cons[1]
    out.reverse()
    return tuple(out)


class LatticeReplay:
    """Replays a fixed linear order of labels where each label is either fired
    (included) or dummified (excluded); powers both cause-search modes."""

    def __init__(self, machine, order, status, writers=None, auto_skip=False):
        self.m = machine
        self.auto_skip = auto_skip  # dummify unlisted lines in front of an included one
        self.order = tuple(order)
        self.plan = [machine.plan_label(lab) for lab in self.order]
        self.n = len(self.plan)
        self.status = status  # status(steps_tuple, path) -> bool, may raise Undetermined
        if writers is None:
            self.cutoff = self.n
        else:
            last = -1
            for k, lab in enumerate(self.order):
                if writers(lab):
                    last = k
            self.cutoff = last + 1
        self.nodes = 0

    def start(self):
        return [(st, None) for st in self.m.initial()]

    def advance(self, node, k, keep):
        m = self.m
        entry = self.plan[k]
        out = []
        if entry[0] == 0:
            i, line, lab = entry[1], entry[2], entry[3]
            for st, cons in node:
                pre = m.skip_to((st,), i, line) if keep and self.auto_skip else m.settle(st, i)
                for s1 in pre:
                    if keep:
                        if not m.ready(s1, i, line, Prim):
                            return None
                        for s2 in m.fire_local(s1, i):
                            out.append((s2, (TraceStep(lab, snapshot(s2), None), cons)))
                    else:
                        out.append((m.skip(s1, i), cons))
            return out
        s, bs, r, br, lab = entry[1], entry[2], entry[3], entry[4], entry[5]
        for st, cons in node:
            if keep and self.auto_skip:
                pre = [x for y in m.skip_to((st,), s, bs) for x in m.skip_to((y,), r, br)]
            else:
                pre = m.settle_all(st, (s, r))
            for s1 in pre:
                if keep:
                    if not (m.ready(s1, s, bs, Send) and m.ready(s1, r, br, Recv)):
                        return None
                    for s2, msg in m.fire_sync(s1, s, r):
                        out.append((s2, (TraceStep(lab, snapshot(s2), msg), cons)))
                else:
                    out.append((m.skip(m.skip(s1, s), r), cons))
        return out

    def violates_all(self, node):
        status = self.status
        for st, cons in node:
            steps = _materialize(cons)
            for p, ok in branches(lambda path: status(steps, path), st.path):
                if not ok:
                    return False
        return True

    def run_prefix(self, bits):
        node = self.start()
        for k, b in enumerate(bits):
            node = self.advance(node, k, bool(b))
            if node is None:
                return None
        return node

    def sufficient(self, mask):
        node = self.start()
        for k in range(self.n):
            if k == self.cutoff and not self.violates_all(node):
                return False
            node = self.advance(node, k, bool((mask >> k) & 1))
            if node is None:
                return False
        return self.violates_all(node)

    def search(self, prefix=(), budget=DEFAULT_BUDGET):
        """All minimal sufficient include-masks extending the decided prefix."""
        found = []
        start = self.run_prefix(prefix)
        if start is None:
            return found
        mask0 = 0
        for k, b in enumerate(prefix):
            if b:
                mask0 |= 1 << k
        n = self.n
        cutoff = self.cutoff

        def rec(k, node, mask):
            self.nodes += 1
            if self.nodes > budget:
                raise ExplosionBudgetExceeded(self.nodes)
            for f in found:
                if f & mask == f:
                    return
            if k == cutoff and not self.violates_all(node):
                return
            if k == n:
                if self.violates_all(node):
                    found.append(mask)
                return
            child = self.advance(node, k, False)
            if child is not None:
                rec(k + 1, child, mask)
            child = self.advance(node, k, True)
            if child is not None:
                rec(k + 1, child, mask | (1 << k))

        rec(len(prefix), start, mask0)
        return found
