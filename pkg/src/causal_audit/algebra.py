"""Public face of the term algebra: primitive evaluation and term equality."""

from __future__ import annotations

from .kernel import (
    DEFAULT_REGISTRY,
    IllTypedArgument,
    PrimitiveRegistry,
    UnknownPrimitive,
    EMPTY_PATH,
    default_registry,
    terms_equal,
)
from .kernel import eval_primitive as _eval_primitive
from .terms import FAIL, Term


def eval_primitive(reg: PrimitiveRegistry, name: str, store, arg, thread: str = "", line: int = 0, path=EMPTY_PATH):
    """(store', result) of primitive `name`.

    `arg` is one term or a Python tuple of terms. Location arguments (the
    matrix of insert) may be given as plain names.
    """
    prim = reg.get(name)
    if prim.loc_args:
        args = list(arg) if isinstance(arg, tuple) and (not arg or isinstance(arg[0], (tuple, str))) else [arg]
        for k in prim.loc_args:
            if k < len(args) and isinstance(args[k], str):
                args[k] = ("loc", args[k])
        arg = tuple(args)
    return _eval_primitive(reg, name, store, arg, thread, line, path)


def is_failure(t: Term, reason: str | None = None) -> bool:
    return t[0] == FAIL and (reason is None or t[1] == reason)


__all__ = [
    "DEFAULT_REGISTRY",
    "IllTypedArgument",
    "PrimitiveRegistry",
    "UnknownPrimitive",
    "default_registry",
    "eval_primitive",
    "is_failure",
    "terms_equal",
]
