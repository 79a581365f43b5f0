"""Backend selection for the interpreter kernel.

The compiled module is preferred; set CAUSAL_AUDIT_PURE=1 to force the
pure-Python implementation.
"""

import os

if os.environ.get("CAUSAL_AUDIT_PURE") == "1":
    from . import _kernel_py as _impl
else:
    try:
        from . import _kernel_c as _impl
    except ImportError:
        from . import _kernel_py as _impl

BACKEND = "compiled" if _impl.__name__.endswith("_kernel_c") else "python"

KernelError = _impl.KernelError
Undetermined = _impl.Undetermined
UnknownPrimitive = _impl.UnknownPrimitive
IllTypedArgument = _impl.IllTypedArgument
MissingLocation = _impl.MissingLocation
UnboundVariable = _impl.UnboundVariable
UnknownLabel = _impl.UnknownLabel
UnrealizableLog = _impl.UnrealizableLog
ExplosionBudgetExceeded = _impl.ExplosionBudgetExceeded

DEFAULT_BUDGET = _impl.DEFAULT_BUDGET
PathCondition = _impl.PathCondition
EMPTY_PATH = _impl.EMPTY_PATH
PrimitiveRegistry = _impl.PrimitiveRegistry
DEFAULT_REGISTRY = _impl.DEFAULT_REGISTRY
Ctx = _impl.Ctx
ThreadState = _impl.ThreadState
State = _impl.State
Machine = _impl.Machine
LatticeReplay = _impl.LatticeReplay

compare = _impl.compare
terms_equal = _impl.terms_equal
equal_under = _impl.equal_under
branches = _impl.branches
default_registry = _impl.default_registry
eval_primitive = _impl.eval_primitive
eval_expr = _impl.eval_expr
eval_guard = _impl.eval_guard
match = _impl.match
replay_labels = _impl.replay_labels
snapshot = _impl.snapshot
