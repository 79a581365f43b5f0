"""Actual-cause analysis for violations of concurrent protocols."""

from .accountability import NormMap, check_necessity, harmless_deviants
from .cause import ActualCause, CauseReport, LamportCause, actual_causes, analyze, lamport_causes, program_cause
from .dsl import ParseError, parse_document, parse_protocol
from .kernel import BACKEND
from .logs import canonical_form, load_log, projections
from .properties import property_from_block
from .semantics import explore, find_violation, replay_log

__version__ = "0.1.0"

__all__ = [
    "ActualCause",
    "BACKEND",
    "CauseReport",
    "LamportCause",
    "NormMap",
    "ParseError",
    "actual_causes",
    "analyze",
    "canonical_form",
    "check_necessity",
    "explore",
    "find_violation",
    "harmless_deviants",
    "lamport_causes",
    "load_log",
    "parse_document",
    "parse_protocol",
    "program_cause",
    "projections",
    "property_from_block",
    "replay_log",
]
