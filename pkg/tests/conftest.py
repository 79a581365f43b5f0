from pathlib import Path

import pytest

from causal_audit.cause import analyze
from causal_audit.dsl import parse_document
from causal_audit.logs import load_log
from causal_audit.properties import property_from_block

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name: str):
    doc = parse_document((FIXTURES / name).read_text())
    return doc.config, property_from_block(doc.prop) if doc.prop is not None else None


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def main_actual():
    return load("notaries_actual.proto")


@pytest.fixture(scope="session")
def main_norm():
    return load("notaries_norm.proto")


@pytest.fixture(scope="session")
def main_log():
    return load_log(FIXTURES / "notaries_log.json")


@pytest.fixture(scope="session")
def main_report(main_actual, main_log):
    cfg, p = main_actual
    return analyze(cfg, p, main_log, mode="exact")


@pytest.fixture(scope="session")
def main_greedy(main_actual, main_log):
    cfg, p = main_actual
    return analyze(cfg, p, main_log, mode="greedy")


@pytest.fixture(scope="session")
def appendix_actual():
    return load("notaries11_actual.proto")


@pytest.fixture(scope="session")
def appendix_report(appendix_actual):
    cfg, p = appendix_actual
    return analyze(cfg, p, load_log(FIXTURES / "notaries11_log.json"), mode="greedy")


@pytest.fixture(scope="session")
def remarks():
    return load("remarks.proto")
