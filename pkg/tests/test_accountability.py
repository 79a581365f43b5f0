import pytest

from causal_audit import terms as T
from causal_audit.accountability import (
    DEVIANT_HARMLESS,
    DEVIANT_IMPLICATED,
    NORM_FOLLOWER,
    MismatchedDomains,
    NormMap,
    accountability_json,
    check_necessity,
    classify,
    classify_cause,
    harmless_deviants,
)
from causal_audit.cause import analyze
from causal_audit.dsl import parse_document, parse_protocol
from causal_audit.labels import Local
from causal_audit.properties import Confirmed, Counterexample, NeverViolated, property_from_block


def _norm_variant(fixtures_dir, *edits):
    src = (fixtures_dir / "notaries_norm.proto").read_text()
    for old, new in edits:
        assert old in src
        src = src.replace(old, new)
    doc = parse_document(src)
    return doc.config, property_from_block(doc.prop)


@pytest.fixture(scope="module")
def main_norms(main_norm):
    return NormMap.from_config(main_norm[0])


def test_case_study_norms_are_necessary(main_norm, main_norms):
    cfg, p = main_norm
    verdict = check_necessity(cfg.threads, main_norms, cfg.stores, p)
    assert isinstance(verdict, Confirmed) and verdict.bound > 0


def test_dropping_hash_check_alone_keeps_norms_safe(fixtures_dir):
    cfg, p = _norm_variant(fixtures_dir, ("    assert mem = t;\n", ""))
    assert check_necessity(cfg.threads, NormMap.from_config(cfg), cfg.stores, p)


def test_dropping_hash_check_with_wrong_binding_violates(fixtures_dir):
    cfg, p = _norm_variant(
        fixtures_dir,
        ("    assert mem = t;\n", ""),
        ("4: (uid, pwd, J) = dec", "4: (u, pwd, J) = dec"),
        ("5: t = hash((uid, pwd));", "5: t = hash((u, pwd));"),
        ("6: insert(P, (acct, J));", "6: insert(P, (acct, uid));"),
    )
    verdict = check_necessity(cfg.threads, NormMap.from_config(cfg), cfg.stores, p)
    assert isinstance(verdict, Counterexample)
    assert p.violates(verdict.first)


def test_empty_configuration_is_necessary():
    assert check_necessity((), NormMap({}), (), NeverViolated())


def test_domain_mismatch(main_actual, main_norms):
    cfg, _ = main_actual
    with pytest.raises(MismatchedDomains):
        NormMap({"U1": cfg.program("U1")}).check_domain(cfg)
    with pytest.raises(MismatchedDomains):
        check_necessity(("U1",), main_norms, (T.EMPTY_STORE,), NeverViolated())


def test_case_study_classification(main_actual, main_norms, main_report):
    cfg, _ = main_actual
    cls = harmless_deviants(main_report, cfg, main_norms)
    assert cls["S1"] == DEVIANT_HARMLESS
    assert cls["Adversary"] == DEVIANT_IMPLICATED
    assert cls["U1"] == NORM_FOLLOWER
    assert set(cls) == set().union(*main_report.program_causes)


def test_classification_is_total_per_cause(main_actual, main_norms, main_report):
    cfg, _ = main_actual
    for ac, pc in zip(main_report.actual_causes, main_report.program_causes):
        per = classify_cause(ac.sublog, cfg, main_norms)
        assert set(per) == pc
        assert set(per.values()) <= {NORM_FOLLOWER, DEVIANT_HARMLESS, DEVIANT_IMPLICATED}


def test_prefix_rule():
    actual = parse_protocol("thread A { program { 1: x = id(1); 2: y = id(2); 3: z = id(3); } }").program("A")
    norm = parse_protocol("thread A { program { 1: x = id(1); 2: y = id(2); } }").program("A")
    assert classify("A", (Local("A", 1), Local("A", 2)), actual, norm) == DEVIANT_HARMLESS
    assert classify("A", (Local("A", 1), Local("A", 3)), actual, norm) == DEVIANT_IMPLICATED
    assert classify("A", (Local("A", 1), Local("A", 2), Local("A", 3)), actual, norm) == DEVIANT_IMPLICATED
    assert classify("A", (Local("A", 1),), norm, norm) == NORM_FOLLOWER


def test_follower_ignores_line_numbers():
    a = parse_protocol("thread A { program { 10: x = id(1); 20: y = id(x); } }").program("A")
    n = parse_protocol("thread A { program { 1: x = id(1); 2: y = id(x); } }").program("A")
    assert classify("A", (), a, n) == NORM_FOLLOWER


def test_norms_only_run_has_no_violation(main_norm, main_norms):
    cfg, p = main_norm
    r = analyze(cfg, p)
    assert not r.violation and r.actual_causes == ()
    out = accountability_json(r, cfg, main_norms)
    assert out["classification"] == {} and out["per_cause"] == []
