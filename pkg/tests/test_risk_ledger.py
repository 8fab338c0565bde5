from __future__ import annotations

import pytest

from blockcase import corpus_text
from blockcase.cae_model import ClaimNode, EvidenceKind, EvidenceNode, build_tree
from blockcase.linefmt import ParseFailure
from blockcase.risk_ledger import (
    ACCEPTED_AS_IS,
    COVERED,
    DANGLING,
    FearedEvent,
    Mitigation,
    MitigationCategory,
    Risk,
    RiskRegistry,
    UNCOVERED,
    category_profile,
    coverage_check,
    parse_registry,
    serialize_registry,
)


def registry_errors(text):
    with pytest.raises(ParseFailure) as exc_info:
        parse_registry(text)
    return exc_info.value.errors


def make_risk(risk_id, mitigations=(), accept=None):
    return Risk(
        id=risk_id,
        description="something goes wrong",
        feared_events=frozenset({FearedEvent.VALID_REJECTED}),
        criticality="Medium",
        likelihood="Possible",
        mitigations=tuple(mitigations),
        accepted_as_is=accept,
    )


class TestParseRegistry:
    def test_endorser_corpus_has_six_risks_in_order(self, endorser_registry):
        assert [risk.id for risk in endorser_registry] == ["R1", "R2", "R3", "R4", "R5", "R6"]
        assert endorser_registry.risks[2].description == "Crashes of endorser peers"
        assert endorser_registry.risks[4].feared_events == frozenset({FearedEvent.INVALID_ACCEPTED})

    def test_empty_file_is_an_empty_registry(self):
        assert len(parse_registry("")) == 0

    def test_duplicate_risk_ids_rejected(self):
        text = (
            'risk R1 "a" criticality="Low" events="ValidRejected" likelihood="Rare"\n'
            'risk R1 "b" criticality="Low" events="ValidRejected" likelihood="Rare"\n'
        )
        assert [e.code for e in registry_errors(text)] == ["DuplicateId"]

    def test_bad_category(self):
        text = (
            'risk R1 "a" criticality="Low" events="ValidRejected" likelihood="Rare"\n'
            '  mitigation shrugging evidence="P1"\n'
        )
        assert registry_errors(text)[0].code == "BadCategory"

    def test_bad_feared_event(self):
        text = 'risk R1 "a" criticality="Low" events="Meteor" likelihood="Rare"\n'
        assert registry_errors(text)[0].code == "BadFearedEvent"

    def test_missing_attributes(self):
        assert registry_errors('risk R1 "a" events="ValidRejected"\n')[0].code == "BadAttribute"

    def test_nested_too_deep(self):
        text = (
            'risk R1 "a" criticality="Low" events="ValidRejected" likelihood="Rare"\n'
            '  mitigation tolerance evidence="P1"\n'
            '    accept "too deep"\n'
        )
        assert registry_errors(text)[0].code == "ChildRuleViolation"

    def test_accept_line(self):
        text = (
            'risk R1 "a" criticality="Low" events="ValidRejected" likelihood="Rare"\n'
            '  accept "residual risk argued acceptable"\n'
        )
        registry = parse_registry(text)
        assert registry.risks[0].accepted_as_is == "residual risk argued acceptable"


class TestSerializeRegistry:
    def test_corpus_is_a_canonical_fixpoint(self):
        text = corpus_text("endorser_risks.risk")
        assert serialize_registry(parse_registry(text)) == text

    def test_round_trip_preserves_content(self):
        registry = RiskRegistry(
            (
                make_risk("R1", [Mitigation(MitigationCategory.TOLERANCE, "P9")]),
                make_risk("R2", accept="cheap to retry"),
            )
        )
        assert parse_registry(serialize_registry(registry)) == registry

    def test_events_serialized_in_sorted_order(self):
        risk = Risk(
            id="R1",
            description="d",
            feared_events=frozenset({FearedEvent.VALID_REJECTED, FearedEvent.INVALID_ACCEPTED}),
            criticality="Low",
            likelihood="Rare",
        )
        line = serialize_registry(RiskRegistry((risk,))).splitlines()[0]
        assert 'events="InvalidAccepted,ValidRejected"' in line


class TestCoverage:
    def test_corpus_registry_fully_covered_by_endorser_tree(self, endorser_registry, corpus_trees):
        report = coverage_check(endorser_registry, corpus_trees["fig5.cae"])
        assert [entry.bucket for entry in report.entries] == [COVERED] * 6
        assert report.clean

    def test_missing_evidence_is_dangling(self, corpus_trees):
        registry = RiskRegistry((make_risk("R1", [Mitigation(MitigationCategory.TOLERANCE, "P404")]),))
        report = coverage_check(registry, corpus_trees["fig5.cae"])
        assert report.entries[0].bucket == DANGLING
        assert report.entries[0].missing == ("P404",)

    def test_acceptance_without_mitigations(self, corpus_trees):
        registry = RiskRegistry((make_risk("R1", accept="tolerable"),))
        assert coverage_check(registry, corpus_trees["fig5.cae"]).entries[0].bucket == ACCEPTED_AS_IS

    def test_nothing_at_all_is_uncovered(self, corpus_trees):
        registry = RiskRegistry((make_risk("R1"),))
        assert coverage_check(registry, corpus_trees["fig5.cae"]).entries[0].bucket == UNCOVERED

    def test_evidence_buckets_take_precedence_over_acceptance(self, corpus_trees):
        registry = RiskRegistry(
            (
                make_risk("R1", [Mitigation(MitigationCategory.TOLERANCE, "P1c.1.3")], accept="also fine"),
                make_risk("R2", [Mitigation(MitigationCategory.TOLERANCE, "P404")], accept="also fine"),
            )
        )
        report = coverage_check(registry, corpus_trees["fig5.cae"])
        assert [entry.bucket for entry in report.entries] == [COVERED, DANGLING]

    def test_every_risk_lands_in_exactly_one_bucket(self, endorser_registry, corpus_trees):
        mixed = RiskRegistry(
            endorser_registry.risks
            + (
                make_risk("R7"),
                make_risk("R8", accept="fine"),
                make_risk("R9", [Mitigation(MitigationCategory.FORECASTING, "P404")]),
            )
        )
        report = coverage_check(mixed, corpus_trees["fig5.cae"])
        assert len(report.entries) == len(mixed)
        assert sum(report.counts.values()) == len(mixed)

    def test_adding_evidence_never_uncovers(self, endorser_registry, corpus_trees):
        tree = corpus_trees["fig5.cae"]
        before = coverage_check(endorser_registry, tree)
        grown = build_tree(
            ClaimNode("C0", "root"),
            [("C0", EvidenceNode(nid, EvidenceKind.PROOF, "p")) for nid in ("P1c.1.1", "P1c.1.2", "P1c.1.3", "PX")],
        )
        after = coverage_check(endorser_registry, grown)
        for entry_before, entry_after in zip(before.entries, after.entries):
            if entry_before.bucket == COVERED:
                assert entry_after.bucket == COVERED


class TestCategoryProfile:
    def test_endorser_corpus_profile(self, endorser_registry):
        profile = category_profile(endorser_registry)
        assert profile == {
            MitigationCategory.PREVENTION: 1,
            MitigationCategory.ELIMINATION: 1,
            MitigationCategory.TOLERANCE: 4,
            MitigationCategory.FORECASTING: 0,
        }

    def test_empty_registry_is_all_zero(self):
        assert set(category_profile(RiskRegistry()).values()) == {0}

    def test_single_forecasting_entry(self):
        registry = RiskRegistry((make_risk("R1", [Mitigation(MitigationCategory.FORECASTING, "P1")]),))
        assert category_profile(registry)[MitigationCategory.FORECASTING] == 1
