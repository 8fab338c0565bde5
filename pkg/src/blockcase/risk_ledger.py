"""Risk registry: feared events, fault classes, mitigations and coverage.

The registry is a flat document in the same line grammar as the tree
format, with kinds ``risk``, ``mitigation`` and ``accept``::

    risk R3 "Crashes of endorser peers" criticality="Medium" events="ValidRejected" likelihood="Possible"
      mitigation tolerance evidence="P1c.1.3"

Every risk must either cite mitigation evidence that resolves inside an
assurance tree or carry an explicit acceptability justification; the
coverage check reports which of the two holds (or fails) for each risk.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .cae_model import CaeTree, EvidenceNode, ID_PATTERN
from .linefmt import Attr, ParseError, ParseFailure, QString, SourceSpan, Token, lex, quote


class FearedEvent(enum.Enum):
    INVALID_ACCEPTED = "InvalidAccepted"
    VALID_REJECTED = "ValidRejected"
    INCONSISTENT_READ = "InconsistentRead"


class MitigationCategory(enum.Enum):
    PREVENTION = "prevention"
    ELIMINATION = "elimination"
    TOLERANCE = "tolerance"
    FORECASTING = "forecasting"


CRITICALITY_LEVELS = ("Low", "Medium", "High")
LIKELIHOOD_LEVELS = ("Rare", "Possible", "Frequent")

_EVENT_BY_NAME = {e.value: e for e in FearedEvent}
_CATEGORY_BY_NAME = {c.value: c for c in MitigationCategory}


@dataclass(frozen=True, slots=True)
class Mitigation:
    category: MitigationCategory
    evidence_id: str


@dataclass(frozen=True, slots=True)
class Risk:
    id: str
    description: str
    feared_events: frozenset[FearedEvent]
    criticality: str
    likelihood: str
    mitigations: tuple[Mitigation, ...] = ()
    accepted_as_is: str | None = None


@dataclass(frozen=True, slots=True)
class RiskRegistry:
    risks: tuple[Risk, ...] = ()

    def __iter__(self):
        return iter(self.risks)

    def __len__(self) -> int:
        return len(self.risks)


def _parse_risk_line(atoms: tuple, span: SourceSpan, errors: list[ParseError]):
    rest = list(atoms[1:])
    if not rest or not isinstance(rest[0], Token) or not ID_PATTERN.match(rest[0].text):
        errors.append(ParseError(span, "BadKind", "risk line needs an id token"))
        return None
    if len(rest) < 2 or not isinstance(rest[1], QString):
        errors.append(ParseError(span, "BadKind", "risk line needs a quoted description"))
        return None
    risk_id, description = rest[0].text, rest[1].text

    attrs: dict[str, str] = {}
    ok = True
    for atom in rest[2:]:
        if not isinstance(atom, Attr) or atom.key not in ("criticality", "events", "likelihood"):
            errors.append(ParseError(span, "BadAttribute", "risk attributes are criticality, events and likelihood"))
            ok = False
            continue
        if atom.key in attrs:
            errors.append(ParseError(span, "BadAttribute", f"attribute {atom.key!r} appears twice"))
            ok = False
            continue
        attrs[atom.key] = atom.value
    for key in ("criticality", "events", "likelihood"):
        if key not in attrs:
            errors.append(ParseError(span, "BadAttribute", f"risk {risk_id} is missing the {key} attribute"))
            ok = False
    if not ok:
        return None

    events: set[FearedEvent] = set()
    for name in attrs["events"].split(","):
        event = _EVENT_BY_NAME.get(name.strip())
        if event is None:
            errors.append(ParseError(span, "BadFearedEvent", f"unknown feared event {name.strip()!r}"))
            return None
        events.add(event)
    if not events:
        errors.append(ParseError(span, "BadFearedEvent", f"risk {risk_id} names no feared event"))
        return None
    if attrs["criticality"] not in CRITICALITY_LEVELS:
        errors.append(ParseError(span, "BadAttribute", f"criticality must be one of {CRITICALITY_LEVELS}"))
        return None
    if attrs["likelihood"] not in LIKELIHOOD_LEVELS:
        errors.append(ParseError(span, "BadAttribute", f"likelihood must be one of {LIKELIHOOD_LEVELS}"))
        return None
    return risk_id, description, frozenset(events), attrs["criticality"], attrs["likelihood"]


def parse_registry(text: str) -> RiskRegistry:
    """Parse a registry document, preserving risk order; raises ParseFailure."""
    lines, errors = lex(text)

    risks: list[dict] = []
    seen_ids: set[str] = set()
    for line in lines:
        if line.kind is None:
            continue
        if line.level == 0:
            if line.kind != "risk":
                errors.append(ParseError(line.span, "BadKind", "top-level lines must be risks"))
                continue
            parsed = _parse_risk_line(line.atoms, line.span, errors)
            if parsed is None:
                risks.append({"bad": True})
                continue
            risk_id, description, events, criticality, likelihood = parsed
            if risk_id in seen_ids:
                errors.append(ParseError(line.span, "DuplicateId", f"duplicate risk id {risk_id!r}"))
                risks.append({"bad": True})
                continue
            seen_ids.add(risk_id)
            risks.append(
                {
                    "bad": False,
                    "id": risk_id,
                    "description": description,
                    "events": events,
                    "criticality": criticality,
                    "likelihood": likelihood,
                    "mitigations": [],
                    "accept": None,
                }
            )
            continue

        if line.level != 1 or not risks:
            errors.append(ParseError(line.span, "ChildRuleViolation", "mitigation and accept lines sit under a risk"))
            continue
        current = risks[-1]
        if current.get("bad"):
            continue
        rest = list(line.atoms[1:])
        if line.kind == "mitigation":
            if not rest or not isinstance(rest[0], Token):
                errors.append(ParseError(line.span, "BadCategory", "mitigation line needs a category token"))
                continue
            category = _CATEGORY_BY_NAME.get(rest[0].text)
            if category is None:
                errors.append(ParseError(line.span, "BadCategory", f"unknown mitigation category {rest[0].text!r}"))
                continue
            attrs = [a for a in rest[1:] if isinstance(a, Attr)]
            if len(attrs) != len(rest) - 1 or len(attrs) != 1 or attrs[0].key != "evidence":
                errors.append(ParseError(line.span, "BadAttribute", "mitigation takes exactly one evidence attribute"))
                continue
            if not ID_PATTERN.match(attrs[0].value):
                errors.append(ParseError(line.span, "BadAttribute", f"invalid evidence id {attrs[0].value!r}"))
                continue
            current["mitigations"].append(Mitigation(category, attrs[0].value))
        elif line.kind == "accept":
            if len(rest) != 1 or not isinstance(rest[0], QString):
                errors.append(ParseError(line.span, "BadKind", "accept line carries a single quoted justification"))
                continue
            if current["accept"] is not None:
                errors.append(ParseError(line.span, "ChildRuleViolation", "a risk carries at most one accept line"))
                continue
            current["accept"] = rest[0].text
        else:
            errors.append(ParseError(line.span, "BadKind", f"unknown kind {line.kind!r} under a risk"))

    if errors:
        raise ParseFailure(errors)
    return RiskRegistry(
        tuple(
            Risk(
                id=r["id"],
                description=r["description"],
                feared_events=r["events"],
                criticality=r["criticality"],
                likelihood=r["likelihood"],
                mitigations=tuple(r["mitigations"]),
                accepted_as_is=r["accept"],
            )
            for r in risks
            if not r["bad"]
        )
    )


def serialize_registry(registry: RiskRegistry) -> str:
    """Canonical registry text; a fixpoint of parse followed by serialize."""
    out: list[str] = []
    for risk in registry:
        events = ",".join(sorted(e.value for e in risk.feared_events))
        out.append(
            f"risk {risk.id} {quote(risk.description)}"
            f' criticality={quote(risk.criticality)} events={quote(events)} likelihood={quote(risk.likelihood)}\n'
        )
        for mitigation in risk.mitigations:
            out.append(f"  mitigation {mitigation.category.value} evidence={quote(mitigation.evidence_id)}\n")
        if risk.accepted_as_is is not None:
            out.append(f"  accept {quote(risk.accepted_as_is)}\n")
    return "".join(out)


COVERED = "Covered"
ACCEPTED_AS_IS = "AcceptedAsIs"
UNCOVERED = "Uncovered"
DANGLING = "Dangling"
_BUCKETS = (COVERED, ACCEPTED_AS_IS, UNCOVERED, DANGLING)


@dataclass(frozen=True, slots=True)
class CoverageEntry:
    risk_id: str
    bucket: str
    missing: tuple[str, ...] = ()  # evidence ids absent from the tree, for Dangling


@dataclass(frozen=True, slots=True)
class CoverageReport:
    entries: tuple[CoverageEntry, ...]
    counts: dict[str, int]

    @property
    def clean(self) -> bool:
        return self.counts[UNCOVERED] == 0 and self.counts[DANGLING] == 0


def coverage_check(registry: RiskRegistry, tree: CaeTree) -> CoverageReport:
    """Place every risk in exactly one bucket, in registry order.

    Covered: every cited evidence id resolves to an evidence node in the
    tree. Dangling: some cited id does not. AcceptedAsIs: no mitigations but
    an explicit justification. Uncovered: neither mitigations nor acceptance.
    """
    entries: list[CoverageEntry] = []
    counts = {bucket: 0 for bucket in _BUCKETS}
    for risk in registry:
        if risk.mitigations:
            missing = tuple(
                m.evidence_id
                for m in risk.mitigations
                if not isinstance(tree.nodes.get(m.evidence_id), EvidenceNode)
            )
            bucket = DANGLING if missing else COVERED
            entries.append(CoverageEntry(risk.id, bucket, missing))
        elif risk.accepted_as_is is not None:
            entries.append(CoverageEntry(risk.id, ACCEPTED_AS_IS))
        else:
            entries.append(CoverageEntry(risk.id, UNCOVERED))
        counts[entries[-1].bucket] += 1
    return CoverageReport(tuple(entries), counts)


def category_profile(registry: RiskRegistry) -> dict[MitigationCategory, int]:
    """Count mitigation entries per category; absent categories count zero."""
    profile = {category: 0 for category in MitigationCategory}
    for risk in registry:
        for mitigation in risk.mitigations:
            profile[mitigation.category] += 1
    return profile
