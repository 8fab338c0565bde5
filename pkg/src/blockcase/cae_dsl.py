"""Text format for assurance trees, DOT rendering and evidence linking.

One node per line, nested by two-space indentation::

    claim C0 "the system is dependable"
      decomposition A0 "argument over subsystems"
        claim C1 "subsystem one behaves"
          proof P1 "test report" ref="report.json" digest="9f..."
        claim C2 "subsystem two behaves"

Kinds are ``claim``, ``side-claim``, ``decomposition``, ``substitution``,
``concretization``, ``hypothesis`` and ``proof``. Attribute keys are
restricted to ``ref`` and ``digest`` (evidence only) and ``tag``; unknown
keys are errors rather than silently ignored, to protect assurance
documents from typos. ``serialize`` emits the canonical byte form, and
``parse(serialize(t))`` reproduces ``t`` exactly, including child order.

Parsing enforces the rules without which no tree can be built at all
(kinds, nesting, unique ids, a single root claim). Document-level rules
that a representable tree can still break, such as argument arity or a
misplaced side-claim flag, are left to ``check_well_formed`` so that
checking tools can report them as findings instead of refusing to read
the document.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .cae_model import (
    ArgumentKind,
    ArgumentNode,
    CaeTree,
    ClaimNode,
    EvidenceKind,
    EvidenceNode,
    ID_PATTERN,
    Node,
    NotEvidenceError,
)
from .determinism import file_sha256
from .linefmt import Attr, LexedLine, ParseError, ParseFailure, QString, SourceSpan, Token, lex, quote

__all__ = [
    "SourceSpan",
    "ParseError",
    "ParseFailure",
    "KINDS",
    "parse",
    "serialize",
    "to_dot",
    "link_evidence",
    "LinkIssue",
    "verify_links",
]

_ARGUMENT_KINDS = {k.value: k for k in ArgumentKind}
_EVIDENCE_KINDS = {k.value: k for k in EvidenceKind}
KINDS = frozenset({"claim", "side-claim"} | set(_ARGUMENT_KINDS) | set(_EVIDENCE_KINDS))

_CLAIM = "claim"
_ARGUMENT = "argument"
_EVIDENCE = "evidence"


def _category(kind: str) -> str:
    if kind in ("claim", "side-claim"):
        return _CLAIM
    if kind in _ARGUMENT_KINDS:
        return _ARGUMENT
    return _EVIDENCE


def _build_node(kind: str, node_id: str, text: str, attrs: dict[str, str]) -> Node:
    tag = attrs.get("tag")
    if kind in _ARGUMENT_KINDS:
        return ArgumentNode(node_id, _ARGUMENT_KINDS[kind], text, tag=tag)
    if kind in _EVIDENCE_KINDS:
        return EvidenceNode(
            node_id, _EVIDENCE_KINDS[kind], text, reference=attrs.get("ref"), digest=attrs.get("digest"), tag=tag
        )
    return ClaimNode(node_id, text, tag=tag)


def _shape_of(line: LexedLine, errors: list[ParseError]) -> tuple[str, str, dict[str, str]] | None:
    """Validate ``kind id "text" attrs...`` and return (id, text, attrs)."""
    atoms = list(line.atoms)
    kind = line.kind or ""
    rest = atoms[1:]
    if not rest or not isinstance(rest[0], Token):
        errors.append(ParseError(line.span, "BadKind", f"{kind} line needs a node id"))
        return None
    node_id = rest[0].text
    if not ID_PATTERN.match(node_id):
        errors.append(
            ParseError(SourceSpan(line.span.line, rest[0].column), "BadKind", f"invalid node id {node_id!r}")
        )
        return None
    if len(rest) < 2 or not isinstance(rest[1], QString):
        errors.append(ParseError(line.span, "BadKind", f"{kind} {node_id} needs a quoted text"))
        return None
    text = rest[1].text

    allowed = {"ref", "digest", "tag"} if _category(kind) == _EVIDENCE else {"tag"}
    attrs: dict[str, str] = {}
    ok = True
    for atom in rest[2:]:
        if not isinstance(atom, Attr):
            errors.append(
                ParseError(
                    SourceSpan(line.span.line, getattr(atom, "column", line.span.column)),
                    "BadKind",
                    "unexpected trailing content after the node text",
                )
            )
            ok = False
            continue
        span = SourceSpan(line.span.line, atom.column)
        if atom.key not in allowed:
            errors.append(ParseError(span, "BadAttribute", f"attribute {atom.key!r} is not allowed on {kind}"))
            ok = False
        elif atom.key in attrs:
            errors.append(ParseError(span, "BadAttribute", f"attribute {atom.key!r} appears twice"))
            ok = False
        else:
            attrs[atom.key] = atom.value
    if not ok:
        return None
    if "digest" in attrs and "ref" not in attrs:
        errors.append(ParseError(line.span, "BadAttribute", "digest requires a ref attribute"))
        return None
    return node_id, text, attrs


def parse(text: str) -> CaeTree:
    """Parse a document into a tree; raises ``ParseFailure`` with all errors.

    No partial tree is ever returned: either every line is acceptable and
    the assembled tree comes back, or the full error list is raised.
    """
    lines, errors = lex(text)

    nodes: dict[str, Node] = {}
    children: dict[str, list[str]] = {}
    side: set[str] = set()
    root_id: str | None = None
    # stack frames: [level, category or None, node_id or None, saw_argument]
    stack: list[list] = []

    for line in lines:
        while stack and stack[-1][0] >= line.level:
            stack.pop()

        if line.kind is None:
            stack.append([line.level, None, None, False])
            continue
        if line.kind not in KINDS:
            errors.append(ParseError(line.span, "BadKind", f"unknown kind {line.kind!r}"))
            stack.append([line.level, None, None, False])
            continue

        shape = _shape_of(line, errors)
        if shape is None:
            stack.append([line.level, _category(line.kind), None, False])
            continue
        node_id, node_text, attrs = shape
        category = _category(line.kind)

        attach = True
        if line.level == 0:
            if root_id is not None:
                errors.append(
                    ParseError(line.span, "ChildRuleViolation", "a document holds a single root claim")
                )
                attach = False
            elif category != _CLAIM:
                errors.append(ParseError(line.span, "ChildRuleViolation", "the root node must be a claim"))
                attach = False
        else:
            if not stack or stack[-1][0] != line.level - 1:
                errors.append(
                    ParseError(line.span, "BadIndent", "no line at the enclosing indentation level")
                )
                attach = False
            else:
                parent = stack[-1]
                if parent[1] == _EVIDENCE:
                    errors.append(
                        ParseError(line.span, "ChildRuleViolation", "evidence lines cannot have children")
                    )
                    attach = False
                elif parent[1] == _CLAIM:
                    if category == _CLAIM:
                        errors.append(
                            ParseError(
                                line.span, "ChildRuleViolation", "a claim cannot sit directly under a claim"
                            )
                        )
                        attach = False
                    elif category == _ARGUMENT:
                        if parent[3]:
                            errors.append(
                                ParseError(
                                    line.span,
                                    "ChildRuleViolation",
                                    "a claim is refined by at most one argument",
                                )
                            )
                            attach = False
                        else:
                            parent[3] = True
                elif parent[1] == _ARGUMENT:
                    if category == _ARGUMENT:
                        errors.append(
                            ParseError(
                                line.span, "ChildRuleViolation", "an argument cannot sit under an argument"
                            )
                        )
                        attach = False
                # parent[1] is None: parent line already failed, accept silently

        if node_id in nodes:
            errors.append(ParseError(line.span, "DuplicateId", f"duplicate node id {node_id!r}"))
            stack.append([line.level, category, None, False])
            continue

        node = _build_node(line.kind, node_id, node_text, attrs)
        nodes[node_id] = node
        children[node_id] = []
        if line.kind == "side-claim":
            side.add(node_id)
        if attach:
            if line.level == 0:
                root_id = node_id
            else:
                parent_id = stack[-1][2]
                if parent_id is not None:
                    children[parent_id].append(node_id)
        stack.append([line.level, category, node_id, False])

    if root_id is None and not errors:
        errors.append(ParseError(SourceSpan(1, 1), "ChildRuleViolation", "document has no root claim"))
    if errors:
        raise ParseFailure(errors)

    assembled = {
        nid: (node if isinstance(node, EvidenceNode) else replace(node, children=tuple(children[nid])))
        for nid, node in nodes.items()
    }
    return CaeTree(root=root_id, nodes=assembled, side_flags=frozenset(side))


def _kind_token(tree: CaeTree, node: Node) -> str:
    if isinstance(node, ClaimNode):
        return "side-claim" if node.id in tree.side_flags else "claim"
    return node.kind.value


def _attr_pairs(node: Node) -> list[tuple[str, str]]:
    pairs = []
    if isinstance(node, EvidenceNode):
        if node.digest is not None:
            pairs.append(("digest", node.digest))
        if node.reference is not None:
            pairs.append(("ref", node.reference))
    if node.tag is not None:
        pairs.append(("tag", node.tag))
    return sorted(pairs)


def serialize(tree: CaeTree) -> str:
    """Canonical text form: stable bytes for equal trees, LF line endings."""
    out: list[str] = []

    def emit(nid: str, level: int) -> None:
        node = tree.nodes[nid]
        attrs = "".join(f" {k}={quote(v)}" for k, v in _attr_pairs(node))
        out.append(f"{'  ' * level}{_kind_token(tree, node)} {nid} {quote(node.text)}{attrs}\n")
        for child in node.children:
            emit(child, level + 1)

    emit(tree.root, 0)
    return "".join(out)


_FILL = {_CLAIM: "lightblue", _ARGUMENT: "gold", _EVIDENCE: "palegreen"}
_LABEL_PREFIX = {
    ArgumentKind.DECOMPOSITION: "Decomposition",
    ArgumentKind.SUBSTITUTION: "Substitution",
    ArgumentKind.CONCRETIZATION: "Concretization",
    EvidenceKind.HYPOTHESIS: "Hypothesis",
    EvidenceKind.PROOF: "Proof",
}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_dot(tree: CaeTree) -> str:
    """Deterministic DOT rendering: claims blue, arguments yellow, evidence green.

    Nodes are emitted in document order and edges in child order, so equal
    trees always yield byte-equal output.
    """
    lines = ["digraph cae {"]
    order = list(tree.preorder())
    for nid in order:
        node = tree.nodes[nid]
        if isinstance(node, ClaimNode):
            label = f"{nid}\\n{_dot_escape(node.text)}"
            fill = _FILL[_CLAIM]
        elif isinstance(node, ArgumentNode):
            label = f"{nid}\\n{_LABEL_PREFIX[node.kind]}: {_dot_escape(node.text)}"
            fill = _FILL[_ARGUMENT]
        else:
            label = f"{nid}\\n{_LABEL_PREFIX[node.kind]}: {_dot_escape(node.text)}"
            fill = _FILL[_EVIDENCE]
        lines.append(f'  "{_dot_escape(nid)}" [label="{label}", style=filled, fillcolor={fill}]')
    for nid in order:
        for child in tree.nodes[nid].children:
            lines.append(f'  "{_dot_escape(nid)}" -> "{_dot_escape(child)}"')
    lines.append("}")
    return "\n".join(lines) + "\n"


def link_evidence(tree: CaeTree, node_id: str, reference: str, digest: str) -> CaeTree:
    """Return a tree where the named evidence carries the locator and digest.

    Relinking overwrites both fields; every other node is unchanged.
    """
    node = tree.node(node_id)
    if not isinstance(node, EvidenceNode):
        raise NotEvidenceError(f"node {node_id!r} is not evidence")
    nodes = dict(tree.nodes)
    nodes[node_id] = replace(node, reference=reference, digest=digest)
    return CaeTree(root=tree.root, nodes=nodes, side_flags=tree.side_flags)


@dataclass(frozen=True, slots=True)
class LinkIssue:
    node_id: str
    code: str  # missing-file or digest-mismatch
    detail: str


def verify_links(tree: CaeTree, base_dir: Path | str, only: set[str] | None = None) -> list[LinkIssue]:
    """Check that referenced evidence files exist and match their digests.

    Relative references resolve against ``base_dir`` (normally the directory
    of the document that carries them). Evidence without a reference is
    skipped; evidence with a reference but no digest is only checked for
    existence. ``only`` restricts the check to the given node ids.
    """
    base = Path(base_dir)
    issues: list[LinkIssue] = []
    for nid in tree.preorder():
        node = tree.nodes[nid]
        if not isinstance(node, EvidenceNode) or node.reference is None:
            continue
        if only is not None and nid not in only:
            continue
        target = Path(node.reference)
        if not target.is_absolute():
            target = base / target
        if not target.is_file():
            issues.append(LinkIssue(nid, "missing-file", f"referenced file {node.reference!r} does not exist"))
            continue
        if node.digest is not None and file_sha256(target) != node.digest:
            issues.append(LinkIssue(nid, "digest-mismatch", f"file {node.reference!r} does not match the digest"))
    return issues
