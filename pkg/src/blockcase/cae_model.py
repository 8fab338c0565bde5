"""Claim-argument-evidence trees: structure, well-formedness and status.

A tree's root is a claim. A claim is refined by at most one argument step
(a decomposition into subclaims, a substitution by a claim about an
equivalent object, or a concretization of an abstract notion) and may also
cite evidence directly. Arguments introduce subclaims, optionally a flagged
side-claim covering the validity of the inference itself, and evidence.
Evidence leaves are either hypotheses (accepted without demonstration) or
proofs (demonstrated facts); the distinction drives status evaluation.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

ID_PATTERN = re.compile(r"^[A-Za-z0-9.'\-_]+$")


class ArgumentKind(enum.Enum):
    DECOMPOSITION = "decomposition"
    SUBSTITUTION = "substitution"
    CONCRETIZATION = "concretization"


class EvidenceKind(enum.Enum):
    HYPOTHESIS = "hypothesis"
    PROOF = "proof"


class Status(enum.IntEnum):
    """Verdict lattice; a parent's status is the minimum over what supports it.

    A hypothesis anywhere below a claim caps that claim at ASSUMED, i.e.
    "holds under stated assumptions"; a claim with no development at all is
    UNDEVELOPED.
    """

    UNDEVELOPED = 0
    ASSUMED = 1
    SUPPORTED = 2


class CaeError(Exception):
    """Base class for tree construction and lookup failures."""


class DuplicateIdError(CaeError):
    pass


class UnknownParentError(CaeError):
    pass


class ChildRuleError(CaeError):
    pass


class MultipleArgumentsError(CaeError):
    pass


class CycleError(CaeError):
    pass


class ArityError(CaeError):
    pass


class InvalidIdError(CaeError):
    pass


class DigestError(CaeError):
    pass


class SideFlagError(CaeError):
    pass


class UnknownNodeError(CaeError):
    pass


class NotEvidenceError(CaeError):
    pass


class EmptyCriteriaError(CaeError):
    pass


@dataclass(frozen=True, slots=True)
class ClaimNode:
    id: str
    text: str
    children: tuple[str, ...] = ()
    tag: str | None = None


@dataclass(frozen=True, slots=True)
class ArgumentNode:
    id: str
    kind: ArgumentKind
    text: str
    children: tuple[str, ...] = ()
    tag: str | None = None


@dataclass(frozen=True, slots=True)
class EvidenceNode:
    id: str
    kind: EvidenceKind
    text: str
    reference: str | None = None
    digest: str | None = None
    tag: str | None = None

    @property
    def children(self) -> tuple[str, ...]:
        return ()


Node = ClaimNode | ArgumentNode | EvidenceNode


@dataclass(frozen=True)
class CaeTree:
    """Immutable tree: a root claim id, an id -> node map, and side-claim flags."""

    root: str
    nodes: dict[str, Node]
    side_flags: frozenset[str] = frozenset()

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"no node with id {node_id!r}") from None

    def parent_map(self) -> dict[str, str]:
        parents: dict[str, str] = {}
        for nid, node in self.nodes.items():
            for child in node.children:
                parents[child] = nid
        return parents

    def preorder(self, start: str | None = None) -> Iterator[str]:
        """Document order: each node before its children, children in order."""
        stack = [start if start is not None else self.root]
        while stack:
            nid = stack.pop()
            node = self.nodes.get(nid)
            if node is None:
                continue
            yield nid
            stack.extend(reversed(node.children))


@dataclass(frozen=True, slots=True)
class Violation:
    node_id: str
    rule: str
    message: str


def _require_valid_id(node_id: str) -> None:
    if not ID_PATTERN.match(node_id or ""):
        raise InvalidIdError(f"invalid node id {node_id!r}")


def build_tree(
    root: ClaimNode,
    entries: Sequence[tuple[str, Node]],
    side_flags: Iterable[str] = (),
) -> CaeTree:
    """Assemble a tree from a root claim and (parent id, node) pairs.

    Insertion order of the pairs becomes child order. The ``children`` field
    of the supplied nodes is ignored and rebuilt from the pairs. Raises a
    ``CaeError`` subclass on the first structural violation, so any tree this
    function returns passes ``check_well_formed`` with no findings.
    """
    _require_valid_id(root.id)
    table: dict[str, Node] = {root.id: root}
    children: dict[str, list[str]] = {root.id: []}
    has_argument: set[str] = set()

    for parent_id, node in entries:
        _require_valid_id(node.id)
        if node.id in table:
            raise DuplicateIdError(f"duplicate node id {node.id!r}")
        if parent_id == node.id:
            raise CycleError(f"node {node.id!r} cannot be its own parent")
        parent = table.get(parent_id)
        if parent is None:
            raise UnknownParentError(f"parent {parent_id!r} of {node.id!r} is not in the tree")
        if isinstance(parent, EvidenceNode):
            raise ChildRuleError(f"evidence {parent_id!r} cannot have children ({node.id!r})")
        if isinstance(parent, ClaimNode):
            if isinstance(node, ClaimNode):
                raise ChildRuleError(f"claim {node.id!r} cannot sit directly under claim {parent_id!r}")
            if isinstance(node, ArgumentNode):
                if parent_id in has_argument:
                    raise MultipleArgumentsError(f"claim {parent_id!r} already has an argument child")
                has_argument.add(parent_id)
        else:  # ArgumentNode parent
            if isinstance(node, ArgumentNode):
                raise ChildRuleError(f"argument {node.id!r} cannot sit under argument {parent_id!r}")
        if isinstance(node, EvidenceNode) and node.digest is not None and node.reference is None:
            raise DigestError(f"evidence {node.id!r} carries a digest but no reference")
        table[node.id] = node
        children[node.id] = []
        children[parent_id].append(node.id)

    side = frozenset(side_flags)
    parent_of = {c: p for p, kids in children.items() for c in kids}
    for flagged in sorted(side):
        node = table.get(flagged)
        if node is None:
            raise SideFlagError(f"side flag names unknown node {flagged!r}")
        if not isinstance(node, ClaimNode):
            raise SideFlagError(f"side-flagged node {flagged!r} is not a claim")
        parent = table.get(parent_of.get(flagged, ""))
        if not isinstance(parent, ArgumentNode):
            raise SideFlagError(f"side-claim {flagged!r} must sit under an argument")

    for nid, node in table.items():
        if isinstance(node, ArgumentNode):
            subclaims = sum(
                1 for c in children[nid] if isinstance(table[c], ClaimNode) and c not in side
            )
            needed = 2 if node.kind is ArgumentKind.DECOMPOSITION else 1
            if subclaims < needed:
                raise ArityError(
                    f"{node.kind.value} argument {nid!r} needs at least {needed} subclaim(s), has {subclaims}"
                )

    nodes = {
        nid: (node if isinstance(node, EvidenceNode) else replace(node, children=tuple(children[nid])))
        for nid, node in table.items()
    }
    return CaeTree(root=root.id, nodes=nodes, side_flags=side)


def check_well_formed(tree: CaeTree) -> list[Violation]:
    """Report every structural rule the tree breaks; empty means well-formed.

    Unlike ``build_tree`` this never raises: violations are data, so callers
    can list all of them (the checking command relies on that).
    """
    out: list[Violation] = []
    root_node = tree.nodes.get(tree.root)
    if root_node is None:
        out.append(Violation(tree.root, "RootRule", "root id is not present in the node map"))
        return out
    if not isinstance(root_node, ClaimNode):
        out.append(Violation(tree.root, "RootRule", "root node must be a claim"))

    for nid in tree.nodes:
        if not ID_PATTERN.match(nid or ""):
            out.append(Violation(nid, "IdRule", f"node id {nid!r} is not a valid token"))

    parents: dict[str, list[str]] = {}
    for nid, node in tree.nodes.items():
        for child in node.children:
            if child not in tree.nodes:
                out.append(Violation(nid, "StructureRule", f"child {child!r} is not in the node map"))
                continue
            parents.setdefault(child, []).append(nid)

    for child, ps in parents.items():
        if len(ps) > 1:
            out.append(Violation(child, "StructureRule", f"node has {len(ps)} parents"))
    if tree.root in parents:
        out.append(Violation(tree.root, "StructureRule", "root node has a parent"))

    reachable = set()
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if nid in reachable or nid not in tree.nodes:
            continue
        reachable.add(nid)
        stack.extend(tree.nodes[nid].children)
    for nid in tree.nodes:
        if nid not in reachable:
            out.append(Violation(nid, "StructureRule", "node is not reachable from the root"))

    for nid, node in tree.nodes.items():
        kids = [tree.nodes[c] for c in node.children if c in tree.nodes]
        if isinstance(node, ClaimNode):
            arguments = 0
            for kid in kids:
                if isinstance(kid, ClaimNode):
                    out.append(
                        Violation(nid, "ChildRuleViolation", f"claim {kid.id!r} sits directly under claim {nid!r}")
                    )
                elif isinstance(kid, ArgumentNode):
                    arguments += 1
            if arguments > 1:
                out.append(Violation(nid, "MultipleArguments", f"claim has {arguments} argument children"))
        elif isinstance(node, ArgumentNode):
            subclaims = 0
            for kid in kids:
                if isinstance(kid, ArgumentNode):
                    out.append(
                        Violation(nid, "ChildRuleViolation", f"argument {kid.id!r} sits under argument {nid!r}")
                    )
                elif isinstance(kid, ClaimNode) and kid.id not in tree.side_flags:
                    subclaims += 1
            needed = 2 if node.kind is ArgumentKind.DECOMPOSITION else 1
            if subclaims < needed:
                out.append(
                    Violation(
                        nid,
                        "ArityViolation",
                        f"{node.kind.value} argument needs at least {needed} subclaim(s), has {subclaims}",
                    )
                )
        else:
            if node.digest is not None and node.reference is None:
                out.append(Violation(nid, "DigestRule", "evidence carries a digest but no reference"))

    parent_of = {c: ps[0] for c, ps in parents.items() if ps}
    for flagged in sorted(tree.side_flags):
        node = tree.nodes.get(flagged)
        if node is None:
            out.append(Violation(flagged, "SideFlagViolation", "side flag names a node that does not exist"))
            continue
        if not isinstance(node, ClaimNode):
            out.append(Violation(flagged, "SideFlagViolation", "side-flagged node is not a claim"))
            continue
        parent = tree.nodes.get(parent_of.get(flagged, ""))
        if not isinstance(parent, ArgumentNode):
            out.append(Violation(flagged, "SideFlagViolation", "side-claim does not sit under an argument"))

    return out


def node_status(tree: CaeTree, node_id: str) -> Status:
    """Evaluate a node under the minimum rule.

    Proof -> SUPPORTED, hypothesis -> ASSUMED. A claim with no children is
    UNDEVELOPED; otherwise a claim takes the minimum over its argument child
    and its direct evidence. An argument takes the minimum over all of its
    children, side-claims included.
    """
    tree.node(node_id)
    memo: dict[str, Status] = {}

    def walk(nid: str) -> Status:
        cached = memo.get(nid)
        if cached is not None:
            return cached
        node = tree.nodes[nid]
        if isinstance(node, EvidenceNode):
            status = Status.SUPPORTED if node.kind is EvidenceKind.PROOF else Status.ASSUMED
        elif not node.children:
            status = Status.UNDEVELOPED
        else:
            status = min(walk(child) for child in node.children)
        memo[nid] = status
        return status

    return walk(node_id)


def assumptions_of(tree: CaeTree, node_id: str) -> list[str]:
    """Ids of every hypothesis leaf below the node, in document order."""
    tree.node(node_id)
    return [
        nid
        for nid in tree.preorder(node_id)
        if isinstance(tree.nodes[nid], EvidenceNode) and tree.nodes[nid].kind is EvidenceKind.HYPOTHESIS
    ]


def instantiate_template(
    app_name: str,
    validity_criteria: Sequence[str],
    consistency_criteria: Sequence[str],
    include_liveness: bool,
) -> CaeTree:
    """Instantiate the generic justification template for one application.

    The root claim is decomposed over the functional elements of the ledger
    service: registering only valid transactions and answering reads
    consistently, each concretized into one undeveloped placeholder subclaim
    per supplied criterion, plus (optionally) eventual registration of valid
    transactions. The resulting tree is well-formed and its root evaluates
    to UNDEVELOPED until the placeholders are developed.
    """
    if not validity_criteria or not consistency_criteria:
        raise EmptyCriteriaError("both criteria lists must be nonempty")

    root = ClaimNode("C0", f"{app_name} is dependable and secure")
    entries: list[tuple[str, Node]] = [
        ("C0", ArgumentNode("A0", ArgumentKind.DECOMPOSITION, "Argument over the functional elements delivered by the ledger service")),
        ("A0", ClaimNode("C1", f"{app_name} registers only valid transactions")),
        ("C1", ArgumentNode("A1", ArgumentKind.CONCRETIZATION, "Validity is made concrete by the application's validity criteria")),
    ]
    for i, criterion in enumerate(validity_criteria, start=1):
        entries.append(("A1", ClaimNode(f"C1.{i}", criterion)))
    entries.append(("A0", ClaimNode("C2", f"{app_name} answers consistently to read requests")))
    entries.append(
        ("C2", ArgumentNode("A2", ArgumentKind.CONCRETIZATION, "Consistency is made concrete by the application's consistency criteria"))
    )
    for i, criterion in enumerate(consistency_criteria, start=1):
        entries.append(("A2", ClaimNode(f"C2.{i}", criterion)))
    if include_liveness:
        entries.append(("A0", ClaimNode("C3", f"{app_name} registers any valid transaction eventually")))

    return build_tree(root, entries)
