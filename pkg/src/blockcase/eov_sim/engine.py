"""Deterministic execute-order-validate pipeline with injectable faults.

Each step delivers the scheduled proposals to every endorser, assembles the
endorsed ones into submissions, lets the ordering cluster cut at most one
block (FIFO, majority quorum, one idle step after a leader crash), and
broadcasts any cut block to every peer for validation in the same step.
The whole run is a pure function of its configuration: identical configs
yield byte-identical reports.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from ..determinism import canonical_json_bytes
from ..policy_analysis import (
    CENSORING,
    CRASHED,
    DOSED,
    FRAUDULENT,
    EndorsementPolicy,
    eval_policy,
)
from ..risk_ledger import FearedEvent
from .scenario import (
    EndorserBehavior,
    HONEST_BEHAVIOR,
    ScenarioConfig,
    TxProposal,
    scenario_digest,
    validate_config,
)
from .state import AppFailure, KvStore, ReadWriteSet, claimed_effects, execute_chaincode

V1, V2, V3 = "V1", "V2", "V3"
V4, V5, V6, V7 = "V4", "V5", "V6", "V7"


@dataclass(frozen=True, slots=True)
class Endorsement:
    endorser_id: str
    rwset: ReadWriteSet
    signature_valid: bool = True


@dataclass(frozen=True, slots=True)
class Refusal:
    criterion: str | None  # V1..V3, or None for plain censorship
    reason: str


@dataclass(frozen=True, slots=True)
class NoResponse:
    pass


NO_RESPONSE = NoResponse()


def endorse(
    endorser_id: str,
    behavior: EndorserBehavior,
    proposal: TxProposal,
    state: KvStore,
    seen_nonces: set[tuple[str, int]],
    msp_emitters: frozenset[str],
    step: int,
) -> Endorsement | Refusal | NoResponse:
    """One endorser's reaction to a proposal.

    Honest endorsers check emitter legitimacy, replay freshness and a clean
    chaincode execution, in that order, and report the first failure.
    Fraudulent endorsers skip the execution check and endorse the claimed
    effects, but still refuse illegitimate emitters and replays. Censoring
    endorsers refuse everything; crashed ones never answer; a denial-of-
    service window silences an otherwise honest endorser.
    """
    mode = behavior.mode
    if mode == CRASHED:
        return NO_RESPONSE
    if mode == DOSED:
        if behavior.from_step <= step <= behavior.to_step:
            return NO_RESPONSE
        mode = "honest"
    if mode == CENSORING:
        return Refusal(None, "censorship")

    if proposal.client_id not in msp_emitters:
        return Refusal(V1, f"emitter {proposal.client_id!r} is not registered with the MSP")
    if (proposal.client_id, proposal.nonce) in seen_nonces:
        return Refusal(V3, f"nonce {proposal.nonce} of {proposal.client_id!r} was already acknowledged")
    if mode == FRAUDULENT:
        return Endorsement(endorser_id, claimed_effects(state, proposal.op))
    try:
        rwset = execute_chaincode(state, proposal.op)
    except AppFailure as failure:
        return Refusal(V2, f"chaincode execution failed: {failure}")
    return Endorsement(endorser_id, rwset)


@dataclass(frozen=True, slots=True)
class Submission:
    proposal: TxProposal
    endorsements: tuple[Endorsement, ...]


@dataclass(frozen=True, slots=True)
class Block:
    block_no: int
    submissions: tuple[Submission, ...]


def assemble_submission(
    proposal: TxProposal, endorsements: Sequence[Endorsement], policy: EndorsementPolicy
) -> Submission | None:
    """Bundle the endorsements for the ordering service, or None when the
    collected endorsing identities do not satisfy the policy."""
    if not eval_policy(policy, {e.endorser_id for e in endorsements}):
        return None
    return Submission(proposal, tuple(endorsements))


@dataclass(frozen=True, slots=True)
class OrdererCluster:
    n: int
    batch_size: int
    crashed: frozenset[int] = frozenset()
    leader: int | None = 0
    leader_ready_at: int = 0  # election takes one idle step
    next_block_no: int = 1

    @property
    def quorum(self) -> int:
        return self.n // 2 + 1

    @property
    def alive(self) -> int:
        return self.n - len(self.crashed)

    @property
    def live(self) -> bool:
        return self.alive >= self.quorum


def ordering_step(
    cluster: OrdererCluster,
    pending: deque,
    step: int,
    crash_schedule: Iterable[tuple[int, int]],
) -> tuple[list[Block], OrdererCluster]:
    """Advance the ordering service by one step, consuming from ``pending``.

    Crashes scheduled for this step land first. A crashed leader hands over
    to the next alive index (wrapping), which starts working the following
    step. With a ready leader and a live majority, one block of up to
    ``batch_size`` submissions is cut in FIFO order; otherwise nothing is
    emitted.
    """
    crashed = cluster.crashed | {index for s, index in crash_schedule if s == step}
    leader = cluster.leader
    ready_at = cluster.leader_ready_at
    if leader is not None and leader in crashed:
        successor = None
        for offset in range(1, cluster.n + 1):
            candidate = (leader + offset) % cluster.n
            if candidate not in crashed:
                successor = candidate
                break
        leader = successor
        ready_at = step + 1

    blocks: list[Block] = []
    next_no = cluster.next_block_no
    alive = cluster.n - len(crashed)
    if alive >= cluster.n // 2 + 1 and leader is not None and step >= ready_at and pending:
        batch = tuple(pending.popleft() for _ in range(min(cluster.batch_size, len(pending))))
        blocks.append(Block(next_no, batch))
        next_no += 1

    updated = replace(
        cluster, crashed=crashed, leader=leader, leader_ready_at=ready_at, next_block_no=next_no
    )
    return blocks, updated


def validate_block(
    peer_state: KvStore,
    block: Block,
    msp_endorsers: frozenset[str],
    policy: EndorsementPolicy,
    skip_v7: bool,
) -> tuple[list[tuple[bool, str | None]], KvStore]:
    """Validate and apply a block on a copy of the peer state.

    Per transaction, in order: the endorsing set satisfies the policy, the
    endorsers are legitimate with valid signatures, all endorsements agree
    on the effects, and (unless the peer is injected with ``skip_v7``) every
    read still sees the version it was computed against. Valid transactions
    apply their writes immediately, so later transactions in the same block
    see them. Reporting stops at the first failed criterion.
    """
    state = peer_state.copy()
    flags: list[tuple[bool, str | None]] = []
    for index, submission in enumerate(block.submissions):
        endorsements = submission.endorsements
        failed: str | None = None
        if not eval_policy(policy, {e.endorser_id for e in endorsements}):
            failed = V4
        elif any(e.endorser_id not in msp_endorsers or not e.signature_valid for e in endorsements):
            failed = V5
        elif any(e.rwset != endorsements[0].rwset for e in endorsements[1:]):
            failed = V6
        elif not skip_v7 and any(state.version(key) != version for key, version in endorsements[0].rwset.reads):
            failed = V7
        if failed is None:
            state.apply_writes(endorsements[0].rwset.writes, (block.block_no, index))
            flags.append((True, None))
        else:
            flags.append((False, failed))
    return flags, state


@dataclass(frozen=True, slots=True)
class CommittedTx:
    block_no: int
    tx_id: str
    valid: bool
    failed_criterion: str | None  # V4..V7 when invalid


@dataclass(frozen=True, slots=True)
class RefusalRecord:
    tx_id: str
    endorser_id: str
    failed_criterion: str | None  # V1..V3, None for censorship
    reason: str


@dataclass(frozen=True, slots=True)
class PeerDigest:
    peer: int
    block_height: int
    digest: str


@dataclass(frozen=True)
class RunReport:
    committed: tuple[CommittedTx, ...]
    endorsement_refusals: tuple[RefusalRecord, ...]
    feared_event_counts: dict[FearedEvent, int]
    per_peer_state_digest: tuple[PeerDigest, ...]
    liveness_lost_at: int | None
    seed: int
    config_digest: str

    def to_dict(self) -> dict:
        return {
            "committed": [[c.block_no, c.tx_id, c.valid, c.failed_criterion] for c in self.committed],
            "endorsement_refusals": [
                [r.tx_id, r.endorser_id, r.failed_criterion, r.reason] for r in self.endorsement_refusals
            ],
            "feared_event_counts": {event.value: count for event, count in self.feared_event_counts.items()},
            "per_peer_state_digest": [[d.peer, d.block_height, d.digest] for d in self.per_peer_state_digest],
            "liveness_lost_at": self.liveness_lost_at,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }

    def to_json_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    @property
    def clean(self) -> bool:
        return all(count == 0 for count in self.feared_event_counts.values())


def detect_feared_events(
    committed: Sequence[CommittedTx],
    per_peer_digests: Sequence[PeerDigest],
    proposals: Sequence[TxProposal],
) -> dict[FearedEvent, int]:
    """Recount the three feared events from the run traces.

    A committed-valid transaction whose ground truth says invalid counts as
    an accepted invalid; a ground-truth-valid proposal that never committed
    as valid counts as a rejected valid, wherever it died; and each pair of
    peers disagreeing on the state digest at an equal height counts once per
    (height, pair).
    """
    ground_truth = {p.tx_id: p.op.ground_truth_valid for p in proposals}
    committed_valid = {entry.tx_id for entry in committed if entry.valid}

    invalid_accepted = sum(
        1 for entry in committed if entry.valid and ground_truth.get(entry.tx_id) is False
    )
    valid_rejected = sum(
        1 for p in proposals if p.op.ground_truth_valid and p.tx_id not in committed_valid
    )

    by_height: dict[int, list[tuple[int, str]]] = {}
    for record in per_peer_digests:
        by_height.setdefault(record.block_height, []).append((record.peer, record.digest))
    inconsistent = 0
    for height in sorted(by_height):
        peers = sorted(by_height[height])
        for i in range(len(peers)):
            for j in range(i + 1, len(peers)):
                if peers[i][1] != peers[j][1]:
                    inconsistent += 1

    return {
        FearedEvent.INVALID_ACCEPTED: invalid_accepted,
        FearedEvent.VALID_REJECTED: valid_rejected,
        FearedEvent.INCONSISTENT_READ: inconsistent,
    }


@dataclass(frozen=True)
class SimResult:
    """Run report plus the raw material tests and campaigns work from."""

    report: RunReport
    blocks: tuple[Block, ...]
    peer_states: tuple[KvStore, ...]
    canonical_state: KvStore
    submitted_tx_ids: frozenset[str]


def simulate(config: ScenarioConfig, *, config_digest: str | None = None, check: bool = True) -> SimResult:
    """Run the whole pipeline for steps 0..horizon."""
    if check:
        validate_config(config)
    digest = config_digest if config_digest is not None else scenario_digest(config)

    behaviors: Mapping[str, EndorserBehavior] = config.endorser_behaviors
    endorser_order = sorted(config.msp_endorsers)
    skip_peers = config.skip_v7_peers
    policy = config.policy
    msp_endorsers = config.msp_endorsers
    schedule = config.orderers.crash_schedule

    by_step: dict[int, list[TxProposal]] = {}
    for step, proposal in config.workload:
        by_step.setdefault(step, []).append(proposal)

    canonical_state = KvStore()
    peer_states = [KvStore() for _ in range(config.peers)]
    cluster = OrdererCluster(n=config.orderers.n, batch_size=config.orderers.batch_size)
    pending: deque[Submission] = deque()
    seen_nonces: set[tuple[str, int]] = set()
    submitted: set[str] = set()
    refusals: list[RefusalRecord] = []
    committed: list[CommittedTx] = []
    digests: list[PeerDigest] = []
    blocks_log: list[Block] = []
    liveness_lost_at: int | None = None

    for step in range(config.horizon + 1):
        for proposal in by_step.get(step, ()):
            endorsements: list[Endorsement] = []
            for endorser_id in endorser_order:
                behavior = behaviors.get(endorser_id, HONEST_BEHAVIOR)
                outcome = endorse(
                    endorser_id, behavior, proposal, canonical_state, seen_nonces, config.msp_emitters, step
                )
                if isinstance(outcome, Endorsement):
                    endorsements.append(outcome)
                elif isinstance(outcome, Refusal):
                    refusals.append(
                        RefusalRecord(proposal.tx_id, endorser_id, outcome.criterion, outcome.reason)
                    )
            seen_nonces.add((proposal.client_id, proposal.nonce))
            submission = assemble_submission(proposal, endorsements, policy)
            if submission is not None:
                pending.append(submission)
                submitted.add(proposal.tx_id)

        cut, cluster = ordering_step(cluster, pending, step, schedule)
        if liveness_lost_at is None and not cluster.live:
            liveness_lost_at = step

        for block in cut:
            blocks_log.append(block)
            flags, canonical_state = validate_block(canonical_state, block, msp_endorsers, policy, False)
            for (valid, failed), submission in zip(flags, block.submissions):
                committed.append(CommittedTx(block.block_no, submission.proposal.tx_id, valid, failed))
            for peer in range(config.peers):
                _, updated = validate_block(
                    peer_states[peer], block, msp_endorsers, policy, peer in skip_peers
                )
                peer_states[peer] = updated
                digests.append(PeerDigest(peer, block.block_no, updated.digest()))

    counts = detect_feared_events(committed, digests, config.proposals())
    report = RunReport(
        committed=tuple(committed),
        endorsement_refusals=tuple(refusals),
        feared_event_counts=counts,
        per_peer_state_digest=tuple(digests),
        liveness_lost_at=liveness_lost_at,
        seed=config.seed,
        config_digest=digest,
    )
    return SimResult(
        report=report,
        blocks=tuple(blocks_log),
        peer_states=tuple(peer_states),
        canonical_state=canonical_state,
        submitted_tx_ids=frozenset(submitted),
    )


def run_scenario(config: ScenarioConfig) -> RunReport:
    """The pipeline as a pure function from configuration to report."""
    return simulate(config).report
