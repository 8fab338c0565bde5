from __future__ import annotations

from collections import deque
from dataclasses import replace

import pytest

from blockcase import eov_sim as sim
from blockcase.policy_analysis import CENSORING, CRASHED, FRAUDULENT, HONEST, all_of, any_of
from blockcase.risk_ledger import FearedEvent
from simgen import random_scenario, replay_committed

E3 = ["E1", "E2", "E3"]


def proposal(tx_id, op, client="c1", nonce=None):
    return sim.TxProposal(tx_id, client, nonce if nonce is not None else hash(tx_id) % 1000, op)


def basic_config(workload, *, policy=None, behaviors=None, endorsers=E3, peers=1,
                 skip=frozenset(), orderers=None, horizon=4, seed=0):
    return sim.ScenarioConfig(
        msp_emitters=frozenset({"c1", "c2"}),
        msp_endorsers=frozenset(endorsers),
        endorser_behaviors=behaviors or {},
        policy=policy if policy is not None else any_of(endorsers),
        orderers=orderers or sim.OrdererConfig(n=3, batch_size=10),
        peers=peers,
        skip_v7_peers=frozenset(skip),
        workload=tuple(workload),
        horizon=horizon,
        seed=seed,
    )


class TestExecuteChaincode:
    def test_transfer_reads_both_keys_and_writes_updated_balances(self):
        state = sim.KvStore({"a": (10, (1, 0)), "b": (0, (1, 1))})
        rwset = sim.execute_chaincode(state, sim.ChaincodeOp.transfer("a", "b", 5))
        assert rwset.reads == frozenset({("a", (1, 0)), ("b", (1, 1))})
        assert rwset.writes == frozenset({("a", 5), ("b", 5)})

    def test_overdraw_fails(self):
        state = sim.KvStore({"a": (3, (1, 0))})
        with pytest.raises(sim.AppFailure):
            sim.execute_chaincode(state, sim.ChaincodeOp.transfer("a", "b", 5))

    def test_noop_has_empty_effects(self):
        assert sim.execute_chaincode(sim.KvStore(), sim.ChaincodeOp.noop()) == sim.EMPTY_RWSET

    def test_set_reads_version_zero_for_fresh_keys(self):
        rwset = sim.execute_chaincode(sim.KvStore(), sim.ChaincodeOp.set("k", 7))
        assert rwset.reads == frozenset({("k", sim.VERSION_ZERO)})
        assert rwset.writes == frozenset({("k", 7)})

    def test_execution_does_not_mutate_state(self):
        state = sim.KvStore({"a": (10, (1, 0))})
        sim.execute_chaincode(state, sim.ChaincodeOp.transfer("a", "b", 5))
        assert state == sim.KvStore({"a": (10, (1, 0))})

    def test_claimed_effects_skip_the_guard(self):
        rwset = sim.claimed_effects(sim.KvStore(), sim.ChaincodeOp.transfer("a", "b", 5))
        assert rwset.writes == frozenset({("a", -5), ("b", 5)})

    def test_transfer_validation(self):
        with pytest.raises(ValueError):
            sim.ChaincodeOp.transfer("a", "b", 0)
        with pytest.raises(ValueError):
            sim.ChaincodeOp.transfer("a", "a", 1)

    def test_rwsets_reject_duplicate_keys(self):
        with pytest.raises(ValueError):
            sim.ReadWriteSet(frozenset({("k", (0, 0)), ("k", (1, 0))}), frozenset())
        with pytest.raises(ValueError):
            sim.ReadWriteSet(frozenset(), frozenset({("k", 1), ("k", 2)}))


class TestEndorse:
    def endorse(self, behavior, prop, *, state=None, seen=frozenset(), step=0):
        return sim.endorse(
            "E1", behavior, prop, state or sim.KvStore(), set(seen), frozenset({"c1"}), step
        )

    def test_unknown_emitter_refused_first(self):
        outcome = self.endorse(sim.HONEST_BEHAVIOR, proposal("t", sim.ChaincodeOp.noop(), client="mallory"))
        assert isinstance(outcome, sim.Refusal) and outcome.criterion == sim.V1

    def test_replayed_nonce_refused(self):
        prop = proposal("t", sim.ChaincodeOp.noop(), nonce=9)
        outcome = self.endorse(sim.HONEST_BEHAVIOR, prop, seen={("c1", 9)})
        assert isinstance(outcome, sim.Refusal) and outcome.criterion == sim.V3

    def test_replay_by_an_illegitimate_emitter_reports_the_earlier_criterion(self):
        prop = proposal("t", sim.ChaincodeOp.noop(), client="mallory", nonce=9)
        outcome = self.endorse(sim.HONEST_BEHAVIOR, prop, seen={("mallory", 9)})
        assert outcome.criterion == sim.V1

    def test_failed_execution_refused(self):
        outcome = self.endorse(sim.HONEST_BEHAVIOR, proposal("t", sim.ChaincodeOp.transfer("a", "b", 5)))
        assert isinstance(outcome, sim.Refusal) and outcome.criterion == sim.V2

    def test_fraudulent_endorses_a_guard_violating_op(self):
        behavior = sim.EndorserBehavior(FRAUDULENT)
        op = sim.ChaincodeOp.transfer("a", "b", 5, valid=False)
        outcome = self.endorse(behavior, proposal("t", op))
        assert isinstance(outcome, sim.Endorsement)

    def test_fraudulent_still_refuses_identity_and_replay_failures(self):
        behavior = sim.EndorserBehavior(FRAUDULENT)
        refusal = self.endorse(behavior, proposal("t", sim.ChaincodeOp.noop(), client="mallory"))
        assert refusal.criterion == sim.V1
        replay = self.endorse(behavior, proposal("t", sim.ChaincodeOp.noop(), nonce=3), seen={("c1", 3)})
        assert replay.criterion == sim.V3

    def test_censoring_refuses_everything(self):
        outcome = self.endorse(sim.EndorserBehavior(CENSORING), proposal("t", sim.ChaincodeOp.noop()))
        assert isinstance(outcome, sim.Refusal)
        assert outcome.criterion is None and outcome.reason == "censorship"

    def test_crashed_never_answers(self):
        outcome = self.endorse(sim.EndorserBehavior(CRASHED), proposal("t", sim.ChaincodeOp.noop()))
        assert outcome is sim.NO_RESPONSE

    def test_dos_window(self):
        behavior = sim.dosed(2, 4)
        prop = proposal("t", sim.ChaincodeOp.noop())
        assert self.endorse(behavior, prop, step=3) is sim.NO_RESPONSE
        assert isinstance(self.endorse(behavior, prop, step=5), sim.Endorsement)


class TestAssembleSubmission:
    def test_any_policy_accepts_a_single_endorsement(self):
        endorsement = sim.Endorsement("E2", sim.EMPTY_RWSET)
        submission = sim.assemble_submission(proposal("t", sim.ChaincodeOp.noop()), [endorsement], any_of(E3))
        assert submission is not None and submission.endorsements == (endorsement,)

    def test_all_policy_needs_every_endorser(self):
        endorsements = [sim.Endorsement("E1", sim.EMPTY_RWSET), sim.Endorsement("E3", sim.EMPTY_RWSET)]
        assert sim.assemble_submission(proposal("t", sim.ChaincodeOp.noop()), endorsements, all_of(E3)) is None

    def test_empty_endorsements_never_satisfy(self):
        assert sim.assemble_submission(proposal("t", sim.ChaincodeOp.noop()), [], any_of(E3)) is None


class TestOrderingStep:
    def cluster(self, n=3, batch=10):
        return sim.OrdererCluster(n=n, batch_size=batch)

    def submissions(self, count):
        return deque(
            sim.Submission(proposal(f"t{i}", sim.ChaincodeOp.noop(), nonce=i), ()) for i in range(count)
        )

    def test_fifo_batch(self):
        blocks, cluster = sim.ordering_step(self.cluster(), self.submissions(2), 0, ())
        assert len(blocks) == 1
        assert [s.proposal.tx_id for s in blocks[0].submissions] == ["t0", "t1"]
        assert cluster.next_block_no == 2

    def test_batch_size_caps_a_block(self):
        pending = self.submissions(5)
        blocks, _ = sim.ordering_step(self.cluster(batch=2), pending, 0, ())
        assert len(blocks[0].submissions) == 2 and len(pending) == 3

    def test_non_leader_crash_keeps_cutting(self):
        blocks, cluster = sim.ordering_step(self.cluster(), self.submissions(1), 0, [(0, 2)])
        assert len(blocks) == 1 and cluster.live

    def test_two_crashes_of_three_stop_everything(self):
        pending = self.submissions(1)
        blocks, cluster = sim.ordering_step(self.cluster(), pending, 0, [(0, 1), (0, 2)])
        assert blocks == [] and not cluster.live and len(pending) == 1

    def test_leader_crash_costs_one_idle_step(self):
        pending = self.submissions(2)
        blocks, cluster = sim.ordering_step(self.cluster(), pending, 3, [(3, 0)])
        assert blocks == [] and cluster.leader == 1 and cluster.leader_ready_at == 4
        blocks, cluster = sim.ordering_step(cluster, pending, 4, ())
        assert len(blocks) == 1

    def test_wrap_around_election(self):
        cluster = replace(self.cluster(), crashed=frozenset({1}), leader=2)
        blocks, cluster = sim.ordering_step(cluster, self.submissions(1), 5, [(5, 2)])
        assert cluster.leader == 0 and blocks == []


def endorsed_submission(tx_id, reads, writes, endorsers=("E1",), nonce=None, rwsets=None):
    rwset = sim.ReadWriteSet(frozenset(reads), frozenset(writes))
    endorsements = tuple(
        sim.Endorsement(e, rwsets[i] if rwsets else rwset) for i, e in enumerate(endorsers)
    )
    return sim.Submission(proposal(tx_id, sim.ChaincodeOp.noop(), nonce=nonce), endorsements)


class TestValidateBlock:
    def validate(self, block, *, state=None, policy=None, skip=False, endorsers=E3):
        return sim.validate_block(
            state or sim.KvStore(), block, frozenset(endorsers), policy or any_of(E3), skip
        )

    def test_same_key_conflict_invalidates_the_second_tx(self):
        block = sim.Block(1, (
            endorsed_submission("t1", [("k", sim.VERSION_ZERO)], [("k", 1)], nonce=1),
            endorsed_submission("t2", [("k", sim.VERSION_ZERO)], [("k", 2)], nonce=2),
        ))
        flags, state = self.validate(block)
        assert flags == [(True, None), (False, sim.V7)]
        assert state.entries["k"] == (1, (1, 0))

    def test_disjoint_keys_both_commit(self):
        block = sim.Block(1, (
            endorsed_submission("t1", [("a", sim.VERSION_ZERO)], [("a", 1)], nonce=1),
            endorsed_submission("t2", [("b", sim.VERSION_ZERO)], [("b", 2)], nonce=2),
        ))
        flags, state = self.validate(block)
        assert flags == [(True, None), (True, None)]
        assert state.entries == {"a": (1, (1, 0)), "b": (2, (1, 1))}

    def test_diverging_endorsements_fail_the_consistency_check(self):
        rwsets = [
            sim.ReadWriteSet(frozenset(), frozenset({("k", 1)})),
            sim.ReadWriteSet(frozenset(), frozenset({("k", 2)})),
        ]
        block = sim.Block(1, (endorsed_submission("t1", [], [], endorsers=("E1", "E2"), nonce=1, rwsets=rwsets),))
        flags, _ = self.validate(block)
        assert flags == [(False, sim.V6)]

    def test_divergence_reported_before_a_stale_read(self):
        stale = [("k", (5, 5))]
        rwsets = [
            sim.ReadWriteSet(frozenset(stale), frozenset({("k", 1)})),
            sim.ReadWriteSet(frozenset(stale), frozenset({("k", 2)})),
        ]
        block = sim.Block(1, (endorsed_submission("t1", stale, [], endorsers=("E1", "E2"), nonce=1, rwsets=rwsets),))
        flags, _ = self.validate(block)
        assert flags == [(False, sim.V6)]  # first failure wins, V7 never reached

    def test_policy_shortfall_reported_before_anything_else(self):
        block = sim.Block(1, (
            endorsed_submission("t1", [("k", (9, 9))], [("k", 1)], endorsers=("E9",), nonce=1),
        ))
        flags, _ = self.validate(block, policy=all_of(E3))
        assert flags == [(False, sim.V4)]

    def test_illegitimate_endorser_fails_after_policy(self):
        block = sim.Block(1, (endorsed_submission("t1", [], [("k", 1)], endorsers=("E1",), nonce=1),))
        flags, _ = self.validate(block, endorsers=["E2", "E3"], policy=any_of(["E1", "E2", "E3"]))
        assert flags == [(False, sim.V5)]

    def test_bad_signature_fails_the_legitimacy_check(self):
        rwset = sim.ReadWriteSet(frozenset(), frozenset({("k", 1)}))
        submission = sim.Submission(
            proposal("t1", sim.ChaincodeOp.noop(), nonce=1),
            (sim.Endorsement("E1", rwset, signature_valid=False),),
        )
        flags, _ = self.validate(sim.Block(1, (submission,)))
        assert flags == [(False, sim.V5)]

    def test_skip_v7_applies_conflicting_writes(self):
        block = sim.Block(1, (
            endorsed_submission("t1", [("k", sim.VERSION_ZERO)], [("k", 1)], nonce=1),
            endorsed_submission("t2", [("k", sim.VERSION_ZERO)], [("k", 2)], nonce=2),
        ))
        flags, state = self.validate(block, skip=True)
        assert flags == [(True, None), (True, None)]
        assert state.entries["k"] == (2, (1, 1))

    def test_input_state_is_not_mutated(self):
        state = sim.KvStore({"k": (5, (1, 0))})
        block = sim.Block(2, (endorsed_submission("t1", [("k", (1, 0))], [("k", 9)], nonce=1),))
        self.validate(block, state=state)
        assert state.entries["k"] == (5, (1, 0))


class TestRunScenario:
    def test_fault_free_run_has_no_feared_events(self):
        config = basic_config(
            [
                (0, proposal("t1", sim.ChaincodeOp.set("a", 10), nonce=1)),
                (1, proposal("t2", sim.ChaincodeOp.transfer("a", "b", 4), nonce=2)),
            ]
        )
        report = sim.run_scenario(config)
        assert set(report.feared_event_counts.values()) == {0}
        assert [c.tx_id for c in report.committed if c.valid] == ["t1", "t2"]

    def test_one_fraudulent_endorser_under_any_policy_commits_an_invalid_tx(self):
        config = basic_config(
            [(0, proposal("bad", sim.ChaincodeOp.transfer("ghost", "sink", 5, valid=False), nonce=1))],
            behaviors={"E1": sim.EndorserBehavior(FRAUDULENT)},
        )
        report = sim.run_scenario(config)
        assert report.feared_event_counts[FearedEvent.INVALID_ACCEPTED] >= 1

    def test_one_censoring_endorser_under_all_policy_rejects_a_valid_tx(self):
        config = basic_config(
            [(0, proposal("good", sim.ChaincodeOp.set("a", 1), nonce=1))],
            policy=all_of(E3),
            behaviors={"E2": sim.EndorserBehavior(CENSORING)},
        )
        report = sim.run_scenario(config)
        assert report.feared_event_counts[FearedEvent.VALID_REJECTED] == 1
        assert any(r.reason == "censorship" for r in report.endorsement_refusals)

    def test_replayed_nonce_is_refused_and_counts_nothing(self):
        config = basic_config(
            [
                (0, proposal("t1", sim.ChaincodeOp.set("a", 1), nonce=7)),
                (1, proposal("t1-replay", sim.ChaincodeOp.set("a", 1, valid=False), nonce=7)),
            ]
        )
        report = sim.run_scenario(config)
        assert {r.failed_criterion for r in report.endorsement_refusals} == {sim.V3}
        assert set(report.feared_event_counts.values()) == {0}

    def test_same_seed_same_bytes(self):
        config = random_scenario(11)
        assert sim.run_scenario(config).to_json_bytes() == sim.run_scenario(config).to_json_bytes()

    def test_behavior_map_insertion_order_does_not_matter(self):
        workload = [(0, proposal("good", sim.ChaincodeOp.set("a", 1), nonce=1))]
        forward = {"E1": sim.EndorserBehavior(CENSORING), "E3": sim.EndorserBehavior(CRASHED)}
        backward = {"E3": sim.EndorserBehavior(CRASHED), "E1": sim.EndorserBehavior(CENSORING)}
        report_a = sim.run_scenario(basic_config(workload, behaviors=forward))
        report_b = sim.run_scenario(basic_config(workload, behaviors=backward))
        assert report_a.to_json_bytes() == report_b.to_json_bytes()

    def test_report_counts_match_a_recount_from_the_traces(self):
        for seed in range(6):
            config = random_scenario(seed)
            report = sim.run_scenario(config)
            recount = sim.detect_feared_events(
                report.committed, report.per_peer_state_digest, config.proposals()
            )
            assert recount == report.feared_event_counts

    def test_skip_v7_peer_diverges_from_every_correct_peer(self):
        config = basic_config(
            [
                (0, proposal("t1", sim.ChaincodeOp.set("k", 1), nonce=1)),
                (0, proposal("t2", sim.ChaincodeOp.set("k", 2), nonce=2)),
            ],
            peers=3,
            skip={2},
        )
        report = sim.run_scenario(config)
        assert report.feared_event_counts[FearedEvent.INCONSISTENT_READ] >= 2  # against both correct peers

    def test_committed_versions_strictly_increase_per_key(self):
        for seed in range(4):
            result = sim.simulate(random_scenario(seed))
            last_version: dict[str, tuple[int, int]] = {}
            entries = iter(result.report.committed)
            for block in result.blocks:
                for index, submission in enumerate(block.submissions):
                    entry = next(entries)
                    if not entry.valid:
                        continue
                    for key, _ in submission.endorsements[0].rwset.writes:
                        version = (block.block_no, index)
                        assert version > last_version.get(key, (0, 0))
                        last_version[key] = version

    def test_sequential_replay_matches_every_correct_peer(self):
        for seed in range(8):
            config = random_scenario(seed)
            result = sim.simulate(config)
            oracle = replay_committed(result)
            for peer, state in enumerate(result.peer_states):
                if peer not in config.skip_v7_peers:
                    assert state == oracle, f"seed {seed} peer {peer}"


class TestOrderingLiveness:
    def workload(self, steps):
        return [
            (step, proposal(f"t{i}", sim.ChaincodeOp.set(f"key{i}", i), nonce=i + 1))
            for i, step in enumerate(steps)
        ]

    def test_minority_crashes_still_commit_everything(self):
        config = basic_config(
            self.workload([0, 1, 5, 6]),
            orderers=sim.OrdererConfig(n=5, crash_schedule=((2, 0), (4, 1))),
            horizon=12,
        )
        report = sim.run_scenario(config)
        assert report.liveness_lost_at is None
        assert report.feared_event_counts[FearedEvent.VALID_REJECTED] == 0

    def test_majority_crashes_halt_block_production_safely(self):
        config = basic_config(
            self.workload([0, 1, 5, 7]),
            orderers=sim.OrdererConfig(n=5, crash_schedule=((2, 0), (4, 1), (6, 2))),
            horizon=12,
        )
        report = sim.run_scenario(config)
        assert report.liveness_lost_at == 6
        assert report.feared_event_counts[FearedEvent.VALID_REJECTED] >= 1  # the step-7 tx starves
        assert report.feared_event_counts[FearedEvent.INVALID_ACCEPTED] == 0
        assert report.feared_event_counts[FearedEvent.INCONSISTENT_READ] == 0

    def test_crashes_of_orderers_never_break_safety(self):
        for seed in range(10):
            config = random_scenario(seed, behavior_modes=(HONEST,), orderer_crashes=True)
            report = sim.run_scenario(config)
            assert report.feared_event_counts[FearedEvent.INVALID_ACCEPTED] == 0
            assert report.feared_event_counts[FearedEvent.INCONSISTENT_READ] == 0


class TestScenarioDocuments:
    def test_round_trip(self):
        config = random_scenario(5, skip_v7={0})
        parsed = sim.parse_scenario(sim.scenario_bytes(config).decode("utf-8"))
        assert parsed == config
        assert sim.scenario_digest(parsed) == sim.scenario_digest(config)

    def test_report_bytes_are_canonical(self):
        report = sim.run_scenario(random_scenario(3))
        data = report.to_json_bytes()
        assert data == sim.run_scenario(random_scenario(3)).to_json_bytes()
        assert data.endswith(b"\n")

    def test_config_validation(self):
        config = basic_config([(0, proposal("t", sim.ChaincodeOp.noop(), nonce=1))])
        for broken in (
            replace(config, peers=0),
            replace(config, horizon=-1),
            replace(config, orderers=sim.OrdererConfig(n=0)),
            replace(config, skip_v7_peers=frozenset({5})),
            replace(config, endorser_behaviors={"EX": sim.HONEST_BEHAVIOR}),
            replace(config, workload=((9, proposal("t", sim.ChaincodeOp.noop(), nonce=1)),)),
        ):
            with pytest.raises(sim.ConfigInvalid):
                sim.validate_config(broken)

    def test_duplicate_tx_ids_rejected(self):
        config = basic_config(
            [
                (0, proposal("t", sim.ChaincodeOp.noop(), nonce=1)),
                (1, proposal("t", sim.ChaincodeOp.noop(), nonce=2)),
            ]
        )
        with pytest.raises(sim.ConfigInvalid):
            sim.validate_config(config)

    def test_malformed_json_rejected(self):
        with pytest.raises(sim.ConfigInvalid):
            sim.parse_scenario("{not json")
        with pytest.raises(sim.ConfigInvalid):
            sim.parse_scenario('{"horizon": 3}')
