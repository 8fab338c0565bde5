"""Execute-order-validate pipeline simulator with injectable faults."""

from ..risk_ledger import FearedEvent
from .engine import (
    Block,
    CommittedTx,
    Endorsement,
    NO_RESPONSE,
    NoResponse,
    OrdererCluster,
    PeerDigest,
    Refusal,
    RefusalRecord,
    RunReport,
    SimResult,
    Submission,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    assemble_submission,
    detect_feared_events,
    endorse,
    ordering_step,
    run_scenario,
    simulate,
    validate_block,
)
from .scenario import (
    BEHAVIOR_MODES,
    ConfigInvalid,
    EndorserBehavior,
    HONEST_BEHAVIOR,
    OrdererConfig,
    ScenarioConfig,
    TxProposal,
    behavior_from_mode,
    censorship_probe_scenario,
    dosed,
    fraud_probe_scenario,
    parse_scenario,
    scenario_bytes,
    scenario_digest,
    scenario_from_dict,
    scenario_to_dict,
    validate_config,
)
from .state import (
    AppFailure,
    ChaincodeOp,
    EMPTY_RWSET,
    KvStore,
    ReadWriteSet,
    VERSION_ZERO,
    claimed_effects,
    execute_chaincode,
)

__all__ = [name for name in dir() if not name.startswith("_")]
