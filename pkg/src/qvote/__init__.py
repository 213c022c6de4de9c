"""Phase-encoded quantum voting on a dense state-vector simulator."""
from .centralized import (
    BELL,
    UNIFORM,
    W_STATE,
    CentralizedElection,
    ElectionConfig,
    TallyResult,
    run_election,
    tally_exact,
    tally_sampled,
)
from .compiler import (
    GateOp,
    GateSequence,
    ccx_to_ccz,
    ccz_to_ccx,
    compile_sequence,
    expand_ccu,
    expand_multi_controlled_z,
    gate_count_report,
)
from .config import parse_config
from .distributed import AdversaryAction, DistributedElection, VerificationResult
from .qstate import StateVector, new_zero_state

__version__ = "0.1.0"

__all__ = [
    "BELL",
    "UNIFORM",
    "W_STATE",
    "AdversaryAction",
    "CentralizedElection",
    "DistributedElection",
    "ElectionConfig",
    "GateOp",
    "GateSequence",
    "StateVector",
    "TallyResult",
    "VerificationResult",
    "ccx_to_ccz",
    "ccz_to_ccx",
    "compile_sequence",
    "expand_ccu",
    "expand_multi_controlled_z",
    "gate_count_report",
    "new_zero_state",
    "parse_config",
    "run_election",
    "tally_exact",
    "tally_sampled",
]
