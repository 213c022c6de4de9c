"""Single-machine election: ID register, control qubit, candidate register.

Register layout, most significant first::

    [ID: n qubits] [control: 1 qubit] [candidates: m qubits]

A vote by voter ``j`` for candidate ``k`` negates the amplitude of every basis
state with ``ID = j``, ``control = 1`` and ``candidates = b_k``. After a
Hadamard on the control, the control-1 sector holds only the flipped
components, so post-selecting on it and reading the candidate register gives
the vote shares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qstate
from .compiler import GateOp, GateSequence, compile_sequence, controlled, single
from .errors import (
    ConfigError,
    DoubleVoteError,
    ImpossibleOutcomeError,
    InsufficientSamplesError,
    NoVotesError,
    QubitIndexError,
    ValidationError,
)
from .qstate import FLIP0, H, X, Z, ControlSpec, StateVector

BELL = "bell-pair"
W_STATE = "w-state"
UNIFORM = "uniform-basis"
CANDIDATE_KINDS = (BELL, W_STATE, UNIFORM)

ABSTAIN = None


def default_kind(num_candidates: int) -> str:
    if num_candidates == 2:
        return BELL
    if num_candidates == 3:
        return W_STATE
    return UNIFORM


def id_qubits(num_voters: int) -> int:
    return max(1, (num_voters - 1).bit_length())


@dataclass(frozen=True)
class ElectionConfig:
    """``choices[j]`` is a candidate index or ``None`` for an abstention."""

    num_voters: int
    num_candidates: int
    choices: tuple[int | None, ...]
    kind: str | None = None
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(self.choices))
        if self.kind is None:
            object.__setattr__(self, "kind", default_kind(self.num_candidates))
        if self.num_voters < 1:
            raise ValidationError(f"need at least one voter, got {self.num_voters}")
        if self.num_candidates < 2:
            raise ValidationError(f"need at least two candidates, got {self.num_candidates}")
        if self.kind not in CANDIDATE_KINDS:
            raise ValidationError(f"unknown candidate-state kind {self.kind!r}")
        if self.kind == BELL and self.num_candidates != 2:
            raise ValidationError("bell-pair candidate state holds exactly 2 candidates")
        if len(self.choices) != self.num_voters:
            raise ValidationError(
                f"{len(self.choices)} choices given for {self.num_voters} voters"
            )
        for j, ch in enumerate(self.choices):
            if ch is not None and not (isinstance(ch, (int, np.integer)) and 0 <= ch < self.num_candidates):
                raise ValidationError(f"voter {j}: choice {ch!r} is not a candidate index")
        if self.shots < 0:
            raise ValidationError("shots must be >= 0")

    @property
    def participating(self) -> int:
        return sum(ch is not None for ch in self.choices)

    def votes_for(self, candidate: int) -> int:
        return sum(ch == candidate for ch in self.choices)


@dataclass(frozen=True)
class CandidateBasisMap:
    """Bitstring whose phase a vote for each candidate flips, plus the state's support."""

    kind: str
    bitstrings: tuple[str, ...]
    support: tuple[str, ...]

    @property
    def num_qubits(self) -> int:
        return len(self.bitstrings[0])

    @property
    def k_eff(self) -> int:
        return len(self.support)

    def candidate_of(self, bits: str) -> int | None:
        try:
            return self.bitstrings.index(bits)
        except ValueError:
            return None


def candidate_basis_map(kind: str, num_candidates: int) -> CandidateBasisMap:
    K = num_candidates
    if kind == BELL:
        if K != 2:
            raise ValidationError("bell-pair candidate state holds exactly 2 candidates")
        # candidate 0 flips |11>, candidate 1 flips |00>
        return CandidateBasisMap(kind, ("11", "00"), ("00", "11"))
    if kind == W_STATE:
        if K < 2:
            raise ValidationError("w-state needs at least 2 candidates")
        m = K - 1
        bits = ("0" * m,) + tuple(format(1 << (k - 1), f"0{m}b") for k in range(1, K))
        return CandidateBasisMap(kind, bits, tuple(sorted(bits)))
    if kind == UNIFORM:
        m = max(1, (K - 1).bit_length())
        bits = tuple(format(k, f"0{m}b") for k in range(K))
        return CandidateBasisMap(kind, bits, bits)
    raise ValidationError(f"unknown candidate-state kind {kind!r}")


@dataclass(frozen=True)
class Layout:
    n: int
    m: int

    @property
    def id_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    @property
    def control(self) -> int:
        return self.n

    @property
    def candidate_qubits(self) -> tuple[int, ...]:
        return tuple(range(self.n + 1, self.n + 1 + self.m))

    @property
    def num_qubits(self) -> int:
        return self.n + 1 + self.m


def layout_for(config: ElectionConfig) -> Layout:
    return Layout(id_qubits(config.num_voters), candidate_basis_map(config.kind, config.num_candidates).num_qubits)


def prepare_id_register(num_voters: int) -> StateVector:
    """Uniform superposition over the first ``num_voters`` basis states."""
    if num_voters < 1:
        raise ValidationError("need at least one voter")
    n = id_qubits(num_voters)
    amps = np.zeros(2**n, dtype=complex)
    amps[:num_voters] = 1
    return qstate.set_amplitudes(amps)


def prepare_candidate_state(kind: str, num_candidates: int) -> StateVector:
    cmap = candidate_basis_map(kind, num_candidates)
    amps = np.zeros(2**cmap.num_qubits, dtype=complex)
    for bits in cmap.support:
        amps[int(bits, 2)] = 1
    return qstate.set_amplitudes(amps)


def _plus() -> StateVector:
    return qstate.set_amplitudes([1, 1])


def prepare_initial(config: ElectionConfig) -> StateVector:
    """``|IDs> ⊗ |+> ⊗ |ψ_cands>``."""
    return qstate.tensor_product(
        prepare_id_register(config.num_voters),
        _plus(),
        prepare_candidate_state(config.kind, config.num_candidates),
    )


def vote_op(layout: Layout, cmap: CandidateBasisMap, voter: int, choice: int) -> GateOp:
    """Multi-controlled phase flip for one ballot (controls on ID, control qubit, candidates)."""
    id_bits = format(voter, f"0{layout.n}b")
    b = cmap.bitstrings[choice]
    cq = layout.candidate_qubits
    controls = [(q, int(bit)) for q, bit in zip(layout.id_qubits, id_bits)]
    controls.append((layout.control, 1))
    controls += [(q, int(bit)) for q, bit in zip(cq[:-1], b[:-1])]
    gate = Z if b[-1] == "1" else FLIP0
    return controlled("VOTE", gate, controls, cq[-1])


def cast_vote(state: StateVector, config: ElectionConfig, voter: int, choice: int | None) -> StateVector:
    """Apply one ballot to ``state``; stateless (see :class:`CentralizedElection` for the ledger)."""
    if not 0 <= voter < config.num_voters:
        raise QubitIndexError(f"voter {voter} out of range for {config.num_voters} voters")
    if choice is None:
        return state
    if not 0 <= choice < config.num_candidates:
        raise ValidationError(f"choice {choice} is not a candidate index")
    layout = layout_for(config)
    op = vote_op(layout, candidate_basis_map(config.kind, config.num_candidates), voter, choice)
    return qstate.apply_controlled(state, op.spec, op.matrix)


class CentralizedElection:
    """Holds the evolving state, the emitted vote circuit and the participation ledger."""

    def __init__(self, config: ElectionConfig):
        self.config = config
        self.layout = layout_for(config)
        self.basis = candidate_basis_map(config.kind, config.num_candidates)
        self.state = prepare_initial(config)
        self.circuit = GateSequence(self.layout.num_qubits)
        self._voted: set[int] = set()

    def cast_vote(self, voter: int, choice: int | None) -> StateVector:
        if voter in self._voted:
            raise DoubleVoteError(f"voter {voter} has already voted")
        self.state = cast_vote(self.state, self.config, voter, choice)
        self._voted.add(voter)
        if choice is not None:
            self.circuit.append(vote_op(self.layout, self.basis, voter, choice))
        return self.state

    def run(self, order: Sequence[int] | None = None) -> StateVector:
        for j in order if order is not None else range(self.config.num_voters):
            self.cast_vote(j, self.config.choices[j])
        return self.state

    def tally_exact(self) -> "TallyResult":
        return tally_exact(self.state, self.config)

    def tally_sampled(self, shots: int | None = None, seed: int | None = None, method: str = "joint") -> "TallyResult":
        return tally_sampled(
            self.state,
            self.config,
            self.config.shots if shots is None else shots,
            self.config.seed if seed is None else seed,
            method=method,
        )

    def preparation_circuit(self) -> GateSequence:
        return preparation_circuit(self.config)

    def full_circuit(self, compiled: bool = True) -> GateSequence:
        """Preparation, the cast votes, and the tallying Hadamard."""
        seq = GateSequence(self.layout.num_qubits)
        seq.extend(self.preparation_circuit())
        seq.extend(self.circuit)
        seq.append(single("H", H, self.layout.control))
        return compile_sequence(seq) if compiled else seq


def preparation_circuit(config: ElectionConfig) -> GateSequence:
    """Gate-level preparation of the initial state, where one is known.

    Available for power-of-two ``N``, the Bell pair, the three-candidate W state
    and power-of-two uniform registers.
    """
    layout = layout_for(config)
    N, K = config.num_voters, config.num_candidates
    if N != 2**layout.n:
        raise ConfigError(f"no gate-level ID preparation for N={N} (not a power of two)")
    seq = GateSequence(layout.num_qubits)
    for q in layout.id_qubits:
        seq.append(single("H", H, q))
    seq.append(single("H", H, layout.control))
    c = layout.candidate_qubits
    if config.kind == BELL:
        seq.append(single("H", H, c[0]))
        seq.append(controlled("CX", X, [(c[0], 1)], c[1]))
    elif config.kind == W_STATE and K == 3:
        theta = 2 * math.acos(math.sqrt(2 / 3))
        seq.append(single("RY", qstate.ry(theta), c[0]))
        seq.append(controlled("CH", H, [(c[0], 0)], c[1]))
    elif config.kind == UNIFORM and K == 2**layout.m:
        for q in c:
            seq.append(single("H", H, q))
    else:
        raise ConfigError(f"no gate-level preparation for {config.kind} with K={K}")
    return seq


def run_election(config: ElectionConfig) -> CentralizedElection:
    """Prepare the initial state and cast every ballot in ID order."""
    election = CentralizedElection(config)
    election.run()
    return election


# ---------------------------------------------------------------- tallying


@dataclass
class TallyResult:
    mode: str
    post_selection_probability: float
    probabilities: dict[int, float]
    counts: dict[int, int]
    participating_votes: int
    normalization: float
    shots: int = 0
    accepted_shots: int = 0
    standard_errors: dict[int, float] = field(default_factory=dict)
    outcome_frequencies: dict[str, float] = field(default_factory=dict)
    rounding_ties: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "post_selection_probability": self.post_selection_probability,
            "probabilities": {str(k): v for k, v in self.probabilities.items()},
            "counts": {str(k): v for k, v in self.counts.items()},
            "participating_votes": self.participating_votes,
            "normalization": self.normalization,
            "rounding_ties": list(self.rounding_ties),
        }
        if self.mode == "sampled":
            d.update(
                shots=self.shots,
                accepted_shots=self.accepted_shots,
                standard_errors={str(k): v for k, v in self.standard_errors.items()},
                outcome_frequencies=dict(self.outcome_frequencies),
            )
        return d


def _round_counts(shares: dict[int, float], total: int) -> tuple[dict[int, int], tuple[int, ...]]:
    counts, ties = {}, []
    for k, p in shares.items():
        x = p * total
        frac = x - math.floor(x)
        if abs(frac - 0.5) < 1e-9:
            ties.append(k)
            x = math.floor(x) + 0.5
        counts[k] = int(round(x))  # half-to-even
    return counts, tuple(ties)


def _difference_sector(state: StateVector, config: ElectionConfig) -> StateVector:
    return qstate.apply_single(state, H, layout_for(config).control)


def tally_exact(state: StateVector, config: ElectionConfig) -> TallyResult:
    """Hadamard on the control, post-select control=1, read the candidate marginal."""
    layout = layout_for(config)
    cmap = candidate_basis_map(config.kind, config.num_candidates)
    s = _difference_sector(state, config)
    try:
        p, post = qstate.postselect(s, layout.control, 1)
    except ImpossibleOutcomeError as exc:
        raise NoVotesError("no votes cast") from exc
    marg = qstate.marginal_probabilities(post, layout.candidate_qubits)
    probs = {k: float(marg[int(b, 2)]) for k, b in enumerate(cmap.bitstrings)}
    V = config.participating
    counts, ties = _round_counts(probs, V)
    return TallyResult("exact", p, probs, counts, V, math.sqrt(p), rounding_ties=ties)


def tally_sampled(
    state: StateVector,
    config: ElectionConfig,
    shots: int,
    seed: int = 0,
    method: str = "joint",
) -> TallyResult:
    """Repeat {H on control, measure control, if 1 measure candidates} ``shots`` times.

    ``method="joint"`` samples all shots from the exact joint distribution of the
    control and candidate register with one generator seeded by ``seed``.
    ``method="trajectory"`` evolves a copy of the state per shot with generator
    seed ``seed + shot``; it is slow but literal.
    """
    if shots < 1:
        raise InsufficientSamplesError("shots must be >= 1")
    layout = layout_for(config)
    cmap = candidate_basis_map(config.kind, config.num_candidates)
    m = layout.m
    s = _difference_sector(state, config)
    if method == "joint":
        joint = qstate.marginal_probabilities(s, (layout.control,) + layout.candidate_qubits)
        joint = joint / joint.sum()
        hist = np.random.default_rng(seed).multinomial(shots, joint)
        accepted_hist = hist[2**m:]
    elif method == "trajectory":
        accepted_hist = np.zeros(2**m, dtype=np.int64)
        for i in range(shots):
            rng = np.random.default_rng(seed + i)
            rec, after = qstate.measure_qubit(s, layout.control, rng)
            if rec.outcome != 1:
                continue
            bits = 0
            for q in layout.candidate_qubits:
                r, after = qstate.measure_qubit(after, q, rng)
                bits = 2 * bits + r.outcome
            accepted_hist[bits] += 1
    else:
        raise ValueError(f"unknown sampling method {method!r}")

    accepted = int(accepted_hist.sum())
    if accepted == 0:
        raise InsufficientSamplesError(f"no shot out of {shots} landed in the difference sector")
    freqs = {k: float(accepted_hist[int(b, 2)]) / accepted for k, b in enumerate(cmap.bitstrings)}
    errors = {k: math.sqrt(f * (1 - f) / accepted) for k, f in freqs.items()}
    outcomes = {format(i, f"0{m}b"): float(c) / accepted for i, c in enumerate(accepted_hist) if c}
    V = config.participating
    counts, ties = _round_counts(freqs, V)
    p = accepted / shots
    return TallyResult(
        "sampled",
        p,
        freqs,
        counts,
        V,
        math.sqrt(p),
        shots=shots,
        accepted_shots=accepted,
        standard_errors=errors,
        outcome_frequencies=outcomes,
        rounding_ties=ties,
    )


def difference_state(config: ElectionConfig) -> StateVector:
    """Normalized control-1 sector after the tallying Hadamard (ID ⊗ candidates)."""
    election = run_election(config)
    layout = election.layout
    s = _difference_sector(election.state, config)
    _, post = qstate.postselect(s, layout.control, 1)
    keep = np.take(post.tensor(), 1, axis=layout.control).reshape(-1)
    return StateVector(keep)
