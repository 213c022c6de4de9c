"""Distributed voting: a center and N voters exchanging qubits over channels.

All qubits live in one backing :class:`~qvote.qstate.StateVector`. Actors only
touch qubits they hold; every gate, transfer and measurement goes through a
:class:`QubitHandle` whose owner is checked and logged, so the event trace is a
complete custody record.

Per voter the center prepares a shared candidate state ``Σ_s |s>_voter |s>_center``
over the candidate labels (the Bell pair ``|00> + |11>`` for two candidates) and
sends the voter half. A voting round ships a ``|+>`` control qubit to the voter,
who applies a phase flip controlled on it and on their half of the pair, then
returns it. Tallying applies H to each control: outcome 1 (probability
``1/K_eff`` for a cast vote, 0 for an abstention) leaves the pair in
``|s_k>|s_k>``, which the center reads from its own half.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import qstate
from .centralized import (
    BELL,
    ElectionConfig,
    TallyResult,
    candidate_basis_map,
)
from .compiler import expand_multi_controlled_z
from .factored import FactoredState
from .errors import (
    CapacityError,
    ChannelLossError,
    ConfigError,
    DoubleVoteError,
    ProtocolIncompleteError,
    QVoteError,
    StatisticsError,
)
from .qstate import FLIP0, H, X, Z, ControlSpec

CENTER = "center"
TO_VOTER = "to-voter"
TO_CENTER = "to-center"
DIRECTIONS = (TO_VOTER, TO_CENTER)

STAGES = ("setup", "voting", "verification", "reissue")
ADVERSARY_KINDS = ("measure-in-channel", "phase-tamper", "bit-flip", "swap-with-fresh")

DEFAULT_VERIFY_ROUNDS = 200
DEFAULT_THRESHOLD = 0.5
MIN_VERIFY_ROUNDS = 10
REISSUE_LIMIT = 32
# live-qubit budget for a whole simulation; entangled groups are separately capped by qstate.MAX_QUBITS
MAX_PROTOCOL_QUBITS = 128


def voter_name(j: int) -> str:
    return f"voter{j}"


def channel_name(j: int, direction: str) -> str:
    return f"channel{j}:{direction}"


class CustodyError(QVoteError):
    """An actor tried to act on a qubit it does not hold."""


@dataclass
class QubitHandle:
    hid: int
    voter: int
    lineage: str
    owner: str


@dataclass(frozen=True)
class ProtocolEvent:
    seq: int
    time: int
    actor: str
    action: str
    payload: dict

    def to_line(self) -> str:
        body = json.dumps({"t": self.time, **self.payload}, sort_keys=True, separators=(",", ":"))
        return f"{self.seq} {self.actor} {self.action} {body}"


def parse_trace_line(line: str) -> ProtocolEvent:
    seq, actor, action, body = line.split(" ", 3)
    payload = json.loads(body)
    t = payload.pop("t")
    return ProtocolEvent(int(seq), int(t), actor, action, payload)


@dataclass(frozen=True)
class AdversaryAction:
    """Tampering applied to matching qubits while they sit in a channel.

    ``stage`` and ``round`` narrow the trigger; ``None`` matches every stage or
    round. ``lineage`` restricts the action to one kind of qubit.
    """

    kind: str
    voter: int
    direction: str = TO_VOTER
    stage: str | None = None
    round: int | None = None
    lineage: str | None = None
    basis: str = "Z"
    angle: float = 0.0

    def matches(self, voter: int, direction: str, stage: str, round_: int | None, lineage: str) -> bool:
        return (
            self.voter == voter
            and self.direction == direction
            and (self.stage is None or self.stage == stage)
            and (self.round is None or self.round == round_)
            and (self.lineage is None or self.lineage == lineage)
        )


@dataclass(frozen=True)
class ChannelFault:
    """Loss or extra delay on a channel; for exercising the trace, not physics."""

    voter: int
    direction: str
    kind: str = "loss"
    stage: str | None = None
    delay: int = 1


@dataclass(frozen=True)
class VerificationResult:
    voter: int
    rounds: int
    xx: float
    zz: float
    verdict: str
    threshold: float

    @property
    def intact(self) -> bool:
        return self.verdict == "intact"


@dataclass
class DistributedTally:
    result: TallyResult
    ballots: dict[str, int | None]
    unresolved: int
    inconsistent: int
    attempts: int
    voter_ballots: dict[int, int | None] | None = None


@dataclass(frozen=True)
class DistributedBasis:
    """Voter-side label per candidate and the labels in the shared state."""

    labels: tuple[str, ...]
    support: tuple[str, ...]

    @property
    def num_qubits(self) -> int:
        return len(self.labels[0])

    @property
    def k_eff(self) -> int:
        return len(self.support)

    def state(self) -> np.ndarray:
        m = self.num_qubits
        amps = np.zeros(2**m, dtype=complex)
        for s in self.support:
            amps[int(s, 2)] = 1
        return amps / np.linalg.norm(amps)


def distributed_basis(kind: str, num_candidates: int) -> DistributedBasis:
    cmap = candidate_basis_map(kind, num_candidates)
    if kind == BELL:
        # the pair |00>+|11> is split one qubit each; the voter's bit names the candidate
        return DistributedBasis(tuple(b[0] for b in cmap.bitstrings), ("0", "1"))
    return DistributedBasis(cmap.bitstrings, cmap.support)


@dataclass(order=True)
class _Delivery:
    time: int
    seq: int
    voter: int = field(compare=False)
    direction: str = field(compare=False)
    kind: str = field(compare=False)
    handles: tuple = field(compare=False)


class _Voter:
    def __init__(self, sim: "DistributedElection", j: int):
        self.sim = sim
        self.j = j
        self.name = voter_name(j)
        self.candidate: list[QubitHandle] = []
        self.verification: list[QubitHandle] = []
        self.choice: int | None = None

    def on_receive(self, kind: str, handles: tuple[QubitHandle, ...]) -> None:
        if kind == "pair-half":
            self.candidate = list(handles)
        elif kind == "verify-half":
            self.verification.append(handles[0])
        elif kind == "control":
            (ctrl,) = handles
            self.sim._apply_vote(self, ctrl, self.choice)
            self.sim._send(self.name, ctrl, self.j, TO_CENTER, "control-return")


class _Center:
    def __init__(self, sim: "DistributedElection"):
        self.sim = sim
        self.name = CENTER
        self.candidate: dict[int, list[QubitHandle]] = {}
        self.verification: dict[int, list[QubitHandle]] = {}
        self.controls: dict[int, QubitHandle] = {}
        self.issued: set[int] = set()
        self.flags: dict[int, int] = {}

    def on_receive(self, kind: str, handles: tuple[QubitHandle, ...], voter: int) -> None:
        if kind == "control-return":
            (ctrl,) = handles
            self.controls[voter] = ctrl
            self.sim._set_flag(voter)


class DistributedElection:
    """Event-driven simulation of the center/voter protocol.

    Typical use::

        sim = DistributedElection(config)
        sim.setup()
        for j, choice in enumerate(config.choices):
            sim.voting_round(j, choice)
        tally = sim.distributed_tally()
    """

    def __init__(
        self,
        config: ElectionConfig,
        pairs_per_voter: int = 1,
        execution: str = "direct",
        seed: int | None = None,
    ):
        if pairs_per_voter < 1:
            raise ConfigError("pairs_per_voter must be >= 1")
        if execution not in ("direct", "decomposed"):
            raise ConfigError(f"unknown execution mode {execution!r}")
        self.config = config
        self.pairs_per_voter = pairs_per_voter
        self.execution = execution
        self.basis = distributed_basis(config.kind, config.num_candidates)
        self.rng = np.random.default_rng(config.seed if seed is None else seed)

        self.backing = FactoredState()
        self.handles: list[QubitHandle] = []
        self.trace: list[ProtocolEvent] = []
        self.time = 0
        self._queue: list[_Delivery] = []
        self.adversaries: list[AdversaryAction] = []
        self.faults: list[ChannelFault] = []
        self.center = _Center(self)
        self.voters = [_Voter(self, j) for j in range(config.num_voters)]
        self.stage = "setup"
        self.round: int | None = None
        self._is_setup = False
        self._round_open = False
        self._tallied = False
        self._anonymous_ids: dict[int, str] | None = None

        need = self.qubits_per_voter * config.num_voters
        if need > MAX_PROTOCOL_QUBITS:
            raise CapacityError(
                f"{config.num_voters} voters x {self.qubits_per_voter} qubits exceeds {MAX_PROTOCOL_QUBITS}"
            )

    @property
    def qubits_per_voter(self) -> int:
        return 2 * self.basis.num_qubits + 2 * (self.pairs_per_voter - 1)

    # ------------------------------------------------------------ plumbing

    def _log(self, actor: str, action: str, **payload) -> None:
        self.trace.append(ProtocolEvent(len(self.trace), self.time, actor, action, payload))

    @property
    def state(self) -> qstate.StateVector:
        """Dense view of every live qubit, ordered by handle id; for small diagnostics."""
        return self.backing.to_statevector()

    def _axis(self, h: QubitHandle) -> int:
        """Position of ``h`` in :attr:`state`."""
        return self.backing.keys.index(h.hid)

    def _prepare(self, amplitudes: np.ndarray, lineages: list[str], voter: int, actor: str = CENTER) -> list[QubitHandle]:
        out = []
        for lin in lineages:
            h = QubitHandle(len(self.handles), voter, lin, actor)
            self.handles.append(h)
            out.append(h)
        self.backing.add(amplitudes, [h.hid for h in out])
        self._log(actor, "prepare", qubits=[h.hid for h in out], lineage=lineages, voter=voter)
        return out

    def _require(self, actor: str, handles) -> None:
        for h in handles:
            if h.owner != actor:
                raise CustodyError(f"{actor} does not hold qubit {h.hid} (owner {h.owner})")

    def _apply(self, actor: str, label: str, gate, target: QubitHandle, controls=()) -> None:
        self._require(actor, [target] + [h for h, _ in controls])
        self.backing.apply(gate, target.hid, [(h.hid, b) for h, b in controls])
        self._log(
            actor,
            "apply-gate",
            gate=label,
            target=target.hid,
            controls=[[h.hid, b] for h, b in controls],
            voter=target.voter,
        )

    def _measure(self, actor: str, h: QubitHandle, basis: str = "Z", release: bool = True, log: bool = True) -> int:
        self._require(actor, [h])
        if basis == "X":
            self.backing.apply(H, h.hid)
        outcome = self.backing.measure(h.hid, self.rng)
        if release:
            self._release(h)
        if log:
            self._log(actor, "measure", qubit=h.hid, basis=basis, outcome=outcome, released=release)
        return outcome

    def _release(self, h: QubitHandle) -> None:
        self.backing.release(h.hid)
        h.owner = "retired"

    def _adversary(self, h: QubitHandle, action: AdversaryAction) -> None:
        b = self.backing
        outcome = None
        if action.kind == "measure-in-channel":
            if action.basis == "X":
                b.apply(H, h.hid)
            outcome = b.measure(h.hid, self.rng)
            if action.basis == "X":
                b.apply(H, h.hid)
        elif action.kind == "phase-tamper":
            b.apply(qstate.phase_gate(action.angle), h.hid)
        elif action.kind == "bit-flip":
            b.apply(X, h.hid)
        elif action.kind == "swap-with-fresh":
            # the original leaves with the adversary; a |0> takes its place
            if b.measure(h.hid, self.rng):
                b.apply(X, h.hid)
        self._log(
            "adversary",
            "adversary",
            kind=action.kind,
            qubit=h.hid,
            voter=action.voter,
            direction=action.direction,
            outcome=outcome,
        )

    def _send(self, actor: str, h: QubitHandle | list[QubitHandle], voter: int, direction: str, kind: str) -> None:
        hs = tuple(h) if isinstance(h, list) else (h,)
        self._require(actor, hs)
        delay = 1
        lost = False
        for f in self.faults:
            if f.voter == voter and f.direction == direction and (f.stage is None or f.stage == self.stage):
                if f.kind == "loss":
                    lost = True
                else:
                    delay += f.delay
        for q in hs:
            q.owner = channel_name(voter, direction)
            self._log(actor, "send", qubit=q.hid, voter=voter, direction=direction, kind=kind, lineage=q.lineage)
        for q in hs:
            for a in self.adversaries:
                if a.matches(voter, direction, self.stage, self.round, q.lineage):
                    self._adversary(q, a)
        if lost:
            for q in hs:
                self.backing.measure(q.hid, self.rng)
                self._release(q)
                q.owner = "lost"
                self._log("channel", "loss", qubit=q.hid, voter=voter, direction=direction)
            raise ChannelLossError(f"channel {channel_name(voter, direction)} dropped {kind}")
        heapq.heappush(self._queue, _Delivery(self.time + delay, len(self.trace), voter, direction, kind, hs))

    def _run(self) -> None:
        """Deliver queued messages in logical-time order until the network is idle."""
        while self._queue:
            d = heapq.heappop(self._queue)
            self.time = max(self.time, d.time)
            receiver = self.voters[d.voter] if d.direction == TO_VOTER else self.center
            for q in d.handles:
                q.owner = receiver.name
                self._log(receiver.name, "receive", qubit=q.hid, voter=d.voter, kind=d.kind)
            if d.direction == TO_VOTER:
                receiver.on_receive(d.kind, d.handles)
            else:
                receiver.on_receive(d.kind, d.handles, d.voter)

    # ----------------------------------------------------------- protocol

    def inject_adversary(self, action: AdversaryAction) -> None:
        if action.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"unknown adversary kind {action.kind!r}")
        if not 0 <= action.voter < self.config.num_voters:
            raise ConfigError(f"adversary targets nonexistent channel of voter {action.voter}")
        if action.direction not in DIRECTIONS:
            raise ConfigError(f"unknown channel direction {action.direction!r}")
        if action.stage is not None and action.stage not in STAGES:
            raise ConfigError(f"unknown stage {action.stage!r}")
        if action.round is not None and action.round < 0:
            raise ConfigError("adversary round must be >= 0")
        if action.basis not in ("X", "Z"):
            raise ConfigError(f"measurement basis must be X or Z, got {action.basis!r}")
        self.adversaries.append(action)

    def inject_fault(self, fault: ChannelFault) -> None:
        if not 0 <= fault.voter < self.config.num_voters or fault.direction not in DIRECTIONS:
            raise ConfigError("fault references a nonexistent channel")
        if fault.kind not in ("loss", "delay"):
            raise ConfigError(f"unknown fault kind {fault.kind!r}")
        self.faults.append(fault)

    def _prepare_pair(self, j: int, lineage: str) -> tuple[list[QubitHandle], list[QubitHandle]]:
        """Center prepares ``Σ_s |s>|s>`` and returns (voter half, center half)."""
        m = self.basis.num_qubits
        v = self._prepare(self.basis.state(), [f"{lineage}-voter-side"] * m, j)
        c = self._prepare(np.eye(2**m, dtype=complex)[0], [f"{lineage}-center-side"] * m, j)
        for a, b in zip(v, c):
            self._apply(CENTER, "CX", X, b, [(a, 1)])
        return v, c

    def _prepare_bell(self, j: int) -> tuple[QubitHandle, QubitHandle]:
        a, b = self._prepare(np.array([1, 0, 0, 0], dtype=complex), ["verification-pair"] * 2, j)
        self._apply(CENTER, "H", H, a)
        self._apply(CENTER, "CX", X, b, [(a, 1)])
        return a, b

    def setup(self) -> None:
        """Prepare and distribute each voter's candidate pair and verification pairs."""
        if self._is_setup:
            raise ConfigError("setup already ran")
        self.stage, self.round = "setup", None
        for j in range(self.config.num_voters):
            v, c = self._prepare_pair(j, "candidate")
            self.center.candidate[j] = c
            self._send(CENTER, v, j, TO_VOTER, "pair-half")
            keep = []
            for _ in range(self.pairs_per_voter - 1):
                a, b = self._prepare_bell(j)
                keep.append(b)
                self._send(CENTER, a, j, TO_VOTER, "verify-half")
            self.center.verification[j] = keep
            self._run()
        self._is_setup = True

    def _vote_gate(self, choice: int):
        label = self.basis.labels[choice]
        return label, (Z if label[-1] == "1" else FLIP0)

    def _apply_vote(self, voter: _Voter, ctrl: QubitHandle, choice: int | None) -> None:
        if choice is None:
            return
        label, gate = self._vote_gate(choice)
        cand = voter.candidate
        controls = [(ctrl, 1)] + [(h, int(b)) for h, b in zip(cand[:-1], label[:-1])]
        target = cand[-1]
        if self.execution == "direct":
            self._apply(voter.name, "CCZ" if len(controls) == 2 else "CZ" if len(controls) == 1 else "MCZ",
                        gate, target, controls)
            return
        # decomposed: lower through the compiler on a local index space
        local = [h for h, _ in controls] + [target]
        need = max(len(controls) - 2, 0)
        ancillas = []
        if need:
            ancillas = self._prepare(np.eye(2**need, dtype=complex)[0], ["ancilla"] * need, voter.j, voter.name)
        local += ancillas
        spec = ControlSpec(tuple((i, b) for i, (_, b) in enumerate(controls)), len(controls))
        seq = expand_multi_controlled_z(
            spec,
            ancillas=list(range(len(controls) + 1, len(local))),
            flip_on=int(label[-1]),
            num_qubits=len(local),
        )
        for op in seq:
            self._apply(voter.name, op.label, op.matrix, local[op.target],
                        [(local[q], b) for q, b in op.controls])
        for a in ancillas:
            self._measure(voter.name, a)

    def _set_flag(self, j: int) -> None:
        (flag,) = self._prepare(np.array([1, 0], dtype=complex), ["flag"], j)
        self._apply(CENTER, "X", X, flag)
        outcome = self._measure(CENTER, flag)
        self.center.flags[j] = outcome

    def has_voted(self, j: int) -> bool:
        return self.center.flags.get(j, 0) == 1

    def voting_round(self, j: int, choice: int | None) -> list[ProtocolEvent]:
        """Run one voter's round; returns the events it produced."""
        if not self._is_setup:
            raise ProtocolIncompleteError("setup has not run")
        if not 0 <= j < self.config.num_voters:
            raise ConfigError(f"no voter {j}")
        if choice is not None and not 0 <= choice < self.config.num_candidates:
            raise ConfigError(f"choice {choice} is not a candidate index")
        start = len(self.trace)
        if self.has_voted(j) or self._round_open:
            reason = "already voted" if self.has_voted(j) else "another round in progress"
            self._log(CENTER, "reject", voter=j, reason=reason)
            raise DoubleVoteError(f"voter {j}: {reason}")
        self._round_open = True
        self.stage, self.round = "voting", j
        try:
            self.voters[j].choice = choice
            (ctrl,) = self._prepare(np.array([1, 0], dtype=complex), ["control"], j)
            self._apply(CENTER, "H", H, ctrl)
            self.center.issued.add(j)
            self._send(CENTER, ctrl, j, TO_VOTER, "control")
            self._run()
        finally:
            self._round_open = False
        return self.trace[start:]

    def run_rounds(self) -> None:
        for j, choice in enumerate(self.config.choices):
            self.voting_round(j, choice)

    # -------------------------------------------------------- verification

    def pair_correlations(self, a: QubitHandle, b: QubitHandle) -> tuple[float, float]:
        """Exact (<XX>, <ZZ>) of two live qubits; an omniscient diagnostic."""
        pz = self.backing.marginal([a.hid, b.hid])
        self.backing.apply(H, a.hid)
        self.backing.apply(H, b.hid)
        px = self.backing.marginal([a.hid, b.hid])
        self.backing.apply(H, a.hid)
        self.backing.apply(H, b.hid)
        parity = np.array([1, -1, -1, 1])
        return float(px @ parity), float(pz @ parity)

    def verify_entanglement(
        self,
        j: int,
        rounds: int = DEFAULT_VERIFY_ROUNDS,
        threshold: float = DEFAULT_THRESHOLD,
    ) -> VerificationResult:
        """Spend sacrificial Bell pairs measuring ZZ (even rounds) and XX (odd rounds).

        Pre-distributed verification pairs are used first; after that the
        center prepares and sends a fresh pair each round.
        """
        if rounds < MIN_VERIFY_ROUNDS:
            raise StatisticsError(f"need at least {MIN_VERIFY_ROUNDS} verification rounds, got {rounds}")
        if not self._is_setup:
            raise ProtocolIncompleteError("setup has not run")
        voter = self.voters[j]
        sums = {"X": 0, "Z": 0}
        n = {"X": 0, "Z": 0}
        self.stage = "verification"
        for r in range(rounds):
            self.round = r
            basis = "Z" if r % 2 == 0 else "X"
            if voter.verification and self.center.verification[j]:
                a = voter.verification.pop(0)
                b = self.center.verification[j].pop(0)
            else:
                a, b = self._prepare_bell(j)
                self._send(CENTER, a, j, TO_VOTER, "verify-half")
                self._run()
                voter.verification.remove(a)
            va = self._measure(voter.name, a, basis)
            vb = self._measure(CENTER, b, basis)
            sums[basis] += 1 - 2 * (va ^ vb)
            n[basis] += 1
        xx = sums["X"] / n["X"]
        zz = sums["Z"] / n["Z"]
        verdict = "disturbed" if min(xx, zz) < threshold else "intact"
        result = VerificationResult(j, rounds, xx, zz, verdict, threshold)
        self._log(CENTER, "verify", voter=j, rounds=rounds, xx=xx, zz=zz, verdict=verdict)
        return result

    # ------------------------------------------------------------- tallying

    def _read_center_label(self, j: int) -> str:
        bits = "".join(str(self._measure(CENTER, h)) for h in self.center.candidate[j])
        self.center.candidate[j] = []
        return bits

    def _discard_pair(self, j: int) -> None:
        for h in self.center.candidate[j]:
            self._measure(CENTER, h)
        for h in self.voters[j].candidate:
            if h.owner == voter_name(j):
                self._measure(voter_name(j), h)
        self.center.candidate[j] = []
        self.voters[j].candidate = []

    def _reissue(self, j: int, attempt: int) -> None:
        """Fresh pair and control for voter ``j``; the voter re-applies their choice."""
        self.stage, self.round = "reissue", attempt
        v, c = self._prepare_pair(j, "candidate")
        self.center.candidate[j] = c
        self._send(CENTER, v, j, TO_VOTER, "pair-half")
        self._run()
        (ctrl,) = self._prepare(np.array([1, 0], dtype=complex), ["control"], j)
        self._apply(CENTER, "H", H, ctrl)
        self._send(CENTER, ctrl, j, TO_VOTER, "control")
        self._run()

    def _tally_voter_exact(self, j: int) -> tuple[int | None, float, bool]:
        ctrl = self.center.controls[j]
        self._apply(CENTER, "H", H, ctrl)
        p1 = float(self.backing.marginal([ctrl.hid])[1])
        self._log(CENTER, "measure", qubit=ctrl.hid, basis="Z", mode="exact", p1=p1)
        if p1 < qstate.ZERO_BRANCH_TOL:
            return None, p1, True
        self.backing.postselect(ctrl.hid, 1)
        # both halves are inspected: the center's reading must match the voter's
        m = self.basis.num_qubits
        keys = [h.hid for h in self.voters[j].candidate] + [h.hid for h in self.center.candidate[j]]
        marg = self.backing.marginal(keys)
        i = int(np.argmax(marg))
        bits, p = format(i, f"0{2 * m}b"), float(marg[i])
        own, label = bits[:m], bits[m:]
        consistent = p > 1 - 1e-9 and own == label and label in self.basis.labels
        return (self.basis.labels.index(label) if consistent else None), p1, consistent

    def _tally_voter_shots(self, j: int, limit: int) -> tuple[int | None, int, bool, int]:
        """Returns (ballot, first-attempt outcome, consistent, attempts used)."""
        first = None
        for attempt in range(limit):
            ctrl = self.center.controls.pop(j)
            self._apply(CENTER, "H", H, ctrl)
            outcome = self._measure(CENTER, ctrl)
            if first is None:
                first = outcome
            if outcome == 1:
                label = self._read_center_label(j)
                voter = self.voters[j]
                own = "".join(str(self._measure(voter.name, h)) for h in voter.candidate)
                voter.candidate = []
                self._log(voter.name, "announce", voter=j, label=own)
                consistent = own == label and label in self.basis.labels
                ballot = self.basis.labels.index(label) if consistent else None
                return ballot, first, consistent, attempt + 1
            self._discard_pair(j)
            if attempt + 1 < limit:
                self._reissue(j, attempt + 1)
        return None, first, True, limit

    def distributed_tally(
        self,
        mode: str = "exact",
        seed: int | None = None,
        repetitions: int = REISSUE_LIMIT,
        reveal_ballots: bool = False,
    ) -> DistributedTally:
        """Read every returned control and pair; ballots are keyed by anonymous IDs.

        ``mode="exact"`` inspects amplitudes directly; ``mode="shots"`` measures,
        re-issuing a voter's pair and control up to ``repetitions`` times while
        the control keeps landing in the sum sector.
        """
        if mode not in ("exact", "shots"):
            raise ConfigError(f"unknown tally mode {mode!r}")
        if self._tallied:
            raise ProtocolIncompleteError("tally already ran; qubits were consumed")
        for j in range(self.config.num_voters):
            if (self.has_voted(j) or j in self.center.issued) and j not in self.center.controls:
                raise ProtocolIncompleteError(f"control qubit of voter {j} never returned")
            if any(h.owner.startswith("channel") for h in self.handles if h.voter == j):
                raise ProtocolIncompleteError(f"voter {j} has qubits still in a channel")
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        perm = self.rng.permutation(self.config.num_voters)
        self._anonymous_ids = {j: f"b{int(perm[j]):04d}" for j in range(self.config.num_voters)}

        K = self.config.num_candidates
        ballots: dict[str, int | None] = {}
        per_voter: dict[int, int | None] = {}
        first_hits = []
        unresolved = inconsistent = attempts = 0
        for j in range(self.config.num_voters):
            if j not in self.center.controls:
                ballot, hit, consistent, used = None, 0.0, True, 0
                unresolved += 1
            elif mode == "exact":
                ballot, hit, consistent = self._tally_voter_exact(j)
                used = 1
            else:
                ballot, hit, consistent, used = self._tally_voter_shots(j, repetitions)
                if ballot is None and consistent:
                    unresolved += 1
            if not consistent:
                inconsistent += 1
            attempts += used
            first_hits.append(hit)
            ballots[self._anonymous_ids[j]] = ballot
            per_voter[j] = ballot
            self._log(CENTER, "tally", ballot_id=self._anonymous_ids[j], ballot=ballot, consistent=consistent)
        self._tallied = True
        # the voter -> anonymous ID map is destroyed once ballots are recorded
        self._anonymous_ids = None

        counts = {k: sum(b == k for b in per_voter.values()) for k in range(K)}
        V = sum(counts.values())
        probs = {k: (counts[k] / V if V else 0.0) for k in range(K)}
        p_post = float(np.mean(first_hits)) if first_hits else 0.0
        result = TallyResult(
            "exact" if mode == "exact" else "sampled",
            p_post,
            probs,
            counts,
            V,
            math.sqrt(p_post),
        )
        return DistributedTally(
            result,
            dict(sorted(ballots.items())),
            unresolved,
            inconsistent,
            attempts,
            per_voter if reveal_ballots else None,
        )

    # --------------------------------------------------------------- export

    def export_trace(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.trace)


def replay_custody(events: list[ProtocolEvent]) -> dict[int, str]:
    """Rebuild each qubit's final owner from a trace."""
    owner: dict[int, str] = {}
    for e in events:
        p = e.payload
        if e.action == "prepare":
            for q in p["qubits"]:
                owner[q] = e.actor
        elif e.action == "send":
            owner[p["qubit"]] = channel_name(p["voter"], p["direction"])
        elif e.action == "receive":
            owner[p["qubit"]] = e.actor
        elif e.action == "loss":
            owner[p["qubit"]] = "lost"
        elif e.action == "measure" and p.get("released"):
            owner[p["qubit"]] = "retired"
    return owner


def run_distributed(
    config: ElectionConfig,
    pairs_per_voter: int = 1,
    execution: str = "direct",
    adversaries: list[AdversaryAction] = (),
    hook: Callable[[DistributedElection], None] | None = None,
) -> DistributedElection:
    """Set up, inject adversaries, and run every voter's round."""
    sim = DistributedElection(config, pairs_per_voter=pairs_per_voter, execution=execution)
    for a in adversaries:
        sim.inject_adversary(a)
    sim.setup()
    sim.run_rounds()
    if hook is not None:
        hook(sim)
    return sim
