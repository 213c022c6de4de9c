"""Dense state-vector simulation.

Qubit 0 is the most significant bit of the basis index, so ``|q0 q1 ... q_{n-1}>``
reads left to right the same way kets are printed. Every operation returns a new
:class:`StateVector`; inputs are never mutated.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    ImpossibleOutcomeError,
    NormalizationError,
    QubitIndexError,
    ShapeError,
    UnitarityError,
)

MAX_QUBITS = 24
NORM_TOL = 1e-10
ALGEBRA_TOL = 1e-12
UNITARITY_TOL = 1e-8
ZERO_BRANCH_TOL = 1e-12

_S2 = 1 / np.sqrt(2)
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _S2
# sign flip on |0> instead of |1>; equals X Z X
FLIP0 = np.array([[-1, 0], [0, 1]], dtype=complex)

for _g in (I2, X, Y, Z, H, FLIP0):
    _g.setflags(write=False)
# read-only constants are known unitary; skip re-checking them on every gate
_TRUSTED = {id(g) for g in (I2, X, Y, Z, H, FLIP0)}


def phase_gate(theta: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * theta)]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def check_unitary(gate, tol: float = UNITARITY_TOL) -> np.ndarray:
    """Return ``gate`` as a complex 2x2 array, raising if it is not unitary."""
    if id(gate) in _TRUSTED:
        return gate
    u = np.asarray(gate, dtype=complex)
    if u.shape != (2, 2):
        raise ShapeError(f"single-qubit gate must be 2x2, got {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - I2))
    if dev > tol:
        raise UnitarityError(f"gate deviates from unitary by {dev:.3g}")
    return u


@dataclass(frozen=True)
class ControlSpec:
    """Control pattern plus an optional target.

    ``controls`` holds ``(qubit, required_bit)`` pairs; a required bit of 0 means
    the operation fires when that qubit is ``|0>``.
    """

    controls: tuple[tuple[int, int], ...] = ()
    target: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple((int(q), int(b)) for q, b in self.controls))

    @property
    def qubits(self) -> tuple[int, ...]:
        qs = tuple(q for q, _ in self.controls)
        return qs if self.target is None else qs + (self.target,)

    def validate(self, num_qubits: int) -> None:
        qs = self.qubits
        if len(set(qs)) != len(qs):
            raise QubitIndexError(f"control/target indices overlap: {qs}")
        for q in qs:
            if not 0 <= q < num_qubits:
                raise QubitIndexError(f"qubit {q} out of range for {num_qubits} qubits")
        for q, b in self.controls:
            if b not in (0, 1):
                raise ValueError(f"control bit for qubit {q} must be 0 or 1, got {b}")


@dataclass(frozen=True)
class MeasurementRecord:
    qubit: int
    outcome: int
    probability: float


class StateVector:
    """Normalized amplitudes over ``num_qubits`` qubits."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: np.ndarray):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        _num_qubits_for(len(amps))
        self.amplitudes = amps

    @property
    def num_qubits(self) -> int:
        return int(len(self.amplitudes)).bit_length() - 1

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def amplitude(self, bits: str) -> complex:
        if len(bits) != self.num_qubits:
            raise ShapeError(f"bitstring {bits!r} has wrong length for {self.num_qubits} qubits")
        return complex(self.amplitudes[int(bits, 2)])

    def allclose(self, other: "StateVector", atol: float = ALGEBRA_TOL) -> bool:
        return self.amplitudes.shape == other.amplitudes.shape and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0, atol=atol)
        )

    def equal_up_to_phase(self, other: "StateVector", atol: float = ALGEBRA_TOL) -> bool:
        if self.amplitudes.shape != other.amplitudes.shape:
            return False
        overlap = np.vdot(self.amplitudes, other.amplitudes)
        return abs(abs(overlap) - self.norm() * other.norm()) <= atol

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


def _num_qubits_for(length: int) -> int:
    if length < 2 or length & (length - 1):
        raise ShapeError(f"amplitude count {length} is not a power of two >= 2")
    return length.bit_length() - 1


def _check_capacity(num_qubits: int) -> None:
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise CapacityError(f"{num_qubits} qubits outside supported range 1..{MAX_QUBITS}")


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.num_qubits:
        raise QubitIndexError(f"qubit {qubit} out of range for {state.num_qubits} qubits")


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def new_zero_state(num_qubits: int) -> StateVector:
    _check_capacity(num_qubits)
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps)


def set_amplitudes(values: Sequence[complex]) -> StateVector:
    """Build a state from unnormalized ``values`` (length must be a power of two)."""
    amps = np.array(values, dtype=complex).reshape(-1)
    _check_capacity(_num_qubits_for(len(amps)))
    norm = np.linalg.norm(amps)
    if norm < ZERO_BRANCH_TOL:
        raise NormalizationError("cannot normalize the zero vector")
    return StateVector(amps / norm)


def basis_state(bits: str) -> StateVector:
    _check_capacity(len(bits))
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


def tensor_product(*states: StateVector) -> StateVector:
    """Kronecker product; the first argument occupies the most significant qubits."""
    total = sum(s.num_qubits for s in states)
    _check_capacity(total)
    amps = states[0].amplitudes
    for s in states[1:]:
        amps = np.multiply.outer(amps, s.amplitudes).reshape(-1)
    return StateVector(amps)


def apply_controlled(state: StateVector, spec: ControlSpec, gate) -> StateVector:
    """Apply ``gate`` to ``spec.target`` on the subspace matching every control."""
    u = check_unitary(gate)
    if spec.target is None:
        raise QubitIndexError("controlled operation needs a target qubit")
    spec.validate(state.num_qubits)
    if not spec.controls:
        src = _split(state, spec.target)
        a0, a1 = src[:, 0, :], src[:, 1, :]
        out = np.empty_like(src)
        out[:, 0, :] = u[0, 0] * a0 + u[0, 1] * a1
        out[:, 1, :] = u[1, 0] * a0 + u[1, 1] * a1
        return StateVector(out.reshape(-1))
    psi = state.tensor().copy()
    apply_controlled_inplace(psi, spec, u)
    return StateVector(psi.reshape(-1))


def apply_controlled_inplace(psi: np.ndarray, spec: ControlSpec, u: np.ndarray) -> None:
    """Mutating kernel behind :func:`apply_controlled`; ``psi`` is the (2,)*n tensor.

    No validation happens here; callers own that.
    """
    if not spec.controls:
        # contiguous (high, target, low) view beats n-axis strided slicing
        v = psi.reshape(1 << spec.target, 2, -1)
        i0 = (slice(None), 0, slice(None))
        i1 = (slice(None), 1, slice(None))
        _mix(v, i0, i1, u)
        return
    idx: list = [slice(None)] * psi.ndim
    for q, b in spec.controls:
        idx[q] = b
    idx[spec.target] = 0
    i0 = tuple(idx)
    idx[spec.target] = 1
    i1 = tuple(idx)
    _mix(psi, i0, i1, u)


def _mix(psi: np.ndarray, i0, i1, u: np.ndarray) -> None:
    if u[0, 1] == 0 and u[1, 0] == 0:
        if u[0, 0] != 1:
            psi[i0] *= u[0, 0]
        if u[1, 1] != 1:
            psi[i1] *= u[1, 1]
        return
    a0 = psi[i0].copy()
    a1 = psi[i1]
    if u[0, 0] == 0 and u[1, 1] == 0:
        psi[i0] = a1 if u[0, 1] == 1 else u[0, 1] * a1
        psi[i1] = a0 if u[1, 0] == 1 else u[1, 0] * a0
        return
    psi[i0] = u[0, 0] * a0 + u[0, 1] * a1
    psi[i1] = u[1, 0] * a0 + u[1, 1] * a1


def apply_single(state: StateVector, gate, qubit: int) -> StateVector:
    _check_qubit(state, qubit)
    return apply_controlled(state, ControlSpec((), qubit), gate)


def apply_zero_phase(state: StateVector, spec: ControlSpec, subregister: Iterable[int]) -> StateVector:
    """Negate amplitudes where ``subregister`` is all-zero and controls hold."""
    sub = list(subregister)
    if not sub:
        raise ShapeError("subregister must contain at least one qubit")
    if spec.target is not None:
        raise QubitIndexError("zero-phase operation takes no target")
    full = ControlSpec(spec.controls + tuple((q, 0) for q in sub))
    full.validate(state.num_qubits)
    psi = state.tensor().copy()
    idx: list = [slice(None)] * state.num_qubits
    for q, b in full.controls:
        idx[q] = b
    psi[tuple(idx)] *= -1
    return StateVector(psi.reshape(-1))


def _split(state: StateVector, qubit: int) -> np.ndarray:
    # (high bits, qubit, low bits) view; cheaper than a full (2,)*n tensor
    return state.amplitudes.reshape(1 << qubit, 2, -1)


def _qubit_prob_one(state: StateVector, qubit: int) -> float:
    a = _split(state, qubit)[:, 1, :]
    return float(np.vdot(a, a).real)


def _project(state: StateVector, qubit: int, outcome: int) -> np.ndarray:
    psi = _split(state, qubit).copy()
    psi[:, 1 - outcome, :] = 0
    return psi.reshape(-1)


def measure_qubit(state: StateVector, qubit: int, rng=None) -> tuple[MeasurementRecord, StateVector]:
    """Sample a Z-basis outcome for ``qubit`` and return the collapsed state."""
    _check_qubit(state, qubit)
    p1 = min(max(_qubit_prob_one(state, qubit), 0.0), 1.0)
    outcome = int(_rng(rng).random() < p1)
    p = p1 if outcome else 1.0 - p1
    amps = _project(state, qubit, outcome)
    return MeasurementRecord(qubit, outcome, p), StateVector(amps / np.sqrt(p))


def postselect(state: StateVector, qubit: int, outcome: int) -> tuple[float, StateVector]:
    """Project ``qubit`` onto ``outcome``; returns (probability, renormalized state)."""
    _check_qubit(state, qubit)
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")
    amps = _project(state, qubit, outcome)
    p = float(np.vdot(amps, amps).real)
    if p < ZERO_BRANCH_TOL:
        raise ImpossibleOutcomeError(
            f"outcome {outcome} on qubit {qubit} has probability {p:.3g}"
        )
    return p, StateVector(amps / np.sqrt(p))


def marginal_probabilities(state: StateVector, qubits: Sequence[int]) -> np.ndarray:
    """Marginal over ``qubits`` as a flat array indexed by the selected bits (first = MSB)."""
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"duplicate qubits in {qubits}")
    for q in qubits:
        _check_qubit(state, q)
    p = np.abs(state.tensor()) ** 2
    rest = tuple(q for q in range(state.num_qubits) if q not in qubits)
    p = p.sum(axis=rest) if rest else p
    # remaining axes are in ascending qubit order; reorder to the requested order
    order = sorted(qubits)
    p = np.transpose(p, [order.index(q) for q in qubits])
    return p.reshape(-1)


def marginal_distribution(state: StateVector, qubits: Sequence[int]) -> dict[str, float]:
    """Marginal probabilities keyed by bitstring; branches below 1e-12 are omitted."""
    p = marginal_probabilities(state, qubits)
    width = len(qubits)
    return {
        format(i, f"0{width}b"): float(v) for i, v in enumerate(p) if v > ZERO_BRANCH_TOL
    }


def allocate(state: StateVector, count: int = 1) -> StateVector:
    """Append ``count`` fresh ``|0>`` qubits after the existing ones."""
    _check_capacity(state.num_qubits + count)
    fresh = np.zeros(2**count, dtype=complex)
    fresh[0] = 1.0
    return StateVector(np.multiply.outer(state.amplitudes, fresh).reshape(-1))


def discard(state: StateVector, qubit: int) -> StateVector:
    """Remove a qubit that is in a definite computational-basis state."""
    _check_qubit(state, qubit)
    if state.num_qubits == 1:
        raise CapacityError("cannot discard the last qubit")
    p1 = _qubit_prob_one(state, qubit)
    if NORM_TOL < p1 < 1 - NORM_TOL:
        raise ValueError(f"qubit {qubit} is not in a basis state (P(1)={p1:.3g})")
    bit = int(p1 > 0.5)
    return StateVector(_split(state, qubit)[:, bit, :].reshape(-1))


def dump(state: StateVector, tol: float = ZERO_BRANCH_TOL) -> str:
    """One line per populated basis state: ``|bits⟩ re imag``."""
    width = state.num_qubits
    lines = []
    for i, a in enumerate(state.amplitudes):
        if abs(a) > tol:
            lines.append(f"|{i:0{width}b}⟩ {a.real:.12g} {a.imag:.12g}")
    return "\n".join(lines) + "\n"
