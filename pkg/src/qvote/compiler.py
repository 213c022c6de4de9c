"""Lowering of multi-controlled phase flips to one- and two-control primitives.

Ops are listed in time order (first element acts first). A doubly-controlled
``U`` is built from two Toffolis and three single-qubit factors::

    CCU = A† · CCX · B · CCX · C      (C acts first)

with ``A†BC = I`` and ``A†XBXC = U`` up to a phase that is tracked explicitly and
undone by a controlled-phase on the two controls.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import qstate
from .errors import CapacityError, QubitIndexError, RewriteError, ShapeError, UnitarityError
from .qstate import FLIP0, H, I2, X, Z, ControlSpec, StateVector

# expand_multi_controlled_z emits GATES_PER_CONTROL * c + GATES_OFFSET primitives for
# c all-ones controls, plus ZERO_CONTROL_COST per control (or target) that fires on |0>.
GATES_PER_CONTROL = 2
GATES_OFFSET = -1
ZERO_CONTROL_COST = 2

DECOMPOSITION_TOL = 1e-8


def _entries(gate) -> tuple[complex, complex, complex, complex]:
    u = np.asarray(gate, dtype=complex).reshape(-1)
    return tuple(complex(z) for z in u)  # type: ignore[return-value]


@dataclass(frozen=True)
class GateOp:
    """One primitive: a 2x2 unitary on ``target``, optionally controlled."""

    label: str
    target: int
    entries: tuple[complex, complex, complex, complex]
    controls: tuple[tuple[int, int], ...] = ()

    @classmethod
    def make(cls, label: str, gate, target: int, controls: Iterable[tuple[int, int]] = ()) -> "GateOp":
        qstate.check_unitary(gate)
        op = cls(label, int(target), _entries(gate), tuple((int(q), int(b)) for q, b in controls))
        qs = op.qubits
        if len(set(qs)) != len(qs):
            raise QubitIndexError(f"{label}: control/target indices overlap: {qs}")
        return op

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=complex).reshape(2, 2)

    @property
    def kind(self) -> str:
        return "controlled" if self.controls else "single"

    @property
    def arity(self) -> int:
        return len(self.controls) + 1

    @property
    def spec(self) -> ControlSpec:
        return ControlSpec(self.controls, self.target)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.controls) + (self.target,)

    def is_gate(self, gate, n_controls: int | None = None) -> bool:
        if n_controls is not None and len(self.controls) != n_controls:
            return False
        return bool(np.allclose(self.matrix, gate, atol=qstate.ALGEBRA_TOL))


def single(label: str, gate, target: int) -> GateOp:
    return GateOp.make(label, gate, target)


def controlled(label: str, gate, controls: Iterable[tuple[int, int]], target: int) -> GateOp:
    return GateOp.make(label, gate, target, controls)


def ccx(c1: int, c2: int, target: int) -> GateOp:
    return controlled("CCX", X, [(c1, 1), (c2, 1)], target)


def ccz(c1: int, c2: int, target: int) -> GateOp:
    return controlled("CCZ", Z, [(c1, 1), (c2, 1)], target)


class GateSequence:
    """Ordered list of :class:`GateOp` on a register of ``num_qubits`` qubits."""

    def __init__(self, num_qubits: int, ops: Iterable[GateOp] = ()):
        self.num_qubits = int(num_qubits)
        self.ops: list[GateOp] = []
        self.extend(ops)

    def append(self, op: GateOp) -> None:
        for q in op.qubits:
            if not 0 <= q < self.num_qubits:
                raise QubitIndexError(f"{op.label} touches qubit {q}, register has {self.num_qubits}")
        self.ops.append(op)

    def extend(self, ops: Iterable[GateOp]) -> None:
        for op in ops:
            self.append(op)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[GateOp]:
        return iter(self.ops)

    def __getitem__(self, i):
        return self.ops[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GateSequence):
            return NotImplemented
        return self.num_qubits == other.num_qubits and self.ops == other.ops

    def __repr__(self):
        return f"GateSequence(num_qubits={self.num_qubits}, ops={len(self.ops)})"

    def tallies(self) -> dict[str, int]:
        return gate_count_report(self)


def gate_count_report(seq: GateSequence | Iterable[GateOp]) -> dict[str, int]:
    """Counts by arity: ``1q``, ``2q``, ``3q`` and ``mq`` (four or more qubits)."""
    counts = {"1q": 0, "2q": 0, "3q": 0, "mq": 0}
    keys = {1: "1q", 2: "2q", 3: "3q"}
    for op in seq:
        counts[keys.get(op.arity, "mq")] += 1
    counts["total"] = sum(counts.values())
    return counts


def label_counts(seq: Iterable[GateOp]) -> dict[str, int]:
    return dict(sorted(Counter(op.label for op in seq).items()))


def apply_sequence(state: StateVector, seq: Iterable[GateOp]) -> StateVector:
    """Run ``seq`` on a single working copy of ``state``."""
    psi = state.tensor().copy()
    for op in seq:
        u = qstate.check_unitary(op.matrix)
        op.spec.validate(state.num_qubits)
        qstate.apply_controlled_inplace(psi, op.spec, u)
    return StateVector(psi.reshape(-1))


def sequence_unitary(seq: GateSequence) -> np.ndarray:
    """Dense matrix of the whole sequence; only sensible for small registers."""
    n = seq.num_qubits
    if n > 10:
        raise ShapeError(f"refusing to build a dense {2**n}x{2**n} matrix")
    dim = 2**n
    cols = []
    for i in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[i] = 1
        cols.append(apply_sequence(StateVector(e), seq).amplitudes)
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------- ABC factors


@dataclass(frozen=True)
class ABCFactors:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    residual_phase: complex

    def check(self, u, tol: float = DECOMPOSITION_TOL) -> None:
        a_dag = self.A.conj().T
        if np.linalg.norm(a_dag @ self.B @ self.C - I2) > tol:
            raise UnitarityError("A†BC deviates from identity")
        if np.linalg.norm(a_dag @ X @ self.B @ X @ self.C - self.residual_phase * np.asarray(u)) > tol:
            raise UnitarityError("A†XBXC deviates from residual_phase * U")


def _zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """Return (alpha, beta, gamma, delta) with u = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)."""
    alpha = float(np.angle(np.linalg.det(u))) / 2
    v = np.exp(-1j * alpha) * u
    a, b = v[0, 0], v[1, 0]
    gamma = 2 * float(np.arctan2(abs(b), abs(a)))
    total = -2 * float(np.angle(a)) if abs(a) > 1e-12 else 0.0
    diff = 2 * float(np.angle(b)) if abs(b) > 1e-12 else 0.0
    return alpha, (total + diff) / 2, gamma, (total - diff) / 2


def abc_decompose(u) -> ABCFactors:
    """Factor ``u`` so that ``A†BC = I`` and ``A†XBXC = residual_phase * u``."""
    u = qstate.check_unitary(u)
    alpha, beta, gamma, delta = _zyz_angles(u)
    a_dag = qstate.rz(beta) @ qstate.ry(gamma / 2)
    b = qstate.ry(-gamma / 2) @ qstate.rz(-(delta + beta) / 2)
    c = qstate.rz((delta - beta) / 2)
    factors = ABCFactors(a_dag.conj().T, b, c, complex(np.exp(-1j * alpha)))
    factors.check(u)
    return factors


def _is_identity(m: np.ndarray) -> bool:
    return bool(np.allclose(m, I2, atol=qstate.ALGEBRA_TOL))


def expand_ccu(u, control1: int, control2: int, target: int, num_qubits: int | None = None) -> GateSequence:
    """Doubly-controlled ``u`` as ``C, CCX, B, CCX, A†`` plus an optional phase fix."""
    qs = (control1, control2, target)
    if len(set(qs)) != 3:
        raise QubitIndexError(f"expand_ccu needs three distinct qubits, got {qs}")
    f = abc_decompose(u)
    seq = GateSequence(num_qubits if num_qubits is not None else max(qs) + 1)
    if not _is_identity(f.C):
        seq.append(single("C", f.C, target))
    seq.append(ccx(control1, control2, target))
    if not _is_identity(f.B):
        seq.append(single("B", f.B, target))
    seq.append(ccx(control1, control2, target))
    a_dag = f.A.conj().T
    if not _is_identity(a_dag):
        seq.append(single("A_DAG", a_dag, target))
    if abs(f.residual_phase - 1) > qstate.ALGEBRA_TOL:
        fix = qstate.phase_gate(-float(np.angle(f.residual_phase)))
        seq.append(controlled("CP", fix, [(control1, 1)], control2))
    return seq


# ------------------------------------------------------------ CCX <-> CCZ


def _flanked_by_h(seq: GateSequence, position: int, target: int) -> bool:
    if position == 0 or position + 1 >= len(seq):
        return False
    before, after = seq[position - 1], seq[position + 1]
    return all(
        op.target == target and not op.controls and op.is_gate(H) for op in (before, after)
    )


def _rewrite(seq: GateSequence, position: int, src, dst, dst_label: str) -> GateSequence:
    if not 0 <= position < len(seq):
        raise RewriteError(f"position {position} outside sequence of length {len(seq)}")
    op = seq[position]
    if not op.is_gate(src, n_controls=2):
        raise RewriteError(f"op {position} ({op.label}) is not the expected doubly-controlled gate")
    new = controlled(dst_label, dst, op.controls, op.target)
    t = op.target
    if _flanked_by_h(seq, position, t):
        # H·op·H already present: absorb the Hadamards
        ops = seq.ops[: position - 1] + [new] + seq.ops[position + 2 :]
    else:
        h = single("H", H, t)
        ops = seq.ops[:position] + [h, new, h] + seq.ops[position + 1 :]
    return GateSequence(seq.num_qubits, ops)


def ccx_to_ccz(seq: GateSequence, position: int) -> GateSequence:
    """Rewrite the CCX at ``position`` as ``H(t) · CCZ · H(t)``.

    If the CCX is already sandwiched between Hadamards on its target, those are
    absorbed instead, so ``ccz_to_ccx(ccx_to_ccz(s, p), p + 1) == s``.
    """
    return _rewrite(seq, position, X, Z, "CCZ")


def ccz_to_ccx(seq: GateSequence, position: int) -> GateSequence:
    """Inverse of :func:`ccx_to_ccz`."""
    return _rewrite(seq, position, Z, X, "CCX")


# ------------------------------------------------- multi-controlled Z cascade


def ancillas_needed(num_controls: int) -> int:
    return max(num_controls - 2, 0)


def mcz_gate_count(num_controls: int, zero_bits: int = 0) -> int:
    """Primitive count emitted by :func:`expand_multi_controlled_z`."""
    return GATES_PER_CONTROL * num_controls + GATES_OFFSET + ZERO_CONTROL_COST * zero_bits


def expand_multi_controlled_z(
    spec: ControlSpec,
    ancillas: Sequence[int] = (),
    flip_on: int = 1,
    num_qubits: int | None = None,
) -> GateSequence:
    """Phase flip on the target (when it equals ``flip_on``) if every control matches.

    Uses a clean-ancilla Toffoli cascade: the conjunction of the first ``c-1``
    controls is computed into ``c-2`` ancillas, the last step is a CCZ written as
    ``H · CCX · H``, then the cascade is uncomputed. Controls (and a target) that
    fire on ``|0>`` are X-conjugated. Ancillas must start in ``|0>`` and are
    returned there.
    """
    if spec.target is None:
        raise QubitIndexError("multi-controlled Z needs a target")
    c = len(spec.controls)
    if c < 1:
        raise ShapeError("multi-controlled Z needs at least one control")
    need = ancillas_needed(c)
    if len(ancillas) < need:
        raise CapacityError(f"{c} controls need {need} ancillas, got {len(ancillas)}")
    anc = [int(a) for a in ancillas[:need]]
    all_qubits = list(spec.qubits) + anc
    if len(set(all_qubits)) != len(all_qubits):
        raise QubitIndexError(f"ancillas collide with controls/target: {all_qubits}")
    n = num_qubits if num_qubits is not None else max(all_qubits) + 1
    seq = GateSequence(n)
    t = spec.target

    flips = [q for q, b in spec.controls if b == 0]
    if flip_on == 0:
        flips.append(t)
    conj = [single("X", X, q) for q in flips]
    qs = [q for q, _ in spec.controls]

    seq.extend(conj)
    if c == 1:
        seq.append(controlled("CZ", Z, [(qs[0], 1)], t))
    else:
        compute = []
        acc = qs[0]
        for i in range(1, c - 1):
            compute.append(ccx(acc, qs[i], anc[i - 1]))
            acc = anc[i - 1]
        seq.extend(compute)
        h = single("H", H, t)
        seq.extend([h, ccx(acc, qs[-1], t), h])
        seq.extend(reversed(compute))
    seq.extend(reversed(conj))
    return seq


def is_phase_flip(op: GateOp) -> int | None:
    """Return which target value ``op`` flips (1 for Z, 0 for FLIP0), else None."""
    if op.is_gate(Z):
        return 1
    if op.is_gate(FLIP0):
        return 0
    return None


def compile_sequence(seq: GateSequence, ancilla_start: int | None = None) -> GateSequence:
    """Lower every multi-controlled phase flip in ``seq`` to primitives.

    Ancillas are taken from ``ancilla_start`` upward (default: just past the
    register); the returned sequence is widened to hold them.
    """
    start = seq.num_qubits if ancilla_start is None else ancilla_start
    need = 0
    for op in seq:
        if op.controls:
            need = max(need, ancillas_needed(len(op.controls)))
    width = max(seq.num_qubits, start + need)
    out = GateSequence(width)
    anc = list(range(start, start + need))
    for op in seq:
        flip = is_phase_flip(op) if op.controls else None
        if flip is not None and (len(op.controls) > 1 or flip == 0 or any(b == 0 for _, b in op.controls)):
            out.extend(expand_multi_controlled_z(op.spec, anc, flip_on=flip, num_qubits=width))
        elif len(op.controls) > 2:
            raise RewriteError(f"cannot lower {op.label} with {len(op.controls)} controls")
        else:
            out.append(op)
    return out


# ------------------------------------------------------------ text format


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_op(op: GateOp) -> str:
    controls = ",".join(f"({q},{b})" for q, b in op.controls)
    matrix = ",".join(_fmt_complex(z) for z in op.entries)
    return f"{op.label} target={op.target} controls={controls} matrix={matrix}"


def dump_circuit(seq: GateSequence) -> str:
    """One op per line: ``LABEL target=<i> controls=<(i,b),...> matrix=<4 entries>``."""
    return "".join(format_op(op) + "\n" for op in seq)


def parse_circuit(text: str, num_qubits: int | None = None) -> GateSequence:
    ops = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            label, target, controls, matrix = line.split(" ")
            assert target.startswith("target=") and controls.startswith("controls=")
            assert matrix.startswith("matrix=")
            pairs = controls[len("controls="):]
            ctrl = []
            if pairs:
                for chunk in pairs[1:-1].split("),("):
                    q, b = chunk.split(",")
                    ctrl.append((int(q), int(b)))
            entries = [complex(z) for z in matrix[len("matrix="):].split(",")]
            gate = np.array(entries, dtype=complex).reshape(2, 2)
            ops.append(GateOp.make(label, gate, int(target[len("target="):]), ctrl))
        except (ValueError, AssertionError) as exc:
            raise ShapeError(f"circuit line {lineno}: cannot parse {line!r}") from exc
    width = num_qubits
    if width is None:
        width = max((max(op.qubits) for op in ops), default=0) + 1
    return GateSequence(width, ops)
