"""Lowering multi-controlled gates to 1-3 qubit primitives."""
import numpy as np

from qvote import qstate
from qvote.compiler import (
    GateSequence,
    abc_decompose,
    ancillas_needed,
    apply_sequence,
    ccz,
    ccz_to_ccx,
    dump_circuit,
    expand_ccu,
    expand_multi_controlled_z,
    gate_count_report,
    label_counts,
    sequence_unitary,
)
from qvote.qstate import Z, ControlSpec

# %% the A, B, C factors behind a doubly controlled U
u = qstate.ry(0.7) @ qstate.rz(0.2)
f = abc_decompose(u)
print("residual phase:", np.round(f.residual_phase, 6))

seq = expand_ccu(Z, 0, 1, 2)
print(label_counts(seq))
print(np.round(np.diag(sequence_unitary(seq)).real, 10))

# %% CCZ and CCX differ by two Hadamards on the target
toffoli = ccz_to_ccx(GateSequence(3, [ccz(0, 1, 2)]), 0)
print([op.label for op in toffoli])

# %% a 6-control phase flip with mixed control bits, checked on a random state
c = 6
bits = (1, 0, 1, 1, 0, 1)
spec = ControlSpec(tuple(zip(range(c), bits)), c)
need = ancillas_needed(c)
cascade = expand_multi_controlled_z(spec, range(c + 1, c + 1 + need), flip_on=1, num_qubits=c + 1 + need)
print(gate_count_report(cascade))

rng = np.random.default_rng(0)
data = qstate.set_amplitudes(rng.normal(size=2 ** (c + 1)) + 1j * rng.normal(size=2 ** (c + 1)))
state = qstate.tensor_product(data, qstate.new_zero_state(need))
got = apply_sequence(state, cascade)
want = qstate.apply_controlled(state, spec, Z)
print("max deviation:", np.max(np.abs(got.amplitudes - want.amplitudes)))

# counts grow linearly in the number of controls
print({k: len(expand_multi_controlled_z(ControlSpec(tuple((i, 1) for i in range(k)), k),
                                        range(k + 1, k + 1 + ancillas_needed(k)), 1,
                                        k + 1 + ancillas_needed(k))) for k in range(1, 9)})

# %% the text format the CLI writes with --dump-circuit
print(dump_circuit(seq).splitlines()[0])
