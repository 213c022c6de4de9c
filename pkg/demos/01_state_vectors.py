"""Dense state vectors: preparation, controlled gates, measurement, post-selection."""
import numpy as np

from qvote import qstate
from qvote.qstate import H, X, Z, ControlSpec

# %% a Bell pair, built the long way: H then CX
bell = qstate.new_zero_state(2)
bell = qstate.apply_single(bell, H, 0)
bell = qstate.apply_controlled(bell, ControlSpec(((0, 1),), 1), X)
print(qstate.dump(bell))

# %% a controlled Z only touches the |11> amplitude
flipped = qstate.apply_controlled(bell, ControlSpec(((0, 1),), 1), Z)
print(qstate.dump(flipped))

# controls can also fire on 0; this one flips the sign of |00> instead
flipped0 = qstate.apply_controlled(bell, ControlSpec(((0, 0),), 1), qstate.FLIP0)
print(qstate.dump(flipped0))

# %% three basis states with equal weight (the 3-candidate register)
w = qstate.set_amplitudes([1, 1, 1, 0])
print(qstate.marginal_distribution(w, [0, 1]))

# %% measuring is seeded; probabilities come back with the outcome
rng = np.random.default_rng(7)
rec, after = qstate.measure_qubit(bell, 0, rng)
print(rec, qstate.dump(after))

# post-selection keeps one branch and reports how likely it was
p, kept = qstate.postselect(w, 0, 0)
print(f"P(q0=0) = {p:.4f}")
print(qstate.dump(kept))
