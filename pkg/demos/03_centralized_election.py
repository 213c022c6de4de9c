"""Both worked elections, run on one machine."""
from qvote import qstate
from qvote.centralized import CentralizedElection, ElectionConfig, difference_state, run_election
from qvote.compiler import gate_count_report

# %% four voters, two candidates: Blue (0), Red (1), Blue, Red
election = run_election(ElectionConfig(4, 2, (0, 1, 0, 1)))
r = election.tally_exact()
print(r.probabilities, r.counts, f"P(control=1) = {r.post_selection_probability}")

# the part of the state that survives post-selection holds one term per cast vote
diff = difference_state(election.config)
print(qstate.dump(diff))

# %% eight voters, three candidates on a W-type register
config = ElectionConfig(8, 3, (0, 1, 2, 0, 1, 0, 1, 2))
exact = run_election(config).tally_exact()
print(exact.probabilities, exact.counts)

# the sampled tally only sees shots where the control came back 1
sampled = run_election(config).tally_sampled(shots=20_000, seed=1)
print(sampled.accepted_shots, {k: round(v, 4) for k, v in sampled.probabilities.items()})

# %% abstaining shrinks the base the shares are computed against
r = run_election(ElectionConfig(4, 2, (0, 0, 1, None))).tally_exact()
print(r.participating_votes, r.probabilities)

# %% casting by hand, one voter at a time; a second vote is refused
e = CentralizedElection(ElectionConfig(2, 2, (0, 1)))
e.cast_vote(0, 0)
try:
    e.cast_vote(0, 1)
except Exception as exc:
    print(type(exc).__name__, exc)

# %% gate counts for the full compiled circuit as the electorate doubles
for N in (4, 8, 16, 32):
    circuit = run_election(ElectionConfig(N, 2, tuple(j % 2 for j in range(N)))).full_circuit()
    print(N, gate_count_report(circuit))
