"""Center and voters exchanging qubits, with an eavesdropper in one channel."""
from qvote.centralized import ElectionConfig
from qvote.distributed import AdversaryAction, DistributedElection, replay_custody, run_distributed
from qvote.errors import DoubleVoteError

config = ElectionConfig(4, 2, (0, 1, 0, 1))

# %% an honest run; ballots come back under shuffled anonymous IDs
sim = run_distributed(config)
tally = sim.distributed_tally()
print(tally.result.counts, tally.ballots)

# every event in the trace says who did what to which qubit
for event in sim.trace[:8]:
    print(event.to_line())
print(len(sim.trace), "events, final owners:", set(replay_custody(sim.trace).values()))

# %% voting twice is refused before anything touches the state
sim = run_distributed(config)
try:
    sim.voting_round(2, 1)
except DoubleVoteError as exc:
    print(exc, "->", sim.trace[-1].action)

# %% verification: ZZ and XX correlations of sacrificial Bell pairs
honest = DistributedElection(ElectionConfig(1, 2, (0,)), seed=3)
honest.setup()
print(honest.verify_entanglement(0, rounds=200))

# someone measures voter 0's channel in Z; XX falls to noise
tapped = DistributedElection(ElectionConfig(1, 2, (0,)), seed=3)
tapped.inject_adversary(AdversaryAction("measure-in-channel", 0, stage="verification"))
tapped.setup()
print(tapped.verify_entanglement(0, rounds=200))

# %% a bit flip on one voter's pair half shows up as an inconsistent ballot
sim = DistributedElection(config, seed=5)
sim.inject_adversary(AdversaryAction("bit-flip", 1, stage="setup"))
sim.setup()
sim.run_rounds()
t = sim.distributed_tally()
print(t.result.counts, "inconsistent:", t.inconsistent)

# %% the same election with each vote lowered to primitive gates on the voter's side
d = run_distributed(config, execution="decomposed")
print(d.distributed_tally().result.counts)
