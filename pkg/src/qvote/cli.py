"""Command-line driver: ``qvote --mode centralized --config election.toml``.

Exit codes: 0 ok, 2 usage, 3 parse, 4 validation, 5 capacity, 6 no votes,
7 protocol incomplete, 8 tamper detected, 1 any other election error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .centralized import CentralizedElection, ElectionConfig
from .compiler import GateSequence, compile_sequence, dump_circuit, gate_count_report, single
from .config import RunConfig, parse_adversaries, parse_faults, parse_run_config
from .distributed import DEFAULT_THRESHOLD, DistributedElection
from .errors import (
    CapacityError,
    ChannelLossError,
    ConfigError,
    NoVotesError,
    ParseError,
    ProtocolIncompleteError,
    QVoteError,
    ValidationError,
)
from .qstate import H

OUTPUT_SCHEMA = "qvote.output/1"
UNSAFE_WATERMARK = "UNSAFE: per-voter ballots revealed; not an anonymous tally"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_CAPACITY = 5
EXIT_NO_VOTES = 6
EXIT_INCOMPLETE = 7
EXIT_TAMPER = 8

CENTRALIZED_ONLY = ("dump_circuit",)
DISTRIBUTED_ONLY = ("trace", "adversary", "verify_rounds", "threshold", "unsafe_reveal_ballots")


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qvote", description="Simulate phase-encoded quantum elections.")
    p.add_argument("--mode", choices=("centralized", "distributed"), default="centralized")
    p.add_argument("--config", required=True, help="TOML election config")
    p.add_argument("--shots", type=int, help="sampled tally with this many shots (overrides config)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    p.add_argument("--format", choices=("human", "json"), default="human")
    p.add_argument("--dump-circuit", metavar="PATH", help="centralized: write the compiled circuit")
    p.add_argument("--trace", metavar="PATH", help="distributed: write the protocol event trace")
    p.add_argument("--adversary", metavar="PATH", help="distributed: TOML adversary spec")
    p.add_argument("--verify-rounds", type=int, help="distributed: verification rounds per voter")
    p.add_argument("--threshold", type=float, help="distributed: verification threshold")
    p.add_argument("--unsafe-reveal-ballots", action="store_true", help="distributed: testing only")
    return p


def _check_mode_flags(args) -> None:
    wrong = CENTRALIZED_ONLY if args.mode == "distributed" else DISTRIBUTED_ONLY
    for name in wrong:
        if getattr(args, name) not in (None, False):
            flag = "--" + name.replace("_", "-")
            raise UsageError(f"{flag} is not valid in {args.mode} mode")
    if args.threshold is not None and args.verify_rounds is None:
        raise UsageError("--threshold requires --verify-rounds")


def _override(run: RunConfig, args) -> RunConfig:
    e = run.election
    shots = e.shots if args.shots is None else args.shots
    seed = e.seed if args.seed is None else args.seed
    election = ElectionConfig(e.num_voters, e.num_candidates, e.choices, e.kind, shots, seed)
    return RunConfig(election, run.pairs_per_voter, run.execution)


def _config_echo(run: RunConfig) -> dict:
    e = run.election
    return {
        "voters": e.num_voters,
        "candidates": e.num_candidates,
        "kind": e.kind,
        "choices": ["abstain" if c is None else c for c in e.choices],
        "shots": e.shots,
        "seed": e.seed,
        "pairs_per_voter": run.pairs_per_voter,
        "execution": run.execution,
    }


def _centralized_circuit(election: CentralizedElection) -> tuple[GateSequence, bool]:
    """Full compiled circuit; falls back to votes + tally when preparation has no gate form."""
    try:
        return election.full_circuit(compiled=True), True
    except ConfigError:
        seq = GateSequence(election.layout.num_qubits)
        seq.extend(election.circuit)
        seq.append(single("H", H, election.layout.control))
        return compile_sequence(seq), False


def run_centralized(run: RunConfig, args) -> dict:
    election = CentralizedElection(run.election)
    election.run()
    tally = election.tally_sampled() if run.election.shots else election.tally_exact()
    circuit, prepared = _centralized_circuit(election)
    if args.dump_circuit:
        Path(args.dump_circuit).write_text(dump_circuit(circuit))
    counts = gate_count_report(circuit)
    return {
        "tally": tally.to_dict(),
        "post_selection_probability": tally.post_selection_probability,
        "gate_counts": {**counts, "includes_preparation": prepared},
    }


def _trace_gate_counts(sim: DistributedElection) -> dict:
    report = {"1q": 0, "2q": 0, "3q": 0, "mq": 0, "total": 0}
    for e in sim.trace:
        if e.action != "apply-gate":
            continue
        arity = 1 + len(e.payload["controls"])
        report["1q" if arity == 1 else "2q" if arity == 2 else "3q" if arity == 3 else "mq"] += 1
        report["total"] += 1
    return report


def run_distributed(run: RunConfig, args) -> tuple[dict, bool]:
    sim = DistributedElection(run.election, run.pairs_per_voter, run.execution)
    if args.adversary:
        text = Path(args.adversary).read_text()
        for action in parse_adversaries(text):
            sim.inject_adversary(action)
        for fault in parse_faults(text):
            sim.inject_fault(fault)
    try:
        sim.setup()
        for j, choice in enumerate(run.election.choices):
            try:
                sim.voting_round(j, choice)
            except ChannelLossError:
                pass  # the loss is in the trace; the tally reports the round as incomplete
        verdicts = []
        if args.verify_rounds is not None:
            threshold = DEFAULT_THRESHOLD if args.threshold is None else args.threshold
            for j in range(run.election.num_voters):
                v = sim.verify_entanglement(j, args.verify_rounds, threshold)
                verdicts.append(
                    {"voter": v.voter, "rounds": v.rounds, "xx": v.xx, "zz": v.zz,
                     "verdict": v.verdict, "threshold": v.threshold}
                )
        mode = "shots" if run.election.shots else "exact"
        tally = sim.distributed_tally(mode=mode, reveal_ballots=args.unsafe_reveal_ballots)
    finally:
        if args.trace:
            Path(args.trace).write_text(sim.export_trace())
    out = {
        "tally": tally.result.to_dict(),
        "post_selection_probability": tally.result.post_selection_probability,
        "gate_counts": _trace_gate_counts(sim),
        "verification": verdicts,
        "unresolved_ballots": tally.unresolved,
        "inconsistent_ballots": tally.inconsistent,
    }
    if args.unsafe_reveal_ballots:
        out["watermark"] = UNSAFE_WATERMARK
        out["ballots"] = {str(j): b for j, b in tally.voter_ballots.items()}
    tampered = any(v["verdict"] == "disturbed" for v in verdicts)
    return out, tampered


def emit_report(output: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(output, sort_keys=True, indent=2) + "\n"
    lines = []
    if "watermark" in output:
        lines.append(f"*** {output['watermark']} ***")
    cfg = output["config"]
    lines.append(f"{output['mode']} election: {cfg['voters']} voters, {cfg['candidates']} candidates ({cfg['kind']})")
    tally = output.get("tally")
    if tally:
        lines.append(f"{'candidate':>9}  {'probability':>11}  {'count':>5}")
        for k, p in tally["probabilities"].items():
            lines.append(f"{k:>9}  {p:>11.6g}  {tally['counts'][k]:>5}")
        lines.append(f"participating votes: {tally['participating_votes']}")
        lines.append(f"post-selection probability: {output['post_selection_probability']:.6g}")
    gc = output.get("gate_counts")
    if gc:
        lines.append("gate counts: " + ", ".join(f"{k}={gc[k]}" for k in ("1q", "2q", "3q", "mq", "total")))
    for v in output.get("verification", []):
        lines.append(f"voter {v['voter']}: <XX>={v['xx']:.3f} <ZZ>={v['zz']:.3f} -> {v['verdict']}")
    if "ballots" in output:
        for j, b in output["ballots"].items():
            lines.append(f"voter {j}: {'abstain/unresolved' if b is None else b}")
    lines.append(f"status: {output['status']}")
    return "\n".join(lines) + "\n"


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _check_mode_flags(args)
        text = Path(args.config).read_text()
    except UsageError as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"usage error: cannot read config: {exc}", file=stderr)
        return EXIT_USAGE

    try:
        cfg = _override(parse_run_config(text), args)
        output = {"schema_version": OUTPUT_SCHEMA, "mode": args.mode, "config": _config_echo(cfg)}
        if args.mode == "centralized":
            output.update(run_centralized(cfg, args))
            tampered = False
        else:
            body, tampered = run_distributed(cfg, args)
            output.update(body)
        if output["tally"]["participating_votes"] == 0:
            raise NoVotesError("no votes cast")
    except ParseError as exc:
        print(f"parse error: {exc}", file=stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=stderr)
        return EXIT_VALIDATION
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=stderr)
        return EXIT_CAPACITY
    except NoVotesError:
        print("no votes cast", file=stderr)
        return EXIT_NO_VOTES
    except ProtocolIncompleteError as exc:
        print(f"protocol incomplete: {exc}", file=stderr)
        return EXIT_INCOMPLETE
    except ConfigError as exc:
        print(f"validation error: {exc}", file=stderr)
        return EXIT_VALIDATION
    except QVoteError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_ERROR

    output["status"] = "tamper-detected" if tampered else "ok"
    stdout.write(emit_report(output, args.format))
    return EXIT_TAMPER if tampered else EXIT_OK


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
