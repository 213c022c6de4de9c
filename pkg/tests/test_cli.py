import io
import json

import pytest

from qvote import cli
from qvote.compiler import parse_circuit
from qvote.config import RunConfig, format_config, parse_adversaries, parse_config, parse_faults, parse_run_config
from qvote.distributed import AdversaryAction, ChannelFault, parse_trace_line
from qvote.errors import ParseError, ValidationError

EXAMPLE1 = """\
schema = "qvote.config/1"
voters = 4
candidates = 2
choices = [0, 1, 0, 1]
"""

EXAMPLE2 = """\
voters = 8
candidates = 3
choices = [0, 1, 2, 0, 1, 0, 1, 2]
"""

TAMPER = """\
[[adversary]]
kind = "measure-in-channel"
voter = 0
stage = "verification"
"""


def invoke(tmp_path, config_text, *flags, name="election.toml"):
    path = tmp_path / name
    path.write_text(config_text)
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(["--config", str(path), *flags], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_parse_example_1_with_defaults():
    c = parse_config(EXAMPLE1)
    assert (c.num_voters, c.num_candidates, c.choices) == (4, 2, (0, 1, 0, 1))
    assert (c.kind, c.shots, c.seed) == ("bell-pair", 0, 0)
    assert parse_config(EXAMPLE2).kind == "w-state"
    assert parse_config("voters = 1\ncandidates = 5\nchoices = [4]\n").kind == "uniform-basis"


def test_parse_abstain():
    assert parse_config('voters = 2\ncandidates = 2\nchoices = [1, "abstain"]\n').choices == (1, None)


def test_format_round_trip():
    run = RunConfig(parse_config('voters = 3\ncandidates = 3\nchoices = [2, "abstain", 0]\nseed = 7\n'), 2, "decomposed")
    assert parse_run_config(format_config(run)) == run


@pytest.mark.parametrize("text,line,field", [
    ("voters = 4\ncandidates = 2\nchoices = [0, 1, 0, 1]\ncolour = 3\n", 4, "colour"),
    ("voters = 4\ncandidates = \"two\"\nchoices = [0]\n", 2, "candidates"),
    ("voters = 1\ncandidates = 2\nchoices = [\"maybe\"]\n", 3, "choices"),
    ('schema = "qvote.config/9"\nvoters = 1\ncandidates = 2\nchoices = [0]\n', 1, "schema"),
    ("candidates = 2\nchoices = [0]\n", None, "voters"),
])
def test_parse_errors_carry_line_and_field(text, line, field):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == line
    assert info.value.field == field


def test_toml_syntax_error_has_line():
    with pytest.raises(ParseError) as info:
        parse_config("voters = 4\ncandidates = = 2\n")
    assert info.value.line == 2


@pytest.mark.parametrize("text", [
    "voters = 4\ncandidates = 2\nchoices = [0, 1]\n",
    'voters = 1\ncandidates = 3\nchoices = [0]\nkind = "bell-pair"\n',
    "voters = 1\ncandidates = 2\nchoices = [2]\n",
    'voters = 1\ncandidates = 2\nchoices = [0]\nexecution = "teleport"\n',
    "voters = 1\ncandidates = 2\nchoices = [0]\npairs_per_voter = 0\n",
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_parse_adversaries_and_faults():
    text = TAMPER + '[[adversary]]\nkind = "phase-tamper"\nvoter = 1\nangle = 0.5\n' \
        + '[[fault]]\nvoter = 1\ndirection = "to-center"\nstage = "voting"\n'
    assert parse_adversaries(text) == [
        AdversaryAction("measure-in-channel", 0, stage="verification"),
        AdversaryAction("phase-tamper", 1, angle=0.5),
    ]
    assert parse_faults(text) == [ChannelFault(1, "to-center", stage="voting")]
    with pytest.raises(ParseError):
        parse_adversaries('[[adversary]]\nkind = "phase-tamper"\nvoter = 0\ncolour = 1\n')
    with pytest.raises(ParseError):
        parse_adversaries('[[adversary]]\nvoter = 0\n')


def test_example_1_json(tmp_path):
    code, out, _ = invoke(tmp_path, EXAMPLE1, "--format", "json")
    assert code == cli.EXIT_OK
    doc = json.loads(out)
    assert doc["schema_version"] == cli.OUTPUT_SCHEMA
    assert doc["tally"]["probabilities"] == {"0": 0.5, "1": 0.5}
    assert doc["tally"]["counts"] == {"0": 2, "1": 2}
    assert doc["post_selection_probability"] == pytest.approx(0.5, abs=1e-12)
    assert doc["gate_counts"]["includes_preparation"] is True
    assert doc["status"] == "ok"


def test_json_is_byte_stable_and_round_trips(tmp_path):
    flags = ("--format", "json", "--shots", "2000", "--seed", "11")
    _, a, _ = invoke(tmp_path, EXAMPLE2, *flags)
    _, b, _ = invoke(tmp_path, EXAMPLE2, *flags)
    assert a == b
    doc = json.loads(a)
    assert cli.emit_report(doc, "json") == a
    assert doc["config"]["seed"] == 11 and doc["config"]["shots"] == 2000


def test_distributed_json_is_byte_stable(tmp_path):
    flags = ("--mode", "distributed", "--format", "json", "--verify-rounds", "20")
    _, a, _ = invoke(tmp_path, EXAMPLE1, *flags)
    _, b, _ = invoke(tmp_path, EXAMPLE1, *flags)
    assert a == b
    doc = json.loads(a)
    assert doc["tally"]["counts"] == {"0": 2, "1": 2}
    assert "ballots" not in doc and "watermark" not in doc
    assert [v["verdict"] for v in doc["verification"]] == ["intact"] * 4


def test_example_2_human_table(tmp_path):
    code, out, _ = invoke(tmp_path, EXAMPLE2)
    assert code == cli.EXIT_OK
    rows = [line.split() for line in out.splitlines() if line.split()[:1] in (["0"], ["1"], ["2"])]
    assert [(r[0], float(r[1]), int(r[2])) for r in rows] == [("0", 0.375, 3), ("1", 0.375, 3), ("2", 0.25, 2)]
    assert "post-selection probability: 0.333333" in out
    assert "gate counts:" in out


def test_all_abstain_exit(tmp_path):
    code, out, err = invoke(tmp_path, 'voters = 2\ncandidates = 2\nchoices = ["abstain", "abstain"]\n')
    assert code == cli.EXIT_NO_VOTES
    assert "no votes cast" in err and out == ""


def test_all_abstain_distributed_exit(tmp_path):
    code, _, _ = invoke(tmp_path, 'voters = 2\ncandidates = 2\nchoices = ["abstain", "abstain"]\n', "--mode", "distributed")
    assert code == cli.EXIT_NO_VOTES


def test_parse_and_validation_exits(tmp_path):
    assert invoke(tmp_path, "voters = [\n")[0] == cli.EXIT_PARSE
    assert invoke(tmp_path, "voters = 4\ncandidates = 2\nchoices = [0]\n")[0] == cli.EXIT_VALIDATION


def test_capacity_exit(tmp_path):
    # 40 voters at two pairs each exceed the protocol qubit budget
    text = f"voters = 40\ncandidates = 2\nchoices = {[0] * 40}\npairs_per_voter = 2\n"
    assert invoke(tmp_path, text, "--mode", "distributed")[0] == cli.EXIT_CAPACITY


def test_protocol_incomplete_exit(tmp_path):
    adv = tmp_path / "faults.toml"
    adv.write_text('[[fault]]\nvoter = 1\ndirection = "to-center"\nstage = "voting"\n')
    code, _, err = invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--adversary", str(adv))
    assert code == cli.EXIT_INCOMPLETE
    assert "never returned" in err


def test_tamper_exit_reports_verdicts(tmp_path):
    adv = tmp_path / "adv.toml"
    adv.write_text(TAMPER)
    code, out, _ = invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--adversary", str(adv),
                          "--verify-rounds", "200", "--threshold", "0.5", "--format", "json")
    assert code == cli.EXIT_TAMPER
    doc = json.loads(out)
    assert doc["status"] == "tamper-detected"
    assert doc["verification"][0]["verdict"] == "disturbed"
    assert all(v["verdict"] == "intact" for v in doc["verification"][1:])


@pytest.mark.parametrize("flags", [
    ("--trace", "t.log"),
    ("--verify-rounds", "10"),
    ("--unsafe-reveal-ballots",),
    ("--adversary", "a.toml"),
])
def test_distributed_flags_rejected_in_centralized_mode(tmp_path, flags):
    code, _, err = invoke(tmp_path, EXAMPLE1, *flags)
    assert code == cli.EXIT_USAGE
    assert "not valid in centralized mode" in err


def test_centralized_flag_rejected_in_distributed_mode(tmp_path):
    assert invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--dump-circuit", "c.txt")[0] == cli.EXIT_USAGE


def test_threshold_needs_rounds(tmp_path):
    assert invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--threshold", "0.4")[0] == cli.EXIT_USAGE


def test_usage_errors(tmp_path):
    assert cli.run(["--mode", "quantum", "--config", "x"], io.StringIO(), io.StringIO()) == cli.EXIT_USAGE
    assert cli.run(["--config", str(tmp_path / "missing.toml")], io.StringIO(), io.StringIO()) == cli.EXIT_USAGE


def test_unsafe_reveal_is_watermarked(tmp_path):
    code, out, _ = invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--unsafe-reveal-ballots")
    assert code == cli.EXIT_OK
    assert out.startswith("*** UNSAFE")
    _, js, _ = invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--unsafe-reveal-ballots", "--format", "json")
    doc = json.loads(js)
    assert doc["watermark"] == cli.UNSAFE_WATERMARK
    assert doc["ballots"] == {"0": 0, "1": 1, "2": 0, "3": 1}


def test_dump_circuit_is_parseable(tmp_path):
    dump = tmp_path / "circuit.txt"
    code, out, _ = invoke(tmp_path, EXAMPLE1, "--dump-circuit", str(dump), "--format", "json")
    assert code == cli.EXIT_OK
    seq = parse_circuit(dump.read_text())
    assert len(seq) == json.loads(out)["gate_counts"]["total"]
    assert max(op.arity for op in seq) <= 3


def test_trace_file(tmp_path):
    trace = tmp_path / "trace.log"
    code, out, _ = invoke(tmp_path, EXAMPLE1, "--mode", "distributed", "--trace", str(trace), "--format", "json")
    assert code == cli.EXIT_OK
    events = [parse_trace_line(line) for line in trace.read_text().splitlines()]
    assert [e.seq for e in events] == list(range(len(events)))
    applied = sum(e.action == "apply-gate" for e in events)
    assert applied == json.loads(out)["gate_counts"]["total"]


def test_module_entry_point(tmp_path, capsys):
    path = tmp_path / "e.toml"
    path.write_text(EXAMPLE1)
    with pytest.raises(SystemExit) as info:
        cli.main(["--config", str(path)])
    assert info.value.code == 0
    assert "status: ok" in capsys.readouterr().out
