"""Driving the command line from Python; the same calls work from a shell as `qvote ...`."""
import io
import json
import tempfile
from pathlib import Path

from qvote import cli

here = Path(__file__).parent / "configs"


def qvote(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue() or err.getvalue()


# %% the human table
code, text = qvote("--config", str(here / "example2.toml"))
print(code)
print(text)

# %% structured output is stable byte for byte
code, text = qvote("--config", str(here / "example1.toml"), "--format", "json", "--shots", "5000", "--seed", "4")
doc = json.loads(text)
print(doc["tally"]["probabilities"], doc["gate_counts"])

# %% distributed run with a tapped channel: verification flags it and the exit code is 8
with tempfile.TemporaryDirectory() as tmp:
    trace = Path(tmp) / "trace.log"
    code, text = qvote("--mode", "distributed", "--config", str(here / "example1.toml"),
                       "--adversary", str(here / "tap_voter0.toml"), "--verify-rounds", "200",
                       "--trace", str(trace))
    print(code)
    print(text)
    print(trace.read_text().splitlines()[0])

# %% flags that belong to the other mode are refused
print(qvote("--config", str(here / "example1.toml"), "--trace", "t.log"))
