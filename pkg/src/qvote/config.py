"""TOML election configs and adversary specs.

Config schema ``qvote.config/1`` (flat keys)::

    schema = "qvote.config/1"        # optional; must match when present
    voters = 4
    candidates = 2
    choices = [0, 1, 0, "abstain"]   # candidate index or "abstain"
    kind = "bell-pair"               # optional: bell-pair | w-state | uniform-basis
    shots = 0                        # optional, 0 means exact tally
    seed = 0                         # optional
    pairs_per_voter = 1              # optional, distributed mode
    execution = "direct"             # optional, distributed mode: direct | decomposed

Adversary spec: a list of ``[[adversary]]`` tables whose keys mirror
:class:`~qvote.distributed.AdversaryAction`, plus optional ``[[fault]]``
tables mirroring :class:`~qvote.distributed.ChannelFault`.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .centralized import ElectionConfig
from .distributed import AdversaryAction, ChannelFault
from .errors import ParseError, ValidationError

CONFIG_SCHEMA = "qvote.config/1"
ABSTAIN_WORD = "abstain"

_REQUIRED = ("voters", "candidates", "choices")
_KNOWN = set(_REQUIRED) | {"schema", "kind", "shots", "seed", "pairs_per_voter", "execution"}
_ADVERSARY_KEYS = {"kind", "voter", "direction", "stage", "round", "lineage", "basis", "angle"}
_FAULT_KEYS = {"voter", "direction", "kind", "stage", "delay"}


@dataclass(frozen=True)
class RunConfig:
    election: ElectionConfig
    pairs_per_voter: int = 1
    execution: str = "direct"


def _key_line(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return None


def _load(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), line=int(m.group(1)) if m else None) from None


def _int_field(data: dict, text: str, key: str, default=None) -> int:
    if key not in data:
        if default is None:
            raise ParseError("missing required key", line=None, field=key)
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"expected an integer, got {v!r}", line=_key_line(text, key), field=key)
    return v


def _choice(v, text: str, index: int):
    if v == ABSTAIN_WORD:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(
            f"choices[{index}] must be an integer or {ABSTAIN_WORD!r}, got {v!r}",
            line=_key_line(text, "choices"),
            field="choices",
        )
    return v


def parse_run_config(text: str) -> RunConfig:
    data = _load(text)
    for key in data:
        if key not in _KNOWN:
            raise ParseError("unknown key", line=_key_line(text, key), field=key)
    schema = data.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}", line=_key_line(text, "schema"), field="schema")
    voters = _int_field(data, text, "voters")
    candidates = _int_field(data, text, "candidates")
    if "choices" not in data:
        raise ParseError("missing required key", field="choices")
    raw = data["choices"]
    if not isinstance(raw, list):
        raise ParseError("choices must be an array", line=_key_line(text, "choices"), field="choices")
    choices = tuple(_choice(v, text, i) for i, v in enumerate(raw))
    kind = data.get("kind")
    if kind is not None and not isinstance(kind, str):
        raise ParseError("kind must be a string", line=_key_line(text, "kind"), field="kind")
    execution = data.get("execution", "direct")
    if execution not in ("direct", "decomposed"):
        raise ValidationError(f"execution must be 'direct' or 'decomposed', got {execution!r}")
    pairs = _int_field(data, text, "pairs_per_voter", 1)
    if pairs < 1:
        raise ValidationError("pairs_per_voter must be >= 1")
    election = ElectionConfig(
        num_voters=voters,
        num_candidates=candidates,
        choices=choices,
        kind=kind,
        shots=_int_field(data, text, "shots", 0),
        seed=_int_field(data, text, "seed", 0),
    )
    return RunConfig(election, pairs, execution)


def parse_config(text: str) -> ElectionConfig:
    """Parse and validate config text; raises ParseError or ValidationError."""
    return parse_run_config(text).election


def format_config(config: RunConfig) -> str:
    """Inverse of :func:`parse_run_config`."""
    e = config.election
    choices = ", ".join(f'"{ABSTAIN_WORD}"' if c is None else str(c) for c in e.choices)
    return (
        f'schema = "{CONFIG_SCHEMA}"\n'
        f"voters = {e.num_voters}\n"
        f"candidates = {e.num_candidates}\n"
        f"choices = [{choices}]\n"
        f'kind = "{e.kind}"\n'
        f"shots = {e.shots}\n"
        f"seed = {e.seed}\n"
        f"pairs_per_voter = {config.pairs_per_voter}\n"
        f'execution = "{config.execution}"\n'
    )


def _tables(data: dict, name: str, allowed: set, required: tuple, cls) -> list:
    entries = data.get(name, [])
    if not isinstance(entries, list):
        raise ParseError(f"expected [[{name}]] tables", field=name)
    out = []
    for i, entry in enumerate(entries):
        unknown = set(entry) - allowed
        if unknown:
            raise ParseError(f"{name} {i}: unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
        if any(k not in entry for k in required):
            raise ParseError(f"{name} {i}: {' and '.join(map(repr, required))} required", field=name)
        try:
            out.append(cls(**entry))
        except TypeError as exc:
            raise ParseError(f"{name} {i}: {exc}", field=name) from None
    return out


def parse_adversaries(text: str) -> list[AdversaryAction]:
    return _tables(_load(text), "adversary", _ADVERSARY_KEYS, ("kind", "voter"), AdversaryAction)


def parse_faults(text: str) -> list[ChannelFault]:
    return _tables(_load(text), "fault", _FAULT_KEYS, ("voter", "direction"), ChannelFault)
