"""Exception hierarchy shared by the simulator, compiler and protocol layers."""


class QVoteError(Exception):
    """Base class for every error raised by this package."""


class CapacityError(QVoteError):
    """Requested qubit count exceeds what the simulator will allocate."""


class ShapeError(QVoteError, ValueError):
    pass


class NormalizationError(QVoteError, ValueError):
    pass


class UnitarityError(QVoteError, ValueError):
    pass


class QubitIndexError(QVoteError, IndexError):
    pass


class ImpossibleOutcomeError(QVoteError):
    """Post-selection asked for a branch whose probability is below threshold."""


class NoVotesError(ImpossibleOutcomeError):
    """The difference branch is empty: nobody cast a vote."""


class RewriteError(QVoteError):
    pass


class ConfigError(QVoteError, ValueError):
    pass


class DoubleVoteError(QVoteError):
    pass


class InsufficientSamplesError(QVoteError):
    pass


class StatisticsError(QVoteError):
    pass


class ChannelLossError(QVoteError):
    pass


class ProtocolIncompleteError(QVoteError):
    pass


class ParseError(ConfigError):
    """Config text could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(ConfigError):
    """Config parsed but violates an election invariant."""
