"""Exception hierarchy shared by all qsv modules."""


class QsvError(Exception):
    """Base class for every error raised by qsv."""


class ParameterError(QsvError, ValueError):
    """Invalid gate, qubit index, plan or configuration parameter."""


class OracleScaleError(ParameterError):
    """Dense oracle requested above its qubit-count guard."""


class QasmError(QsvError, ValueError):
    """Malformed or unsupported OpenQASM input, always carrying a location."""

    def __init__(self, message: str, line: int, col: int):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}")


class TransportError(QsvError, RuntimeError):
    """Transport-level failure: lost connection, truncated frame, timeout."""


class RemoteAbort(TransportError):
    """Another rank aborted the collective."""


class HandshakeError(QsvError, RuntimeError):
    """Ranks disagree on the partition plan or circuit."""


class DistributedError(QsvError, RuntimeError):
    """A collective run failed; carries the failing rank and context."""

    def __init__(self, rank: int, context: str, cause: BaseException | None = None):
        self.rank = rank
        self.context = context
        self.cause = cause
        super().__init__(f"rank {rank}: {context}" + (f": {cause}" if cause is not None else ""))
