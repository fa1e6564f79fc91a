"""
Exception hierarchy shared by the library and the command line.

Every error derives from FedMuonError and from the builtin it specializes, so
callers that only know about ValueError / ArithmeticError keep working.
"""


class FedMuonError(Exception):
    """Base class for all fedmuon errors."""


class DimensionError(FedMuonError, ValueError):
    """Operands have incompatible shapes."""


class UnsupportedNormError(FedMuonError, ValueError):
    """The requested norm has no implementation for this operation."""


class UndefinedOracleError(FedMuonError, ValueError):
    """The oracle is undefined for the input (e.g. all singular values zero)."""


class ConfigError(FedMuonError, ValueError):
    """Invalid configuration; `keys` lists every offending key."""

    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)


class ProtocolError(FedMuonError, RuntimeError):
    """A federated round received messages that violate the protocol."""


class NumericalError(FedMuonError, ArithmeticError):
    """A numerical routine failed; `residual` is the last measured residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalAbort(NumericalError):
    """A run produced a non-finite loss; `traces` holds records up to the abort."""

    def __init__(self, message, traces=()):
        super().__init__(message)
        self.traces = list(traces)
