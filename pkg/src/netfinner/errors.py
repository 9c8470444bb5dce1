"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class NetfinnerError(Exception):
    exit_code = 1


class NetworkError(NetfinnerError, ValueError):
    exit_code = 3


class ModelError(NetfinnerError, ValueError):
    """Invalid state, POVM, dimension mismatch or an exceeded size cap."""

    exit_code = 4


class DistributionError(NetfinnerError, ValueError):
    exit_code = 5


class NotFairSamplingError(NetfinnerError):
    """A conclusive POVM element is not a product over the party's edges."""

    exit_code = 6


class OptimizationError(NetfinnerError):
    exit_code = 7


class ValidationFailed(NetfinnerError):
    """The network is well-formed but fails a validity rule (e.g. a redundant source)."""

    exit_code = 8


class FormatError(NetfinnerError, ValueError):
    """Malformed or unreadable model / config file."""

    exit_code = 9
