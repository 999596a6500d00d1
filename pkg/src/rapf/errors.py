"""Exception types shared across the package."""


class RapfError(Exception):
    """Base class for all package errors."""


class StoreFormatError(RapfError):
    """The file is not a RAPF-EMB v1 file (bad magic or version)."""


class StoreIntegrityError(RapfError):
    """The file parsed but violates a store invariant (e.g. non-unit text embedding)."""


class StoreCorruptionError(RapfError):
    """The file ended mid-record or mid-catalog."""


class ConfigurationError(RapfError):
    """A requested configuration is invalid or infeasible."""


class ContractViolation(RapfError):
    """A caller broke a documented precondition."""


class NumericalError(RapfError):
    """A numerical routine failed (non-finite input, Cholesky/SVD breakdown)."""


class InsufficientDataError(RapfError):
    """Too few samples for the requested estimate."""


class DataError(RapfError):
    """The store cannot supply the data a run needs."""
