"""Exception types shared across the package."""


class MicroflowError(Exception):
    """Base class for all package errors."""


class InputDomainError(MicroflowError, ValueError):
    """An argument is outside its documented domain."""


class ContractViolationError(MicroflowError, ValueError):
    """A caller-supplied value violates an interface contract."""


class DegenerateCellError(MicroflowError, RuntimeError):
    """A unit-cell problem is singular (e.g. no drag anywhere under periodic forcing)."""


class SingularSystemError(MicroflowError, RuntimeError):
    """Sparse factorization or solve failed."""


class ConfigError(MicroflowError, ValueError):
    """A run configuration failed validation."""
