"""Exception types shared across the package."""


class EigenGPError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(EigenGPError, ValueError):
    """A kernel, design or experiment specification violates a constraint."""


class DomainError(EigenGPError, ValueError):
    """A query or design point lies outside the kernel's domain."""


class ArgumentError(EigenGPError, ValueError):
    """An operation argument is out of range or inconsistent with its inputs."""


class ContractViolationError(EigenGPError, ValueError):
    """An input breaks a caller-side contract, e.g. a non-symmetric matrix."""


class ConditioningError(EigenGPError, ArithmeticError):
    """A computation left its numerical tolerance band."""


class IngestionError(EigenGPError, ValueError):
    """An external data file is malformed or too small."""


class ReplicateError(EigenGPError, RuntimeError):
    """A Monte-Carlo replicate failed; the message carries its seed."""
