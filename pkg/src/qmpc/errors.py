"""Exception types shared across the package."""


class QmpcError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(QmpcError, ValueError):
    """A dimension argument is zero, negative, or inconsistent with an operand."""


class SingularMatrixError(QmpcError, ValueError):
    """A GF(2) matrix inversion was attempted on a singular matrix."""


class InvalidOperatorError(QmpcError, ValueError):
    """An operator fails a required property (e.g. not unitary, not symplectic)."""


class ResourceLimitError(QmpcError, RuntimeError):
    """A request exceeds a configured simulation resource limit.

    The message names the limit and suggests a smaller parameter or a
    different backend.
    """


class KeyErasedError(QmpcError, KeyError):
    """A stored authentication key was read after being erased."""


class ProtocolViolationError(QmpcError, RuntimeError):
    """A protocol step was invoked in a state that the protocol forbids."""


class PartitionViolationError(QmpcError, ValueError):
    """A circuit's wire partition is not a disjoint cover of the declared wires."""


class ConfigError(QmpcError, ValueError):
    """An experiment configuration is malformed or references an unknown name."""
