"""Error types shared across the package."""


class PolymorphError(Exception):
    """Base class for all package errors."""


class DomainError(PolymorphError):
    """A symbol, coordinate or index lies outside the declared domain."""


class ValidationError(PolymorphError):
    """An object fails its structural invariants (weights, normalization, shape)."""


class ResourceError(PolymorphError):
    """An exact computation would exceed the configured enumeration cap."""


class UnsupportedError(PolymorphError):
    """The operation is defined only for a narrower class of inputs."""
