"""Exception types shared across the package."""


class NewtonSicError(Exception):
    """Base class for all package errors."""


class InvalidParameter(NewtonSicError, ValueError):
    pass


class DegenerateGeometry(NewtonSicError, ValueError):
    pass


class InvalidGeometry(NewtonSicError, ValueError):
    pass


class ResourceLimit(NewtonSicError, RuntimeError):
    """A configured memory or work budget would be exceeded."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class OutOfDomain(NewtonSicError, ValueError):
    pass


class NotRegular(NewtonSicError, ValueError):
    """The surface has no gradient at the requested point."""


class DocumentError(NewtonSicError, ValueError):
    """A serialized document is malformed or uses an unknown tag."""
