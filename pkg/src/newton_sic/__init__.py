"""Admissible surfaces for the least-resistance problem under single impact."""

from .errors import (DegenerateGeometry, InvalidGeometry, InvalidParameter, NewtonSicError,
                     NotRegular, OutOfDomain, ResourceLimit)

__version__ = "0.1.0"

__all__ = ["NewtonSicError", "InvalidParameter", "DegenerateGeometry", "InvalidGeometry",
           "ResourceLimit", "OutOfDomain", "NotRegular", "__version__"]
