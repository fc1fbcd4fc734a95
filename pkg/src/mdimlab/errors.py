"""Exception hierarchy shared by all mdimlab modules.

Every failure mode the library promises to report gets its own class so
callers (and the CLI exit-code table) can dispatch without string matching.
"""
from __future__ import annotations


class MdimError(Exception):
    """Base class for all mdimlab errors."""


class DomainError(MdimError, ValueError):
    """An argument is outside the documented domain of an operation."""


class ContractError(MdimError):
    """A model/plan violates a structural invariant it promised to hold."""


class ResourceError(MdimError):
    """A computation would exceed an explicit size budget."""


class GridPrecisionError(MdimError):
    """A counting grid is too coarse for the requested separation scale."""


class VerificationError(MdimError):
    """A built object failed its independent re-verification."""


class SerializationError(MdimError):
    """A file does not conform to one of the mdimlab text formats."""
