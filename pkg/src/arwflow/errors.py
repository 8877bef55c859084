"""Exception types shared across the package."""


class ArwError(Exception):
    """Base class for all arwflow errors."""


class ToppleIllegal(ArwError):
    """Raised when toppling is attempted at a stable site."""


class SiteOutsideSupport(ArwError):
    """Raised when an operation addresses a site outside the configuration support."""


class ToppleBudgetExceeded(ArwError):
    """Raised when a stabilization run hits its toppling safety cap."""


class InvalidDistributionParams(ArwError):
    """Raised for ill-formed initial-configuration distributions."""


class DomainMismatch(ArwError):
    """Raised when a configuration's support does not fit the requested domain."""


class EmptyPath(ArwError):
    """Raised when a path operation receives an empty path."""


class UnorderedStarts(ArwError):
    """Raised when coalescence input paths are not ordered by start time."""


class GridTooCoarse(ArwError):
    """Raised when the discretization step is too large for the requested query times."""


class RefinementBudgetExceeded(UserWarning):
    """Warning emitted when level refinement stops before reaching the target resolution."""


class SeedCollision(UserWarning):
    """Warning emitted when one seed is reused with different parameters."""


class EmptySample(ArwError):
    """Raised when a statistical test receives an empty sample."""


class NonpositiveScale(ArwError):
    """Raised for nonpositive scale parameters in reference laws."""


class MalformedInput(ArwError):
    """Raised when a CSV/JSON artifact cannot be parsed."""


class UnknownCheck(ArwError):
    """Raised when an unregistered verification check is requested."""


class ConfigError(ArwError):
    """Raised for invalid experiment configuration (CLI exit code 2)."""
