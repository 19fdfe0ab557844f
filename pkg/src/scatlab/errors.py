"""Exception hierarchy shared by all scatlab modules."""


class ScatlabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ScatlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PotentialError(ScatlabError, ValueError):
    """A potential document could not be turned into a valid Potential."""


class PotentialParseError(PotentialError):
    """The document is not well-formed JSON or misses a required field."""


class PotentialValidationError(PotentialError):
    """The document parses but violates an invariant of the potential."""


class NonConvergenceError(ScatlabError, RuntimeError):
    """A numerical procedure failed to reach its tolerance.

    ``achieved`` carries the best error estimate that was reached, when known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class UnderflowWarning(RuntimeWarning):
    """A quantity computed in log space was too small for a float and was set to 0."""
