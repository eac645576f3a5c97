"""Exception types shared across the package."""


class PvotError(Exception):
    """Base class for all package-specific errors."""


class GridTooCoarse(PvotError):
    """Fewer than two grid points fit inside the nuisance interval."""


class EmptyReference(PvotError):
    """A reference sample of statistics is empty."""


class BadDgp(PvotError):
    """Unknown generator kind or parameters outside their admissible region."""


class SingularDesign(PvotError):
    """The regressor Gram matrix is numerically singular."""


class DegenerateVariance(PvotError):
    """A statistic variance estimate fell below the usable floor."""


class UnsupportedLevel(PvotError):
    """No tabulated critical value exists for the requested test level."""


class NoConvergence(PvotError):
    """No optimizer start converged within the iteration cap."""


class PathUnreliable(PvotError):
    """Too large a share of grid points failed while building a statistic path."""


class GridMismatch(PvotError):
    """Two objects that must share a nuisance grid were built on different grids."""


class SingularSegment(PvotError):
    """A sample segment is too short or collinear to estimate on."""


class ExperimentUnreliable(PvotError):
    """Too many Monte Carlo replications failed for the summary to be trusted."""
