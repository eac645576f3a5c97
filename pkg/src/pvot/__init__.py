"""P-value occupation time tests with nuisance parameters under the alternative.

The core idea: evaluate a test's p-value at every point of a nuisance
grid, measure how much of the grid falls strictly below the level, and
reject when that occupation time exceeds the level itself.  Concrete
tests cover neglected nonlinearity in a regression, GARCH variance
feedback, and structural breaks; experiment drivers reproduce their size
and power behavior.
"""

__version__ = "0.1.0"

from .core import (
    PValuePath,
    PvotReport,
    StatPath,
    chi2_upper_tail,
    empirical_upper_pvalue,
    occupation_time,
    pick_randomized,
    pvot_decide,
    report_from_pvalue,
    smooth_ave,
    smooth_sup,
)
from .dgp import DgpSpec, Sample, gen_garch, gen_sample, make_stream, read_sample_csv, write_sample_csv
from .errors import (
    BadDgp,
    DegenerateVariance,
    EmptyReference,
    ExperimentUnreliable,
    GridMismatch,
    GridTooCoarse,
    NoConvergence,
    PathUnreliable,
    PvotError,
    SingularDesign,
    SingularSegment,
    UnsupportedLevel,
)
from .grid import NuisanceGrid, make_grid, make_grid_points

__all__ = [
    "BadDgp",
    "DegenerateVariance",
    "DgpSpec",
    "EmptyReference",
    "ExperimentUnreliable",
    "GridMismatch",
    "GridTooCoarse",
    "NoConvergence",
    "NuisanceGrid",
    "PathUnreliable",
    "PValuePath",
    "PvotError",
    "PvotReport",
    "Sample",
    "SingularDesign",
    "SingularSegment",
    "StatPath",
    "UnsupportedLevel",
    "chi2_upper_tail",
    "empirical_upper_pvalue",
    "gen_garch",
    "gen_sample",
    "make_grid",
    "make_grid_points",
    "make_stream",
    "occupation_time",
    "pick_randomized",
    "pvot_decide",
    "read_sample_csv",
    "report_from_pvalue",
    "smooth_ave",
    "smooth_sup",
    "write_sample_csv",
]
