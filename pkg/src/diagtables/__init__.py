"""Bayesian reconstruction of incomplete 2x2 diagnostic tables.

Given a partially reported diagnostic table (a single observed test-outcome
row, or observed TP/FP with a known total sample size), the package draws from
the posterior of the missing cell counts and stratum totals under hierarchical
binomial models, summarizes the draws, validates the samplers against exact
enumeration oracles, and derives the usual operating characteristics.
"""

from .distributions import (
    BetaParams,
    GammaParams,
    NegBinParams,
    PoissonParam,
    RandomStream,
)
from .errors import (
    AllWeightsImpossible,
    CapCeilingExceeded,
    ConfigError,
    DiagTablesError,
    EmptyDraws,
    InfeasibleCompletion,
    InfeasibleInputs,
    InvalidInit,
    SliceFailure,
)
from .tables import CellCounts, Measures, PartialTable, Scenario, complete_table, measures_from_counts, validate_partial
from .samplers import (
    DrawMatrix,
    JointInit,
    JointModelSpec,
    McmcSettings,
    SingleRowInit,
    SingleRowModelSpec,
    TruncNegBinPrior,
    TruncPoissonPrior,
    UniformPrior,
    derive_quantities,
    fit_joint,
    fit_single_row,
)
from .oracle import (
    ExactPmf,
    NegBinFixedN1Prior,
    PoissonFixedN1Prior,
    PoissonGammaMixtureN1Prior,
    UniformN1Prior,
    exact_n1_joint,
    exact_n_single_row,
    pmf_statistics,
    tv_distance,
)
from .diagnostics import PosteriorSummary, compare_to_reference, summarize

__version__ = "0.1.0"
