"""Exception types shared across the package."""


class DiagTablesError(Exception):
    """Base class for all package-specific failures."""


class AllWeightsImpossible(DiagTablesError):
    """Every weight in a discrete conditional is zero: the model state is inconsistent."""


class CapCeilingExceeded(DiagTablesError):
    """Tail enumeration hit the hard safety ceiling before the tail condition held."""


class InfeasibleCompletion(DiagTablesError):
    """Requested table completion would produce a negative cell count."""


class InfeasibleInputs(DiagTablesError):
    """Observed counts leave no feasible value for the latent total."""


class InvalidInit(DiagTablesError):
    """MCMC initial state has zero posterior density."""


class SliceFailure(DiagTablesError):
    """Slice sampler could not bracket or shrink to an acceptable point."""


class EmptyDraws(DiagTablesError):
    """A draw matrix with no retained draws cannot be summarized."""


class ConfigError(DiagTablesError):
    """Run configuration failed validation; message names the violations."""
