"""Exact posteriors for fixed-hyperparameter model reductions.

With the beta-distributed rates integrated out analytically, the latent total
has a closed-form unnormalized pmf over a finite support, so the posterior can
be computed by direct enumeration. These pmfs are the ground truth the Gibbs
samplers are validated against; they use the same indicator-truncation
semantics (untruncated factors times support indicator, normalized globally) so
oracle and sampler target the same distribution by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import betaln, gammaln, logsumexp

from .distributions import (
    BetaParams,
    NegBinParams,
    log_negbin_pmf,
    log_poisson_pmf,
    tail_cap,
)
from .errors import InfeasibleInputs


@dataclass(frozen=True)
class ExactPmf:
    """A normalized pmf on a contiguous integer range starting at ``lower``."""

    lower: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.size == 0:
            raise ValueError("empty support")
        if (probs < 0).any():
            raise ValueError("negative probability")
        total = probs.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pmf sums to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lower, self.lower + self.probs.size)

    @property
    def upper(self) -> int:
        return self.lower + self.probs.size - 1


@dataclass(frozen=True)
class PmfStatistics:
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float


# n1-prior variants for the joint-model oracle. The Poisson-Gamma mixture
# covers the truncated-Poisson model with its rate hyperprior marginalized in
# closed form (a negative-binomial kernel), so no quadrature is needed.
@dataclass(frozen=True)
class UniformN1Prior:
    pass


@dataclass(frozen=True)
class PoissonFixedN1Prior:
    lam: float


@dataclass(frozen=True)
class PoissonGammaMixtureN1Prior:
    shape: float
    rate: float


@dataclass(frozen=True)
class NegBinFixedN1Prior:
    pstar: float
    r: float


N1Prior = Union[UniformN1Prior, PoissonFixedN1Prior, PoissonGammaMixtureN1Prior, NegBinFixedN1Prior]


def _normalize(lower: int, logw: np.ndarray) -> ExactPmf:
    w = np.exp(logw - logsumexp(logw))
    return ExactPmf(lower=lower, probs=w / w.sum())


def _log_beta_binomial_marginal(y: int, ns: np.ndarray, prior: BetaParams) -> np.ndarray:
    """log of C(n, y) * B(alpha + y, beta + n - y) / B(alpha, beta), the
    binomial likelihood with its success probability integrated out."""
    return (
        gammaln(ns + 1.0)
        - gammaln(y + 1.0)
        - gammaln(ns - y + 1.0)
        + betaln(prior.alpha + y, prior.beta + ns - y)
        - betaln(prior.alpha, prior.beta)
    )


def exact_n_single_row(
    y: int,
    p_prior: BetaParams,
    nb: NegBinParams,
    upper: Optional[int] = None,
) -> ExactPmf:
    """Exact posterior of the latent total in the single-row model with (pstar, r) fixed.

    p(n) is proportional to NegBin(n; pstar, r) * C(n, y) * B(alpha+y, beta+n-y) / B(alpha, beta)
    on n >= y (and n <= upper when given), normalized by direct summation.
    """
    if y < 0:
        raise ValueError(f"y must be non-negative, got {y}")
    if upper is not None:
        if upper < y:
            raise InfeasibleInputs(f"upper bound {upper} is below the observed count {y}")
        hi = upper
    else:
        hi = max(tail_cap(nb, lower=y, eps=1e-12), y + 10)
    ns = np.arange(y, hi + 1, dtype=float)
    logw = np.asarray(log_negbin_pmf(ns, nb)) + _log_beta_binomial_marginal(y, ns, p_prior)
    return _normalize(y, logw)


def exact_n1_joint(
    tp: int,
    fp: int,
    n_total: int,
    p1_prior: BetaParams,
    p2_prior: BetaParams,
    n1_prior: N1Prior,
) -> ExactPmf:
    """Exact posterior of n1 given (TP, FP, N) with both rates integrated out.

    The support is the feasible range: the prior's stated range intersected with
    what the two binomial likelihoods allow (n1 >= TP and N - n1 >= FP).

    Raises
    ------
    InfeasibleInputs
        If that range is empty.
    """
    if tp < 0 or fp < 0:
        raise ValueError("counts must be non-negative")
    if tp + fp > n_total:
        raise InfeasibleInputs(f"tp + fp = {tp + fp} exceeds N = {n_total}")

    prior_lower = tp if isinstance(n1_prior, NegBinFixedN1Prior) else 1
    lo = max(prior_lower, tp)
    hi = min(n_total - 1, n_total - fp)
    if lo > hi:
        raise InfeasibleInputs(f"no feasible n1 in [{lo}, {hi}]")

    ns = np.arange(lo, hi + 1, dtype=float)
    logw = _log_beta_binomial_marginal(tp, ns, p1_prior)
    logw += _log_beta_binomial_marginal(fp, n_total - ns, p2_prior)

    if isinstance(n1_prior, UniformN1Prior):
        pass
    elif isinstance(n1_prior, PoissonFixedN1Prior):
        logw += np.asarray(log_poisson_pmf(ns, n1_prior.lam))
    elif isinstance(n1_prior, PoissonGammaMixtureN1Prior):
        # Poisson(lam) mixed over lam ~ Gamma(a, b) is NegBin(pstar=b/(1+b), r=a).
        mix = NegBinParams(pstar=n1_prior.rate / (1.0 + n1_prior.rate), r=n1_prior.shape)
        logw += np.asarray(log_negbin_pmf(ns, mix))
    elif isinstance(n1_prior, NegBinFixedN1Prior):
        logw += np.asarray(log_negbin_pmf(ns, NegBinParams(n1_prior.pstar, n1_prior.r)))
    else:
        raise TypeError(f"unknown n1 prior variant: {type(n1_prior).__name__}")

    return _normalize(lo, logw)


def pmf_statistics(pmf: ExactPmf) -> PmfStatistics:
    """Exact mean/SD plus the smallest support values whose CDF reaches 2.5/50/97.5%."""
    support = pmf.support.astype(float)
    mean = float(support @ pmf.probs)
    var = float(((support - mean) ** 2) @ pmf.probs)
    cdf = np.cumsum(pmf.probs)

    def quantile(level: float) -> float:
        idx = int(np.searchsorted(cdf, level, side="left"))
        return float(support[min(idx, support.size - 1)])

    return PmfStatistics(
        mean=mean,
        sd=float(np.sqrt(max(var, 0.0))),
        q025=quantile(0.025),
        q50=quantile(0.5),
        q975=quantile(0.975),
    )


def tv_distance(pmf: ExactPmf, values) -> float:
    """Total-variation distance between an exact pmf and an empirical sample.

    Sampled values outside the pmf's support count fully toward the distance.
    """
    values = np.asarray(values)
    m = values.size
    if m == 0:
        raise ValueError("no sampled values")
    inside = (values >= pmf.lower) & (values <= pmf.upper)
    counts = np.bincount(
        (values[inside] - pmf.lower).astype(int), minlength=pmf.probs.size
    )
    emp = counts / m
    outside_mass = 1.0 - inside.mean()
    return 0.5 * (np.abs(emp - pmf.probs).sum() + outside_mass)
