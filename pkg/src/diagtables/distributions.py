"""Log-space pmf/density evaluation and seeded sampling for every distribution the models use.

Conventions that matter and are easy to get wrong:

* **Gamma is (shape, rate) everywhere.** ``Gamma(a, b)`` has mean ``a / b``.
  All conjugate updates in :mod:`diagtables.samplers` (e.g. the ``Gamma(a + r, b + 1)``
  update for a Poisson rate) assume this parameterization.
* **Negative binomial counts failures before ``r`` successes** with success
  probability ``pstar``; its support starts at 0 and the pre-truncation mean is
  ``r * (1 - pstar) / pstar``. The shape parameter ``r`` may be any positive real,
  integer ``r`` is not a separate code path.
* All pmf/density evaluation happens in log space via ``gammaln``; out-of-support
  arguments yield ``-inf`` rather than raising.

Sampling routines take an explicit :data:`RandomStream` (a ``numpy.random.Generator``)
so that callers own reproducibility; nothing here keeps mutable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import betaln, gammaln, xlog1py, xlogy

from .errors import AllWeightsImpossible, CapCeilingExceeded

RandomStream = np.random.Generator

# Hard ceiling on enumerated support points; hitting it raises rather than
# silently truncating (pathological hyperparameter states early in a chain).
TAIL_CAP_CEILING = 10_000_000

_CHUNK0 = 256
_CHUNK_MAX = 16384


@dataclass(frozen=True)
class BetaParams:
    """Shape pair (alpha, beta) of a Beta distribution; both strictly positive."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Beta shapes must be positive, got ({self.alpha}, {self.beta})")


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution with shape ``shape`` and *rate* ``rate`` (mean shape/rate)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"Gamma shape/rate must be positive, got ({self.shape}, {self.rate})")


@dataclass(frozen=True)
class NegBinParams:
    """Failures-before-``r``-successes negative binomial; ``r`` may be non-integer."""

    pstar: float
    r: float

    def __post_init__(self):
        if not (0.0 < self.pstar < 1.0):
            raise ValueError(f"pstar must lie in (0, 1), got {self.pstar}")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")

    @property
    def mean(self) -> float:
        return self.r * (1.0 - self.pstar) / self.pstar


@dataclass(frozen=True)
class PoissonParam:
    """Poisson rate parameter."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Poisson rate must be positive, got {self.lam}")


def _maybe_scalar(x: np.ndarray) -> Union[float, np.ndarray]:
    return float(x) if np.ndim(x) == 0 else x


def log_binomial_pmf(y, n, p) -> Union[float, np.ndarray]:
    """log P(Y = y) for Y ~ Bin(n, p), elementwise over broadcastable arguments.

    Follows the conventions 0*log(0) = 0, and returns -inf (not an error) when
    y > n, when p = 0 with y > 0, or when p = 1 with y < n.
    """
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    valid = y <= n
    ys = np.where(valid, y, 0.0)
    ns = np.where(valid, n, 0.0)
    out = (
        gammaln(ns + 1.0)
        - gammaln(ys + 1.0)
        - gammaln(ns - ys + 1.0)
        + xlogy(ys, p)
        + xlog1py(ns - ys, -p)
    )
    out = np.where(valid, out, -np.inf)
    return _maybe_scalar(out)


def log_negbin_pmf(n, params: NegBinParams) -> Union[float, np.ndarray]:
    """log P(N = n) for the failures-before-r-successes negative binomial.

    Valid for any real r > 0:
    log Gamma(n+r) - log Gamma(r) - log Gamma(n+1) + r*log(pstar) + n*log(1-pstar).
    """
    n = np.asarray(n, dtype=float)
    out = (
        gammaln(n + params.r)
        - gammaln(params.r)
        - gammaln(n + 1.0)
        + params.r * math.log(params.pstar)
        + n * math.log1p(-params.pstar)
    )
    return _maybe_scalar(out)


def log_poisson_pmf(k, lam: float) -> Union[float, np.ndarray]:
    """log P(K = k) for K ~ Poisson(lam)."""
    k = np.asarray(k, dtype=float)
    out = xlogy(k, lam) - lam - gammaln(k + 1.0)
    return _maybe_scalar(out)


def log_beta_density(x, params: BetaParams) -> Union[float, np.ndarray]:
    """log density of Beta(alpha, beta) at x; -inf outside [0, 1]."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0.0) & (x <= 1.0)
    xs = np.where(inside, x, 0.5)
    out = (
        xlogy(params.alpha - 1.0, xs)
        + xlog1py(params.beta - 1.0, -xs)
        - betaln(params.alpha, params.beta)
    )
    out = np.where(inside, out, -np.inf)
    return _maybe_scalar(out)


def log_gamma_density(x, params: GammaParams) -> Union[float, np.ndarray]:
    """log density of Gamma(shape, rate) at x; -inf for x < 0."""
    x = np.asarray(x, dtype=float)
    inside = x >= 0.0
    xs = np.where(inside, x, 1.0)
    out = (
        params.shape * math.log(params.rate)
        - gammaln(params.shape)
        + xlogy(params.shape - 1.0, xs)
        - params.rate * xs
    )
    out = np.where(inside, out, -np.inf)
    return _maybe_scalar(out)


def sample_beta(params: BetaParams, rng: RandomStream) -> float:
    """One draw from Beta(alpha, beta)."""
    return float(rng.beta(params.alpha, params.beta))


def sample_gamma(params: GammaParams, rng: RandomStream) -> float:
    """One draw from Gamma(shape, rate); note rate, not scale."""
    return float(rng.gamma(params.shape, 1.0 / params.rate))


def sample_discrete_logweights(logw, rng: RandomStream) -> int:
    """Draw an index proportionally to exp(logw), stabilized by max-subtraction.

    Raises
    ------
    AllWeightsImpossible
        If every entry is -inf (an inconsistent model state).
    """
    logw = np.asarray(logw, dtype=float)
    if logw.size == 0:
        raise AllWeightsImpossible("empty weight vector")
    if np.isnan(logw).any():
        raise ValueError("log-weights contain NaN")
    m = logw.max()
    if m == -np.inf:
        raise AllWeightsImpossible("all log-weights are -inf")
    w = np.exp(logw - m)
    cum = np.cumsum(w)
    u = rng.random() * cum[-1]
    return int(np.searchsorted(cum, u, side="right"))


def _log_pmf_on(params, ks: np.ndarray) -> np.ndarray:
    if isinstance(params, NegBinParams):
        return np.asarray(log_negbin_pmf(ks, params))
    if isinstance(params, PoissonParam):
        return np.asarray(log_poisson_pmf(ks, params.lam))
    raise TypeError(f"unsupported distribution for tail_cap: {type(params).__name__}")


def tail_cap(params, lower: int = 0, eps: float = 1e-12) -> int:
    """Smallest M >= lower such that the mass above M is below eps.

    Computed by chunked cumulative summation of the pmf from 0 upward. Exceeding
    the hard ceiling of ``TAIL_CAP_CEILING`` support points raises
    :class:`CapCeilingExceeded` instead of silently truncating.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if lower < 0:
        raise ValueError(f"lower must be non-negative, got {lower}")
    target = 1.0 - eps
    cum = 0.0
    k0 = 0
    chunk = _CHUNK0
    while k0 <= TAIL_CAP_CEILING:
        ks = np.arange(k0, min(k0 + chunk, TAIL_CAP_CEILING + 1))
        csum = cum + np.cumsum(np.exp(_log_pmf_on(params, ks)))
        idx = int(np.searchsorted(csum, target, side="right"))
        if idx < ks.size:
            return max(int(ks[idx]), lower)
        cum = float(csum[-1])
        k0 += chunk
        chunk = min(chunk * 2, _CHUNK_MAX)
    raise CapCeilingExceeded(
        f"tail condition eps={eps} not reached within {TAIL_CAP_CEILING} support points"
    )
