"""Metropolis-within-Gibbs samplers for latent-total reconstruction models.

Two model families:

* **Single-row**: one observed cell count ``y`` with unknown denominator ``n``,
  ``y | n, p ~ Bin(n, p)``, a negative-binomial prior on ``n`` with a
  Poisson-Gamma hierarchy on its shape, optionally bounded above by a known
  study size.
* **Joint fixed-N**: observed (TP, FP) with known total N, ``n2 = N - n1``, and
  one of three priors on ``n1``: discrete uniform, truncated Poisson with a
  Gamma hyperprior on its rate, or truncated negative binomial with Beta/Gamma
  hyperpriors.

Every sampler targets the density computed by the matching
``target_log_density_*`` function, so its stationary distribution is testable
against :mod:`diagtables.oracle`. Discrete coordinates (n, n1, integer r) are
updated by exact enumeration of their full conditional; continuous shape ``r``
in the joint model uses step-out slice sampling on the log axis.

Truncation semantics: by default the target is the product of *untruncated*
component densities times the support indicator, normalized globally
("indicator"). This keeps the hyperparameter updates conjugate. The
alternative "normalized" semantics divides the latent-total prior by its
truncation mass, which breaks conjugacy for the shape hyperparameters; those
updates then run through griddy-Gibbs (512-point grid) or slice sampling.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import betainc, gammaincc, gammaln, xlog1py

from .distributions import (
    BetaParams,
    GammaParams,
    NegBinParams,
    PoissonParam,
    RandomStream,
    TAIL_CAP_CEILING,
    log_beta_density,
    log_binomial_pmf,
    log_gamma_density,
    log_negbin_pmf,
    log_poisson_pmf,
    sample_discrete_logweights,
    tail_cap,
)
from .errors import AllWeightsImpossible, InfeasibleInputs, InvalidInit, SliceFailure

INDICATOR = "indicator"
NORMALIZED = "normalized"

_GRIDDY_POINTS = 512
# Log-weight gap below the maximum beyond which enumeration tails are treated
# as numerically zero (exp(-46) ~ 1e-20).
_NEGLIGIBLE = 46.0


def _clip_unit(x: float) -> float:
    """Keep a rate draw strictly inside (0, 1); beta draws can round to the ends."""
    return min(max(x, 5e-324), float(np.nextafter(1.0, 0.0)))


def _chain_rng(seed: int, chain_index: int) -> RandomStream:
    return np.random.default_rng(np.random.SeedSequence([seed, chain_index]))


@dataclass(frozen=True)
class McmcSettings:
    """Chain layout; one iteration is one full Gibbs sweep."""

    seed: int
    chains: int = 4
    iterations: int = 50_000
    burn_in: int = 10_000
    thin: int = 1

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "chains": self.chains,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
        }


@dataclass
class DrawMatrix:
    """Per-chain posterior draws of named parameters (column-aligned)."""

    names: list[str]
    chains: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.chains:
            raise ValueError("need at least one chain")
        width = len(self.names)
        lengths = {c.shape[0] for c in self.chains}
        if len(lengths) != 1:
            raise ValueError("all chains must have the same number of draws")
        for c in self.chains:
            if c.ndim != 2 or c.shape[1] != width:
                raise ValueError("chain array shape does not match parameter names")

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def draws_per_chain(self) -> int:
        return self.chains[0].shape[0]

    @property
    def total_draws(self) -> int:
        return self.n_chains * self.draws_per_chain

    def _idx(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def chain_column(self, chain: int, name: str) -> np.ndarray:
        return self.chains[chain][:, self._idx(name)]

    def column(self, name: str) -> np.ndarray:
        """Pooled draws of one parameter, chains concatenated in index order."""
        j = self._idx(name)
        return np.concatenate([c[:, j] for c in self.chains])

    def with_columns(self, names: list[str], per_chain: list[np.ndarray]) -> "DrawMatrix":
        dup = set(names) & set(self.names)
        if dup:
            raise ValueError(f"columns already present: {sorted(dup)}")
        merged = [np.column_stack([c, extra]) for c, extra in zip(self.chains, per_chain)]
        return DrawMatrix(names=self.names + names, chains=merged, meta=dict(self.meta))


# ---------------------------------------------------------------------------
# single-row model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleRowInit:
    n0: int
    r0: int
    lambda0: float
    p0: float
    pstar0: float = 0.5


@dataclass(frozen=True)
class SingleRowModelSpec:
    """One observed cell with unknown denominator.

    ``upper_bound`` switches on the known-N variant (support y <= n <= N).
    ``fixed_pstar``/``fixed_r`` freeze hyperparameters for oracle-checkable
    reductions; frozen coordinates are skipped by the Gibbs sweep.
    """

    y: int
    p_prior: BetaParams
    pstar_prior: BetaParams
    lambda_prior: GammaParams
    init: SingleRowInit
    upper_bound: Optional[int] = None
    truncation: str = INDICATOR
    fixed_pstar: Optional[float] = None
    fixed_r: Optional[int] = None

    def __post_init__(self):
        if self.y < 0:
            raise ValueError("y must be non-negative")
        if self.upper_bound is not None and self.upper_bound < self.y:
            raise ValueError(f"upper_bound {self.upper_bound} is below y {self.y}")
        if self.truncation not in (INDICATOR, NORMALIZED):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")
        if self.fixed_pstar is not None and not 0.0 < self.fixed_pstar < 1.0:
            raise ValueError("fixed_pstar must lie in (0, 1)")
        if self.fixed_r is not None and self.fixed_r < 1:
            raise ValueError("fixed_r must be a positive integer")


@dataclass(frozen=True)
class SingleRowState:
    n: int
    p: float
    pstar: float
    r: int
    lam: float


def _log_negbin_or_degenerate(n: int, pstar: float, r: float) -> float:
    """NegBin(pstar, r) log-pmf with r = 0 read as the unit mass at n = 0."""
    if r == 0:
        return 0.0 if n == 0 else -np.inf
    return float(log_negbin_pmf(n, NegBinParams(pstar, r)))


def _log_negbin_trunc_mass(pstar, r, lo: int, hi: Optional[int]):
    """log P(lo <= X <= hi) under NegBin(pstar, r); broadcasts over pstar and r.

    Uses the survival identity P(X >= k) = I_{1-pstar}(k, r) so that small
    truncation masses do not cancel catastrophically.
    """
    pstar = np.asarray(pstar, dtype=float)
    r = np.asarray(r, dtype=float)
    surv_lo = betainc(float(lo), r, 1.0 - pstar) if lo >= 1 else 1.0
    surv_hi = 0.0 if hi is None else betainc(hi + 1.0, r, 1.0 - pstar)
    mass = np.asarray(surv_lo - surv_hi, dtype=float)
    out = np.full(mass.shape, -np.inf)
    pos = mass > 0
    out[pos] = np.log(mass[pos])
    return out if out.ndim else float(out)


def target_log_density_single_row(state: SingleRowState, spec: SingleRowModelSpec) -> float:
    """Unnormalized log posterior of the single-row hierarchy at one state.

    Off-support states (n < y, n above the known bound, negative r, ...) give
    -inf rather than an error.
    """
    n, p, pstar, r, lam = state.n, state.p, state.pstar, state.r, state.lam
    if n < spec.y or r < 0 or lam <= 0 or not 0 <= p <= 1 or not 0 < pstar < 1:
        return -np.inf
    if spec.upper_bound is not None and n > spec.upper_bound:
        return -np.inf
    lp = float(log_binomial_pmf(spec.y, n, p))
    lp += _log_negbin_or_degenerate(n, pstar, r)
    lp += float(log_poisson_pmf(r, lam))
    lp += float(log_gamma_density(lam, spec.lambda_prior))
    lp += float(log_beta_density(pstar, spec.pstar_prior))
    lp += float(log_beta_density(p, spec.p_prior))
    if spec.truncation == NORMALIZED and r > 0:
        lp -= _log_negbin_trunc_mass(pstar, r, spec.y, spec.upper_bound)
    return lp


def _extendable_grid_draw(build_logw, start_hi: int, bounded: bool, rng: RandomStream) -> int:
    """Draw from a discrete conditional, growing the grid until the tail is negligible."""
    hi = start_hi
    while True:
        logw = build_logw(hi)
        if bounded or hi >= TAIL_CAP_CEILING or logw[-1] <= logw.max() - _NEGLIGIBLE:
            return sample_discrete_logweights(logw, rng)
        hi = min(int(hi * 1.5) + 16, TAIL_CAP_CEILING)


def _draw_r_single_row(
    n: int, pstar: float, lam: float, spec: SingleRowModelSpec, rng: RandomStream
) -> int:
    """Enumerate r | lambda, n, pstar over 0..tail_cap (0 carries weight only at n = 0).

    Weights drop k-independent constants: for k >= 1 the conditional is
    proportional to Poisson(k; lam) * NegBin(n; pstar, k).
    """
    d = math.log(lam) + math.log(pstar)

    def build(hi: int) -> np.ndarray:
        ks = np.arange(1.0, hi + 1.0)
        logw = np.empty(hi + 1)
        logw[1:] = ks * d - gammaln(ks + 1.0) - gammaln(ks) + gammaln(n + ks)
        if spec.truncation == NORMALIZED:
            logw[1:] -= np.asarray(_log_negbin_trunc_mass(pstar, ks, spec.y, spec.upper_bound))
        logw[0] = 0.0 if n == 0 else -np.inf
        return logw

    cap = max(tail_cap(PoissonParam(lam), lower=0, eps=1e-12), 4)
    return _extendable_grid_draw(build, cap, bounded=False, rng=rng)


def _draw_n_single_row(
    y: int, p: float, pstar: float, r: int, spec: SingleRowModelSpec, rng: RandomStream
) -> int:
    """Enumerate n | p, pstar, r, y over y..(upper bound or adaptive tail cap).

    The Gamma(n+1) factors of the binomial coefficient and the negative
    binomial cancel, leaving -lgamma(n-y+1) + lgamma(n+r) + n*slope plus
    n-independent constants (dropped; a truncation-mass term would also be
    constant in n).
    """
    if r == 0:
        if y > 0:
            raise AllWeightsImpossible("r = 0 is incompatible with a positive observed count")
        return 0
    if p >= 1.0:
        return y  # all trials succeed, so n > y has zero likelihood
    slope = math.log1p(-p) + math.log1p(-pstar)

    def build(hi: int) -> np.ndarray:
        ns = np.arange(y, hi + 1.0)
        return gammaln(ns + r) - gammaln(ns - y + 1.0) + ns * slope

    if spec.upper_bound is not None:
        return y + sample_discrete_logweights(build(spec.upper_bound), rng)
    hi0 = max(tail_cap(NegBinParams(pstar, r), lower=y, eps=1e-12), y + 10)
    return y + _extendable_grid_draw(build, hi0, bounded=False, rng=rng)


def _griddy_edges(prior: BetaParams) -> np.ndarray:
    """Cell edges on (0, 1) for griddy-Gibbs, clustered into integrable spikes.

    A Beta shape below 1 diverges at its endpoint; a power-law edge layout
    keeps each cell's prior mass comparable there, which a uniform grid cannot.
    """
    a, b = prior.alpha, prior.beta
    u = np.linspace(0.0, 1.0, _GRIDDY_POINTS + 1)
    if a >= 1.0 and b >= 1.0:
        return u
    if a < 1.0 and b >= 1.0:
        return u ** (1.0 / a)
    if b < 1.0 and a >= 1.0:
        return 1.0 - u[::-1] ** (1.0 / b)
    half = np.linspace(0.0, 1.0, _GRIDDY_POINTS // 2 + 1)
    left = 0.5 * half ** (1.0 / a)
    right = 1.0 - 0.5 * half[::-1] ** (1.0 / b)
    return np.concatenate([left, right[1:]])


def _griddy_unit_draw(build_logw, prior: BetaParams, rng: RandomStream) -> float:
    """Griddy-Gibbs draw on (0, 1): sample a grid cell, then uniformly within it.

    ``build_logw`` evaluates the log conditional *density* at the cell
    midpoints; cell widths are folded in here.
    """
    edges = _griddy_edges(prior)
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    idx = sample_discrete_logweights(build_logw(mids) + np.log(widths), rng)
    return _clip_unit(edges[idx] + rng.random() * widths[idx])


def _draw_pstar_griddy(
    n: int, r: int, spec: SingleRowModelSpec, rng: RandomStream
) -> float:
    def build(q: np.ndarray) -> np.ndarray:
        logw = np.asarray(log_beta_density(q, spec.pstar_prior))
        if r > 0:
            logw = logw + r * np.log(q) + n * np.log1p(-q)
            logw = logw - np.asarray(_log_negbin_trunc_mass(q, r, spec.y, spec.upper_bound))
        return logw

    return _griddy_unit_draw(build, spec.pstar_prior, rng)


def fit_single_row(spec: SingleRowModelSpec, mcmc: McmcSettings) -> DrawMatrix:
    """Run the single-row Gibbs sampler; returns post-burn-in, thinned draws.

    Sweep order per iteration: p, pstar, lambda, r, n. Hyperparameters frozen
    via ``fixed_pstar``/``fixed_r`` keep their values throughout.
    """
    init = spec.init
    pstar0 = spec.fixed_pstar if spec.fixed_pstar is not None else init.pstar0
    r0 = spec.fixed_r if spec.fixed_r is not None else init.r0
    state0 = SingleRowState(n=init.n0, p=init.p0, pstar=pstar0, r=r0, lam=init.lambda0)
    if not np.isfinite(target_log_density_single_row(state0, spec)):
        raise InvalidInit(f"initial state {state0} has zero posterior density")

    t_start = time.perf_counter()
    chains = [_run_single_row_chain(spec, mcmc, c, state0) for c in range(mcmc.chains)]
    meta = {
        "model": "single_row" if spec.upper_bound is None else "single_row_known_n",
        "settings": mcmc.as_dict(),
        "truncation": spec.truncation,
        "wall_clock_seconds": time.perf_counter() - t_start,
    }
    return DrawMatrix(names=["n", "p", "pstar", "r", "lambda"], chains=chains, meta=meta)


def _run_single_row_chain(
    spec: SingleRowModelSpec, mcmc: McmcSettings, chain_index: int, state0: SingleRowState
) -> np.ndarray:
    rng = _chain_rng(mcmc.seed, chain_index)
    y = spec.y
    pp, sp_, lp = spec.p_prior, spec.pstar_prior, spec.lambda_prior
    n, pstar, r = state0.n, state0.pstar, state0.r
    out = np.empty((mcmc.retained_per_chain, 5))
    k = 0
    for it in range(mcmc.iterations):
        p = rng.beta(pp.alpha + y, pp.beta + (n - y))
        if spec.fixed_pstar is None:
            if spec.truncation == INDICATOR:
                pstar = _clip_unit(rng.beta(sp_.alpha + r, sp_.beta + n))
            else:
                pstar = _draw_pstar_griddy(n, r, spec, rng)
        lam = rng.gamma(lp.shape + r, 1.0 / (lp.rate + 1.0))
        if spec.fixed_r is None:
            r = _draw_r_single_row(n, pstar, lam, spec, rng)
        n = _draw_n_single_row(y, p, pstar, r, spec, rng)
        if it >= mcmc.burn_in and (it - mcmc.burn_in) % mcmc.thin == 0:
            out[k, 0] = n
            out[k, 1] = p
            out[k, 2] = pstar
            out[k, 3] = r
            out[k, 4] = lam
            k += 1
    return out


# ---------------------------------------------------------------------------
# joint TP/FP model with fixed N
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformPrior:
    """Equal prior mass on each n1 in {1, ..., N-1}."""


@dataclass(frozen=True)
class TruncPoissonPrior:
    """Poisson(lambda) truncated to {1, ..., N-1}, lambda ~ Gamma(shape, rate)."""

    lambda_prior: GammaParams
    fixed_lambda: Optional[float] = None

    def __post_init__(self):
        if self.fixed_lambda is not None and self.fixed_lambda <= 0:
            raise ValueError("fixed_lambda must be positive")


@dataclass(frozen=True)
class TruncNegBinPrior:
    """NegBin(p3, r) truncated to {TP, ..., N-1}; p3 ~ Beta, r ~ Gamma (continuous)."""

    p3_prior: BetaParams
    r_prior: GammaParams
    fixed_p3: Optional[float] = None
    fixed_r: Optional[float] = None

    def __post_init__(self):
        if self.fixed_p3 is not None and not 0.0 < self.fixed_p3 < 1.0:
            raise ValueError("fixed_p3 must lie in (0, 1)")
        if self.fixed_r is not None and self.fixed_r <= 0:
            raise ValueError("fixed_r must be positive")


N1PriorVariant = Union[UniformPrior, TruncPoissonPrior, TruncNegBinPrior]


@dataclass(frozen=True)
class JointInit:
    n1_0: int
    p1_0: float = 0.5
    p2_0: float = 0.5
    p3_0: float = 0.5
    r0: float = 20.0
    lambda0: float = 50.0


@dataclass(frozen=True)
class JointModelSpec:
    tp: int
    fp: int
    n_total: int
    p1_prior: BetaParams
    p2_prior: BetaParams
    n1_prior: N1PriorVariant
    init: JointInit
    truncation: str = INDICATOR

    def __post_init__(self):
        if self.tp < 0 or self.fp < 0:
            raise ValueError("counts must be non-negative")
        if self.n_total < 2:
            raise ValueError("N must be at least 2")
        if self.tp + self.fp > self.n_total:
            raise ValueError(f"tp + fp = {self.tp + self.fp} exceeds N = {self.n_total}")
        if self.truncation not in (INDICATOR, NORMALIZED):
            raise ValueError(f"unknown truncation mode {self.truncation!r}")

    @property
    def prior_lower(self) -> int:
        return self.tp if isinstance(self.n1_prior, TruncNegBinPrior) else 1

    def feasible_range(self) -> tuple[int, int]:
        """Intersection of the prior's support with what both binomials allow."""
        lo = max(self.prior_lower, self.tp)
        hi = min(self.n_total - 1, self.n_total - self.fp)
        if lo > hi:
            raise InfeasibleInputs(f"no feasible n1 between {lo} and {hi}")
        return lo, hi


@dataclass(frozen=True)
class JointState:
    n1: int
    p1: float
    p2: float
    lam: Optional[float] = None
    p3: Optional[float] = None
    r: Optional[float] = None


def _log_poisson_trunc_mass(lam: float, lo: int, hi: int) -> float:
    # CDF(k) = gammaincc(k + 1, lam)
    mass = gammaincc(hi + 1.0, lam) - (gammaincc(float(lo), lam) if lo > 0 else 0.0)
    return math.log(mass) if mass > 0 else -np.inf


def target_log_density_joint(state: JointState, spec: JointModelSpec) -> float:
    """Unnormalized log posterior of the joint fixed-N model at one state."""
    n1, p1, p2 = state.n1, state.p1, state.p2
    if not (spec.prior_lower <= n1 <= spec.n_total - 1):
        return -np.inf
    if not (0 <= p1 <= 1 and 0 <= p2 <= 1):
        return -np.inf
    lp = float(log_binomial_pmf(spec.tp, n1, p1))
    lp += float(log_binomial_pmf(spec.fp, spec.n_total - n1, p2))
    lp += float(log_beta_density(p1, spec.p1_prior))
    lp += float(log_beta_density(p2, spec.p2_prior))

    prior = spec.n1_prior
    if isinstance(prior, UniformPrior):
        pass
    elif isinstance(prior, TruncPoissonPrior):
        lam = state.lam
        if lam is None or lam <= 0:
            return -np.inf
        lp += float(log_poisson_pmf(n1, lam))
        lp += float(log_gamma_density(lam, prior.lambda_prior))
        if spec.truncation == NORMALIZED:
            lp -= _log_poisson_trunc_mass(lam, 1, spec.n_total - 1)
    elif isinstance(prior, TruncNegBinPrior):
        p3, r = state.p3, state.r
        if p3 is None or r is None or not 0 < p3 < 1 or r <= 0:
            return -np.inf
        lp += float(log_negbin_pmf(n1, NegBinParams(p3, r)))
        lp += float(log_beta_density(p3, prior.p3_prior))
        lp += float(log_gamma_density(r, prior.r_prior))
        if spec.truncation == NORMALIZED:
            lp -= _log_negbin_trunc_mass(p3, r, spec.tp, spec.n_total - 1)
    else:
        raise TypeError(f"unknown n1 prior variant: {type(prior).__name__}")
    return lp


def _slice_scalar(t0, logf, rng: RandomStream, width=1.0, max_expand=50, max_shrink=200):
    """One step-out/shrinkage slice-sampling update of a scalar coordinate."""
    f0 = logf(t0)
    if not np.isfinite(f0):
        raise SliceFailure(f"slice sampler started at zero-density point {t0}")
    thresh = f0 + math.log1p(-rng.random())
    left = t0 - width * rng.random()
    right = left + width
    steps = 0
    while logf(left) > thresh:
        left -= width
        steps += 1
        if steps > max_expand:
            raise SliceFailure("step-out exceeded the expansion budget (left)")
    steps = 0
    while logf(right) > thresh:
        right += width
        steps += 1
        if steps > max_expand:
            raise SliceFailure("step-out exceeded the expansion budget (right)")
    for _ in range(max_shrink):
        t1 = left + rng.random() * (right - left)
        if logf(t1) > thresh:
            return t1
        if t1 < t0:
            left = t1
        else:
            right = t1
    raise SliceFailure("shrinkage failed to find an acceptable point")


def fit_joint(spec: JointModelSpec, mcmc: McmcSettings) -> DrawMatrix:
    """Run the joint fixed-N Gibbs sampler; returns post-burn-in, thinned draws.

    Sweep order per iteration: p1, p2, n1 (exact enumeration over the feasible
    range), then the prior variant's hyperparameter updates. ``n2 = N - n1`` is
    *not* stored here; :func:`derive_quantities` appends it.
    """
    prior = spec.n1_prior
    lo, hi = spec.feasible_range()
    init = spec.init
    state0 = _initial_joint_state(spec)
    if not np.isfinite(target_log_density_joint(state0, spec)):
        raise InvalidInit(f"initial state {state0} has zero posterior density")

    t_start = time.perf_counter()
    chains = [_run_joint_chain(spec, mcmc, c, state0, lo, hi) for c in range(mcmc.chains)]
    names = ["n1", "p1", "p2"]
    if isinstance(prior, TruncPoissonPrior):
        names.append("lambda")
    elif isinstance(prior, TruncNegBinPrior):
        names.extend(["p3", "r"])
    meta = {
        "model": "joint_fixed_n",
        "n1_prior_variant": type(prior).__name__,
        "settings": mcmc.as_dict(),
        "truncation": spec.truncation,
        "wall_clock_seconds": time.perf_counter() - t_start,
    }
    return DrawMatrix(names=names, chains=chains, meta=meta)


def _initial_joint_state(spec: JointModelSpec) -> JointState:
    init, prior = spec.init, spec.n1_prior
    lam = p3 = r = None
    if isinstance(prior, TruncPoissonPrior):
        lam = prior.fixed_lambda if prior.fixed_lambda is not None else init.lambda0
    elif isinstance(prior, TruncNegBinPrior):
        p3 = prior.fixed_p3 if prior.fixed_p3 is not None else init.p3_0
        r = prior.fixed_r if prior.fixed_r is not None else init.r0
    return JointState(n1=init.n1_0, p1=init.p1_0, p2=init.p2_0, lam=lam, p3=p3, r=r)


def _run_joint_chain(
    spec: JointModelSpec,
    mcmc: McmcSettings,
    chain_index: int,
    state0: JointState,
    lo: int,
    hi: int,
) -> np.ndarray:
    rng = _chain_rng(mcmc.seed, chain_index)
    tp, fp, n_total = spec.tp, spec.fp, spec.n_total
    p1p, p2p, prior = spec.p1_prior, spec.p2_prior, spec.n1_prior
    normalized = spec.truncation == NORMALIZED

    n1g = np.arange(lo, hi + 1, dtype=float)
    d1 = n1g - tp
    d2 = (n_total - n1g) - fp
    grid_const = (
        gammaln(n1g + 1.0)
        - gammaln(n1g - tp + 1.0)
        + gammaln(n_total - n1g + 1.0)
        - gammaln(n_total - n1g - fp + 1.0)
    )
    gammaln_n1p1 = gammaln(n1g + 1.0)

    n1 = state0.n1
    lam, p3, r = state0.lam, state0.p3, state0.r

    is_pois = isinstance(prior, TruncPoissonPrior)
    is_nb = isinstance(prior, TruncNegBinPrior)
    n_cols = 3 + (1 if is_pois else 0) + (2 if is_nb else 0)
    out = np.empty((mcmc.retained_per_chain, n_cols))
    k = 0
    for it in range(mcmc.iterations):
        p1 = rng.beta(p1p.alpha + tp, p1p.beta + (n1 - tp))
        p2 = rng.beta(p2p.alpha + fp, p2p.beta + (n_total - n1) - fp)

        logw = grid_const + xlog1py(d1, -p1) + xlog1py(d2, -p2)
        if is_pois:
            logw = logw + n1g * math.log(lam) - gammaln_n1p1
        elif is_nb:
            logw = logw + gammaln(n1g + r) - gammaln_n1p1 + n1g * math.log1p(-p3)
        n1 = lo + sample_discrete_logweights(logw, rng)

        if is_pois and prior.fixed_lambda is None:
            if not normalized:
                gp = prior.lambda_prior
                lam = rng.gamma(gp.shape + n1, 1.0 / (gp.rate + 1.0))
            else:
                lam = _draw_lambda_joint_normalized(n1, lam, prior, spec, rng)
        elif is_nb:
            if prior.fixed_p3 is None:
                if not normalized:
                    pr = prior.p3_prior
                    p3 = _clip_unit(rng.beta(pr.alpha + r, pr.beta + n1))
                else:
                    p3 = _draw_p3_griddy(n1, r, prior, spec, rng)
            if prior.fixed_r is None:
                r = _slice_r_joint(n1, p3, r, prior, spec, rng)

        if it >= mcmc.burn_in and (it - mcmc.burn_in) % mcmc.thin == 0:
            out[k, 0] = n1
            out[k, 1] = p1
            out[k, 2] = p2
            if is_pois:
                out[k, 3] = lam
            elif is_nb:
                out[k, 3] = p3
                out[k, 4] = r
            k += 1
    return out


def _draw_lambda_joint_normalized(
    n1: int, lam: float, prior: TruncPoissonPrior, spec: JointModelSpec, rng: RandomStream
) -> float:
    shape, rate = prior.lambda_prior.shape, prior.lambda_prior.rate
    lo, hi = 1, spec.n_total - 1

    # slice on t = log lam; constants in t dropped, + t is the Jacobian
    def logf(t: float) -> float:
        if t > 700.0:
            return -np.inf
        lam_t = math.exp(t)
        return (
            shape * t
            - rate * lam_t
            + n1 * t
            - lam_t
            - _log_poisson_trunc_mass(lam_t, lo, hi)
        )

    return math.exp(_slice_scalar(math.log(lam), logf, rng))


def _draw_p3_griddy(
    n1: int, r: float, prior: TruncNegBinPrior, spec: JointModelSpec, rng: RandomStream
) -> float:
    lo, hi = spec.tp, spec.n_total - 1

    def build(q: np.ndarray) -> np.ndarray:
        logw = np.asarray(log_beta_density(q, prior.p3_prior))
        logw = logw + r * np.log(q) + n1 * np.log1p(-q)
        return logw - np.asarray(_log_negbin_trunc_mass(q, r, lo, hi))

    return _griddy_unit_draw(build, prior.p3_prior, rng)


def _slice_r_joint(
    n1: int,
    p3: float,
    r: float,
    prior: TruncNegBinPrior,
    spec: JointModelSpec,
    rng: RandomStream,
) -> float:
    shape, rate = prior.r_prior.shape, prior.r_prior.rate
    normalized = spec.truncation == NORMALIZED
    lo, hi = spec.tp, spec.n_total - 1
    log_p3 = math.log(p3)
    lgamma = math.lgamma

    # slice on t = log r; constants in t dropped, + t is the Jacobian
    def logf(t: float) -> float:
        if t > 690.0:
            return -np.inf
        rt = math.exp(t)
        if rt == 0.0:
            return -np.inf
        val = shape * t - rate * rt + lgamma(n1 + rt) - lgamma(rt) + rt * log_p3
        if normalized:
            val -= _log_negbin_trunc_mass(p3, rt, lo, hi)
        return val

    return math.exp(_slice_scalar(math.log(r), logf, rng))


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------


def derive_quantities(
    draws: DrawMatrix, spec: Union[SingleRowModelSpec, JointModelSpec]
) -> DrawMatrix:
    """Append per-draw reconstruction columns.

    Joint fits gain n2, fn, tn, the rate-based se/sp, the count-based variants,
    npv (NaN where fn + tn = 0), acc and prev. Single-row fits gain the missing
    cell, n - y.
    """
    if isinstance(spec, JointModelSpec):
        tp, fp, n_total = spec.tp, spec.fp, spec.n_total
        names = ["n2", "fn", "tn", "se", "sp", "se_count", "sp_count", "npv", "acc", "prev"]
        extras = []
        for c in range(draws.n_chains):
            n1 = draws.chain_column(c, "n1")
            p1 = draws.chain_column(c, "p1")
            p2 = draws.chain_column(c, "p2")
            n2 = n_total - n1
            fn = n1 - tp
            tn = n2 - fp
            with np.errstate(divide="ignore", invalid="ignore"):
                se_count = np.where(n1 > 0, tp / n1, np.nan)
                sp_count = np.where(n2 > 0, tn / n2, np.nan)
                npv = np.where(fn + tn > 0, tn / (fn + tn), np.nan)
            acc = (tp + tn) / n_total
            prev = n1 / n_total
            extras.append(
                np.column_stack([n2, fn, tn, p1, 1.0 - p2, se_count, sp_count, npv, acc, prev])
            )
        return draws.with_columns(names, extras)
    if isinstance(spec, SingleRowModelSpec):
        extras = [
            (draws.chain_column(c, "n") - spec.y)[:, None] for c in range(draws.n_chains)
        ]
        return draws.with_columns(["missing"], extras)
    raise TypeError(f"unsupported spec type: {type(spec).__name__}")
