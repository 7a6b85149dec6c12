"""Posterior summarization and convergence assessment for draw matrices.

Quantiles use the lower-nearest-rank empirical definition so that integer
parameters report integer quantiles. Effective sample size uses Geyer's
initial-monotone-positive-sequence estimator per chain (summed over chains);
split-R-hat halves each chain and compares within/between variances. Both are
``None`` when the draws cannot support them (single short chain, constant
column, NaN-contaminated column) rather than silently wrong.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyDraws
from .samplers import DrawMatrix

_MIN_RHAT_DRAWS = 100


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    ess: Optional[float]
    split_rhat: Optional[float]
    mcse: Optional[float]


@dataclass(frozen=True)
class PosteriorSummary:
    parameters: dict[str, ParameterSummary]
    n_chains: int
    total_draws: int

    def __getitem__(self, name: str) -> ParameterSummary:
        return self.parameters[name]

    def rows(self) -> list[ParameterSummary]:
        return list(self.parameters.values())


def empirical_quantile(sorted_values: np.ndarray, level: float) -> float:
    """Lower-nearest-rank quantile of a pre-sorted sample.

    Levels 0 and 1 return the minimum and maximum.
    """
    n = sorted_values.size
    rank = min(max(math.ceil(level * n), 1), n)
    return float(sorted_values[rank - 1])


def _ess_geyer(x: np.ndarray) -> Optional[float]:
    """Geyer initial-monotone-sequence ESS of one chain; None if degenerate."""
    n = x.size
    if n < 4:
        return None
    x = x - x.mean()
    var0 = float(x @ x) / n
    if var0 == 0.0 or not np.isfinite(var0):
        return None
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]

    # Paired sums of consecutive autocorrelations; keep while positive, and
    # enforce monotone non-increase.
    tau = -1.0
    prev = np.inf
    for k in range(0, n // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        prev = pair
        tau += 2.0 * pair
    tau = max(tau, 1e-12)
    return min(n / tau, float(n))


def _split_rhat(chain_cols: list[np.ndarray]) -> Optional[float]:
    """Split-chain potential scale reduction; None when unavailable or degenerate."""
    if len(chain_cols) < 2 or any(c.size < _MIN_RHAT_DRAWS for c in chain_cols):
        return None
    halves = []
    for c in chain_cols:
        half = c.size // 2
        halves.append(c[:half])
        halves.append(c[c.size - half:])
    arr = np.vstack(halves)
    n = arr.shape[1]
    within = arr.var(axis=1, ddof=1).mean()
    if within == 0.0 or not np.isfinite(within):
        return None
    between = n * arr.mean(axis=1).var(ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def summarize(draws: DrawMatrix) -> PosteriorSummary:
    """Pooled mean/SD, order-statistic quantiles, ESS, split-R-hat and MCSE.

    Columns containing NaN (undefined derived measures) are summarized over
    their finite values only; their ESS/R-hat are reported unavailable.

    Raises
    ------
    EmptyDraws
        If the matrix holds no retained draws.
    """
    if draws.draws_per_chain == 0:
        raise EmptyDraws("draw matrix holds no retained draws")
    params: dict[str, ParameterSummary] = {}
    for name in draws.names:
        chain_cols = [draws.chain_column(c, name) for c in range(draws.n_chains)]
        pooled = np.concatenate(chain_cols)
        has_nan = bool(np.isnan(pooled).any())
        finite = pooled[~np.isnan(pooled)] if has_nan else pooled
        if finite.size == 0:
            params[name] = ParameterSummary(
                name, math.nan, math.nan, math.nan, math.nan, math.nan, None, None, None
            )
            continue
        mean = float(finite.mean())
        sd = float(finite.std(ddof=1)) if finite.size > 1 else 0.0
        s = np.sort(finite)
        if has_nan:
            ess = rhat = None
        else:
            per_chain = [_ess_geyer(c) for c in chain_cols]
            ess = None if any(e is None for e in per_chain) else float(sum(per_chain))
            rhat = _split_rhat(chain_cols)
        mcse = sd / math.sqrt(ess) if ess else None
        params[name] = ParameterSummary(
            name=name,
            mean=mean,
            sd=sd,
            q025=empirical_quantile(s, 0.025),
            q50=empirical_quantile(s, 0.5),
            q975=empirical_quantile(s, 0.975),
            ess=ess,
            split_rhat=rhat,
            mcse=mcse,
        )
    return PosteriorSummary(
        parameters=params, n_chains=draws.n_chains, total_draws=draws.total_draws
    )


@dataclass(frozen=True)
class ComparisonCell:
    parameter: str
    statistic: str
    expected: float
    tolerance: float
    observed: Optional[float]
    status: str  # "pass" | "fail" | "absent"

    @property
    def deviation(self) -> Optional[float]:
        if self.observed is None:
            return None
        return abs(self.observed - self.expected)


@dataclass(frozen=True)
class ComparisonReport:
    cells: list[ComparisonCell]

    @property
    def passed(self) -> bool:
        return all(c.status == "pass" for c in self.cells)

    def render(self) -> str:
        lines = ["parameter  statistic  expected  tolerance  observed  status"]
        for c in self.cells:
            obs = "absent" if c.observed is None else f"{c.observed:.4g}"
            lines.append(
                f"{c.parameter:<10} {c.statistic:<10} {c.expected:<9.4g} "
                f"{c.tolerance:<10.4g} {obs:<9} {c.status}"
            )
        return "\n".join(lines)


def compare_to_reference(summary: PosteriorSummary, reference: dict) -> ComparisonReport:
    """Check summary statistics against expected values with tolerances.

    ``reference`` maps parameter name -> statistic name -> (expected, tolerance),
    e.g. ``{"n": {"mean": (76.57, 1.5)}}``. Parameters or statistics missing
    from the summary are reported "absent" and fail the report.
    """
    cells = []
    for pname, stats in reference.items():
        present = pname in summary.parameters
        for sname, (expected, tol) in stats.items():
            observed = None
            if present:
                value = getattr(summary.parameters[pname], sname, None)
                if value is not None and not (isinstance(value, float) and math.isnan(value)):
                    observed = float(value)
            if observed is None:
                status = "absent"
            else:
                status = "pass" if abs(observed - expected) <= tol else "fail"
            cells.append(
                ComparisonCell(
                    parameter=pname,
                    statistic=sname,
                    expected=float(expected),
                    tolerance=float(tol),
                    observed=observed,
                    status=status,
                )
            )
    return ComparisonReport(cells=cells)
