"""Command-line surface: config ingestion, run orchestration, result emission.

Subcommands
-----------
fit          run a sampler from a JSON config; writes draws CSV, summary JSON,
             and a human-readable report with the reconstructed table
oracle       exact pmf for a fixed-hyperparameter reduction; writes (n, probability)
             CSV plus a statistics document
reconstruct  rebuild the table report from an existing draws file
simulate     frequentist coverage check over synthetic replicates
summarize    re-summarize an existing draws file

Config files are JSON; the full schema lives in docs/config-schema.md. Every
output document embeds the resolved config (defaults filled in), so a run can
be repeated exactly. Draws CSVs carry a leading (chain, iter) pair and floats
with 17 significant digits, which round-trips float64 losslessly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from importlib.resources import files as resource_files
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import PosteriorSummary, summarize
from .distributions import BetaParams, GammaParams, NegBinParams
from .errors import ConfigError, DiagTablesError
from .oracle import (
    ExactPmf,
    NegBinFixedN1Prior,
    PoissonFixedN1Prior,
    PoissonGammaMixtureN1Prior,
    UniformN1Prior,
    exact_n1_joint,
    exact_n_single_row,
    pmf_statistics,
)
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

MODELS = ("single_row", "single_row_known_n", "joint_fixed_n")
VARIANTS = ("uniform", "trunc_poisson", "trunc_negbin")
SCENARIOS = ("SingleRowOnly", "RowPlusTotalN")

_MCMC_DEFAULTS = {"chains": 4, "iterations": 50_000, "burn_in": 10_000, "thin": 1}


def fixture_path(name: str) -> Path:
    """Path of a bundled example config (no .json suffix needed)."""
    base = resource_files("diagtables") / "fixtures"
    candidate = base / (name if name.endswith(".json") else f"{name}.json")
    if not candidate.is_file():
        available = ", ".join(sorted(p.stem for p in Path(str(base)).glob("*.json")))
        raise ConfigError(f"unknown fixture {name!r}; available: {available}")
    return Path(str(candidate))


# ---------------------------------------------------------------------------
# config loading and validation
# ---------------------------------------------------------------------------


def _violations_positive_pair(block: dict, key: str, where: str, out: list[str]) -> None:
    val = block.get(key)
    if (
        not isinstance(val, (list, tuple))
        or len(val) != 2
        or not all(isinstance(x, (int, float)) and x > 0 for x in val)
    ):
        out.append(f"{where}.{key} must be a pair of positive numbers")


def _require_count(block: dict, key: str, where: str, out: list[str]) -> None:
    val = block.get(key)
    if not isinstance(val, int) or val < 0:
        out.append(f"{where}.{key} must be a non-negative integer")


def load_config(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def resolve_run_config(raw: dict, seed_override: Optional[int] = None) -> dict:
    """Validate a fit/oracle config and fill defaults; raises ConfigError naming violations."""
    v: list[str] = []
    model = raw.get("model")
    if model not in MODELS:
        v.append(f"model must be one of {MODELS}, got {model!r}")
        raise ConfigError("; ".join(v))

    data = raw.get("data")
    if not isinstance(data, dict):
        v.append("data block is required")
        raise ConfigError("; ".join(v))

    resolved: dict = {"model": model, "data": {}, "truncation": raw.get("truncation", "indicator")}
    if resolved["truncation"] not in ("indicator", "normalized"):
        v.append("truncation must be 'indicator' or 'normalized'")

    for key in ("tp", "fp", "N"):
        if key in data and data[key] is not None:
            if not isinstance(data[key], int) or data[key] < 0:
                v.append(f"data.{key} must be a non-negative integer")
            else:
                resolved["data"][key] = data[key]

    priors = raw.get("priors")
    if not isinstance(priors, dict):
        v.append("priors block is required")
        priors = {}

    if model in ("single_row", "single_row_known_n"):
        if "tp" not in resolved["data"] and "fp" not in resolved["data"]:
            v.append("data.tp or data.fp is required for single-row models "
                     "(the observed count y of the stratum being fit)")
        if model == "single_row_known_n" and "N" not in resolved["data"]:
            v.append("data.N is required for model single_row_known_n")
        resolved["priors"] = {}
        for stratum, datum in (("diseased", "tp"), ("nondiseased", "fp")):
            block = priors.get(stratum)
            if block is None:
                continue
            if datum not in resolved["data"]:
                v.append(f"priors.{stratum} given but data.{datum} is missing")
                continue
            resolved["priors"][stratum] = _resolve_single_row_block(
                block, f"priors.{stratum}", resolved["data"][datum], v
            )
        if not resolved["priors"] and not v:
            v.append("at least one of priors.diseased / priors.nondiseased is required")
    else:
        for key in ("tp", "fp", "N"):
            if key not in resolved["data"]:
                v.append(f"data.{key} is required for model joint_fixed_n")
        variant = raw.get("n1_prior_variant")
        if variant not in VARIANTS:
            v.append(f"n1_prior_variant must be one of {VARIANTS}, got {variant!r}")
            variant = "uniform"
        resolved["n1_prior_variant"] = variant
        resolved["priors"] = _resolve_joint_block(priors, variant, resolved["data"], v)

    mcmc = dict(_MCMC_DEFAULTS)
    mcmc_raw = raw.get("mcmc", {})
    if not isinstance(mcmc_raw, dict):
        v.append("mcmc block must be an object")
        mcmc_raw = {}
    for key in ("chains", "iterations", "burn_in", "thin", "seed"):
        if key in mcmc_raw:
            mcmc[key] = mcmc_raw[key]
    if seed_override is not None:
        mcmc["seed"] = seed_override
    if "seed" not in mcmc:
        v.append("mcmc.seed is required (or pass --seed)")
    else:
        try:
            McmcSettings(**mcmc)
        except (ValueError, TypeError) as e:
            v.append(f"mcmc: {e}")
    resolved["mcmc"] = mcmc

    outputs = raw.get("outputs", {})
    if not isinstance(outputs, dict):
        v.append("outputs block must be an object")
        outputs = {}
    resolved["outputs"] = {
        "draws_path": outputs.get("draws_path", "draws.csv"),
        "summary_path": outputs.get("summary_path", "summary.json"),
        "report_path": outputs.get("report_path", "report.txt"),
    }

    if "reduction" in raw:
        red = raw["reduction"]
        if not isinstance(red, dict):
            v.append("reduction block must be an object")
        else:
            resolved["reduction"] = red

    if v:
        raise ConfigError("; ".join(v))
    return resolved


def _resolve_single_row_block(block: dict, where: str, y: int, v: list[str]) -> dict:
    if not isinstance(block, dict):
        v.append(f"{where} must be an object")
        return {}
    for key in ("p", "pstar", "lambda"):
        _violations_positive_pair(block, key, where, v)
    init = dict(block.get("init", {}))
    init.setdefault("n0", max(2 * y, y + 10))
    init.setdefault("r0", 10)
    init.setdefault("lambda0", 10.0)
    init.setdefault("p0", 0.5)
    init.setdefault("pstar0", 0.5)
    return {
        "p": list(block.get("p", [])),
        "pstar": list(block.get("pstar", [])),
        "lambda": list(block.get("lambda", [])),
        "init": init,
    }


def _resolve_joint_block(priors: dict, variant: str, data: dict, v: list[str]) -> dict:
    for key in ("p1", "p2"):
        _violations_positive_pair(priors, key, "priors", v)
    out = {"p1": list(priors.get("p1", [])), "p2": list(priors.get("p2", []))}
    if variant == "trunc_poisson":
        _violations_positive_pair(priors, "lambda", "priors", v)
        out["lambda"] = list(priors.get("lambda", []))
    elif variant == "trunc_negbin":
        for key in ("p3", "r"):
            _violations_positive_pair(priors, key, "priors", v)
        out["p3"] = list(priors.get("p3", []))
        out["r"] = list(priors.get("r", []))
    init = dict(priors.get("init", {}))
    if "tp" in data and "N" in data:
        lo = max(1, data["tp"])
        hi = max(lo, min(data["N"] - 1, data["N"] - data.get("fp", 0)))
        init.setdefault("n1_0", (lo + hi) // 2)
    init.setdefault("p1_0", 0.5)
    init.setdefault("p2_0", 0.5)
    init.setdefault("p3_0", 0.5)
    init.setdefault("r0", 20.0)
    init.setdefault("lambda0", 50.0)
    out["init"] = init
    return out


# ---------------------------------------------------------------------------
# spec builders
# ---------------------------------------------------------------------------


def build_single_row_specs(resolved: dict) -> list[tuple[str, SingleRowModelSpec]]:
    data = resolved["data"]
    upper = data.get("N") if resolved["model"] == "single_row_known_n" else None
    specs = []
    for stratum, datum in (("diseased", "tp"), ("nondiseased", "fp")):
        block = resolved["priors"].get(stratum)
        if block is None:
            continue
        init = block["init"]
        reduction = resolved.get("reduction", {})
        specs.append(
            (
                stratum,
                SingleRowModelSpec(
                    y=data[datum],
                    p_prior=BetaParams(*block["p"]),
                    pstar_prior=BetaParams(*block["pstar"]),
                    lambda_prior=GammaParams(*block["lambda"]),
                    init=SingleRowInit(
                        n0=int(init["n0"]),
                        r0=int(init["r0"]),
                        lambda0=float(init["lambda0"]),
                        p0=float(init["p0"]),
                        pstar0=float(init["pstar0"]),
                    ),
                    upper_bound=upper,
                    truncation=resolved["truncation"],
                    fixed_pstar=reduction.get("pstar"),
                    fixed_r=reduction.get("r"),
                ),
            )
        )
    return specs


def build_joint_spec(resolved: dict) -> JointModelSpec:
    data = resolved["data"]
    priors = resolved["priors"]
    variant = resolved["n1_prior_variant"]
    reduction = resolved.get("reduction", {})
    if variant == "uniform":
        n1_prior = UniformPrior()
    elif variant == "trunc_poisson":
        n1_prior = TruncPoissonPrior(
            lambda_prior=GammaParams(*priors["lambda"]),
            fixed_lambda=reduction.get("lambda"),
        )
    else:
        n1_prior = TruncNegBinPrior(
            p3_prior=BetaParams(*priors["p3"]),
            r_prior=GammaParams(*priors["r"]),
            fixed_p3=reduction.get("p3"),
            fixed_r=reduction.get("r"),
        )
    init = priors["init"]
    return JointModelSpec(
        tp=data["tp"],
        fp=data["fp"],
        n_total=data["N"],
        p1_prior=BetaParams(*priors["p1"]),
        p2_prior=BetaParams(*priors["p2"]),
        n1_prior=n1_prior,
        init=JointInit(
            n1_0=int(init["n1_0"]),
            p1_0=float(init["p1_0"]),
            p2_0=float(init["p2_0"]),
            p3_0=float(init["p3_0"]),
            r0=float(init["r0"]),
            lambda0=float(init["lambda0"]),
        ),
        truncation=resolved["truncation"],
    )


def build_mcmc(resolved: dict) -> McmcSettings:
    return McmcSettings(**resolved["mcmc"])


# ---------------------------------------------------------------------------
# draws CSV
# ---------------------------------------------------------------------------


def write_draws_csv(path: Path, draws: DrawMatrix, burn_in: int, thin: int) -> None:
    """One row per retained draw, led by (chain, iter); floats at 17 significant digits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("chain,iter," + ",".join(draws.names) + "\n")
        for c, arr in enumerate(draws.chains):
            for k in range(arr.shape[0]):
                it = burn_in + k * thin
                fh.write(f"{c},{it}," + ",".join("%.17g" % x for x in arr[k]) + "\n")


def load_draws_csv(path: Path) -> DrawMatrix:
    if not path.is_file():
        raise ConfigError(f"draws file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["chain", "iter"]:
            raise ConfigError(f"{path}: expected leading 'chain,iter' columns, got {header[:2]}")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    names = header[2:]
    if body.size == 0:
        raise ConfigError(f"{path}: no draws")
    chain_ids = body[:, 0].astype(int)
    chains = [body[chain_ids == c, 2:] for c in np.unique(chain_ids)]
    return DrawMatrix(names=names, chains=chains, meta={"source": str(path)})


# ---------------------------------------------------------------------------
# reconstruction rendering
# ---------------------------------------------------------------------------


def _summary_of(values: np.ndarray) -> dict:
    """NaN-aware mean and order-statistic 2.5/50/97.5% quantiles of a draw vector."""
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return {"mean": None, "q025": None, "q50": None, "q975": None}
    s = np.sort(finite)
    n = s.size

    def q(level: float) -> float:
        rank = min(max(math.ceil(level * n), 1), n)
        return float(s[rank - 1])

    return {"mean": float(finite.mean()), "q025": q(0.025), "q50": q(0.5), "q975": q(0.975)}


def _col_stats(draws: DrawMatrix, name: str) -> dict:
    return _summary_of(draws.column(name))


def reconstruction_from_joint(draws: DrawMatrix, tp: int, fp: int, n_total: int) -> dict:
    for needed in ("n1",):
        if needed not in draws.names:
            raise ConfigError(f"draws file lacks required column {needed!r}")
    if "fn" not in draws.names:
        # raw sampler output: derive on the fly
        n1 = draws.column("n1")
        cells = {
            "fn": _summary_of(n1 - tp),
            "tn": _summary_of((n_total - n1) - fp),
            "n1": _summary_of(n1),
            "n2": _summary_of(n_total - n1),
        }
    else:
        cells = {name: _col_stats(draws, name) for name in ("fn", "tn", "n1", "n2")}
    measures = {}
    for name in ("se", "sp", "se_count", "sp_count", "npv", "acc", "prev"):
        if name in draws.names:
            measures[name] = _col_stats(draws, name)
    measures["ppv"] = {"exact": tp / (tp + fp) if tp + fp > 0 else None}
    return {"kind": "joint", "tp": tp, "fp": fp, "N": n_total, "cells": cells, "measures": measures}


def reconstruction_from_single_rows(
    diseased: Optional[DrawMatrix], nondiseased: Optional[DrawMatrix], tp: Optional[int], fp: Optional[int]
) -> dict:
    cells = {}
    measures = {}
    if diseased is not None:
        if "n" not in diseased.names:
            raise ConfigError("diseased draws file lacks required column 'n'")
        n1 = diseased.column("n")
        cells["n1"] = _summary_of(n1)
        cells["fn"] = _summary_of(n1 - tp)
        measures["se"] = _col_stats(diseased, "p")
    if nondiseased is not None:
        if "n" not in nondiseased.names:
            raise ConfigError("non-diseased draws file lacks required column 'n'")
        n2 = nondiseased.column("n")
        cells["n2"] = _summary_of(n2)
        cells["tn"] = _summary_of(n2 - fp)
        measures["sp"] = _summary_of(1.0 - nondiseased.column("p"))
    if tp is not None and fp is not None:
        measures["ppv"] = {"exact": tp / (tp + fp) if tp + fp > 0 else None}
    if diseased is not None and nondiseased is not None:
        # The two strata were fit independently; pairing draw i with draw i
        # samples the product posterior of the combined measures.
        n1d, n2d = diseased.column("n"), nondiseased.column("n")
        m = min(n1d.size, n2d.size)
        n1d, n2d = n1d[:m], n2d[:m]
        fn_d, tn_d = n1d - tp, n2d - fp
        with np.errstate(divide="ignore", invalid="ignore"):
            npv = np.where(fn_d + tn_d > 0, tn_d / (fn_d + tn_d), np.nan)
        measures["npv"] = _summary_of(npv)
        measures["prev"] = _summary_of(n1d / (n1d + n2d))
        measures["acc"] = _summary_of((tp + tn_d) / (n1d + n2d))
    return {"kind": "single_row", "tp": tp, "fp": fp, "cells": cells, "measures": measures}


def _fmt(x, nd=3) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "undefined"
    return f"{x:.{nd}f}"


def render_reconstruction(recon: dict) -> str:
    """Human-readable reconstructed table: rounded posterior-mean cells with 95% intervals."""
    lines = ["reconstructed 2x2 table (posterior mean, [95% interval])", ""]
    cells = recon["cells"]
    tp, fp = recon.get("tp"), recon.get("fp")

    def cell(name):
        st = cells.get(name)
        if st is None or st["mean"] is None:
            return "?"
        return f"{round(st['mean'])} [{st['q025']:.0f}, {st['q975']:.0f}]"

    lines.append(f"{'':>14}  {'diseased':>22}  {'non-diseased':>22}")
    lines.append(
        f"{'test positive':>14}  {str(tp) if tp is not None else '?':>22}  "
        f"{str(fp) if fp is not None else '?':>22}"
    )
    lines.append(f"{'test negative':>14}  {cell('fn'):>22}  {cell('tn'):>22}")
    lines.append(f"{'total':>14}  {cell('n1'):>22}  {cell('n2'):>22}")
    if recon.get("N") is not None:
        lines.append(f"{'overall N':>14}  {recon['N']}")
    lines.append("")
    lines.append("operating characteristics (posterior mean [95% interval]):")
    for name, label in (
        ("se", "sensitivity"),
        ("sp", "specificity"),
        ("se_count", "sensitivity (count-based)"),
        ("sp_count", "specificity (count-based)"),
        ("ppv", "PPV"),
        ("npv", "NPV"),
        ("acc", "accuracy"),
        ("prev", "prevalence"),
    ):
        st = recon["measures"].get(name)
        if st is None:
            continue
        if "exact" in st:
            lines.append(f"  {label}: {_fmt(st['exact'], 4)} (from observed row)")
        else:
            lines.append(
                f"  {label}: {_fmt(st['mean'])} [{_fmt(st['q025'])}, {_fmt(st['q975'])}]"
            )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# document writers
# ---------------------------------------------------------------------------


def _summary_payload(summary: PosteriorSummary) -> dict:
    return {
        name: {
            "mean": ps.mean,
            "sd": ps.sd,
            "q025": ps.q025,
            "q50": ps.q50,
            "q975": ps.q975,
            "ess": ps.ess,
            "split_rhat": ps.split_rhat,
            "mcse": ps.mcse,
        }
        for name, ps in summary.parameters.items()
    }


def _render_summary_table(summary: PosteriorSummary) -> str:
    lines = [
        f"{'parameter':<10} {'mean':>10} {'sd':>10} {'2.5%':>10} {'median':>10} "
        f"{'97.5%':>10} {'ess':>10} {'rhat':>8}"
    ]
    for ps in summary.rows():
        ess = f"{ps.ess:.0f}" if ps.ess is not None else "n/a"
        rhat = f"{ps.split_rhat:.3f}" if ps.split_rhat is not None else "n/a"
        lines.append(
            f"{ps.name:<10} {ps.mean:>10.4g} {ps.sd:>10.4g} {ps.q025:>10.4g} "
            f"{ps.q50:>10.4g} {ps.q975:>10.4g} {ess:>10} {rhat:>8}"
        )
    return "\n".join(lines)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_fit(resolved: dict, out_dir: Path, quiet: bool = False) -> int:
    mcmc = build_mcmc(resolved)
    outputs = resolved["outputs"]
    data = resolved["data"]
    tp, fp = data.get("tp"), data.get("fp")

    summaries: dict[str, PosteriorSummary] = {}
    report_parts: list[str] = [
        "run configuration:",
        json.dumps(resolved, indent=2, sort_keys=True),
        "",
    ]

    if resolved["model"] in ("single_row", "single_row_known_n"):
        fitted: dict[str, DrawMatrix] = {}
        for stratum, spec in build_single_row_specs(resolved):
            if not quiet:
                print(f"fitting single-row model, {stratum} stratum (y={spec.y})...")
            draws = derive_quantities(fit_single_row(spec, mcmc), spec)
            fitted[stratum] = draws
            summaries[stratum] = summarize(draws)
            draws_path = out_dir / _suffixed(outputs["draws_path"], stratum, len(resolved["priors"]) > 1)
            write_draws_csv(draws_path, draws, mcmc.burn_in, mcmc.thin)
            report_parts.append(f"posterior summary ({stratum} stratum):")
            report_parts.append(_render_summary_table(summaries[stratum]))
            report_parts.append("")
        recon = reconstruction_from_single_rows(
            fitted.get("diseased"), fitted.get("nondiseased"), tp, fp
        )
    else:
        spec = build_joint_spec(resolved)
        if not quiet:
            print(f"fitting joint fixed-N model (tp={spec.tp}, fp={spec.fp}, N={spec.n_total})...")
        draws = derive_quantities(fit_joint(spec, mcmc), spec)
        summaries["joint"] = summarize(draws)
        write_draws_csv(out_dir / outputs["draws_path"], draws, mcmc.burn_in, mcmc.thin)
        report_parts.append("posterior summary (joint fixed-N model):")
        report_parts.append(_render_summary_table(summaries["joint"]))
        report_parts.append("")
        recon = reconstruction_from_joint(draws, tp, fp, data["N"])

    report_parts.append(render_reconstruction(recon))
    _write_text(out_dir / outputs["report_path"], "\n".join(report_parts))
    _write_json(
        out_dir / outputs["summary_path"],
        {
            "config": resolved,
            "parameters": {k: _summary_payload(s) for k, s in summaries.items()},
            "reconstruction": recon,
        },
    )
    if not quiet:
        print(f"wrote {outputs['draws_path']}, {outputs['summary_path']}, {outputs['report_path']}")
    return 0


def _suffixed(path_str: str, stratum: str, multi: bool) -> str:
    if not multi:
        return path_str
    p = Path(path_str)
    return str(p.with_name(f"{p.stem}_{stratum}{p.suffix}"))


def _oracle_pmf(resolved: dict) -> ExactPmf:
    data = resolved["data"]
    reduction = resolved.get("reduction", {})
    if resolved["model"] in ("single_row", "single_row_known_n"):
        if "pstar" not in reduction or "r" not in reduction:
            raise ConfigError(
                "oracle for single-row models needs a reduction block with fixed 'pstar' and 'r'"
            )
        for stratum, datum in (("diseased", "tp"), ("nondiseased", "fp")):
            block = resolved["priors"].get(stratum)
            if block is not None:
                y = data[datum]
                upper = data.get("N") if resolved["model"] == "single_row_known_n" else None
                return exact_n_single_row(
                    y=y,
                    p_prior=BetaParams(*block["p"]),
                    nb=NegBinParams(pstar=reduction["pstar"], r=reduction["r"]),
                    upper=upper,
                )
        raise ConfigError("no prior block present")
    variant = resolved["n1_prior_variant"]
    priors = resolved["priors"]
    if variant == "uniform":
        n1_prior = UniformN1Prior()
    elif variant == "trunc_poisson":
        if "lambda" in reduction:
            n1_prior = PoissonFixedN1Prior(lam=reduction["lambda"])
        else:
            shape, rate = priors["lambda"]
            n1_prior = PoissonGammaMixtureN1Prior(shape=shape, rate=rate)
    else:
        if "p3" not in reduction or "r" not in reduction:
            raise ConfigError("no exact oracle for hierarchical negbin; "
                              "provide a reduction block with fixed 'p3' and 'r'")
        n1_prior = NegBinFixedN1Prior(pstar=reduction["p3"], r=reduction["r"])
    return exact_n1_joint(
        tp=data["tp"],
        fp=data["fp"],
        n_total=data["N"],
        p1_prior=BetaParams(*priors["p1"]),
        p2_prior=BetaParams(*priors["p2"]),
        n1_prior=n1_prior,
    )


def cmd_oracle(resolved: dict, out_dir: Path, quiet: bool = False) -> int:
    pmf = _oracle_pmf(resolved)
    stats = pmf_statistics(pmf)
    pmf_path = out_dir / resolved["outputs"].get("draws_path", "pmf.csv")
    if pmf_path.suffix != ".csv":
        pmf_path = pmf_path.with_suffix(".csv")
    pmf_path.parent.mkdir(parents=True, exist_ok=True)
    with open(pmf_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("n,probability\n")
        for n, p in zip(pmf.support, pmf.probs):
            fh.write(f"{n},%.17g\n" % p)
    _write_json(
        out_dir / resolved["outputs"]["summary_path"],
        {
            "config": resolved,
            "support": [int(pmf.lower), int(pmf.upper)],
            "statistics": {
                "mean": stats.mean,
                "sd": stats.sd,
                "q025": stats.q025,
                "q50": stats.q50,
                "q975": stats.q975,
            },
        },
    )
    if not quiet:
        print(
            f"exact pmf on [{pmf.lower}, {pmf.upper}]: mean {stats.mean:.3f}, "
            f"sd {stats.sd:.3f}, 95% interval [{stats.q025:.0f}, {stats.q975:.0f}]"
        )
    return 0


def cmd_reconstruct(args, out_dir: Path) -> int:
    if args.draws is not None:
        if args.tp is None or args.fp is None or args.n_total is None:
            raise ConfigError("reconstruct from joint draws needs --tp, --fp and --n-total")
        draws = load_draws_csv(Path(args.draws))
        recon = reconstruction_from_joint(draws, args.tp, args.fp, args.n_total)
    else:
        if args.diseased_draws is None and args.nondiseased_draws is None:
            raise ConfigError("provide --draws, or --diseased-draws/--nondiseased-draws")
        dis = load_draws_csv(Path(args.diseased_draws)) if args.diseased_draws else None
        nond = load_draws_csv(Path(args.nondiseased_draws)) if args.nondiseased_draws else None
        if dis is not None and args.tp is None:
            raise ConfigError("--tp is required with --diseased-draws")
        if nond is not None and args.fp is None:
            raise ConfigError("--fp is required with --nondiseased-draws")
        recon = reconstruction_from_single_rows(dis, nond, args.tp, args.fp)
    text = render_reconstruction(recon)
    _write_text(out_dir / args.output_name, text)
    if not args.quiet:
        print(text, end="")
    return 0


def resolve_simulation_config(raw: dict, seed_override: Optional[int] = None) -> dict:
    v: list[str] = []
    resolved: dict = {}
    for key, lo in (("replicates", 1), ("N", 2)):
        val = raw.get(key)
        if not isinstance(val, int) or val < lo:
            v.append(f"{key} must be an integer >= {lo}")
        else:
            resolved[key] = val
    for key in ("prevalence", "se", "sp"):
        val = raw.get(key)
        if not isinstance(val, (int, float)) or not 0 <= val <= 1:
            v.append(f"{key} must be a number in [0, 1]")
        else:
            resolved[key] = float(val)
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        v.append(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    resolved["scenario"] = scenario
    seed = seed_override if seed_override is not None else raw.get("seed")
    if not isinstance(seed, int) or seed < 0:
        v.append("seed must be a non-negative integer (or pass --seed)")
    resolved["seed"] = seed
    if v:
        raise ConfigError("; ".join(v))

    fit_raw = {
        "model": raw.get("model", "joint_fixed_n" if scenario == "RowPlusTotalN" else "single_row"),
        "n1_prior_variant": raw.get("n1_prior_variant", "uniform"),
        "truncation": raw.get("truncation", "indicator"),
        "priors": raw.get("priors", {}),
        "mcmc": {**raw.get("mcmc", {}), "seed": 0},
        "data": {"tp": 0, "fp": 0, "N": resolved["N"]},
    }
    resolved["fit_template"] = fit_raw
    resolved["outputs"] = {
        "report_path": raw.get("outputs", {}).get("report_path", "coverage.txt"),
        "summary_path": raw.get("outputs", {}).get("summary_path", "coverage.json"),
    }
    return resolved


def cmd_simulate(resolved: dict, out_dir: Path, quiet: bool = False) -> int:
    n_total = resolved["N"]
    prev, se, sp = resolved["prevalence"], resolved["se"], resolved["sp"]
    scenario = resolved["scenario"]
    covered = 0
    widths = []
    failures = []
    done = 0
    for rep in range(resolved["replicates"]):
        data_rng = np.random.default_rng(np.random.SeedSequence([resolved["seed"], rep]))
        n1_true = int(data_rng.binomial(n_total, prev))
        tp = int(data_rng.binomial(n1_true, se))
        fp = int(data_rng.binomial(n_total - n1_true, 1.0 - sp))
        fit_seed = int(data_rng.integers(0, 2**63 - 1))
        raw = json.loads(json.dumps(resolved["fit_template"]))
        raw["mcmc"]["seed"] = fit_seed
        # n1's feasible midpoint depends on the replicate's counts, so any
        # template n1_0 is dropped and recomputed.
        raw["priors"].setdefault("init", {}).pop("n1_0", None)
        try:
            if scenario == "RowPlusTotalN":
                raw["data"] = {"tp": tp, "fp": fp, "N": n_total}
                cfg = resolve_run_config(raw)
                if cfg["model"] == "joint_fixed_n":
                    draws = fit_joint(build_joint_spec(cfg), build_mcmc(cfg))
                    col = draws.column("n1")
                else:
                    spec = dict(build_single_row_specs(cfg))["diseased"]
                    draws = fit_single_row(spec, build_mcmc(cfg))
                    col = draws.column("n")
            else:
                raw["model"] = "single_row"
                raw["data"] = {"tp": tp, "fp": fp}
                cfg = resolve_run_config(raw)
                spec = dict(build_single_row_specs(cfg))["diseased"]
                draws = fit_single_row(spec, build_mcmc(cfg))
                col = draws.column("n")
        except DiagTablesError as e:
            failures.append({"replicate": rep, "error": str(e)})
            continue
        s = np.sort(col)
        lo = float(s[min(max(math.ceil(0.025 * s.size), 1), s.size) - 1])
        hi = float(s[min(max(math.ceil(0.975 * s.size), 1), s.size) - 1])
        covered += int(lo <= n1_true <= hi)
        widths.append(hi - lo)
        done += 1
        if not quiet and resolved["replicates"] >= 20 and (rep + 1) % 20 == 0:
            print(f"  replicate {rep + 1}/{resolved['replicates']}")
    coverage = covered / done if done else float("nan")
    mean_width = float(np.mean(widths)) if widths else float("nan")
    line = (
        f"coverage: {covered}/{done} = {coverage:.3f}, "
        f"mean 95% interval width: {mean_width:.1f}, failures: {len(failures)}"
    )
    _write_text(out_dir / resolved["outputs"]["report_path"], line + "\n")
    _write_json(
        out_dir / resolved["outputs"]["summary_path"],
        {
            "config": {k: v for k, v in resolved.items() if k != "outputs"},
            "coverage": coverage,
            "covered": covered,
            "completed": done,
            "mean_interval_width": mean_width,
            "failures": failures,
        },
    )
    if not quiet:
        print(line)
    return 0


def cmd_summarize(draws_path: Path, out_dir: Path, summary_name: str, quiet: bool) -> int:
    draws = load_draws_csv(draws_path)
    summary = summarize(draws)
    _write_json(
        out_dir / summary_name,
        {"source": str(draws_path), "parameters": _summary_payload(summary)},
    )
    if not quiet:
        print(_render_summary_table(summary))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="path to a JSON run configuration")
    src.add_argument("--fixture", help="name of a bundled example configuration")
    p.add_argument("--seed", type=int, help="override mcmc.seed from the config")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--quiet", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diagtables",
        description="Bayesian reconstruction of incomplete 2x2 diagnostic tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="run a sampler from a config")
    _add_config_args(p)

    p = sub.add_parser("oracle", help="exact pmf for a fixed-hyperparameter reduction")
    _add_config_args(p)

    p = sub.add_parser("reconstruct", help="rebuild the table report from draws files")
    p.add_argument("--draws", help="joint-model draws CSV")
    p.add_argument("--diseased-draws", help="single-row draws CSV for the diseased stratum")
    p.add_argument("--nondiseased-draws", help="single-row draws CSV for the non-diseased stratum")
    p.add_argument("--tp", type=int)
    p.add_argument("--fp", type=int)
    p.add_argument("--n-total", type=int)
    p.add_argument("--output-name", default="reconstruction.txt")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("simulate", help="coverage simulation over synthetic replicates")
    _add_config_args(p)

    p = sub.add_parser("summarize", help="re-summarize an existing draws file")
    p.add_argument("--draws", required=True, type=Path)
    p.add_argument("--output-name", default="summary.json")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--quiet", action="store_true")
    return parser


def _load_raw(args) -> dict:
    path = fixture_path(args.fixture) if args.fixture else Path(args.config)
    return load_config(path)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            resolved = resolve_run_config(_load_raw(args), args.seed)
            return cmd_fit(resolved, args.out, args.quiet)
        if args.command == "oracle":
            resolved = resolve_run_config(_load_raw(args), getattr(args, "seed", None) or 0)
            return cmd_oracle(resolved, args.out, args.quiet)
        if args.command == "reconstruct":
            return cmd_reconstruct(args, args.out)
        if args.command == "simulate":
            resolved = resolve_simulation_config(_load_raw(args), args.seed)
            return cmd_simulate(resolved, args.out, args.quiet)
        if args.command == "summarize":
            return cmd_summarize(args.draws, args.out, args.output_name, args.quiet)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except DiagTablesError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
