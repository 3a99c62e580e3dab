"""Spatial two-groups data generation, the Bayes oracle, and experiment runs.

Scenarios place regions of elevated signal probability on a grid (two squares
of side 25% and prior 0.8 / 0.5 over a 0.05 background for "large"; side 10%
for "small") or on a 1-d chain ("toy1d": 5000 sites with prior 0.5 on sites
1501..2000, 1-indexed, and 0.02 elsewhere). Signal means are drawn from a
named alternative distribution and observations are unit-variance Gaussian
around them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .densities import NullDensity, TwoGroupsFit, fit_alternative_pr, scalar_two_groups
from .graphs import SiteGraph, build_grid_graph
from .pipeline import AnalysisOptions, analyze_zscores
from .reporting import DiscoveryReport, bh_procedure, discoveries_at_fdr, two_groups_report

__all__ = [
    "SignalDistribution",
    "GaussianMixtureSignal",
    "LaplaceSignal",
    "ALTERNATIVES",
    "PriorImage",
    "SimDataset",
    "MetricRow",
    "make_prior_image",
    "simulate",
    "oracle_report",
    "compute_metrics",
    "run_experiment",
    "aggregate_metrics",
]


class SignalDistribution:
    """Distribution of nonzero signal means, with its N(0,1) convolution."""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def marginal_pdf(self, z) -> np.ndarray:
        """Density of z = theta + N(0, 1) with theta from this distribution."""
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianMixtureSignal(SignalDistribution):
    means: tuple[float, ...]
    sds: tuple[float, ...]
    weights: tuple[float, ...]

    def sample(self, rng, size):
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        mu = np.asarray(self.means)[comp]
        sd = np.asarray(self.sds)[comp]
        return rng.normal(mu, sd)

    def marginal_pdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for mu, sd, wt in zip(self.means, self.sds, self.weights):
            out += wt * norm.pdf(z, loc=mu, scale=math.sqrt(sd * sd + 1.0))
        return out


@dataclass(frozen=True)
class LaplaceSignal(SignalDistribution):
    scale: float

    def sample(self, rng, size):
        return rng.laplace(0.0, self.scale, size)

    def marginal_pdf(self, z):
        # closed-form Laplace(0, b) * N(0, 1) convolution
        z = np.asarray(z, dtype=float)
        b = self.scale
        amp = np.exp(0.5 / b**2) / (2.0 * b)
        left = np.exp(-z / b + norm.logcdf(z - 1.0 / b))
        right = np.exp(z / b + norm.logsf(z + 1.0 / b))
        return amp * (left + right)


ALTERNATIVES: dict[str, SignalDistribution] = {
    # bimodal, well separated from the null
    "alt1": GaussianMixtureSignal(means=(-2.5, 2.5), sds=(0.5, 0.5), weights=(0.5, 0.5)),
    # unimodal at zero: hard deconvolution
    "alt2": GaussianMixtureSignal(means=(0.0,), sds=(2.0,), weights=(1.0,)),
    # peaked at zero with heavy concentration near the null: hardest
    "alt3": LaplaceSignal(scale=1.0),
    # asymmetric bimodal
    "alt4": GaussianMixtureSignal(means=(-3.0, 3.0), sds=(1.0, 0.5), weights=(0.3, 0.7)),
    # the toy chain example's overdispersed component: z ~ N(0, 3^2)
    "toy": GaussianMixtureSignal(means=(0.0,), sds=(math.sqrt(8.0),), weights=(1.0,)),
}

SQUARE_FRACTIONS = {"large": 0.25, "small": 0.10}
TOY1D_LENGTH = 5000
TOY1D_ELEVATED = (1500, 2000)  # 0-indexed half-open slice of sites 1501..2000


@dataclass
class PriorImage:
    """True per-node signal probabilities plus the generating scenario tag."""

    c: np.ndarray
    scenario: str
    rows: int
    cols: int

    @property
    def graph(self) -> SiteGraph:
        return build_grid_graph(self.rows, self.cols)


def make_prior_image(scenario: str, rows: int, cols: int) -> PriorImage:
    """Construct the true prior-probability field for a named scenario."""
    if scenario == "toy1d":
        if rows != 1 or cols != TOY1D_LENGTH:
            raise ValueError(f"toy1d is defined on a 1x{TOY1D_LENGTH} chain, got {rows}x{cols}")
        c = np.full(cols, 0.02)
        c[TOY1D_ELEVATED[0]:TOY1D_ELEVATED[1]] = 0.5
        return PriorImage(c=c, scenario=scenario, rows=rows, cols=cols)
    if scenario not in SQUARE_FRACTIONS:
        raise ValueError(f"unknown scenario {scenario!r}; expected large, small, or toy1d")
    side = max(1, round(SQUARE_FRACTIONS[scenario] * min(rows, cols)))
    centers = [(rows // 4, cols // 4), (3 * rows // 4, 3 * cols // 4)]
    values = [0.8, 0.5]
    c = np.full(rows * cols, 0.05)
    for (cr, cc), val in zip(centers, values):
        r0, c0 = cr - side // 2, cc - side // 2
        r1, c1 = r0 + side, c0 + side
        if r0 < 0 or c0 < 0 or r1 > rows or c1 > cols:
            raise ValueError(f"{rows}x{cols} grid is too small for the {scenario} squares")
        for r in range(r0, r1):
            c[r * cols + c0:r * cols + c1] = val
    return PriorImage(c=c, scenario=scenario, rows=rows, cols=cols)


@dataclass
class SimDataset:
    """One simulated replicate: latent truth, observations, and provenance."""

    h: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    seed: int
    scenario: str
    alternative: str


def simulate(prior: PriorImage, alt: SignalDistribution, seed: int,
             alternative_name: str = "custom") -> SimDataset:
    """Draw h ~ Bernoulli(c), theta ~ alt where h = 1, and z ~ N(theta, 1)."""
    rng = np.random.default_rng(seed)
    n = prior.c.size
    h = rng.random(n) < prior.c
    theta = np.zeros(n)
    k = int(h.sum())
    if k:
        theta[h] = alt.sample(rng, k)
    z = rng.normal(theta, 1.0)
    return SimDataset(h=h, theta=theta, z=z, seed=seed,
                      scenario=prior.scenario, alternative=alternative_name)


def oracle_report(data: SimDataset, prior: PriorImage, alt: SignalDistribution,
                  q: float) -> DiscoveryReport:
    """Posterior under the true prior field and true signal convolution."""
    f1z = alt.marginal_pdf(data.z)
    f0z = norm.pdf(data.z)
    num = prior.c * f1z
    w = num / np.maximum(num + (1.0 - prior.c) * f0z, 1e-300)
    report = discoveries_at_fdr(w, q, method="oracle")
    return report


def compute_metrics(discovered: np.ndarray, h_true: np.ndarray) -> tuple[float, float]:
    """(TPR, FDP) against the latent truth; empty sets count as zero FDP."""
    n_disc = int(discovered.sum())
    n_signal = int(h_true.sum())
    true_pos = int((discovered & h_true).sum())
    tpr = true_pos / n_signal if n_signal else 0.0
    fdp = (n_disc - true_pos) / n_disc if n_disc else 0.0
    return tpr, fdp


@dataclass
class MetricRow:
    scenario: str
    alternative: str
    method: str
    replicate: int
    tpr: float
    fdp: float
    n_discoveries: int
    error: str | None = None


DEFAULT_METHODS = ("fdr-smoothing", "two-groups", "bh", "oracle")


def _replicate_metrics(scenario, alt_name, rows, cols, replicate, seed, q,
                       methods, analysis_opts_dict) -> list[MetricRow]:
    """Run every requested method on one simulated dataset."""
    prior = make_prior_image(scenario, rows, cols)
    alt = ALTERNATIVES[alt_name]
    data = simulate(prior, alt, seed, alternative_name=alt_name)
    graph = prior.graph
    rows_out: list[MetricRow] = []

    needs_fit = {"fdr-smoothing", "two-groups"} & set(methods)
    analysis = None
    two_groups = None
    fit_error = None
    if needs_fit:
        opts = AnalysisOptions(**analysis_opts_dict, q=q, seed=seed)
        try:
            analysis = analyze_zscores(data.z, graph, opts)
            two_groups = analysis.two_groups
        except Exception as err:  # noqa: BLE001 - per-replicate failures are recorded
            fit_error = f"{type(err).__name__}: {err}"

    for method in methods:
        try:
            if method == "fdr-smoothing":
                if analysis is None:
                    raise RuntimeError(fit_error or "analysis unavailable")
                report = analysis.report
            elif method == "two-groups":
                if two_groups is None:
                    raise RuntimeError(fit_error or "two-groups fit unavailable")
                report = two_groups_report(data.z, two_groups, q)
            elif method == "bh":
                report = bh_procedure(data.z, NullDensity(0.0, 1.0), q)
            elif method == "oracle":
                report = oracle_report(data, prior, alt, q)
            else:
                raise ValueError(f"unknown method {method!r}")
        except Exception as err:  # noqa: BLE001
            rows_out.append(MetricRow(scenario=scenario, alternative=alt_name,
                                      method=method, replicate=replicate,
                                      tpr=np.nan, fdp=np.nan, n_discoveries=0,
                                      error=f"{type(err).__name__}: {err}"))
            continue
        tpr, fdp = compute_metrics(report.discovered, data.h)
        rows_out.append(MetricRow(scenario=scenario, alternative=alt_name,
                                  method=method, replicate=replicate,
                                  tpr=tpr, fdp=fdp,
                                  n_discoveries=report.n_discoveries))
    return rows_out


def run_experiment(scenarios, alternatives, replicates: int, q: float,
                   methods=DEFAULT_METHODS, rows: int = 64, cols: int = 64,
                   seed: int = 0, n_jobs: int = 1,
                   analysis_options: dict | None = None) -> list[MetricRow]:
    """Full cross of scenarios and alternatives, ``replicates`` datasets each.

    Each replicate draws its seed from a spawned sequence of the master seed,
    so results are reproducible and independent of execution order or the
    degree of parallelism. Per-replicate failures are recorded as rows with
    NaN metrics and an error message rather than aborting the run.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    scenarios = [scenarios] if isinstance(scenarios, str) else list(scenarios)
    alternatives = [alternatives] if isinstance(alternatives, str) else list(alternatives)
    for alt in alternatives:
        if alt not in ALTERNATIVES:
            raise ValueError(f"unknown alternative {alt!r}")
    analysis_options = dict(analysis_options or {})

    tasks = []
    child_seeds = np.random.SeedSequence(seed).spawn(
        len(scenarios) * len(alternatives) * replicates)
    i = 0
    for scenario in scenarios:
        for alt_name in alternatives:
            for rep in range(replicates):
                rep_seed = int(child_seeds[i].generate_state(1)[0])
                tasks.append((scenario, alt_name, rows, cols, rep, rep_seed, q,
                              tuple(methods), analysis_options))
                i += 1

    results: list[MetricRow] = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for rows_out in pool.map(_replicate_worker, tasks):
                results.extend(rows_out)
    else:
        for task in tasks:
            results.extend(_replicate_worker(task))
    return results


def _replicate_worker(task):
    return _replicate_metrics(*task)


def aggregate_metrics(rows: list[MetricRow]) -> list[dict]:
    """Mean TPR/FDP per (scenario, alternative, method), skipping failed rows."""
    groups: dict[tuple, list[MetricRow]] = {}
    for row in rows:
        groups.setdefault((row.scenario, row.alternative, row.method), []).append(row)
    out = []
    for (scenario, alt, method), members in sorted(groups.items()):
        ok = [r for r in members if r.error is None]
        out.append({
            "scenario": scenario,
            "alternative": alt,
            "method": method,
            "replicates": len(members),
            "failures": len(members) - len(ok),
            "mean_tpr": float(np.mean([r.tpr for r in ok])) if ok else np.nan,
            "mean_fdp": float(np.mean([r.fdp for r in ok])) if ok else np.nan,
        })
    return out
