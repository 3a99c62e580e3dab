"""End-to-end analysis: densities, solution path, selection, discoveries.

This is the composition root shared by the command-line interface and the
simulation harness. Given raw z scores on a graph it estimates the null and
alternative densities, fits the regularization path warm-started from the
flat two-groups log odds, selects by BIC, and reports discoveries at the
requested global FDR level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .densities import (AltDensity, NullDensity, TwoGroupsFit,
                        fit_alternative_pr, fit_empirical_null, scalar_two_groups)
from .em import FitOptions, FitResult
from .graphs import SiteGraph
from .path import PathResult, default_lambda_grid, solution_path
from .reporting import DiscoveryReport, discoveries_at_fdr

__all__ = ["AnalysisOptions", "AnalysisResult", "analyze_zscores"]


@dataclass
class AnalysisOptions:
    """Knobs for one analysis; defaults mirror the package-level choices."""

    null_mode: str = "theoretical"
    mu0: float = 0.0
    sigma0: float = 1.0
    pr_passes: int = 50
    lambda_grid: np.ndarray | None = None
    q: float = 0.10
    seed: int = 0
    plateau_eps: float = 1e-5
    fit_options: FitOptions = field(default_factory=FitOptions)


@dataclass
class AnalysisResult:
    two_groups: TwoGroupsFit
    pi0: float
    path: PathResult
    fit: FitResult
    report: DiscoveryReport

    @property
    def beta(self) -> np.ndarray:
        return self.fit.beta

    @property
    def prior_prob(self) -> np.ndarray:
        return self.fit.prior_prob

    @property
    def w(self) -> np.ndarray:
        return self.fit.w


def analyze_zscores(z, graph: SiteGraph, options: AnalysisOptions | None = None
                    ) -> AnalysisResult:
    """Run the full smoothing pipeline on a vector of z scores."""
    if options is None:
        options = AnalysisOptions()
    z = np.asarray(z, dtype=float)
    if z.shape != (graph.n_nodes,):
        raise ValueError(f"expected {graph.n_nodes} z scores, got {z.shape}")

    if options.null_mode == "theoretical":
        f0 = NullDensity(mu0=options.mu0, sigma0=options.sigma0, kind="theoretical")
    elif options.null_mode == "empirical":
        f0 = fit_empirical_null(z)
    else:
        raise ValueError(f"null_mode must be 'theoretical' or 'empirical', "
                         f"got {options.null_mode!r}")

    f1, pi0 = fit_alternative_pr(z, f0, passes=options.pr_passes, seed=options.seed)
    c, beta_s = scalar_two_groups(pi0)
    two_groups = TwoGroupsFit(f0=f0, f1=f1, c=c, beta_s=beta_s)

    grid = options.lambda_grid if options.lambda_grid is not None else default_lambda_grid()
    path = solution_path(z, graph, f0, f1, lambdas=grid, init=beta_s,
                         opts=options.fit_options, plateau_eps=options.plateau_eps)
    fit_res = path.selected_fit
    report = discoveries_at_fdr(fit_res.w, options.q, method="fdr-smoothing")
    return AnalysisResult(two_groups=two_groups, pi0=pi0, path=path,
                          fit=fit_res, report=report)
