"""Spatially adaptive false discovery rate control on graphs.

Test statistics attached to graph nodes are modeled as a two-groups mixture
whose prior signal probability varies over the graph; an l1 penalty on log
odds differences across edges fuses the field into interpretable regions,
and discoveries are reported at a user-chosen global FDR level.
"""

from .admm import (AdmmConvergenceError, AdmmState, ConvergenceSpec, SddFactorization,
                   WlsProblem, admm_solve, factorize, soft_threshold)
from .densities import (AltDensity, DegenerateDataError, EstimationError, NullDensity,
                        TwoGroupsFit, fit_alternative_pr, fit_empirical_null,
                        scalar_two_groups)
from .em import FitOptions, FitResult, e_step, fit, neg_log_likelihood, working_quantities
from .graphs import (PlateauSet, SiteGraph, build_grid_graph, count_plateaus,
                     oriented_incidence)
from .path import (PathFailureError, PathResult, default_lambda_grid,
                   information_criteria, select, solution_path)
from .pipeline import AnalysisOptions, AnalysisResult, analyze_zscores
from .reporting import DiscoveryReport, bh_procedure, discoveries_at_fdr, two_groups_report
from .simulate import (ALTERNATIVES, MetricRow, PriorImage, SimDataset, aggregate_metrics,
                       make_prior_image, oracle_report, run_experiment, simulate)

__version__ = "0.1.0"

__all__ = [
    "AdmmConvergenceError", "AdmmState", "ConvergenceSpec", "SddFactorization",
    "WlsProblem", "admm_solve", "factorize", "soft_threshold",
    "AltDensity", "DegenerateDataError", "EstimationError", "NullDensity",
    "TwoGroupsFit", "fit_alternative_pr", "fit_empirical_null", "scalar_two_groups",
    "FitOptions", "FitResult", "e_step", "fit", "neg_log_likelihood",
    "working_quantities",
    "PlateauSet", "SiteGraph", "build_grid_graph", "count_plateaus",
    "oriented_incidence",
    "PathFailureError", "PathResult", "default_lambda_grid", "information_criteria",
    "select", "solution_path",
    "AnalysisOptions", "AnalysisResult", "analyze_zscores",
    "DiscoveryReport", "bh_procedure", "discoveries_at_fdr", "two_groups_report",
    "ALTERNATIVES", "MetricRow", "PriorImage", "SimDataset", "aggregate_metrics",
    "make_prior_image", "oracle_report", "run_experiment", "simulate",
    "__version__",
]
