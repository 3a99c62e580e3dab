"""Solution path over a decreasing regularization grid and BIC selection.

Each grid point is fitted with the previous solution (log odds and inner
solver state) as a warm start. Model complexity is scored by the number of
plateaus in the fitted field, a surrogate for degrees of freedom; BIC picks
the reported solution, with ties broken toward the smoother (larger) value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import AdmmConvergenceError
from .densities import AltDensity, NullDensity
from .em import FitOptions, FitResult, fit, neg_log_likelihood
from .graphs import SiteGraph, count_plateaus

__all__ = [
    "PathFailureError",
    "PathPoint",
    "PathResult",
    "default_lambda_grid",
    "information_criteria",
    "solution_path",
    "select",
]

PLATEAU_EPS = 1e-5


class PathFailureError(RuntimeError):
    """No grid point produced a usable fit."""


def default_lambda_grid(lam_max: float = 2.0, lam_min: float = 0.02,
                        num: int = 20) -> np.ndarray:
    """Geometric grid from lam_max down to lam_min."""
    if not 0 < lam_min < lam_max:
        raise ValueError("need 0 < lam_min < lam_max")
    if num < 1:
        raise ValueError("need at least one grid point")
    if num == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, lam_min, num)


def information_criteria(loglik: float, n_plateaus: int, n_nodes: int) -> tuple[float, float]:
    """AIC and BIC from a log likelihood and a plateau-count complexity."""
    if n_nodes < 1 or n_plateaus < 1:
        raise ValueError("need n_nodes >= 1 and n_plateaus >= 1")
    aic = -2.0 * loglik + 2.0 * n_plateaus
    bic = -2.0 * loglik + np.log(n_nodes) * n_plateaus
    return float(aic), float(bic)


@dataclass
class PathPoint:
    """Diagnostics for one grid value; ``fit`` is None when that fit failed."""

    lam: float
    fit: FitResult | None
    loglik: float
    n_plateaus: int
    aic: float
    bic: float
    error: str | None = None


@dataclass
class PathResult:
    points: list[PathPoint]
    selected_index: int

    @property
    def selected(self) -> PathPoint:
        return self.points[self.selected_index]

    @property
    def selected_fit(self) -> FitResult:
        return self.points[self.selected_index].fit

    def trace_rows(self) -> list[dict]:
        """Per-lambda diagnostics, one dict per grid point."""
        rows = []
        for i, p in enumerate(self.points):
            rows.append({"lambda": p.lam, "loglik": p.loglik,
                         "plateaus": p.n_plateaus, "aic": p.aic, "bic": p.bic,
                         "selected": int(i == self.selected_index)})
        return rows


def solution_path(z, graph: SiteGraph, f0: NullDensity, f1: AltDensity,
                  lambdas=None, init=None, opts: FitOptions | None = None,
                  plateau_eps: float = PLATEAU_EPS) -> PathResult:
    """Fit the model along a strictly decreasing grid of penalty values.

    Individual fit failures are recorded on their grid point and the path
    continues from the last good solution. Raises PathFailureError only if
    every point fails.
    """
    lambdas = default_lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ValueError("lambdas must be a nonempty 1-d grid")
    if np.any(lambdas <= 0):
        raise ValueError("lambdas must be positive")
    if lambdas.size > 1 and not np.all(np.diff(lambdas) < 0):
        raise ValueError("lambdas must be strictly decreasing")

    points: list[PathPoint] = []
    warm_beta = init
    warm_state = None
    for lam in lambdas:
        try:
            res = fit(z, graph, f0, f1, float(lam), init=warm_beta, opts=opts,
                      admm_state=warm_state)
        except AdmmConvergenceError as err:
            points.append(PathPoint(lam=float(lam), fit=None, loglik=np.nan,
                                    n_plateaus=0, aic=np.nan, bic=np.nan,
                                    error=str(err)))
            continue
        loglik = -neg_log_likelihood(res.beta, z, f0, f1)
        k = len(count_plateaus(res.beta, graph, eps=plateau_eps))
        aic, bic = information_criteria(loglik, k, graph.n_nodes)
        points.append(PathPoint(lam=float(lam), fit=res, loglik=loglik,
                                n_plateaus=k, aic=aic, bic=bic))
        warm_beta = res.beta
        warm_state = res.admm_state

    ok = [i for i, p in enumerate(points) if p.fit is not None]
    if not ok:
        raise PathFailureError("every fit on the regularization grid failed")
    # np.argmin-style first hit = largest lambda on ties
    best = min(ok, key=lambda i: (points[i].bic, i))
    return PathResult(points=points, selected_index=best)


def select(path: PathResult) -> FitResult:
    """The BIC-minimizing fit; ties resolve toward the larger penalty."""
    fit_res = path.selected_fit
    if fit_res is None:
        raise PathFailureError("selected grid point has no fit")
    return fit_res
