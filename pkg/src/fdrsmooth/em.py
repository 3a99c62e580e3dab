"""EM loop for the per-site prior log odds at a fixed regularization level.

Each iteration computes posterior signal probabilities given the current log
odds (E-step), forms the quadratic surrogate of the complete-data likelihood
at the current iterate, and takes a single penalized weighted-least-squares
step via ADMM (a partial M-step). The ADMM state is warm-started across
iterations, so late EM steps cost only a handful of inner iterations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .admm import (AdmmConvergenceError, AdmmState, ConvergenceSpec, WlsProblem,
                   admm_solve, factorize, fresh_state)
from .densities import LOG_ODDS_BOUND, AltDensity, NullDensity
from .graphs import SiteGraph, oriented_incidence

__all__ = [
    "FitOptions",
    "FitResult",
    "prior_prob",
    "neg_log_likelihood",
    "e_step",
    "working_quantities",
    "fit",
]

MIX_FLOOR = 1e-300
POSTERIOR_CLAMP = 1e-10


def prior_prob(beta):
    """Inverse logit, stable for the clamped range of log odds."""
    return 1.0 / (1.0 + np.exp(-np.asarray(beta, dtype=float)))


def _density_values(z, f0, f1):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z contains non-finite values")
    return f0.pdf(z), f1.pdf(z)


def neg_log_likelihood(beta, z, f0: NullDensity, f1: AltDensity) -> float:
    """Observed-data negative log likelihood of the site-specific mixture."""
    f0z, f1z = _density_values(z, f0, f1)
    return _nll_from_values(beta, f0z, f1z)


def _nll_from_values(beta, f0z, f1z) -> float:
    c = prior_prob(beta)
    mix = np.maximum(c * f1z + (1.0 - c) * f0z, MIX_FLOOR)
    return float(-np.sum(np.log(mix)))


def e_step(beta, z, f0: NullDensity, f1: AltDensity) -> np.ndarray:
    """Posterior signal probabilities w_i = P(h_i = 1 | z_i)."""
    f0z, f1z = _density_values(z, f0, f1)
    return _posterior_from_values(beta, f0z, f1z)


def _posterior_from_values(beta, f0z, f1z) -> np.ndarray:
    c = prior_prob(beta)
    num = c * f1z
    den = num + (1.0 - c) * f0z
    dead = den <= 0.0
    if np.any(dead):
        warnings.warn("both densities vanish at some z; falling back to the prior there",
                      stacklevel=2)
        num = np.where(dead, c, num)
        den = np.where(dead, 1.0, den)
    w = num / den
    return np.clip(w, POSTERIOR_CLAMP, 1.0 - POSTERIOR_CLAMP)


def working_quantities(beta, w) -> tuple[np.ndarray, np.ndarray]:
    """Working responses and curvature weights of the quadratic surrogate.

    With c the inverse logit of the current iterate, the complete-data
    gradient is c - w and the diagonal Hessian is c(1 - c); the Newton step
    in penalized weighted-least-squares form uses eta = c(1 - c) (floored)
    and y = beta - (c - w)/eta.
    """
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(w, dtype=float)
    c = prior_prob(beta)
    eta = np.maximum(c * (1.0 - c), 1e-6)
    y = beta - (c - w) / eta
    return y, eta


def _working_spec() -> ConvergenceSpec:
    return ConvergenceSpec(eps_abs=1e-8, eps_rel=1e-5, max_iter=5000)


def _polish_spec() -> ConvergenceSpec:
    return ConvergenceSpec(eps_abs=1e-10, eps_rel=1e-8, max_iter=30000)


@dataclass
class FitOptions:
    """EM controls.

    ``admm`` is the working tolerance of the inner solves; intermediate EM
    steps only need enough accuracy to make progress, and the damped update
    absorbs their noise. ``polish`` is a tighter spec applied to one last
    partial M-step after EM has converged, so the reported field is solved
    well below the plateau-counting band without paying tight-solve cost on
    every iteration. Set ``polish`` to None to skip it.
    """

    max_em_iter: int = 100
    em_rtol: float = 1e-6
    admm: ConvergenceSpec = field(default_factory=_working_spec)
    polish: ConvergenceSpec | None = field(default_factory=_polish_spec)
    log_odds_bound: float = LOG_ODDS_BOUND


@dataclass
class FitResult:
    """Fitted log-odds field with posteriors and convergence diagnostics."""

    beta: np.ndarray
    w: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    n_iter: int
    lam: float
    admm_state: AdmmState
    inner_cap_hits: int = 0

    @property
    def prior_prob(self) -> np.ndarray:
        return prior_prob(self.beta)

    @property
    def local_fdr(self) -> np.ndarray:
        return 1.0 - self.w


def fit(z, graph: SiteGraph, f0: NullDensity, f1: AltDensity, lam: float,
        init=None, opts: FitOptions | None = None,
        admm_state: AdmmState | None = None) -> FitResult:
    """Fit the penalized log-odds field by EM with partial M-steps.

    ``init`` may be a scalar (constant field) or a length-n vector; ``None``
    starts from even odds. ``admm_state`` warm-starts the inner solver, e.g.
    from the solution at a neighboring regularization level. The objective
    tracked for convergence is the penalized observed-data negative log
    likelihood, which the EM iteration drives to a local stationary point.
    """
    if opts is None:
        opts = FitOptions()
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    z = np.asarray(z, dtype=float)
    if z.shape != (graph.n_nodes,):
        raise ValueError(f"z must have length {graph.n_nodes}, got {z.shape}")
    f0z, f1z = _density_values(z, f0, f1)

    bound = opts.log_odds_bound
    if init is None:
        beta = np.zeros(graph.n_nodes)
    else:
        beta = np.broadcast_to(np.asarray(init, dtype=float), (graph.n_nodes,)).copy()
    beta = np.clip(beta, -bound, bound)

    D = oriented_incidence(graph)
    factor = (admm_state.factor if admm_state is not None
              else factorize(D, grid_shape=graph.grid_shape))

    def objective(b):
        return _nll_from_values(b, f0z, f1z) + lam * np.abs(D @ b).sum()

    trace = [objective(beta)]
    w = _posterior_from_values(beta, f0z, f1z)
    best_beta, best_w, best_obj = beta, w, trace[0]
    converged = False
    state = admm_state
    n_iter = 0

    inner_cap_hits = 0

    def em_step(current_beta, spec):
        nonlocal state, inner_cap_hits
        w_cur = _posterior_from_values(current_beta, f0z, f1z)
        y, eta = working_quantities(current_beta, w_cur)
        problem = WlsProblem(y=y, weights=eta, incidence=D, lam=lam)
        try:
            beta_new, state = admm_solve(problem, state=state, tol=spec)
        except AdmmConvergenceError as err:
            # a capped inner solve is still a usable partial M-step; keep
            # the near-converged iterate and let the EM objective decide
            inner_cap_hits += 1
            beta_new = err.beta
        return np.clip(beta_new, -bound, bound)

    if state is None:
        # materialize a shared state so warm starts persist across steps
        y0, eta0 = working_quantities(beta, _posterior_from_values(beta, f0z, f1z))
        state = fresh_state(WlsProblem(y=y0, weights=eta0, incidence=D, lam=lam),
                            factor=factor)

    def damped(prev_beta, prop_beta, prev_obj):
        """Halve the step until the objective stops increasing.

        The quadratic surrogate is a Taylor expansion, not a majorizer, so a
        full partial M-step can overshoot; damping along the segment to the
        previous iterate restores descent. Returns None when no fraction of
        the step descends, i.e. the iteration is stationary at solver accuracy.
        """
        slack = 1e-9 * max(1.0, abs(prev_obj))
        obj_prop = objective(prop_beta)
        for _ in range(12):
            if obj_prop <= prev_obj + slack:
                return prop_beta, obj_prop
            prop_beta = 0.5 * (prev_beta + prop_beta)
            obj_prop = objective(prop_beta)
        return None

    for n_iter in range(1, opts.max_em_iter + 1):
        accepted = damped(beta, em_step(beta, opts.admm), trace[-1])
        if accepted is None:
            converged = True
            break
        beta, obj = accepted
        trace.append(obj)
        if obj < best_obj:
            best_beta, best_w, best_obj = beta, _posterior_from_values(beta, f0z, f1z), obj
        if abs(trace[-2] - obj) <= opts.em_rtol * max(1.0, abs(trace[-2])):
            converged = True
            break

    if converged and opts.polish is not None:
        accepted = damped(beta, em_step(beta, opts.polish), trace[-1])
        if accepted is not None:
            beta, obj = accepted
            trace.append(obj)

    w = _posterior_from_values(beta, f0z, f1z)
    if not converged:
        beta, w = best_beta, best_w
    return FitResult(beta=beta, w=w, objective_trace=np.asarray(trace),
                     converged=converged, n_iter=n_iter, lam=lam, admm_state=state,
                     inner_cap_hits=inner_cap_hits)
