"""Discovery reports controlling global FDR, plus classical baselines.

Posterior-based methods threshold on local fdr: sites are admitted in order
of increasing local fdr while the running mean (the estimated global FDR of
the reported set) stays at or below the target. Ties are admitted or
excluded as a block so the outcome cannot depend on input order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .densities import NullDensity, TwoGroupsFit

__all__ = [
    "DiscoveryReport",
    "discoveries_at_fdr",
    "bh_procedure",
    "two_groups_report",
]


@dataclass
class DiscoveryReport:
    """Per-site discovery flags at a target global FDR level.

    ``w`` and ``lfdr`` are posterior quantities (None for p-value methods);
    ``pvalues`` is set by the BH baseline only. ``estimated_fdr`` is the mean
    local fdr of the reported set for posterior methods, zero when empty.
    """

    method: str
    q: float
    discovered: np.ndarray
    estimated_fdr: float
    w: np.ndarray | None = None
    lfdr: np.ndarray | None = None
    pvalues: np.ndarray | None = None

    @property
    def n_discoveries(self) -> int:
        return int(self.discovered.sum())

    def to_dict(self) -> dict:
        d = {"method": self.method, "q": self.q,
             "n_discoveries": self.n_discoveries,
             "estimated_fdr": self.estimated_fdr,
             "discovered": self.discovered.astype(int).tolist()}
        if self.w is not None:
            d["w"] = self.w.tolist()
            d["lfdr"] = self.lfdr.tolist()
        if self.pvalues is not None:
            d["pvalues"] = self.pvalues.tolist()
        return d


def _validate_q(q: float):
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def discoveries_at_fdr(w, q: float, method: str = "fdr-smoothing") -> DiscoveryReport:
    """Largest prefix of sites, by ascending local fdr, with mean lfdr <= q.

    Sites sharing a local fdr value enter or stay out together, which keeps
    the report invariant under permutations of the input.
    """
    _validate_q(q)
    w = np.asarray(w, dtype=float)
    lfdr = 1.0 - w
    if w.size == 0:
        return DiscoveryReport(method=method, q=q, discovered=np.zeros(0, dtype=bool),
                               estimated_fdr=0.0, w=w, lfdr=lfdr)
    sorted_lfdr = np.sort(lfdr)
    running = np.cumsum(sorted_lfdr) / np.arange(1, w.size + 1)
    # only cuts at the end of a tie block are valid, so entering a block
    # never strands part of it outside the reported set
    block_end = np.empty(w.size, dtype=bool)
    block_end[-1] = True
    block_end[:-1] = sorted_lfdr[1:] > sorted_lfdr[:-1]
    admissible = np.flatnonzero(block_end & (running <= q))
    discovered = np.zeros(w.size, dtype=bool)
    est = 0.0
    if admissible.size:
        threshold = sorted_lfdr[admissible[-1]]
        discovered = lfdr <= threshold
        est = float(lfdr[discovered].mean())
    return DiscoveryReport(method=method, q=q, discovered=discovered,
                           estimated_fdr=est, w=w, lfdr=lfdr)


def bh_procedure(z, f0: NullDensity, q: float) -> DiscoveryReport:
    """Benjamini-Hochberg step-up on two-sided p-values under the given null."""
    _validate_q(q)
    z = np.asarray(z, dtype=float)
    p = 2.0 * norm.sf(np.abs(z - f0.mu0) / f0.sigma0)
    n = p.size
    sorted_p = np.sort(p)
    thresholds = q * np.arange(1, n + 1) / n
    passing = np.flatnonzero(sorted_p <= thresholds)
    discovered = np.zeros(n, dtype=bool)
    est = 0.0
    if passing.size:
        p_star = sorted_p[passing[-1]]
        discovered = p <= p_star
        est = float(min(1.0, n * p_star / discovered.sum()))
    return DiscoveryReport(method="bh", q=q, discovered=discovered,
                           estimated_fdr=est, pvalues=p)


def two_groups_report(z, fit: TwoGroupsFit, q: float) -> DiscoveryReport:
    """Flat two-groups posterior probabilities fed through the lfdr rule."""
    _validate_q(q)
    return discoveries_at_fdr(fit.posterior(z), q, method="two-groups")
