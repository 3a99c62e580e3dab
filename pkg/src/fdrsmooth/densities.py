"""Null and alternative density estimation for the two-groups mixture.

The null is Gaussian, either theoretical (given mean and scale) or empirical:
central matching reads the mean and scale off the curvature of a smoothed
log-histogram near its mode, using only the bulk of the data so that signal
tails do not contaminate the fit.

The alternative is estimated by predictive recursion: a stochastic recursion
over a mixing measure made of a point mass at the null plus a density on a
grid of signal means. Its Gaussian convolution is tabulated for fast reuse.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

__all__ = [
    "EstimationError",
    "DegenerateDataError",
    "NullDensity",
    "AltDensity",
    "TwoGroupsFit",
    "fit_empirical_null",
    "fit_alternative_pr",
    "scalar_two_groups",
    "LOG_ODDS_BOUND",
]

SQRT_2PI = np.sqrt(2.0 * np.pi)
LOG_ODDS_BOUND = 15.0


class EstimationError(RuntimeError):
    """Density estimation failed in a way the caller may want to recover from."""


class DegenerateDataError(EstimationError):
    """The input carries no usable variation."""


def _gauss_pdf(z, mu, sigma):
    zz = (np.asarray(z, dtype=float) - mu) / sigma
    return np.exp(-0.5 * zz * zz) / (sigma * SQRT_2PI)


@dataclass(frozen=True)
class NullDensity:
    """Gaussian null N(mu0, sigma0^2), theoretical or empirically matched."""

    mu0: float
    sigma0: float
    kind: str = "theoretical"

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")

    def pdf(self, z):
        return _gauss_pdf(z, self.mu0, self.sigma0)

    def logpdf(self, z):
        zz = (np.asarray(z, dtype=float) - self.mu0) / self.sigma0
        return -0.5 * zz * zz - np.log(self.sigma0 * SQRT_2PI)

    def to_dict(self) -> dict:
        return {"mu0": self.mu0, "sigma0": self.sigma0, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "NullDensity":
        return cls(mu0=float(d["mu0"]), sigma0=float(d["sigma0"]), kind=str(d["kind"]))


@dataclass
class AltDensity:
    """Tabulated alternative density from a deconvolved signal distribution.

    ``mixing_weights`` is the estimated signal-mean density on ``theta_grid``
    (trapezoid-normalized); ``values`` tabulates its Gaussian convolution on
    ``z_grid``. Evaluation interpolates linearly inside the grid and decays
    like the moment-matched Gaussian beyond it, scaled to continue from the
    edge value.
    """

    theta_grid: np.ndarray
    mixing_weights: np.ndarray
    z_grid: np.ndarray
    values: np.ndarray
    sigma0: float

    def __post_init__(self):
        tw = _trapezoid_weights(self.theta_grid)
        mean = float(np.sum(tw * self.mixing_weights * self.theta_grid))
        var = float(np.sum(tw * self.mixing_weights * (self.theta_grid - mean) ** 2))
        self._tail_mean = mean
        self._tail_var = var + self.sigma0 ** 2

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        out = np.interp(z, self.z_grid, self.values)
        lo, hi = self.z_grid[0], self.z_grid[-1]
        below, above = z < lo, z > hi
        if np.any(below):
            out = np.where(below, self._tail(z, lo, self.values[0]), out)
        if np.any(above):
            out = np.where(above, self._tail(z, hi, self.values[-1]), out)
        return out

    def _tail(self, z, edge, edge_value):
        m, v = self._tail_mean, self._tail_var
        log_ratio = -0.5 * ((z - m) ** 2 - (edge - m) ** 2) / v
        return edge_value * np.exp(log_ratio)

    def to_dict(self) -> dict:
        return {
            "theta_grid": self.theta_grid.tolist(),
            "mixing_weights": self.mixing_weights.tolist(),
            "z_grid": self.z_grid.tolist(),
            "values": self.values.tolist(),
            "sigma0": self.sigma0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AltDensity":
        return cls(theta_grid=np.asarray(d["theta_grid"], dtype=float),
                   mixing_weights=np.asarray(d["mixing_weights"], dtype=float),
                   z_grid=np.asarray(d["z_grid"], dtype=float),
                   values=np.asarray(d["values"], dtype=float),
                   sigma0=float(d["sigma0"]))


@dataclass(frozen=True)
class TwoGroupsFit:
    """Flat two-groups mixture: z ~ c f1 + (1 - c) f0 with scalar prior c."""

    f0: NullDensity
    f1: AltDensity
    c: float
    beta_s: float

    def posterior(self, z) -> np.ndarray:
        """P(signal | z) under the scalar-prior mixture."""
        num = self.c * self.f1.pdf(z)
        den = num + (1.0 - self.c) * self.f0.pdf(z)
        return num / np.maximum(den, 1e-300)

    def to_dict(self) -> dict:
        return {"f0": self.f0.to_dict(), "f1": self.f1.to_dict(),
                "c": self.c, "beta_s": self.beta_s}

    @classmethod
    def from_dict(cls, d: dict) -> "TwoGroupsFit":
        return cls(f0=NullDensity.from_dict(d["f0"]), f1=AltDensity.from_dict(d["f1"]),
                   c=float(d["c"]), beta_s=float(d["beta_s"]))


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.empty_like(grid)
    w[1:-1] = 0.5 * (grid[2:] - grid[:-2])
    w[0] = 0.5 * (grid[1] - grid[0])
    w[-1] = 0.5 * (grid[-1] - grid[-2])
    return w


def fit_empirical_null(z, central_fraction: float = 1.0 / 3.0,
                       smoother_df: int = 7, max_bins: int = 180) -> NullDensity:
    """Estimate a Gaussian empirical null by central matching.

    The log of a count-weighted B-spline smooth of the full histogram is
    approximated by a quadratic over the central ``central_fraction`` of the
    sample; its apex and curvature give the null mean and scale. Smoothing
    over the full range (rather than fitting raw counts in the window alone)
    is what makes the curvature estimate stable; the window then shields the
    quadratic from signal-heavy tails.

    Raises EstimationError when the smoothed log-histogram is not concave
    over the window, in which case the theoretical null is the sane choice.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise DegenerateDataError("cannot fit an empirical null to an empty sample")
    if np.ptp(z) == 0:
        raise DegenerateDataError("all z values are identical")
    if z.size < 1000:
        warnings.warn(f"empirical null fit on only {z.size} scores is unreliable",
                      stacklevel=2)
    if not 0 < central_fraction <= 1:
        raise ValueError(f"central_fraction must be in (0, 1], got {central_fraction}")

    nbins = min(int(np.ceil(np.sqrt(z.size))), max_bins)
    counts, edges = np.histogram(z, bins=nbins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    pos = counts > 0
    x, cnt = centers[pos], counts[pos].astype(float)
    if x.size < 3:
        raise EstimationError("too few occupied histogram bins for central matching")

    ghat = _smooth_log_counts(x, cnt, smoother_df)

    qlo, qhi = np.quantile(z, [0.5 - central_fraction / 2, 0.5 + central_fraction / 2])
    win = (x >= qlo) & (x <= qhi)
    if win.sum() < 3:
        win = np.ones_like(win)
    xw, gw = x[win], ghat[win]

    z0 = xw[np.argmax(gw)]
    design = np.column_stack([(xw - z0) ** 2, xw - z0, np.ones_like(xw)])
    d2, d1, _ = np.linalg.lstsq(design, gw, rcond=None)[0]
    if d2 >= 0:
        raise EstimationError(
            "central matching found a non-concave log density "
            f"(curvature {d2:.3g} >= 0); consider the theoretical null")
    mu0 = z0 - d1 / (2.0 * d2)
    sigma0 = float(np.sqrt(-1.0 / (2.0 * d2)))
    return NullDensity(mu0=float(mu0), sigma0=sigma0, kind="empirical")


def _smooth_log_counts(x, cnt, df):
    """Count-weighted cubic B-spline fit to log histogram counts."""
    k = 3
    df = max(int(df), k + 1)
    n_interior = min(df - (k + 1), max(x.size - k - 1, 0))
    interior = np.linspace(x[0], x[-1], n_interior + 2)[1:-1]
    knots = np.r_[[x[0]] * (k + 1), interior, [x[-1]] * (k + 1)]
    basis = BSpline.design_matrix(x, knots, k).toarray()
    wts = np.sqrt(cnt)
    coef, *_ = np.linalg.lstsq(basis * wts[:, None], np.log(cnt) * wts, rcond=None)
    return basis @ coef


def fit_alternative_pr(z, f0: NullDensity, passes: int = 50, *,
                       seed: int = 0, n_theta: int = 201, n_z: int = 401,
                       decay: float = 0.67, init_pi0: float = 0.95,
                       ) -> tuple[AltDensity, float]:
    """Predictive-recursion estimate of the alternative density.

    The mixing measure is a point mass at the null (weight pi0) plus a
    density on a uniform grid of signal means spanning the data range plus
    one unit each side. Each observation, visited in a freshly randomized
    order every pass, pulls weight toward whichever component explains it;
    the step sizes (t + 1)^(-decay) shrink over the cumulative visit count t.

    Returns the tabulated convolution of the fitted signal-mean density with
    N(0, sigma0^2), together with the estimated null fraction pi0.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise DegenerateDataError("no observations")
    if np.ptp(z) == 0:
        raise DegenerateDataError("all z values are identical")
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")

    sigma0 = f0.sigma0
    lo, hi = z.min() - 1.0, z.max() + 1.0
    theta = np.linspace(lo, hi, n_theta)
    tw = _trapezoid_weights(theta)

    pi0 = float(init_pi0)
    mix = np.full(n_theta, 1.0 / (hi - lo))
    f0z = f0.pdf(z)

    rng = np.random.default_rng(seed)
    inv_two_var = 0.5 / sigma0 ** 2
    norm = sigma0 * SQRT_2PI
    t = 0
    for _ in range(passes):
        for idx in rng.permutation(z.size):
            t += 1
            gamma = (t + 1.0) ** (-decay)
            kern = np.exp(-inv_two_var * (z[idx] - theta) ** 2) / norm
            m0 = pi0 * f0z[idx]
            m1 = (1.0 - pi0) * np.sum(tw * kern * mix)
            m = max(m0 + m1, 1e-300)
            pi0 = (1.0 - gamma) * pi0 + gamma * m0 / m
            mix = (1.0 - gamma) * mix + gamma * kern * mix / m
            mix /= np.sum(tw * mix)

    z_grid = np.linspace(lo, hi, n_z)
    kern_zt = np.exp(-inv_two_var * (z_grid[:, None] - theta[None, :]) ** 2) / norm
    values = kern_zt @ (tw * mix)
    alt = AltDensity(theta_grid=theta, mixing_weights=mix, z_grid=z_grid,
                     values=values, sigma0=sigma0)
    return alt, pi0


def scalar_two_groups(pi0: float) -> tuple[float, float]:
    """Scalar prior c = 1 - pi0 and its log odds, clamped to +-LOG_ODDS_BOUND."""
    if not 0.0 <= pi0 <= 1.0:
        raise ValueError(f"pi0 must lie in [0, 1], got {pi0}")
    c = 1.0 - pi0
    c_min = 1.0 / (1.0 + np.exp(LOG_ODDS_BOUND))
    c_clamped = min(max(c, c_min), 1.0 - c_min)
    beta_s = float(np.clip(np.log(c_clamped / (1.0 - c_clamped)),
                           -LOG_ODDS_BOUND, LOG_ODDS_BOUND))
    return c, beta_s
