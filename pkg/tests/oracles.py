"""Independent reference implementations used to check the solvers.

These deliberately share no code with the package: the chain oracle is an
exact dynamic program over piecewise quadratics, and the graph oracle
enumerates sign patterns of the edge differences and solves each restricted
equality-constrained quadratic program exactly.
"""

import itertools
import math

import numpy as np

INF = math.inf


def _solve_slope(pieces, target):
    """Leftmost t where the derivative of the piecewise quadratic hits target."""
    for lo, hi, a, b, c in pieces:
        d_hi = b if a == 0.0 else (INF if hi == INF else 2.0 * a * hi + b)
        if d_hi < target:
            continue
        if a == 0.0:
            t = lo
        else:
            t = (target - b) / (2.0 * a)
            t = min(max(t, lo), hi)
        if t == -INF or t == INF:
            raise RuntimeError("unbounded crossing; eta must be positive")
        return t, a * t * t + b * t + c
    raise RuntimeError("slope target not reached")


def _add_quadratic(pieces, qa, qb, qc):
    return [[lo, hi, a + qa, b + qb, c + qc] for lo, hi, a, b, c in pieces]


def _clip(pieces, lam):
    """min-convolution with lam * |.|: flatten tails beyond slope +-lam."""
    lo_t, lo_v = _solve_slope(pieces, -lam)
    hi_t, hi_v = _solve_slope(pieces, lam)
    mid = []
    for lo, hi, a, b, c in pieces:
        new_lo, new_hi = max(lo, lo_t), min(hi, hi_t)
        if new_lo < new_hi:
            mid.append([new_lo, new_hi, a, b, c])
    left = [[-INF, lo_t, 0.0, -lam, lo_v + lam * lo_t]]
    right = [[hi_t, INF, 0.0, lam, hi_v - lam * hi_t]]
    return left + mid + right, lo_t, hi_t


def dp_fused_lasso(y, eta, lam):
    """Exact weighted 1-d fused lasso on a chain:

        min sum_i eta_i (y_i - b_i)^2 / 2 + lam sum |b_{i+1} - b_i|

    by forward message passing with analytic clipping, then backtracking.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = y.size
    pieces = [[-INF, INF, 0.5 * eta[0], -eta[0] * y[0], 0.5 * eta[0] * y[0] ** 2]]
    clips = []
    for i in range(1, n):
        pieces, lo_t, hi_t = _clip(pieces, lam)
        clips.append((lo_t, hi_t))
        pieces = _add_quadratic(pieces, 0.5 * eta[i], -eta[i] * y[i],
                                0.5 * eta[i] * y[i] ** 2)
    beta = np.empty(n)
    beta[-1], _ = _solve_slope(pieces, 0.0)
    for i in range(n - 2, -1, -1):
        lo_t, hi_t = clips[i]
        beta[i] = min(max(beta[i + 1], lo_t), hi_t)
    return beta


def enumerate_genlasso(y, eta, D_dense, lam):
    """Global minimizer of the graph problem by sign-pattern enumeration.

    For every sign pattern s of D beta, the restricted problem (equalities on
    the zero set, linear tilt from the active set) is an equality-constrained
    QP solved through its KKT system; the true solution is the candidate with
    the smallest original objective. Exponential in the edge count, so only
    for tiny graphs.
    """
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    D = np.asarray(D_dense, dtype=float)
    m, n = D.shape
    best, best_obj = None, np.inf
    for signs in itertools.product((-1.0, 0.0, 1.0), repeat=m):
        s = np.asarray(signs)
        zero = s == 0.0
        D0 = D[zero]
        lin = eta * y - lam * (D[~zero].T @ s[~zero])
        k = D0.shape[0]
        if k:
            kkt = np.block([[np.diag(eta), D0.T],
                            [D0, np.zeros((k, k))]])
            rhs = np.concatenate([lin, np.zeros(k)])
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            beta = sol[:n]
            if np.max(np.abs(D0 @ beta)) > 1e-8:
                continue
        else:
            beta = lin / eta
        obj = 0.5 * np.sum(eta * (y - beta) ** 2) + lam * np.abs(D @ beta).sum()
        if obj < best_obj:
            best, best_obj = beta, obj
    return best


def random_connected_graph(rng, n, extra_edges=0):
    """Random spanning tree plus optional extra edges, as an edge list."""
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    while len(edges) < n - 1 + extra_edges:
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        u, v = int(min(u, v)), int(max(u, v))
        if (u, v) not in edges and len(edges) < n * (n - 1) // 2:
            edges.add((u, v))
        if len(edges) >= n * (n - 1) // 2:
            break
    return sorted(edges)


def convolve_with_unit_gaussian(pdf, z, lo=-40.0, hi=40.0):
    """Quadrature reference for int pdf(theta) N(z - theta; 0, 1) dtheta."""
    from scipy.integrate import quad

    def integrand(theta, zz):
        return pdf(theta) * math.exp(-0.5 * (zz - theta) ** 2) / math.sqrt(2 * math.pi)

    return np.array([quad(integrand, lo, hi, args=(zz,), limit=400)[0] for zz in np.atleast_1d(z)])
