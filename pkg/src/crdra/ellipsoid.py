"""Ellipsoid (cutting-plane) minimization of convex dual functions.

The solvers use this to minimize Lagrange dual functions over the
nonnegative orthant from subgradient information only.
"""

from __future__ import annotations

import numpy as np


class Ellipsoid:
    """Ellipsoid {x : (x-c)^T P^{-1} (x-c) <= 1} updated by central cuts."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float).copy()
        n = self.center.size
        self.shape = np.eye(n) * float(radius) ** 2
        self.n = n

    def cut(self, g):
        """Keep the half-space {y : g.(y - center) <= 0}."""
        g = np.asarray(g, dtype=float)
        n = self.n
        Pg = self.shape @ g
        gPg = float(g @ Pg)
        if gPg <= 0:  # numerically collapsed along g
            return False
        gn = Pg / np.sqrt(gPg)
        if n == 1:
            # 1-D ellipsoid update degenerates; halve the interval instead
            self.center = self.center - 0.5 * gn
            self.shape = self.shape / 4.0
            return True
        self.center = self.center - gn / (n + 1.0)
        self.shape = (n * n / (n * n - 1.0)) * (
            self.shape - (2.0 / (n + 1.0)) * np.outer(gn, gn)
        )
        self.shape = 0.5 * (self.shape + self.shape.T)
        return True

    def extent(self, g) -> float:
        """Half-width of the ellipsoid along direction g (unnormalized)."""
        g = np.asarray(g, dtype=float)
        v = float(g @ self.shape @ g)
        return np.sqrt(max(v, 0.0))

    def max_extent(self) -> float:
        w = np.linalg.eigvalsh(self.shape)
        return float(np.sqrt(max(w.max(), 0.0)))


def minimize_nonneg(oracle, n, *, center=None, radius=10.0, tol=1e-6,
                    max_iter=500, gap_oracle=None):
    """Minimize a convex function over the nonnegative orthant.

    ``oracle(x) -> (value, subgradient, payload)`` is queried at feasible
    centers; infeasible centers (negative coordinates) are removed by
    feasibility cuts.  If ``gap_oracle(best_value, best_payload)`` is
    given it returns the current dual-primal gap; iteration stops once it
    drops below ``tol``.

    Returns (best_value, best_x, best_payload, info) where info carries
    the iteration count, convergence flag, and per-iteration trace of
    (value, gap-estimate).
    """
    x0 = np.ones(n) if center is None else np.asarray(center, dtype=float)
    ell = Ellipsoid(x0, radius)
    best_val = np.inf
    best_x = x0.copy()
    best_payload = None
    trace = []
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        x = ell.center
        neg = np.where(x < 0)[0]
        if neg.size:
            g = np.zeros(n)
            g[neg[0]] = -1.0
            if not ell.cut(g):
                break
            continue
        val, g, payload = oracle(x)
        if val < best_val:
            best_val, best_x, best_payload = val, x.copy(), payload
        gap = np.nan
        if gap_oracle is not None:
            gap = gap_oracle(best_val, best_payload)
            trace.append((val, gap))
            if gap <= tol:
                converged = True
                break
        else:
            trace.append((val, np.nan))
        g = np.asarray(g, dtype=float)
        gnorm = np.linalg.norm(g)
        if gnorm > 0 and ell.extent(g) / gnorm <= tol * 1e-3:
            converged = True
            break
        if gnorm == 0 or not ell.cut(g):
            converged = True
            break
    info = {"iterations": it, "converged": converged, "trace": trace}
    return best_val, best_x, best_payload, info
