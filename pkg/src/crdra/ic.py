"""CR MIMO interference-channel weighted sum-rate heuristic.

Interference is treated as noise; each joint PIPC budget is split across
the SU transmitters, and the links iteratively re-optimize their transmit
covariances against the current interference, each step being a
single-link problem solved by the point-to-point machinery.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .model import (
    DomainError,
    NetworkInstance,
    Role,
    SolveReport,
    check_psd,
    herm,
    interference_power,
    inv_sqrt_psd,
    rate_p2p,
)
from .p2p import solve_p1_channels

DEFAULT_TOL = 1e-5
MAX_CYCLES = 200


def equal_split(Gamma, K):
    """Split each joint PIPC budget evenly across the K transmitters."""
    return [[float(g) / K] * K for g in Gamma]


def validate_split(split, Gamma, K):
    split = [[float(s) for s in row] for row in split]
    if len(split) != len(Gamma):
        raise DomainError("need one split row per PIPC")
    for j, row in enumerate(split):
        if len(row) != K:
            raise DomainError("each split row needs one share per SU")
        if any(s < 0 for s in row):
            raise DomainError("split shares must be nonnegative")
        if sum(row) > Gamma[j] * (1 + 1e-9) + 1e-15:
            raise DomainError(f"split for PU {j} exceeds its budget")
    return split


def ic_rates(R_list, instance: NetworkInstance):
    """Per-link rates with interference treated as noise."""
    K = instance.K
    rates = np.empty(K)
    for k in range(K):
        Hkk = instance.Hic(k, k)
        B = Hkk.shape[0]
        N = np.eye(B, dtype=complex)
        for i in range(K):
            if i != k:
                Hik = instance.Hic(i, k)
                N = N + Hik @ R_list[i] @ Hik.conj().T
        Wn = inv_sqrt_psd(herm(N))
        rates[k] = rate_p2p(Wn @ Hkk, check_psd(R_list[k], what=f"R[{k}]"))
    return rates


def wsr_ic(R_list, instance: NetworkInstance, mu=None):
    """Weighted sum-rate of the IC with single-user detection."""
    mu = instance.mu if mu is None else mu
    return float(np.dot(mu, ic_rates(R_list, instance)))


def solve_p5(instance: NetworkInstance, P, Gamma=(), split=None,
             strategy="own_rate", tol=DEFAULT_TOL,
             max_cycles=MAX_CYCLES) -> SolveReport:
    """Iterative per-link covariance optimization for the CR MIMO-IC.

    ``strategy`` selects the per-step update: ``own_rate`` replaces each
    link's covariance by the maximizer of its own rate against the current
    interference; ``weighted`` moves along the segment toward that
    maximizer only as far as the weighted sum-rate improves (monotone).
    """
    if instance.role is not Role.IC:
        raise DomainError("solve_p5 expects an IC instance")
    if strategy not in ("own_rate", "weighted"):
        raise DomainError(f"unknown per-step strategy: {strategy!r}")
    K, J = instance.K, instance.J
    P = [float(p) for p in np.atleast_1d(P)]
    Gamma = [float(g) for g in Gamma]
    if len(P) != K or len(Gamma) != J:
        raise DomainError("need one PTPC per link and one PIPC per PU")
    split = equal_split(Gamma, K) if split is None else \
        validate_split(split, Gamma, K)
    E = [[instance.G(k, j) for j in range(J)] for k in range(K)]

    R = [np.zeros((instance.Hic(k, k).shape[1],) * 2, dtype=complex)
         for k in range(K)]
    best = {"wsr": 0.0, "R": [r.copy() for r in R]}
    trace = []
    converged = False
    cycles = 0
    prev = 0.0
    for cycles in range(1, max_cycles + 1):
        for k in range(K):
            Hkk = instance.Hic(k, k)
            B = Hkk.shape[0]
            Nk = np.eye(B, dtype=complex)
            for i in range(K):
                if i != k:
                    Hik = instance.Hic(i, k)
                    Nk = Nk + Hik @ R[i] @ Hik.conj().T
            Heff = inv_sqrt_psd(herm(Nk)) @ Hkk
            rep = solve_p1_channels(Heff, E[k], P[k],
                                    [split[j][k] for j in range(J)], tol=tol)
            R_own = rep.covariances[0]
            if strategy == "own_rate":
                R[k] = R_own
            else:
                R[k] = _best_on_segment(R, k, R_own, instance)
        wsr = wsr_ic(R, instance)
        trace.append(wsr)
        if wsr >= best["wsr"]:
            best["wsr"], best["R"] = wsr, [r.copy() for r in R]
        if abs(wsr - prev) < tol:
            converged = True
            break
        prev = wsr

    R_fin = best["R"]
    usage, bgt = {}, {}
    for k in range(K):
        usage[f"ptpc{k}"] = float(np.trace(R_fin[k]).real)
        bgt[f"ptpc{k}"] = P[k]
    for j in range(J):
        usage[f"pipc{j}"] = sum(interference_power(E[k][j], R_fin[k])
                                for k in range(K))
        bgt[f"pipc{j}"] = Gamma[j]
    return SolveReport(
        objective=best["wsr"], covariances=R_fin, usage=usage, budgets=bgt,
        iterations=cycles, converged=converged, trace=trace,
        extras={"rates": ic_rates(R_fin, instance), "strategy": strategy,
                "split": split},
    )


def _best_on_segment(R, k, R_own, instance, n_coarse=17, refine=2):
    """Pick R_k on the segment current -> own-rate optimum maximizing the
    weighted sum-rate (both endpoints respect the split, hence so does
    every point by linearity)."""
    R_cur = R[k]

    def wsr_at(t):
        trial = list(R)
        trial[k] = (1.0 - t) * R_cur + t * R_own
        return wsr_ic(trial, instance)

    lo_t, hi_t = 0.0, 1.0
    best_t, best_v = 0.0, wsr_at(0.0)
    for _ in range(refine + 1):
        ts = np.linspace(lo_t, hi_t, n_coarse)
        vals = [wsr_at(t) for t in ts]
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_v, best_t = vals[i], ts[i]
        lo_t = ts[max(i - 1, 0)]
        hi_t = ts[min(i + 1, n_coarse - 1)]
    return (1.0 - best_t) * R_cur + best_t * R_own


def search_split(instance: NetworkInstance, P, Gamma, n=5, strategy="own_rate",
                 tol=DEFAULT_TOL):
    """Search PIPC splits on a simplex grid and keep the best outcome.

    Each PU budget is divided among the K transmitters over all grid
    compositions with n levels per share; returns the best SolveReport.
    """
    K, J = instance.K, len(Gamma)
    fracs = np.linspace(0.0, 1.0, n)
    # compositions of 1.0 into K parts on the grid
    combos = [c for c in product(fracs, repeat=K - 1) if sum(c) <= 1 + 1e-12]
    best = None
    for rows in product(combos, repeat=J):
        split = [[Gamma[j] * f for f in row] + [Gamma[j] * (1 - sum(row))]
                 for j, row in enumerate(rows)]
        rep = solve_p5(instance, P, Gamma, split=split, strategy=strategy,
                       tol=tol)
        if best is None or rep.objective > best.objective:
            best = rep
    return best
