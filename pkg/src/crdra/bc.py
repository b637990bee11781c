"""CR MIMO-BC solvers.

Weighted sum-rate maximization (dirty-paper coding) is solved through the
generalized BC-MAC duality: the PTPC and PIPCs are combined into a single
transmit-covariance constraint with multipliers lambda, the resulting
single-constraint BC problem equals a dual MIMO-MAC with noise covariance
A(lambda) and sum power Q(lambda), and the outer minimization over lambda
runs the ellipsoid method.  SINR balancing for the MISO-BC is a bisection
over a dual-uplink feasibility oracle built the same way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ellipsoid import Ellipsoid, minimize_nonneg
from .kernels import uplink_fixed_point
from .mac import solve_sum_power_mac
from .model import (
    LN2,
    DomainError,
    NetworkInstance,
    Role,
    SolveReport,
    herm,
    interference_power,
    inv_sqrt_psd,
    sqrt_psd,
)

DEFAULT_TOL = 1e-5
MAX_ITER = 500
RATE_MATCH_TOL = 1e-3


def _logdet2(M):
    return float(np.linalg.slogdet(herm(M))[1] / LN2)


def bc_rates(H_list, Q_list):
    """Per-user DPC rates of the BC with downlink channels H_k^H and unit
    noise; user k pre-subtracts users i < k and sees i > k as interference."""
    K = len(H_list)
    rates = []
    for k in range(K):
        Hk = H_list[k]
        interf = sum((Q_list[i] for i in range(k + 1, K)),
                     np.zeros_like(Q_list[k]))
        N = Hk.shape[1]
        Om = np.eye(N, dtype=complex) + Hk.conj().T @ interf @ Hk
        rates.append(_logdet2(Om + Hk.conj().T @ Q_list[k] @ Hk) - _logdet2(Om))
    return np.array(rates)


def mac_rates(H_list, S_list):
    """Per-user rates of the (unit-noise) MAC with SIC decoding user K
    first; user k sees users i < k as interference."""
    K = len(H_list)
    M = H_list[0].shape[0]
    A = np.eye(M, dtype=complex)
    rates = []
    prev = 0.0
    for k in range(K):
        A = A + H_list[k] @ S_list[k] @ H_list[k].conj().T
        cur = _logdet2(A)
        rates.append(cur - prev)
        prev = cur
    return np.array(rates)


def wsr_bc(Q_list, instance: NetworkInstance, mu=None):
    """Weighted sum-rate of the BC instance under DPC encoding by index."""
    mu = instance.mu if mu is None else mu
    H = [instance.H(k) for k in range(instance.K)]
    return float(np.dot(mu, bc_rates(H, Q_list)))


def mac_to_bc(H_list, S_list, A=None, check_tol=RATE_MATCH_TOL):
    """Map dual-MAC covariances S_k to BC covariances Q_k achieving the same
    per-user rates (flipped interference order), for uplink channels H_k and
    MAC noise covariance A (identity if None).

    Raises DomainError with both rate vectors if the rates do not match.
    """
    K = len(H_list)
    M = H_list[0].shape[0]
    if A is not None:
        W = inv_sqrt_psd(A)
        Ht = [W @ H for H in H_list]
    else:
        W = None
        Ht = list(H_list)

    # Lam[k] = I + sum_{i<k} Ht_i S_i Ht_i^H (uplink interference seen by k)
    Lam = [np.eye(M, dtype=complex)]
    for k in range(K - 1):
        Lam.append(Lam[-1] + Ht[k] @ S_list[k] @ Ht[k].conj().T)

    Qt = [None] * K
    for k in range(K - 1, -1, -1):
        Nk = Ht[k].shape[1]
        interf = sum((Qt[i] for i in range(k + 1, K)),
                     np.zeros((M, M), dtype=complex))
        Om = herm(np.eye(Nk, dtype=complex) + Ht[k].conj().T @ interf @ Ht[k])
        Lm = inv_sqrt_psd(Lam[k])
        Om_m = inv_sqrt_psd(Om)
        Om_p = sqrt_psd(Om)
        C = Om_m @ Ht[k].conj().T @ Lm  # Nk x M
        Fk, _sv, Gh = np.linalg.svd(C, full_matrices=False)
        Gk = Gh.conj().T
        X = Gk @ Fk.conj().T @ Om_p @ S_list[k] @ Om_p @ Fk @ Gk.conj().T
        Qt[k] = herm(Lm @ X @ Lm)

    r_mac = mac_rates(Ht, S_list)
    r_bc = bc_rates(Ht, Qt)
    if np.max(np.abs(r_mac - r_bc)) > check_tol:
        raise DomainError(
            "covariance transformation failed to preserve per-user rates: "
            f"uplink {r_mac}, downlink {r_bc}"
        )
    if W is not None:
        return [herm(W @ Q @ W) for Q in Qt]
    return Qt


def _combined(instance, lam, P, Gamma):
    """A(lambda), Q(lambda) for the single combined covariance constraint."""
    M = instance.H(0).shape[0]
    A = lam[0] * np.eye(M, dtype=complex)
    Qb = lam[0] * P
    for j in range(instance.J):
        Fj = instance.G(0, j)
        A = A + lam[1 + j] * (Fj.conj().T @ Fj)
        Qb += lam[1 + j] * Gamma[j]
    return herm(A), float(Qb)


def F_eval(instance: NetworkInstance, lam, P, Gamma=(), gap_tol=1e-6,
           warm=None):
    """Value of the single-constraint BC problem at multipliers lambda.

    Solves the dual MAC (noise A(lambda), sum power Q(lambda)) by whitening
    and returns (value, BC covariances, dual-MAC covariances).
    """
    lam = np.asarray(lam, dtype=float)
    A, Qb = _combined(instance, lam, P, Gamma)
    W = inv_sqrt_psd(A)
    Ht = [W @ instance.H(k) for k in range(instance.K)]
    _dual, S, primal = solve_sum_power_mac(Ht, instance.mu, Qb, warm=warm)
    Qt = mac_to_bc(Ht, S)
    Qbc = [herm(W @ Q @ W) for Q in Qt]
    return primal, Qbc, S


def solve_p3(instance: NetworkInstance, P, Gamma=(), tol=DEFAULT_TOL) -> SolveReport:
    """BC weighted sum-rate maximization under one PTPC and J PIPCs via
    minimization of the combined-constraint value F over lambda."""
    if instance.role is not Role.BC:
        raise DomainError("solve_p3 expects a BC instance")
    K, J = instance.K, instance.J
    Gamma = [float(g) for g in Gamma]
    if len(Gamma) != J:
        raise DomainError("need one PIPC per PU")
    F_list = [instance.G(0, j) for j in range(J)]
    budgets = np.array([float(P)] + Gamma)
    state = {"best_rate": 0.0, "best_Q": None, "warm": None}

    def usages(Q_list):
        tot = sum(Q_list)
        u = [float(np.trace(tot).real)]
        for Fj in F_list:
            u.append(interference_power(Fj, tot))
        return np.array(u)

    def consider(Q_list):
        u = usages(Q_list)
        c = min((budgets[i] / u[i] for i in range(len(budgets))
                 if u[i] > budgets[i]), default=1.0)
        Qf = [min(c, 1.0) * Q for Q in Q_list]
        r = wsr_bc(Qf, instance)
        if state["best_Q"] is None or r >= state["best_rate"]:
            state["best_rate"], state["best_Q"] = r, Qf

    def oracle(lam):
        val, Qbc, S = F_eval(instance, lam, P, Gamma, warm=state["warm"])
        state["warm"] = S
        consider(Qbc)
        return val, budgets - usages(Qbc), None

    def gap_oracle(best_F, _):
        return best_F - state["best_rate"]

    pos = budgets[budgets > 0]
    radius = 10.0 * max(1.0, 1.0 / float(pos.min())) if pos.size else 10.0
    best_F, best_lam, _, info = minimize_nonneg(
        oracle, 1 + J, radius=radius, tol=tol, max_iter=MAX_ITER,
        gap_oracle=gap_oracle,
    )

    Q_list = state["best_Q"]
    u = usages(Q_list)
    usage = {"ptpc": u[0]}
    bgt = {"ptpc": float(P)}
    mult = {"ptpc": float(best_lam[0])}
    for j in range(J):
        usage[f"pipc{j}"] = u[1 + j]
        bgt[f"pipc{j}"] = Gamma[j]
        mult[f"pipc{j}"] = float(best_lam[1 + j])
    return SolveReport(
        objective=state["best_rate"], covariances=Q_list, usage=usage,
        budgets=bgt, multipliers=mult, gap=best_F - state["best_rate"],
        iterations=info["iterations"], converged=info["converged"],
        trace=info["trace"], extras={"min_F": best_F},
    )


# ---------------------------------------------------------------------------
# MISO-BC SINR balancing
# ---------------------------------------------------------------------------

@dataclass
class BalanceResult:
    """Outcome of the max-min SINR beamforming problem."""

    alpha: float
    beamformers: list
    sinrs: np.ndarray
    usage: dict
    budgets: dict
    iterations: int
    extras: dict = field(default_factory=dict)


def _uplink_fixed_point(ht, alpha, q0=None, max_iter=10_000, tol=1e-11,
                        q_cap=1e9):
    """Fixed point of q_k = alpha / (ht_k^H (I + sum_{i!=k} q_i ht_i ht_i^H)^{-1} ht_k).

    Returns the power vector, or None if the iteration diverges (the SINR
    target is unachievable even with unbounded power).
    """
    H = np.stack([np.asarray(h, dtype=complex).ravel() for h in ht])
    q, status = uplink_fixed_point(H, alpha, q0=q0, max_iter=max_iter,
                                   tol=tol, q_cap=q_cap)
    return None if status == 1 else q


def _downlink_beamformers(ht, q, alpha):
    """MMSE uplink beams + downlink power reallocation achieving SINR alpha
    for every user in the whitened downlink."""
    K = len(ht)
    M = ht[0].size
    u = []
    for k in range(K):
        B = np.eye(M, dtype=complex)
        for i in range(K):
            if i != k:
                B += q[i] * np.outer(ht[i], ht[i].conj())
        uk = np.linalg.solve(B, ht[k])
        u.append(uk / np.linalg.norm(uk))
    a = np.array([[abs(np.vdot(u[i], ht[k])) ** 2 for i in range(K)]
                  for k in range(K)])  # a[k, i]: beam i at user k
    Mmat = np.diag(np.diag(a) / alpha) - (a - np.diag(np.diag(a)))
    d = np.linalg.solve(Mmat, np.ones(K))
    return u, d


def check_balance_feasible(h_list, F_list, P, Gamma, alpha, tol=1e-6,
                           max_iter=300):
    """Decide whether downlink beamformers exist with SINR_k >= alpha for
    all SUs under the PTPC and all PIPCs.

    Combines the constraints with simplex multipliers (ellipsoid outer
    loop); each candidate runs the dual-uplink fixed point under the
    combined constraint.  On success the returned beamformers are verified
    directly.  Returns (feasible, beamformers_or_None, info).
    """
    K = len(h_list)
    J = len(F_list)
    h_list = [np.asarray(h, dtype=complex).ravel() for h in h_list]
    M = h_list[0].size
    if alpha <= 0:
        return True, [np.zeros(M, dtype=complex) for _ in range(K)], {}

    warm = {"q": None}

    def evaluate(lam):
        A = lam[0] * np.eye(M, dtype=complex)
        Qb = lam[0] * P
        for j in range(J):
            A = A + lam[1 + j] * (F_list[j].conj().T @ F_list[j])
            Qb += lam[1 + j] * Gamma[j]
        W = inv_sqrt_psd(herm(A))
        ht = [W @ h for h in h_list]
        q = _uplink_fixed_point(ht, alpha, q0=warm["q"])
        if q is None:
            return None
        warm["q"] = q
        phi = Qb - float(q.sum())
        u, d = _downlink_beamformers(ht, q, alpha)
        V = [np.sqrt(max(dk, 0.0)) * (W @ uk) for dk, uk in zip(d, u)]
        power = sum(float(np.linalg.norm(v) ** 2) for v in V)
        leaks = [sum(float(np.linalg.norm(Fj @ v) ** 2) for v in V)
                 for Fj in F_list]
        return phi, V, power, leaks

    def verify(V, power, leaks):
        if power > P * (1 + tol):
            return False
        for j in range(J):
            if leaks[j] > Gamma[j] * (1 + tol):
                return False
        sinrs = direct_sinrs(h_list, V)
        return bool(np.min(sinrs) >= alpha * (1 - 10 * tol))

    if J == 0:
        out = evaluate(np.array([1.0]))
        if out is None:
            return False, None, {"certificate": "uplink divergence"}
        phi, V, power, leaks = out
        if phi >= 0 and verify(V, power, leaks):
            return True, V, {"phi": phi}
        return False, None, {"phi": phi}

    ell = Ellipsoid(np.full(J, 1.0 / (J + 1)), 2.0)
    best_phi = np.inf
    for it in range(max_iter):
        x = ell.center.copy()
        if np.any(x < 0):
            g = np.zeros(J)
            g[int(np.argmin(x))] = -1.0
            ell.cut(g)
            continue
        if x.sum() > 1.0 - 1e-9:
            ell.cut(np.ones(J))
            continue
        lam = np.concatenate([[1.0 - x.sum()], x])
        out = evaluate(lam)
        if out is None:
            return False, None, {"certificate": "uplink divergence",
                                 "lambda": lam}
        phi, V, power, leaks = out
        if phi < -1e-9 * max(1.0, P):
            return False, None, {"certificate": "combined budget exceeded",
                                 "lambda": lam, "phi": phi}
        best_phi = min(best_phi, phi)
        if verify(V, power, leaks):
            return True, V, {"phi": phi, "iterations": it + 1}
        # subgradient of phi over the simplex coordinates
        g = np.array([(Gamma[j] - leaks[j]) - (P - power) for j in range(J)])
        if np.linalg.norm(g) < 1e-15 or ell.max_extent() < 1e-10:
            break
        ell.cut(g / np.linalg.norm(g))
    return False, None, {"min_phi": best_phi, "exhausted": True}


def direct_sinrs(h_list, V):
    """Downlink SINRs of beamformers V at single-antenna users (unit noise)."""
    K = len(h_list)
    out = np.empty(K)
    for k in range(K):
        h = np.asarray(h_list[k]).ravel()
        sig = abs(np.vdot(h, V[k])) ** 2
        intf = sum(abs(np.vdot(h, V[i])) ** 2 for i in range(K) if i != k)
        out[k] = sig / (1.0 + intf)
    return out


def solve_p4(instance: NetworkInstance, P, Gamma=(), tol=DEFAULT_TOL) -> BalanceResult:
    """MISO-BC SINR balancing: maximize the common SINR alpha by bisection
    over the dual-uplink feasibility oracle."""
    if instance.role is not Role.BC:
        raise DomainError("solve_p4 expects a BC instance")
    K, J = instance.K, instance.J
    for k in range(K):
        if instance.H(k).shape[1] != 1:
            raise DomainError("SINR balancing requires single-antenna SUs")
    h_list = [instance.H(k).ravel() for k in range(K)]
    F_list = [instance.G(0, j) for j in range(J)]
    Gamma = [float(g) for g in Gamma]
    if len(Gamma) != J:
        raise DomainError("need one PIPC per PU")

    lo, hi = 0.0, max(P * float(np.linalg.norm(h)) ** 2 for h in h_list)
    V_best = [np.zeros(h_list[0].size, dtype=complex) for _ in range(K)]
    iters = 0
    while hi - lo > tol * max(1.0, hi) and iters < 80:
        mid = 0.5 * (lo + hi)
        ok, V, _info = check_balance_feasible(h_list, F_list, P, Gamma, mid,
                                              tol=tol)
        if ok:
            lo, V_best = mid, V
        else:
            hi = mid
        iters += 1

    sinrs = direct_sinrs(h_list, V_best)
    usage = {"ptpc": sum(float(np.linalg.norm(v) ** 2) for v in V_best)}
    bgt = {"ptpc": float(P)}
    for j in range(J):
        usage[f"pipc{j}"] = sum(float(np.linalg.norm(F_list[j] @ v) ** 2)
                                for v in V_best)
        bgt[f"pipc{j}"] = Gamma[j]
    return BalanceResult(alpha=lo, beamformers=V_best, sinrs=sinrs,
                         usage=usage, budgets=bgt, iterations=iters)
