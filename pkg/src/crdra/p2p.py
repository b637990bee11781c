"""Point-to-point CR MIMO capacity under transmit + interference limits.

Solves the covariance problem

    max log2|I + H S H^H|   s.t.  Tr(S) <= P,  Tr(G_j S G_j^H) <= Gamma_j

exactly through its Lagrange dual (ellipsoid over the multipliers, closed
form water-filling inner solution), plus the partial channel projection
heuristic family that interpolates between plain water-filling (b = 0)
and zero-forcing (b = number of PU receive dimensions).
"""

from __future__ import annotations

import numpy as np

from .ellipsoid import minimize_nonneg
from .model import (
    LN2,
    DomainError,
    NetworkInstance,
    Role,
    SolveReport,
    herm,
    interference_power,
    inv_sqrt_psd,
    rate_p2p,
)

DEFAULT_TOL = 1e-5
MAX_ITER = 500
T_RIDGE = 1e-12


def inner_covariance(H, T):
    """Maximize log2|I + H S H^H| - Tr(T S) over PSD S, in closed form.

    Whitening by T^{-1/2} reduces the problem to water-filling on the
    singular values of H T^{-1/2}.  Returns (S, value_bits).
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    Tm = herm(np.atleast_2d(np.asarray(T, dtype=complex)))
    wmin = float(np.linalg.eigvalsh(Tm).min())
    if wmin <= 0:
        Tm = Tm + (T_RIDGE - min(wmin, 0.0)) * np.eye(Tm.shape[0])
    Tinv_half = inv_sqrt_psd(Tm)
    Hw = H @ Tinv_half
    U, theta, Vh = np.linalg.svd(Hw, full_matrices=False)
    with np.errstate(divide="ignore"):
        sigma = np.where(theta > 0, 1.0 / LN2 - 1.0 / np.maximum(theta, 1e-300) ** 2, 0.0)
    sigma = np.maximum(sigma, 0.0)
    V = Vh.conj().T
    S_hat = (V * sigma) @ V.conj().T
    S = herm(Tinv_half @ S_hat @ Tinv_half)
    value = float(np.sum(np.log2(1.0 + theta**2 * sigma)) - np.sum(sigma))
    return S, value


def solve_p1(instance: NetworkInstance, P, Gamma=(), tol=DEFAULT_TOL) -> SolveReport:
    """Optimal covariance for the CR point-to-point channel of ``instance``."""
    if instance.role is not Role.P2P or instance.K != 1:
        raise DomainError("solve_p1 expects a single-link P2P instance")
    Gs = [instance.G(0, j) for j in range(instance.J)]
    return solve_p1_channels(instance.H(0), Gs, P, Gamma, tol=tol)


def solve_p1_channels(H, Gs, P, Gamma, tol=DEFAULT_TOL) -> SolveReport:
    """Dual/ellipsoid solver on raw channel matrices (reused by IC/DRA)."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    Gs = [np.atleast_2d(np.asarray(G, dtype=complex)) for G in Gs]
    Gamma = [float(g) for g in Gamma]
    if len(Gamma) != len(Gs):
        raise DomainError("one Gamma per PU channel required")
    if P <= 0:
        raise DomainError("P must be positive")
    N = H.shape[1]

    # Zero-budget PIPCs force zero-forcing: restrict S to the null space of
    # the stacked zero-budget channels, then the remaining problem has a
    # Slater point.
    zero_rows = [Gs[j] for j in range(len(Gs)) if Gamma[j] <= 0]
    Q = np.eye(N)
    if zero_rows:
        Z = np.vstack(zero_rows)
        _, sv, Vh = np.linalg.svd(Z)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if sv.size else 0.0)))
        Q = Vh.conj().T[:, rank:]
        if Q.shape[1] == 0:
            S = np.zeros((N, N), dtype=complex)
            return _report(H, Gs, Gamma, P, S, np.zeros(1 + len(Gs)), 0.0, 0, True, [])

    active = [j for j in range(len(Gs)) if np.isfinite(Gamma[j]) and Gamma[j] > 0]
    Hr = H @ Q
    Gr = [Gs[j] @ Q for j in active]
    budgets = np.array([P] + [Gamma[j] for j in active])
    GHG = [G.conj().T @ G for G in Gr]
    n = 1 + len(active)

    state = {
        "best_rate": 0.0,
        "best_S": np.zeros((Hr.shape[1], Hr.shape[1]), complex),
        "pre_rate": 0.0,
    }

    def oracle(eta):
        T = eta[0] * np.eye(Hr.shape[1], dtype=complex)
        for w, GG in zip(eta[1:], GHG):
            T = T + w * GG
        S, inner_val = inner_covariance(Hr, T)
        usage = _usages(Hr, Gr, S)
        dual = inner_val + float(eta @ budgets)
        subgrad = budgets - usage
        # primal recovery: largest feasible scaling of S
        scale = 1.0
        for u, bgt in zip(usage, budgets):
            if u > bgt:
                scale = min(scale, bgt / u)
        Sf = scale * S
        r = rate_p2p(Hr, Sf)
        if r >= state["best_rate"]:
            state["best_rate"], state["best_S"] = r, Sf
            state["pre_rate"] = rate_p2p(Hr, S)
        return dual, subgrad, (S, usage)

    def gap_oracle(best_dual, _payload):
        return best_dual - state["best_rate"]

    radius = 10.0 * max(1.0, 1.0 / float(budgets.min()))
    best_dual, best_eta, _, info = minimize_nonneg(
        oracle, n, radius=radius, tol=tol, max_iter=MAX_ITER, gap_oracle=gap_oracle
    )

    S = Q @ state["best_S"] @ Q.conj().T
    eta_full = np.zeros(1 + len(Gs))
    eta_full[0] = best_eta[0]
    for idx, j in enumerate(active):
        eta_full[1 + j] = best_eta[1 + idx]
    gap = best_dual - state["best_rate"]
    return _report(H, Gs, Gamma, P, S, eta_full, gap, info["iterations"],
                   info["converged"], info["trace"],
                   pre_scaling=state["pre_rate"])


def _usages(H, Gr, S):
    out = [float(np.trace(S).real)]
    for G in Gr:
        out.append(interference_power(G, S))
    return np.array(out)


def _report(H, Gs, Gamma, P, S, eta, gap, iters, converged, trace, pre_scaling=None):
    usage = {"ptpc": float(np.trace(S).real)}
    budgets = {"ptpc": float(P)}
    mult = {"ptpc": float(eta[0])}
    for j, G in enumerate(Gs):
        usage[f"pipc{j}"] = interference_power(G, S)
        budgets[f"pipc{j}"] = Gamma[j]
        mult[f"pipc{j}"] = float(eta[1 + j])
    return SolveReport(
        objective=rate_p2p(H, S), covariances=[S], usage=usage, budgets=budgets,
        multipliers=mult, gap=max(gap, 0.0) if gap > -1e-9 else gap,
        iterations=iters, converged=converged,
        pre_scaling_objective=pre_scaling, trace=list(trace),
    )


def solve_p1_miso(h, P, Gamma=(), Gs=(), tol=DEFAULT_TOL):
    """MISO special case: rank-1 beamforming is optimal.

    Returns (v, rate, report); v carries the dominant eigen-direction of
    the optimal covariance scaled so that v v^H reproduces it.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.shape[0] != 1:
        raise DomainError("solve_p1_miso expects a single receive antenna")
    report = solve_p1_channels(h, list(Gs), P, list(Gamma), tol=tol)
    S = report.covariances[0]
    w, V = np.linalg.eigh(herm(S))
    if w[-1] > 0 and (w.size < 2 or abs(w[-2]) <= 1e-6 * w[-1]):
        v = np.sqrt(w[-1]) * V[:, -1]
    else:
        raise DomainError(
            f"rank-1 extraction failed: top eigenvalues {w[-1]:.3e}, {w[-2]:.3e}"
        )
    return v, report.objective, report


def projection_basis(Gs, Gamma, b):
    """Top-b right singular directions of the Gamma-scaled stacked channels."""
    scaled = []
    for G, g in zip(Gs, Gamma):
        denom = g if np.isfinite(g) and g > 0 else max(g, 1e-12)
        if np.isinf(g):
            denom = np.inf
        scaled.append(G / denom if np.isfinite(denom) else G * 0.0)
    Gbar = np.vstack(scaled)
    _, _, Vh = np.linalg.svd(Gbar)
    return Vh.conj().T[:, :b]


def partial_projection(instance: NetworkInstance, P, Gamma, b, tol=DEFAULT_TOL) -> SolveReport:
    """Projection heuristic for the single-link problem: null the
    top-b scaled SU-to-PU directions, then
    water-fill the projected parallel channels under the J+1 linear
    constraints (solved by the same dual/ellipsoid machinery restricted
    to diagonal power variables)."""
    if instance.role is not Role.P2P or instance.K != 1:
        raise DomainError("partial_projection expects a P2P instance")
    H = instance.H(0)
    Gs = [instance.G(0, j) for j in range(instance.J)]
    Gamma = [float(g) for g in Gamma]
    N = H.shape[1]
    sumD = sum(G.shape[0] for G in Gs)
    if not 0 <= b <= min(N - 1, sumD):
        raise DomainError(f"b must lie in [0, {min(N - 1, sumD)}]")

    if b > 0:
        Vb = projection_basis(Gs, Gamma, b)
        Hperp = H @ (np.eye(N) - Vb @ Vb.conj().T)
    else:
        Hperp = H
    _, lam, Vh = np.linalg.svd(Hperp, full_matrices=False)
    V = Vh.conj().T
    lam2 = lam**2

    # per-channel interference coefficients ||G_j v_i||^2
    coeff = np.array([[float(np.linalg.norm(G @ V[:, i]) ** 2) for i in range(lam.size)]
                      for G in Gs]).reshape(len(Gs), lam.size)

    # channels blocked by zero budgets carry no power; dropped constraints:
    # zero budgets (now vacuous) and infinite budgets
    blocked = np.zeros(lam.size, dtype=bool)
    for j, g in enumerate(Gamma):
        if g <= 0:
            blocked |= coeff[j] > 1e-12
    usable = (~blocked) & (lam2 > 1e-14)
    active = [j for j, g in enumerate(Gamma) if np.isfinite(g) and g > 0]

    lam2u = lam2[usable]
    coeffu = coeff[np.ix_(active, np.where(usable)[0])]
    budgets = np.array([P] + [Gamma[j] for j in active])
    n = 1 + len(active)

    state = {"best_rate": 0.0, "best_sigma": np.zeros(lam2u.size)}

    def alloc(t):
        t = np.maximum(t, 1e-12)
        return np.maximum(1.0 / (t * LN2) - 1.0 / lam2u, 0.0)

    def oracle(eta):
        t = eta[0] + (eta[1:] @ coeffu if coeffu.size else np.zeros(lam2u.size))
        sigma = alloc(t)
        usage = np.concatenate(([sigma.sum()],
                                coeffu @ sigma if coeffu.size else []))
        dual = float(np.sum(np.log2(1.0 + lam2u * sigma)) - t @ sigma + eta @ budgets)
        scale = 1.0
        for u, bgt in zip(usage, budgets):
            if u > bgt:
                scale = min(scale, bgt / u)
        r = float(np.sum(np.log2(1.0 + lam2u * sigma * scale)))
        if r >= state["best_rate"]:
            state["best_rate"], state["best_sigma"] = r, sigma * scale
        return dual, budgets - usage, None

    def gap_oracle(best_dual, _):
        return best_dual - state["best_rate"]

    if lam2u.size:
        radius = 10.0 * max(1.0, 1.0 / float(budgets.min()))
        best_dual, best_eta, _, info = minimize_nonneg(
            oracle, n, radius=radius, tol=tol, max_iter=MAX_ITER, gap_oracle=gap_oracle
        )
        iters, converged = info["iterations"], info["converged"]
        gap = best_dual - state["best_rate"]
    else:
        best_eta = np.zeros(n)
        iters, converged, gap = 0, True, 0.0

    sigma_full = np.zeros(lam.size)
    sigma_full[usable] = state["best_sigma"]
    S = herm((V * sigma_full) @ V.conj().T)
    eta_full = np.zeros(1 + len(Gs))
    eta_full[0] = best_eta[0]
    for idx, j in enumerate(active):
        eta_full[1 + j] = best_eta[1 + idx]
    rep = _report(H, Gs, Gamma, P, S, eta_full, gap, iters, converged, [])
    rep.extras["b"] = b
    return rep
