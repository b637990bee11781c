"""CR MIMO-MAC weighted sum-rate maximization.

The dual of the per-user PTPC + joint PIPC problem is minimized by the
ellipsoid method; the inner (penalized, unconstrained except PSD)
maximization runs cyclic block-coordinate ascent with projected-gradient
steps per user.  The sum-power variant used by the BC-MAC duality lives
here too.
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
    check_psd,
    herm,
    interference_power,
    inv_sqrt_psd,
    psd_project,
)

DEFAULT_TOL = 1e-5
MAX_ITER = 500
GRAD_TOL = 1e-7
MAX_SWEEPS = 3000
T_RIDGE = 1e-12


def _weight_diffs(mu):
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0) or np.any(np.diff(mu) > 1e-12):
        raise DomainError("rate weights must be nonnegative and nonincreasing")
    return np.append(mu[:-1] - mu[1:], mu[-1])


def wsr_mac(S_list, H_list, mu):
    """Weighted sum-rate of the MAC with SIC in reverse user order.

    Evaluates the telescoped form
    sum_m (mu_m - mu_{m+1}) log2|I + sum_{i<=m} H_i S_i H_i^H|.
    """
    w = _weight_diffs(mu)
    K = len(H_list)
    M = H_list[0].shape[0]
    A = np.eye(M, dtype=complex)
    total = 0.0
    for m in range(K):
        S = check_psd(S_list[m], what=f"S[{m}]")
        A = A + H_list[m] @ S @ H_list[m].conj().T
        if w[m] > 0:
            sign, logdet = np.linalg.slogdet(herm(A))
            total += w[m] * logdet / LN2
    return float(total)


def mac_inner_maximize(H_list, wdiff, T_list, S0=None, grad_tol=GRAD_TOL,
                       max_sweeps=MAX_SWEEPS):
    """Maximize sum_m w_m log2|I + sum_{i<=m} H_i S_i H_i^H| - sum Tr(T_k S_k).

    Cyclic block-coordinate projected-gradient ascent over the users,
    backtracking from an adaptively grown step.  Returns (S_list, value).
    """
    K = len(H_list)
    M = H_list[0].shape[0]
    Ns = [H.shape[1] for H in H_list]
    S = [np.zeros((n, n), dtype=complex) for n in Ns] if S0 is None else [
        s.copy() for s in S0
    ]
    steps = [1.0] * K

    def cum_mats(S):
        A = [None] * K
        acc = np.eye(M, dtype=complex)
        for m in range(K):
            acc = acc + H_list[m] @ S[m] @ H_list[m].conj().T
            A[m] = acc
        return A

    def value(S):
        A = np.eye(M, dtype=complex)
        total = 0.0
        for m in range(K):
            A = A + H_list[m] @ S[m] @ H_list[m].conj().T
            if wdiff[m] != 0:
                total += wdiff[m] * np.linalg.slogdet(herm(A))[1] / LN2
        for k in range(K):
            total -= np.trace(T_list[k] @ S[k]).real
        return float(total)

    def grad_block(k, A):
        g = -T_list[k].astype(complex)
        Hk = H_list[k]
        for m in range(k, K):
            if wdiff[m] != 0:
                Ainv = np.linalg.inv(herm(A[m]))
                g = g + (wdiff[m] / LN2) * (Hk.conj().T @ Ainv @ Hk)
        return herm(g)

    f = value(S)
    for _sweep in range(max_sweeps):
        max_map = 0.0
        for k in range(K):
            A = cum_mats(S)
            g = grad_block(k, A)
            gm = S[k] - psd_project(S[k] + g)
            max_map = max(max_map, float(np.linalg.norm(gm)))
            s = steps[k]
            improved = False
            while s > 1e-18:
                cand = psd_project(S[k] + s * g)
                delta = cand - S[k]
                lin = np.trace(g @ delta).real
                if lin <= 0:
                    break
                old = S[k]
                S[k] = cand
                f_new = value(S)
                if f_new >= f + 1e-4 * lin:
                    f = f_new
                    steps[k] = min(s * 2.0, 1e12)
                    improved = True
                    break
                S[k] = old
                s *= 0.5
            if not improved:
                steps[k] = max(steps[k] * 0.5, 1e-16)
        if max_map <= grad_tol:
            break
    return S, f


def _pg_single(B_list, w_list, T, S0=None, grad_tol=GRAD_TOL, max_iter=2000):
    """Maximize sum_m w_m log2|I + B_m S B_m^H| - Tr(T S) over S PSD."""
    N = B_list[0].shape[1]
    S = np.zeros((N, N), dtype=complex) if S0 is None else S0.copy()

    def val(S):
        total = -np.trace(T @ S).real
        for B, w in zip(B_list, w_list):
            if w != 0:
                M = np.eye(B.shape[0], dtype=complex) + B @ S @ B.conj().T
                total += w * np.linalg.slogdet(herm(M))[1] / LN2
        return float(total)

    def grad(S):
        g = -T.astype(complex)
        for B, w in zip(B_list, w_list):
            if w != 0:
                M = np.eye(B.shape[0], dtype=complex) + B @ S @ B.conj().T
                g = g + (w / LN2) * (B.conj().T @ np.linalg.inv(herm(M)) @ B)
        return herm(g)

    f = val(S)
    step = 1.0
    for _ in range(max_iter):
        g = grad(S)
        if np.linalg.norm(S - psd_project(S + g)) <= grad_tol:
            break
        s = step
        moved = False
        while s > 1e-18:
            cand = psd_project(S + s * g)
            lin = np.trace(g @ (cand - S)).real
            if lin <= 0:
                break
            f_new = val(cand)
            if f_new >= f + 1e-4 * lin:
                S, f = cand, f_new
                step = min(s * 2.0, 1e12)
                moved = True
                break
            s *= 0.5
        if not moved:
            break
    return S, f


def _refine_user(B_list, w_list, GHG_list, budgets, S0, tol):
    """Exactly solve one user's covariance subproblem (others held fixed):
    max sum_m w_m log2|I + B_m S B_m^H| s.t. Tr(S) <= budgets[0] and
    Tr(GHG_i S) <= budgets[i]."""
    N = B_list[0].shape[1]
    mats = [np.eye(N, dtype=complex)] + list(GHG_list)
    b = np.asarray(budgets, dtype=float)
    state = {"best": (-np.inf, S0)}

    def consider(S):
        use = np.array([np.trace(M @ S).real for M in mats])
        c = min((b[i] / use[i] for i in range(len(b)) if use[i] > b[i]),
                default=1.0)
        Sf = min(c, 1.0) * S
        v = sum(w * np.linalg.slogdet(
            herm(np.eye(B.shape[0], dtype=complex) + B @ Sf @ B.conj().T))[1] / LN2
            for B, w in zip(B_list, w_list))
        if v > state["best"][0]:
            state["best"] = (v, Sf)
        return v

    consider(S0)

    def oracle(eta):
        T = herm(sum(e * M for e, M in zip(eta, mats))
                 + T_RIDGE * np.eye(N))
        S, v = _pg_single(B_list, w_list, T, S0=state["best"][1])
        use = np.array([np.trace(M @ S).real for M in mats])
        consider(S)
        return v + float(eta @ b), b - use, None

    def gap_oracle(best_dual, _):
        return best_dual - state["best"][0]

    pos = b[b > 0]
    radius = 10.0 * max(1.0, 1.0 / float(pos.min())) if pos.size else 10.0
    minimize_nonneg(oracle, len(b), radius=radius, tol=tol, max_iter=200,
                    gap_oracle=gap_oracle)
    return state["best"][1]


def solve_p2(instance: NetworkInstance, P, Gamma=(), tol=DEFAULT_TOL) -> SolveReport:
    """Weighted sum-rate maximization for the CR MIMO-MAC under per-user
    PTPCs and joint PIPCs, via the Lagrange dual/ellipsoid method."""
    if instance.role is not Role.MAC:
        raise DomainError("solve_p2 expects a MAC instance")
    K, J = instance.K, instance.J
    H = [instance.H(k) for k in range(K)]
    Gkj = [[instance.G(k, j) for j in range(J)] for k in range(K)]
    P = [float(p) for p in np.atleast_1d(P)]
    Gamma = [float(g) for g in Gamma]
    if len(P) != K or len(Gamma) != J:
        raise DomainError("need one PTPC per user and one PIPC per PU")
    w = _weight_diffs(instance.mu)

    active = [j for j in range(J) if np.isfinite(Gamma[j]) and Gamma[j] > 0]
    # zero-budget PIPCs: restrict every user to the null space of its channel
    Q_bases = []
    for k in range(K):
        rows = [Gkj[k][j] for j in range(J) if Gamma[j] <= 0]
        N = H[k].shape[1]
        if rows:
            Z = np.vstack(rows)
            _, sv, Vh = np.linalg.svd(Z)
            rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if sv.size else 0.0)))
            Q_bases.append(Vh.conj().T[:, rank:])
        else:
            Q_bases.append(np.eye(N, dtype=complex))
    Hr = [H[k] @ Q_bases[k] for k in range(K)]
    Gr = [[Gkj[k][j] @ Q_bases[k] for j in active] for k in range(K)]
    GHG = [[G.conj().T @ G for G in row] for row in Gr]

    budgets = np.array(P + [Gamma[j] for j in active])
    n = K + len(active)
    state = {"best_rate": 0.0,
             "best_S": [np.zeros((Hr[k].shape[1], Hr[k].shape[1]), complex)
                        for k in range(K)],
             "warm": None, "history": []}

    def usages(S):
        u = [float(np.trace(S[k]).real) for k in range(K)]
        for idx, _j in enumerate(active):
            u.append(sum(interference_power(Gr[k][idx], S[k]) for k in range(K)))
        return np.array(u)

    def consider(S):
        # feasibility scaling: per-user for PTPCs, then common for PIPCs
        u = usages(S)
        Sf = [S[k] * min(1.0, P[k] / u[k]) if u[k] > P[k] else S[k].copy()
              for k in range(K)]
        uf = usages(Sf)
        c = 1.0
        for idx in range(len(active)):
            if uf[K + idx] > budgets[K + idx]:
                c = min(c, budgets[K + idx] / uf[K + idx])
        Sf = [c * s for s in Sf]
        r = wsr_mac(Sf, Hr, instance.mu)
        if r >= state["best_rate"]:
            state["best_rate"], state["best_S"] = r, Sf
        return r

    def oracle(eta):
        T = []
        for k in range(K):
            dim = Hr[k].shape[1]
            Tk = (eta[k] + T_RIDGE) * np.eye(dim, dtype=complex)
            for idx in range(len(active)):
                Tk = Tk + eta[K + idx] * GHG[k][idx]
            T.append(herm(Tk))
        S, inner_val = mac_inner_maximize(Hr, w, T, S0=state["warm"])
        state["warm"] = [s.copy() for s in S]
        u = usages(S)
        dual = inner_val + float(eta @ budgets)
        state["history"].append([s.copy() for s in S])
        consider(S)
        hist = state["history"]
        if len(hist) > 1:
            avg = [sum(Sh[k] for Sh in hist) / len(hist) for k in range(K)]
            consider(avg)
        return dual, budgets - u, None

    def gap_oracle(best_dual, _):
        return best_dual - state["best_rate"]

    radius = 10.0 * max(1.0, 1.0 / float(budgets.min()))
    best_dual, best_eta, _, info = minimize_nonneg(
        oracle, n, radius=radius, tol=tol, max_iter=MAX_ITER, gap_oracle=gap_oracle
    )

    # the inner maximizer can be non-unique (tied weights), in which case no
    # single iterate is primal-optimal; tail averages of the inner solutions
    # recover a maximizer by concavity
    hist = state["history"]
    for frac in (0.05, 0.1, 0.25, 0.5, 1.0):
        tail = hist[int(len(hist) * (1.0 - frac)):]
        if not tail:
            continue
        avg = [sum(S[k] for S in tail) / len(tail) for k in range(K)]
        consider(avg)

    # if the gap is still open, polish by cyclic exact per-user maximization
    # of the true constrained objective
    M_rx = Hr[0].shape[0] if K else 0
    for _cycle in range(8):
        if best_dual - state["best_rate"] <= tol:
            break
        S_cur = [s.copy() for s in state["best_S"]]
        before = state["best_rate"]
        for k in range(K):
            B_list, w_list = [], []
            for m in range(k, K):
                if w[m] == 0:
                    continue
                C = np.eye(M_rx, dtype=complex)
                for i in range(m + 1):
                    if i != k:
                        C = C + Hr[i] @ S_cur[i] @ Hr[i].conj().T
                B_list.append(inv_sqrt_psd(herm(C)) @ Hr[k])
                w_list.append(w[m])
            if not B_list:
                S_cur[k] = np.zeros_like(S_cur[k])
                continue
            bud = [P[k]]
            for idx in range(len(active)):
                others = sum(np.trace(GHG[i][idx] @ S_cur[i]).real
                             for i in range(K) if i != k)
                bud.append(max(budgets[K + idx] - others, 0.0))
            S_cur[k] = _refine_user(B_list, w_list, GHG[k], bud, S_cur[k], tol)
        consider(S_cur)
        if state["best_rate"] - before < 0.1 * tol:
            break

    S_full = [Q_bases[k] @ state["best_S"][k] @ Q_bases[k].conj().T for k in range(K)]
    usage, bgt, mult = {}, {}, {}
    for k in range(K):
        usage[f"ptpc{k}"] = float(np.trace(S_full[k]).real)
        bgt[f"ptpc{k}"] = P[k]
        mult[f"ptpc{k}"] = float(best_eta[k])
    for j in range(J):
        usage[f"pipc{j}"] = sum(
            interference_power(Gkj[k][j], S_full[k]) for k in range(K)
        )
        bgt[f"pipc{j}"] = Gamma[j]
        mult[f"pipc{j}"] = float(best_eta[K + active.index(j)]) if j in active else 0.0
    return SolveReport(
        objective=wsr_mac(S_full, H, instance.mu), covariances=S_full,
        usage=usage, budgets=bgt, multipliers=mult,
        gap=best_dual - state["best_rate"], iterations=info["iterations"],
        converged=info["converged"], trace=info["trace"],
    )


def solve_sum_power_mac(H_list, mu, Q, gap_tol=1e-6, warm=None):
    """MAC WSRMax under a single sum-power constraint sum_k Tr(S_k) <= Q.

    The 1-D dual is minimized by bisection on the multiplier (the
    subgradient Q - sum Tr(S*) is nondecreasing); stops once the gap to
    the best feasibility-scaled primal closes.  Returns
    (dual_value, S_list, primal_value).
    """
    if Q <= 0:
        S = [np.zeros((h.shape[1], h.shape[1]), complex) for h in H_list]
        return 0.0, S, 0.0
    w = _weight_diffs(mu)
    best = {"dual": np.inf, "primal": -np.inf, "S": None}

    def solve_at(eta, warm_S):
        T = [(eta + T_RIDGE) * np.eye(h.shape[1], dtype=complex) for h in H_list]
        S, val = mac_inner_maximize(H_list, w, T, S0=warm_S)
        tr = sum(float(np.trace(s).real) for s in S)
        best["dual"] = min(best["dual"], val + eta * Q)
        Sf = [s * (Q / tr) for s in S] if tr > Q else S
        p = wsr_mac(Sf, H_list, mu)
        if p > best["primal"]:
            best["primal"], best["S"] = p, [s.copy() for s in Sf]
        return S, tr

    hi = 1.0
    S_w = warm
    for _ in range(80):
        S_w, tr = solve_at(hi, S_w)
        if tr <= Q:
            break
        hi *= 2.0
    lo = hi / 2.0
    S_w, tr_lo = solve_at(lo, S_w)
    while tr_lo <= Q and lo > 1e-14:
        hi = lo
        lo /= 2.0
        S_w, tr_lo = solve_at(lo, S_w)
    for _ in range(80):
        if best["dual"] - best["primal"] <= gap_tol:
            break
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        S_w, tr_m = solve_at(mid, S_w)
        if tr_m > Q:
            lo = mid
        else:
            hi = mid
    return float(best["dual"]), best["S"], float(best["primal"])
