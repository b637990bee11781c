"""Independent brute-force references for the solvers.

Everything here deliberately avoids the dual/ellipsoid code paths: plain
water-filling bisection, exhaustive grids over parameterized covariances
and beamformers, and closed forms for tiny cases.  Used by the test
suite and by the ``selftest`` CLI subcommand.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


def cofactor_det(A):
    """Determinant by recursive cofactor expansion (test oracle only)."""
    A = np.asarray(A)
    n = A.shape[0]
    if n == 1:
        return A[0, 0]
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(A, 0, axis=0), j, axis=1)
        total = total + (-1) ** j * A[0, j] * cofactor_det(minor)
    return total


def waterfill_rate(H, P):
    """Classic MIMO water-filling capacity under Tr(S) <= P."""
    s2 = np.linalg.svd(np.atleast_2d(H), compute_uv=False) ** 2
    s2 = s2[s2 > 1e-15]
    if s2.size == 0:
        return 0.0
    lo, hi = 0.0, P + float((1.0 / s2).max())
    for _ in range(200):
        w = 0.5 * (lo + hi)
        if np.maximum(w - 1.0 / s2, 0.0).sum() > P:
            hi = w
        else:
            lo = w
    p = np.maximum(0.5 * (lo + hi) - 1.0 / s2, 0.0)
    return float(np.sum(np.log2(1.0 + s2 * p)))


def _unit_pairs(n_angle, n_phase):
    theta = np.linspace(0.0, np.pi / 2, n_angle)
    phi = np.linspace(0.0, 2 * np.pi, n_phase, endpoint=False)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    u = np.stack(
        [np.cos(th).ravel() + 0j, (np.sin(th) * np.exp(1j * ph)).ravel()], axis=1
    )
    return u  # (n, 2)


def _p1_grid_pass(HH, GG, P, Gamma, thetas, phis, ts):
    """Evaluate the trace-split x angle x phase grid; return the best
    rate and its (t, theta, phi) parameters."""
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    u1 = np.stack(
        [np.cos(th).ravel() + 0j, (np.sin(th) * np.exp(1j * ph)).ravel()],
        axis=1)
    u2 = np.stack([-u1[:, 1].conj(), u1[:, 0].conj()], axis=1)
    P1 = np.einsum("ni,nj->nij", u1, u1.conj())
    P2 = np.einsum("ni,nj->nij", u2, u2.conj())
    cands = []
    for ti in ts:
        Sbar = ti * P1 + (1.0 - ti) * P2
        g_use = np.einsum("nij,ji->n", Sbar, GG).real
        tau = np.minimum(P, np.where(g_use > 1e-15, Gamma / np.maximum(g_use, 1e-300), np.inf))
        A = tau[:, None, None] * np.einsum("nij,jk->nik", Sbar, HH)
        det = (1.0 + A[:, 0, 0]) * (1.0 + A[:, 1, 1]) - A[:, 0, 1] * A[:, 1, 0]
        rates = np.log2(det.real)
        n = int(rates.argmax())
        cands.append((float(rates[n]), float(ti), float(th.ravel()[n]),
                      float(ph.ravel()[n])))
    cands.sort(reverse=True)
    return cands[0][0], cands


def p1_grid_rate(H, G, P, Gamma, n_split=72, n_angle=72, n_phase=56,
                 zooms=3, branches=5):
    """Grid maximum of the single-link problem for N=2 transmit
    antennas and one PIPC.

    Parameterizes S by trace split, eigenbasis angle, and phase; for each
    shape the trace is scaled to the tighter of the two budgets.  After
    the full-range pass the grid zooms onto the best few candidates to
    shrink the discretization error.
    """
    H = np.atleast_2d(H)
    G = np.atleast_2d(G)
    HH = H.conj().T @ H
    GG = G.conj().T @ G
    thetas = np.linspace(0.0, np.pi / 2, n_angle)
    phis = np.linspace(0.0, 2 * np.pi, n_phase, endpoint=False)
    ts = np.linspace(0.0, 1.0, n_split)
    best, cands = _p1_grid_pass(HH, GG, P, Gamma, thetas, phis, ts)
    for _, t0, th0, ph0 in cands[:branches]:
        spans = [np.pi / 2, 2 * np.pi, 1.0]
        for _ in range(zooms):
            spans = [s / 8.0 for s in spans]
            thetas = np.clip(np.linspace(th0 - spans[0], th0 + spans[0], 17),
                             0.0, np.pi / 2)
            phis = np.linspace(ph0 - spans[1], ph0 + spans[1], 17)
            ts = np.clip(np.linspace(t0 - spans[2], t0 + spans[2], 17),
                         0.0, 1.0)
            val, sub = _p1_grid_pass(HH, GG, P, Gamma, thetas, phis, ts)
            _, t0, th0, ph0 = sub[0]
            best = max(best, val)
    return best


def miso_grid_rate(h, G, P, Gamma, n_angle=700, n_phase=700):
    """Polar-grid maximum of the MISO single-link problem for N=2 and
    one PIPC."""
    h = np.asarray(h).ravel()
    G = np.atleast_2d(G)
    u = _unit_pairs(n_angle, n_phase)
    gain = np.abs(u @ h.conj()) ** 2
    leak = np.sum(np.abs(u @ G.conj().T) ** 2, axis=1)
    p = np.minimum(P, np.where(leak > 1e-15, Gamma / np.maximum(leak, 1e-300), np.inf))
    return float(np.log2(1.0 + p * gain).max())


def mac_scalar_grid(h, g, mu, Pmax, Gamma, n=20000):
    """Grid maximum of the multi-access weighted sum-rate for K=2
    scalar channels and one joint PIPC.

    Grids p1 only; for each p1 the objective is increasing in p2, so the
    optimal p2 is the tighter of the PTPC and the residual PIPC budget.
    """
    h = np.asarray(h, dtype=complex).ravel()
    g = np.asarray(g, dtype=complex).ravel()
    a = np.abs(h) ** 2
    c = np.abs(g) ** 2
    p1_hi = min(Pmax[0], Gamma / c[0] if c[0] > 1e-15 else np.inf)
    p1 = np.linspace(0.0, p1_hi, n)
    resid = np.maximum(Gamma - c[0] * p1, 0.0)
    p2 = np.minimum(Pmax[1], resid / c[1] if c[1] > 1e-15 else np.inf)
    w1, w2 = mu[0] - mu[1], mu[1]
    val = w1 * np.log2(1.0 + a[0] * p1) + w2 * np.log2(1.0 + a[0] * p1 + a[1] * p2)
    return float(val.max())


def bc_rank1_grid(h_list, F, P, Gamma, mu, n_dir=16, n_pow=40):
    """Grid maximum of the broadcast weighted sum-rate for K=2, M=2,
    single-antenna SUs, one PIPC.

    Rank-1 covariances suffice (dual-MAC covariances are scalars), so the
    grid runs over two beam directions and the power pair.
    """
    h1, h2 = (np.asarray(h).ravel() for h in h_list)
    F = np.atleast_2d(F)
    u = _unit_pairs(n_dir, n_dir)
    a1 = np.abs(u @ h1.conj()) ** 2  # |h1^H u|^2
    a2 = np.abs(u @ h2.conj()) ** 2
    f = np.sum(np.abs(u @ F.T) ** 2, axis=1)  # ||F u||^2
    w1, w2 = mu[0], mu[1]
    # user 2's power on its own grid; user 1's rate is increasing in p1, so
    # the optimal p1 for fixed directions/p2 is the tighter remaining budget
    p2 = np.linspace(0.0, P, n_pow)[None, :]
    resid_pow = P - p2  # (1, n_pow)
    best = -np.inf
    for i in range(u.shape[0]):  # direction of user 1
        a11, f1 = a1[i], f[i]
        resid_int = np.maximum(Gamma - f[:, None] * p2, 0.0)
        cap = resid_int / f1 if f1 > 1e-15 else np.inf
        p1 = np.minimum(resid_pow, cap)
        p1 = np.where((p1 >= 0) & (f[:, None] * p2 <= Gamma + 1e-12), p1,
                      -np.inf)
        r1 = np.log2(1.0 + a11 * np.maximum(p1, 0.0) + a1[:, None] * p2) - \
            np.log2(1.0 + a1[:, None] * p2)
        r2 = np.log2(1.0 + a2[:, None] * p2)
        val = np.where(p1 >= 0, w1 * r1 + w2 * r2, -np.inf).max()
        best = max(best, float(val))
    return best


def balance_grid_alpha(h_list, F, P, Gamma, n_dir=16, n_bis=40):
    """Grid maximum balanced SINR for K=2, M=2 MISO-BC with one PIPC."""
    h1, h2 = (np.asarray(h).ravel() for h in h_list)
    F = np.atleast_2d(F)
    u = _unit_pairs(n_dir, n_dir)
    nu = u.shape[0]
    a1 = np.abs(u @ h1.conj()) ** 2
    a2 = np.abs(u @ h2.conj()) ** 2
    f = np.sum(np.abs(u @ F.T) ** 2, axis=1)  # ||F u||^2
    # all direction pairs (i -> user 1, j -> user 2)
    a11 = a1[:, None] * np.ones((1, nu))
    a12 = np.ones((nu, 1)) * a1[None, :]
    a21 = a2[:, None] * np.ones((1, nu))
    a22 = np.ones((nu, 1)) * a2[None, :]
    f1 = f[:, None] * np.ones((1, nu))
    f2 = np.ones((nu, 1)) * f[None, :]

    def feasible(alpha):
        den = a11 * a22 - alpha**2 * a12 * a21
        ok = den > 1e-15
        d2 = np.where(ok, alpha * (a11 + alpha * a21) / np.where(ok, den, 1.0), np.inf)
        d1 = np.where(a11 > 1e-15, alpha * (1.0 + d2 * a12) / np.maximum(a11, 1e-300), np.inf)
        good = ok & (d1 >= 0) & (d2 >= 0)
        good &= d1 + d2 <= P * (1 + 1e-12)
        good &= d1 * f1 + d2 * f2 <= Gamma * (1 + 1e-12)
        return good.any()

    lo, hi = 0.0, P * max(float(np.abs(h1) @ np.abs(h1)), float(np.abs(h2) @ np.abs(h2)))
    for _ in range(n_bis):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def single_user_balance_alpha(h, f, P, Gamma):
    """Closed-form max |h^H v|^2 under ||v||^2 <= P, |f^T v|^2 <= Gamma.

    Optimal v lies in span{h, conj(f)}; align the leaking component to the
    budget.  ``f`` is the (single-antenna PU) channel row as a vector, so
    the leak is ||f v||^2 for the 1 x M channel matrix.
    """
    h = np.asarray(h, dtype=complex).ravel()
    f = np.asarray(f, dtype=complex).conj().ravel()  # |f^T v| = |conj(f)^H v|
    nf = np.linalg.norm(f)
    if nf < 1e-15:
        return P * float(np.linalg.norm(h) ** 2)
    e1 = f / nf
    h1 = complex(np.vdot(e1, h))  # e1^H h
    h_perp = h - h1 * e1
    h2 = float(np.linalg.norm(h_perp))
    # v = t e1-direction (phase aligned) + s perp-direction
    h_sq = abs(h1) ** 2 + h2**2
    mrt_leak = P * nf**2 * abs(h1) ** 2 / h_sq if h_sq > 0 else 0.0
    if mrt_leak <= Gamma:
        return P * h_sq
    t = np.sqrt(Gamma) / nf  # binding interference budget
    s = np.sqrt(max(P - t**2, 0.0))
    return float((abs(h1) * t + h2 * s) ** 2)


def ic_scalar_grid(gains, cross, e, mu, Pmax, split, n=50):
    """Grid maximum of the K=2 scalar IC weighted sum-rate under a split.

    gains = (g11, g22) direct power gains, cross = (g12, g21) with g12 the
    gain from TX1 at RX2, e = per-user PU power gains, split = per-user
    interference budgets.
    """
    cap1 = min(Pmax[0], split[0] / e[0] if e[0] > 1e-15 else np.inf)
    cap2 = min(Pmax[1], split[1] / e[1] if e[1] > 1e-15 else np.inf)
    p1 = np.linspace(0.0, cap1, n)[:, None]
    p2 = np.linspace(0.0, cap2, n)[None, :]
    r1 = np.log2(1.0 + gains[0] * p1 / (1.0 + cross[1] * p2))
    r2 = np.log2(1.0 + gains[1] * p2 / (1.0 + cross[0] * p1))
    return float((mu[0] * r1 + mu[1] * r2).max())


def ergodic_waterfill(gains, Pbar):
    """Scalar ergodic water-filling: max (1/L) sum log2(1+g p) under the
    average power budget; returns (rate, powers)."""
    g = np.asarray(gains, dtype=float)
    L = g.size
    pos = g > 1e-15
    if not pos.any():
        return 0.0, np.zeros(L)
    lo, hi = 0.0, L * Pbar + float((1.0 / g[pos]).max())
    for _ in range(200):
        w = 0.5 * (lo + hi)
        if np.maximum(w - 1.0 / g[pos], 0.0).sum() / L > Pbar:
            hi = w
        else:
            lo = w
    p = np.zeros(L)
    p[pos] = np.maximum(0.5 * (lo + hi) - 1.0 / g[pos], 0.0)
    return float(np.mean(np.log2(1.0 + g * p))), p


def mac_scalar_dual_grid(gains, mu, Pbar, n_mult=60, n_pow=120):
    """Nested-grid upper bound for the scalar fading-MAC DRA problem.

    Outer grid over the two average-power multipliers; inner exhaustive
    per-dimension power grid.  Returns the minimum dual value found.
    """
    g = np.asarray(gains, dtype=float)  # (L, 2)
    L = g.shape[0]
    w1, w2 = mu[0] - mu[1], mu[1]
    pmax = 4.0 * max(Pbar) + 4.0
    p1 = np.linspace(0.0, pmax, n_pow)[:, None]
    p2 = np.linspace(0.0, pmax, n_pow)[None, :]
    best = np.inf
    nus = np.linspace(0.05, 3.0, n_mult)
    for nu1 in nus:
        for nu2 in nus:
            tot = 0.0
            for l in range(L):
                val = (
                    w1 * np.log2(1.0 + g[l, 0] * p1)
                    + w2 * np.log2(1.0 + g[l, 0] * p1 + g[l, 1] * p2)
                    - nu1 * p1
                    - nu2 * p2
                )
                tot += float(val.max())
            dual = tot / L + nu1 * Pbar[0] + nu2 * Pbar[1]
            best = min(best, dual)
    return best
