"""Joint space-time-frequency dynamic resource allocation.

The average-power / average-interference problem over L dimensions is
solved by Lagrange dual decomposition: for fixed multipliers (nu, delta)
the Lagrangian separates into L per-dimension subproblems, and the outer
minimization runs the ellipsoid method.  Utilities: full MAC weighted
sum-rate per dimension, or the TDMA-constrained variant scheduling at
most one user per dimension.  The interference-diversity experiment and
the PU ergodic-capacity constraint evaluation live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ellipsoid import minimize_nonneg
from .kernels import scalar_best_user_alloc
from .mac import _weight_diffs, mac_inner_maximize, wsr_mac
from .model import (
    ConfigurationError,
    DomainError,
    FadingProcess,
    NetworkInstance,
    Role,
    SolveReport,
    generate_instance,
    herm,
    interference_power,
    rate_p2p,
)
from .p2p import inner_covariance

DEFAULT_TOL = 1e-5
MAX_ITER = 500
T_RIDGE = 1e-12


@dataclass(frozen=True)
class DualPair:
    """Multipliers of the average-power (nu) and average-interference
    (delta) constraints."""

    nu: tuple
    delta: tuple

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        if any(v < 0 for v in self.nu) or any(v < 0 for v in self.delta):
            raise DomainError("multipliers must be nonnegative")


@dataclass(frozen=True)
class FadingScenario:
    """L channel realizations sharing one topology, with average budgets."""

    instances: tuple
    Pbar: tuple
    Gammabar: tuple

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "Pbar", tuple(float(p) for p in self.Pbar))
        object.__setattr__(self, "Gammabar",
                           tuple(float(g) for g in self.Gammabar))
        if not self.instances:
            raise ConfigurationError("need at least one fading dimension")
        K, J = self.instances[0].K, self.instances[0].J
        if any(inst.K != K or inst.J != J for inst in self.instances):
            raise ConfigurationError("all dimensions must share the topology")
        if len(self.Pbar) != K or len(self.Gammabar) != J:
            raise ConfigurationError("one ATPC per user, one AIPC per PU")
        if any(p <= 0 for p in self.Pbar) or any(g <= 0 for g in self.Gammabar):
            raise ConfigurationError("average budgets must be positive")

    @property
    def L(self):
        return len(self.instances)

    @property
    def K(self):
        return self.instances[0].K

    @property
    def J(self):
        return self.instances[0].J


def make_scenario(K, J, L, fading: FadingProcess, Pbar, Gammabar, *, M=1,
                  N=None, D=None, mu=None) -> FadingScenario:
    """Draw a MAC fading scenario with L i.i.d. dimensions."""
    instances = tuple(
        generate_instance(Role.MAC, K, J, M=M, N=N, D=D, fading=fading,
                          dim_index=l, mu=mu)
        for l in range(L)
    )
    return FadingScenario(instances, tuple(np.atleast_1d(Pbar)),
                          tuple(np.atleast_1d(Gammabar)))


@dataclass(frozen=True)
class PuLinkModel:
    """Scalar PU link: direct gains h_p, SU-to-PU gains h_sp, constant PU
    power Q, interference threshold Gamma, capacity floor Cbar_p."""

    h_p: np.ndarray
    h_sp: np.ndarray
    Q: float
    Gamma: float
    Cbar_p: float

    def __post_init__(self):
        object.__setattr__(self, "h_p", np.asarray(self.h_p, dtype=float))
        object.__setattr__(self, "h_sp", np.asarray(self.h_sp, dtype=float))
        if np.any(self.h_p < 0) or np.any(self.h_sp < 0) or self.Q < 0:
            raise DomainError("gains and PU power must be nonnegative")


def _penalty_matrices(instance, pair: DualPair):
    K, J = instance.K, instance.J
    B = []
    for k in range(K):
        n = instance.H(k).shape[1]
        Bk = (pair.nu[k] + T_RIDGE) * np.eye(n, dtype=complex)
        for j in range(J):
            G = instance.G(k, j)
            Bk = Bk + pair.delta[j] * (G.conj().T @ G)
        B.append(herm(Bk))
    return B


def tdma_subproblem(instance: NetworkInstance, pair: DualPair):
    """One-dimension TDMA subproblem: schedule at most one user.

    Solves each user's penalized rate maximization and picks the largest
    value (ties -> lowest index); returns (user or None, covariance or
    None, value), value 0 when all users are priced out.
    """
    B = _penalty_matrices(instance, pair)
    best = (None, None, 0.0)
    for k in range(instance.K):
        S, val = inner_covariance(instance.H(k), B[k])
        if val > best[2]:
            best = (k, S, val)
    return best


def _is_scalar_scenario(scenario):
    for inst in scenario.instances:
        for k in range(inst.K):
            if inst.H(k).shape != (1, 1):
                return False
            for j in range(inst.J):
                if inst.G(k, j).shape != (1, 1):
                    return False
    return True


def _scalar_tables(scenario):
    L, K, J = scenario.L, scenario.K, scenario.J
    g = np.empty((L, K))
    e = np.empty((L, K, J))
    for l, inst in enumerate(scenario.instances):
        for k in range(K):
            g[l, k] = abs(inst.H(k)[0, 0]) ** 2
            for j in range(J):
                e[l, k, j] = abs(inst.G(k, j)[0, 0]) ** 2
    return g, e


def solve_p6(scenario: FadingScenario, utility="mac_wsr",
             tol=DEFAULT_TOL) -> SolveReport:
    """DRA over L dimensions under ATPCs and AIPCs by dual decomposition.

    ``utility`` is ``mac_wsr`` (full MAC weighted sum-rate per dimension)
    or ``tdma`` (at most one active user per dimension, sum rate).  The
    reported objective is the best feasible primal found; the duality gap
    is tight for ``mac_wsr`` and reported as-is for ``tdma`` (zero only
    asymptotically in L).
    """
    if utility not in ("mac_wsr", "tdma"):
        raise DomainError(f"unknown utility: {utility!r}")
    L, K, J = scenario.L, scenario.K, scenario.J
    mu = scenario.instances[0].mu
    w = _weight_diffs(mu)
    equal_mu = np.ptp(mu) < 1e-12
    budgets = np.array(list(scenario.Pbar) + list(scenario.Gammabar))
    n = K + J

    scalar = _is_scalar_scenario(scenario)
    use_kernel = scalar and (utility == "tdma" or equal_mu)
    if use_kernel:
        g_tab, e_tab = _scalar_tables(scenario)
        return _solve_p6_scalar(scenario, utility, tol, g_tab, e_tab,
                                budgets)

    state = {"best_util": 0.0, "best_S": None, "warm": [None] * L,
             "history": []}

    def usages(S_all):
        """S_all: list over dims of per-user covariances."""
        u = np.zeros(n)
        for l, inst in enumerate(scenario.instances):
            for k in range(K):
                u[k] += np.trace(S_all[l][k]).real
                for j in range(J):
                    u[K + j] += interference_power(inst.G(k, j), S_all[l][k])
        return u / L

    def primal_utility(S_all):
        tot = 0.0
        for l, inst in enumerate(scenario.instances):
            H = [inst.H(k) for k in range(K)]
            if utility == "mac_wsr":
                tot += wsr_mac(S_all[l], H, mu)
            else:
                tot += sum(rate_p2p(H[k], S_all[l][k]) for k in range(K))
        return tot / L

    def consider(S_all):
        u = usages(S_all)
        c = min((budgets[i] / u[i] for i in range(n) if u[i] > budgets[i]),
                default=1.0)
        if c < 1.0:
            S_all = [[c * S for S in dim] for dim in S_all]
        val = primal_utility(S_all)
        if state["best_S"] is None or val >= state["best_util"]:
            state["best_util"], state["best_S"] = val, S_all
        return val

    def subproblems(eta):
        pair = DualPair(tuple(eta[:K]), tuple(eta[K:]))
        S_all = []
        tot = 0.0
        for l, inst in enumerate(scenario.instances):
            if utility == "tdma":
                k_sel, S, val = tdma_subproblem(inst, pair)
                dim = [np.zeros((inst.H(k).shape[1],) * 2, dtype=complex)
                       for k in range(K)]
                if k_sel is not None:
                    dim[k_sel] = S
            else:
                B = _penalty_matrices(inst, pair)
                H = [inst.H(k) for k in range(K)]
                dim, val = mac_inner_maximize(H, w, B, S0=state["warm"][l])
                state["warm"][l] = [s.copy() for s in dim]
            S_all.append(dim)
            tot += val
        return S_all, tot

    def oracle(eta):
        S_all, tot = subproblems(eta)
        dual = tot / L + float(eta @ budgets)
        u = usages(S_all)
        consider(S_all)
        if utility == "mac_wsr":
            state["history"].append(S_all)
            hist = state["history"][-40:]
            if len(hist) > 1:
                avg = [
                    [sum(Sh[l][k] for Sh in hist) / len(hist)
                     for k in range(K)]
                    for l in range(L)
                ]
                consider(avg)
        return dual, budgets - u, None

    def gap_oracle(best_dual, _):
        return best_dual - state["best_util"]

    radius = 10.0 * max(1.0, 1.0 / float(budgets.min()))
    gap_stop = gap_oracle if utility == "mac_wsr" else None
    best_dual, best_eta, _, info = minimize_nonneg(
        oracle, n, radius=radius, tol=tol, max_iter=MAX_ITER,
        gap_oracle=gap_stop,
    )

    S_best = state["best_S"]
    u = usages(S_best)
    usage, bgt, mult = {}, {}, {}
    for k in range(K):
        usage[f"atpc{k}"] = u[k]
        bgt[f"atpc{k}"] = scenario.Pbar[k]
        mult[f"atpc{k}"] = float(best_eta[k])
    for j in range(J):
        usage[f"aipc{j}"] = u[K + j]
        bgt[f"aipc{j}"] = scenario.Gammabar[j]
        mult[f"aipc{j}"] = float(best_eta[K + j])
    gap = best_dual - state["best_util"]
    return SolveReport(
        objective=state["best_util"], covariances=S_best, usage=usage,
        budgets=bgt, multipliers=mult, gap=gap,
        iterations=info["iterations"],
        converged=info["converged"] and (utility == "tdma" or gap <= tol),
        trace=info["trace"],
        extras={"utility": utility, "dual_bound": best_dual,
                "scalar_fast_path": False},
    )


def _with(vec, i, value):
    out = vec.copy()
    out[i] = value
    return out


def _solve_p6_scalar(scenario, utility, tol, g_tab, e_tab, budgets):
    """Array-vectorized path for all-scalar scenarios.

    Allocations live in (L, K) power arrays; the per-dimension subproblem
    (single best user water-fill, valid for both TDMA and the equal-weight
    scalar MAC whose optimum schedules one user) runs in the compiled
    kernel.
    """
    L, K, J = scenario.L, scenario.K, scenario.J
    mu0 = scenario.instances[0].mu[0]
    n = K + J
    state = {"best_util": 0.0, "best_P": np.zeros((L, K)), "history": [],
             "atoms": []}

    def usages(Parr):
        u = np.empty(n)
        u[:K] = Parr.mean(axis=0)
        u[K:] = np.einsum("lk,lkj->j", Parr, e_tab) / L
        return u

    def utility_of(Parr):
        if utility == "mac_wsr":
            per_dim = np.log2(1.0 + (g_tab * Parr).sum(axis=1))
            return mu0 * float(per_dim.mean())
        return float(np.log2(1.0 + g_tab * Parr).sum() / L)

    def consider(Parr):
        u = usages(Parr)
        over = u > budgets
        if over.any():
            Parr = Parr * (budgets[over] / u[over]).min()
        val = utility_of(Parr)
        if val >= state["best_util"]:
            state["best_util"], state["best_P"] = val, Parr
        return val

    def alloc_at(eta):
        b = eta[:K][None, :] + e_tab @ eta[K:]
        sel, p, val = scalar_best_user_alloc(g_tab, b)
        Parr = np.zeros((L, K))
        act = sel >= 0
        Parr[np.nonzero(act)[0], sel[act]] = p[act]
        return Parr, float(val.mean())

    def oracle(eta):
        Parr, mean_val = alloc_at(eta)
        dual = mean_val + float(eta @ budgets)
        u = usages(Parr)
        consider(Parr)
        if utility == "mac_wsr":
            state["atoms"].append((Parr, u, utility_of(Parr)))
            hist = state["history"]
            hist.append(Parr)
            if len(hist) > 40:
                del hist[0]
            if len(hist) > 1:
                consider(np.mean(hist, axis=0))
        return dual, budgets - u, None

    def gap_oracle(best_dual, _):
        return best_dual - state["best_util"]

    radius = 10.0 * max(1.0, 1.0 / float(budgets.min()))
    best_dual, best_eta, _, info = minimize_nonneg(
        oracle, n, radius=radius, tol=tol, max_iter=MAX_ITER,
        gap_oracle=gap_oracle,
    )

    # Time-sharing recovery: at the optimal multipliers the exact optimum
    # is a convex combination of per-dimension vertex solutions (a few
    # tied dimensions share power between users); uniform scaling of a
    # single vertex loses first-order value.  The iterate atoms sample
    # those vertices, so pick the best convex combination by linear
    # programming (by concavity the combined allocation is worth at least
    # the combined atom values).
    if (utility == "mac_wsr" and state["atoms"]
            and best_dual - state["best_util"] > tol):
        from scipy.optimize import linprog

        atoms = state["atoms"][-200:]
        # perturbed multipliers generate extra vertices around the optimum
        for step in (1e-7, 1e-5, 1e-3):
            for i in range(n):
                for sgn in (1.0, -1.0):
                    eta_p = np.maximum(
                        _with(best_eta, i, best_eta[i] * (1 + sgn * step)),
                        0.0)
                    Pp, _ = alloc_at(eta_p)
                    atoms.append((Pp, usages(Pp), utility_of(Pp)))
        us = np.array([a[1] for a in atoms])
        vals = np.array([a[2] for a in atoms])
        res = linprog(-vals, A_ub=us.T, b_ub=budgets,
                      A_eq=np.ones((1, len(atoms))), b_eq=[1.0],
                      bounds=(0.0, None), method="highs")
        if res.success:
            theta = res.x
            P_mix = np.tensordot(theta, np.array([a[0] for a in atoms]),
                                 axes=1)
            consider(P_mix)

    Pbest = state["best_P"]
    u = usages(Pbest)
    usage, bgt, mult = {}, {}, {}
    for k in range(K):
        usage[f"atpc{k}"] = u[k]
        bgt[f"atpc{k}"] = scenario.Pbar[k]
        mult[f"atpc{k}"] = float(best_eta[k])
    for j in range(J):
        usage[f"aipc{j}"] = u[K + j]
        bgt[f"aipc{j}"] = scenario.Gammabar[j]
        mult[f"aipc{j}"] = float(best_eta[K + j])
    gap = best_dual - state["best_util"]
    S_best = [
        [np.array([[Pbest[l, k]]], dtype=complex) for k in range(K)]
        for l in range(L)
    ]
    return SolveReport(
        objective=state["best_util"], covariances=S_best, usage=usage,
        budgets=bgt, multipliers=mult, gap=gap,
        iterations=info["iterations"],
        converged=info["converged"] and (utility == "tdma" or gap <= tol),
        trace=info["trace"],
        extras={"utility": utility, "dual_bound": best_dual,
                "scalar_fast_path": True},
    )


# ---------------------------------------------------------------------------
# Interference diversity and the PU ergodic-capacity constraint
# ---------------------------------------------------------------------------

@dataclass
class DiversityResult:
    """Paired Monte Carlo estimates of the PU ergodic capacity under a
    constant (Case I) and a randomized mean-preserving (Case II)
    interference budget."""

    c_i: float
    se_i: float
    c_ii: float
    se_ii: float
    diff: float
    se_diff: float
    extras: dict = field(default_factory=dict)


def _pu_rate(h_p, Q, interference):
    return np.log2(1.0 + h_p * Q / (1.0 + interference))


def interference_diversity(h_p, Q, Gamma, law="exponential",
                           seed=0) -> DiversityResult:
    """Compare the PU ergodic capacity under constant interference Gamma
    (Case I) against a random interference with mean Gamma (Case II),
    using common random numbers for the PU channel gains h_p.

    ``law``: ``exponential`` (mean Gamma) or ``two_point`` ({0, 2*Gamma}
    with equal probability).
    """
    h_p = np.asarray(h_p, dtype=float)
    if h_p.size == 0:
        raise DomainError("need at least one PU channel sample")
    rng = np.random.default_rng([int(seed), 17])
    if law == "exponential":
        I_sp = rng.exponential(scale=Gamma, size=h_p.size)
    elif law == "two_point":
        I_sp = 2.0 * Gamma * (rng.random(h_p.size) < 0.5)
    else:
        raise DomainError(f"unknown interference law: {law!r}")
    r_i = _pu_rate(h_p, Q, Gamma)
    r_ii = _pu_rate(h_p, Q, I_sp)
    d = r_ii - r_i
    n = h_p.size
    sd = 1.0 if n == 1 else np.sqrt(n)

    def se(x):
        return float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    return DiversityResult(
        c_i=float(r_i.mean()), se_i=se(r_i),
        c_ii=float(r_ii.mean()), se_ii=se(r_ii),
        diff=float(d.mean()), se_diff=se(d),
        extras={"law": law, "n": n, "seed": int(seed)},
    )


def two_point_diversity_analytic(h_p_Q, Gamma):
    """Exact Case I / Case II PU capacities for the two-point interference
    law {0, 2*Gamma} with equal probability and deterministic h_p*Q."""
    c_i = float(np.log2(1.0 + h_p_Q / (1.0 + Gamma)))
    c_ii = float(0.5 * np.log2(1.0 + h_p_Q)
                 + 0.5 * np.log2(1.0 + h_p_Q / (1.0 + 2.0 * Gamma)))
    return c_i, c_ii


def pu_capacity_constraint(model: PuLinkModel, p_s):
    """Evaluate the PU ergodic-capacity constraint
    E[log2(1 + h_p Q / (1 + h_sp p_s))] >= Cbar_p.

    Returns (value, satisfied).  Evaluation only; optimizing under this
    constraint is out of scope (non-convex in the allocation).
    """
    p_s = np.asarray(p_s, dtype=float)
    if p_s.shape != model.h_sp.shape or model.h_p.shape != model.h_sp.shape:
        raise DomainError("allocation must match the gain sample indexing")
    if np.any(p_s < 0):
        raise DomainError("allocation must be nonnegative")
    value = float(np.mean(
        np.log2(1.0 + model.h_p * model.Q / (1.0 + model.h_sp * p_s))))
    return value, bool(value >= model.Cbar_p - 1e-12)
