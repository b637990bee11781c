import numpy as np
import pytest

from crdra.model import FadingProcess, Role, generate_instance, interference_power, rate_p2p
from crdra.oracles import miso_grid_rate, p1_grid_rate, waterfill_rate
from crdra.p2p import (
    inner_covariance,
    partial_projection,
    solve_p1,
    solve_p1_channels,
    solve_p1_miso,
)


def make_p2p(seed, M=2, N=2, J=1, D=1):
    return generate_instance(Role.P2P, K=1, J=J, M=M, N=N, D=D,
                             fading=FadingProcess(seed=seed))


def test_inner_covariance_scalar_closed_form():
    S, val = inner_covariance(np.array([[2.0]]), np.array([[1.0]]))
    expect = 1.0 / np.log(2.0) - 0.25
    assert S[0, 0].real == pytest.approx(expect, rel=1e-12)
    assert val == pytest.approx(np.log2(1 + 4 * expect) - expect, rel=1e-12)


def test_inner_covariance_water_below_channels():
    # theta_i <= ln2 for every mode -> no power allocated
    H = 0.5 * np.eye(2)
    S, val = inner_covariance(H, np.eye(2))
    assert np.linalg.norm(S) < 1e-12
    assert val == 0.0


def test_inner_covariance_beats_random_psd():
    rng = np.random.default_rng(7)
    H = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    T = np.eye(3)
    S, val = inner_covariance(H, T)

    def obj(S):
        return rate_p2p(H, S) - np.trace(T @ S).real

    assert val == pytest.approx(obj(S), abs=1e-9)
    scale = np.trace(S).real + 1.0
    for _ in range(10_000):
        X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        R = X @ X.conj().T
        R *= scale * rng.random() / np.trace(R).real
        assert obj(R) <= val + 1e-9


def test_solve_p1_inactive_pipc_matches_waterfilling():
    inst = make_p2p(21, M=3, N=3, J=2)
    rep = solve_p1(inst, P=5.0, Gamma=[np.inf, np.inf], tol=1e-6)
    assert rep.objective == pytest.approx(waterfill_rate(inst.H(0), 5.0), abs=1e-4)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_solve_p1_matches_grid_oracle(seed):
    inst = make_p2p(seed, M=2, N=2, J=1, D=1)
    P, Gamma = 2.0, 0.1
    rep = solve_p1(inst, P, [Gamma], tol=1e-6)
    grid = p1_grid_rate(inst.H(0), inst.G(0, 0), P, Gamma)
    assert rep.objective == pytest.approx(grid, abs=1e-2)
    assert rep.objective >= grid - 1e-6  # grid points are feasible


@pytest.mark.parametrize("seed", range(6))
def test_solve_p1_duality_feasibility_slackness(seed):
    inst = make_p2p(100 + seed, M=3, N=3, J=2, D=1)
    P, Gammas = 4.0, [0.5, 0.2]
    rep = solve_p1(inst, P, Gammas, tol=1e-6)
    assert rep.gap <= 1e-4
    for name in rep.budgets:
        assert rep.usage[name] <= rep.budgets[name] * (1 + 1e-6) + 1e-12
        slack = rep.budgets[name] - rep.usage[name]
        assert rep.multipliers[name] * slack <= 1e-4 * max(1.0, rep.budgets[name])


def test_solve_p1_weak_duality_trace():
    inst = make_p2p(5, M=2, N=2, J=1)
    rep = solve_p1(inst, 2.0, [0.3], tol=1e-6)
    # every recorded dual value upper-bounds the final primal objective
    for dual_val, _gap in rep.trace:
        assert dual_val >= rep.objective - 1e-9


def test_solve_p1_monotone_in_budgets():
    inst = make_p2p(9, M=2, N=2, J=1)
    r1 = solve_p1(inst, 1.0, [0.2]).objective
    r2 = solve_p1(inst, 2.0, [0.2]).objective
    r3 = solve_p1(inst, 2.0, [0.5]).objective
    assert r1 <= r2 + 1e-6
    assert r2 <= r3 + 1e-6


def test_solve_p1_zero_gamma_zero_forcing():
    inst = make_p2p(13, M=4, N=4, J=1, D=1)
    rep = solve_p1(inst, 3.0, [0.0], tol=1e-6)
    assert rep.usage["pipc0"] <= 1e-10
    assert rep.objective > 0.0


def test_solve_p1_miso_mrt_when_unconstrained():
    rng = np.random.default_rng(31)
    h = rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3))
    v, rate, _ = solve_p1_miso(h, P=2.0, Gamma=[], Gs=[], tol=1e-6)
    expect = np.sqrt(2.0) * h.conj().ravel() / np.linalg.norm(h)
    # equal up to a global phase
    assert abs(abs(np.vdot(v, expect)) - 2.0) < 1e-3
    assert rate == pytest.approx(np.log2(1 + 2.0 * np.linalg.norm(h) ** 2), abs=1e-4)


def test_solve_p1_miso_orthogonal_pu_ignores_gamma():
    h = np.array([[1.0, 0.0]], dtype=complex)
    G = np.array([[0.0, 1.0]], dtype=complex)
    v, rate, _ = solve_p1_miso(h, P=1.5, Gamma=[1e-4], Gs=[G], tol=1e-6)
    assert rate == pytest.approx(np.log2(1 + 1.5), abs=1e-4)


@pytest.mark.parametrize("seed", [3, 4])
def test_solve_p1_miso_matches_polar_grid(seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
    G = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
    P, Gamma = 1.0, 0.2
    v, rate, rep = solve_p1_miso(h, P, [Gamma], [G], tol=1e-7)
    grid = miso_grid_rate(h, G, P, Gamma)
    assert rate == pytest.approx(grid, abs=1e-3)
    assert np.linalg.norm(v) ** 2 <= P * (1 + 1e-6)
    assert np.linalg.norm(G @ v) ** 2 <= Gamma * (1 + 1e-6)


def test_partial_projection_b0_inactive_gamma_is_waterfilling():
    inst = make_p2p(17, M=3, N=3, J=1)
    rep = partial_projection(inst, 4.0, [np.inf], b=0, tol=1e-6)
    assert rep.objective == pytest.approx(waterfill_rate(inst.H(0), 4.0), abs=1e-4)


def test_partial_projection_full_b_zero_forces():
    inst = make_p2p(19, M=4, N=4, J=2, D=1)
    rep = partial_projection(inst, 5.0, [0.0, 0.0], b=2, tol=1e-6)
    assert rep.usage["pipc0"] <= 1e-10
    assert rep.usage["pipc1"] <= 1e-10


@pytest.mark.parametrize("b", [0, 1, 2])
def test_partial_projection_dominated_by_optimal(b):
    inst = generate_instance(Role.P2P, K=1, J=2, M=4, N=4, D=1,
                             fading=FadingProcess(seed=42))
    P, Gammas = 10.0, [0.1, 0.1]
    opt = solve_p1(inst, P, Gammas, tol=1e-6)
    heur = partial_projection(inst, P, Gammas, b=b, tol=1e-6)
    assert heur.objective <= opt.objective + 1e-6
    assert heur.feasible()


def test_partial_projection_bad_b():
    inst = make_p2p(1, M=2, N=2, J=1)
    with pytest.raises(Exception):
        partial_projection(inst, 1.0, [0.1], b=5)


def test_solve_p1_channels_deterministic():
    inst = make_p2p(23, M=2, N=2, J=1)
    a = solve_p1_channels(inst.H(0), [inst.G(0, 0)], 2.0, [0.4])
    b = solve_p1_channels(inst.H(0), [inst.G(0, 0)], 2.0, [0.4])
    assert a.objective == b.objective
    np.testing.assert_array_equal(a.covariances[0], b.covariances[0])
