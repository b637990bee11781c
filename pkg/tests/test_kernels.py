import os
import subprocess
import sys

import numpy as np
import pytest

from crdra import kernels
from crdra.kernels import (
    LN2,
    _scalar_best_user_alloc_np,
    _uplink_fixed_point_loop,
    scalar_best_user_alloc,
    uplink_fixed_point,
)


def random_gb(seed, L=200, K=4):
    rng = np.random.default_rng(seed)
    g = rng.exponential(size=(L, K))
    g[rng.random((L, K)) < 0.1] = 0.0
    b = 0.3 * rng.exponential(size=(L, K)) + 1e-6
    return g, b


@pytest.mark.parametrize("seed", range(5))
def test_active_path_matches_numpy_reference(seed):
    g, b = random_gb(seed)
    sel, p, val = scalar_best_user_alloc(g, b)
    sel2, p2, val2 = _scalar_best_user_alloc_np(g, b)
    np.testing.assert_array_equal(sel, sel2)
    np.testing.assert_allclose(p, p2, atol=1e-12)
    np.testing.assert_allclose(val, val2, atol=1e-12)


def test_single_user_closed_form():
    g = np.array([[2.0], [0.5], [10.0]])
    b = np.array([[0.4], [0.9], [0.05]])
    sel, p, val = scalar_best_user_alloc(g, b)
    for l in range(3):
        p_ref = max(0.0, 1.0 / (b[l, 0] * LN2) - 1.0 / g[l, 0])
        v_ref = np.log2(1.0 + g[l, 0] * p_ref) - b[l, 0] * p_ref
        if v_ref > 0:
            assert sel[l] == 0
            assert p[l] == pytest.approx(p_ref, abs=1e-12)
            assert val[l] == pytest.approx(v_ref, abs=1e-12)
        else:
            assert sel[l] == -1 and p[l] == 0.0 and val[l] == 0.0


def test_tie_breaks_to_lowest_index():
    g = np.array([[1.5, 1.5, 1.5]])
    b = np.array([[0.2, 0.2, 0.2]])
    sel, _, _ = scalar_best_user_alloc(g, b)
    assert sel[0] == 0


def test_all_priced_out_gives_no_selection():
    g = np.array([[0.1, 0.2]])
    b = np.array([[50.0, 50.0]])
    sel, p, val = scalar_best_user_alloc(g, b)
    assert sel[0] == -1 and p[0] == 0.0 and val[0] == 0.0
    g0 = np.zeros((2, 3))
    sel, p, val = scalar_best_user_alloc(g0, np.full((2, 3), 0.1))
    assert (sel == -1).all() and (p == 0).all() and (val == 0).all()


def test_winner_maximizes_value():
    g, b = random_gb(99, L=300, K=5)
    sel, p, val = scalar_best_user_alloc(g, b)
    pk = np.maximum(1.0 / (np.maximum(b, 1e-12) * LN2)
                    - np.where(g > 0, 1.0 / np.maximum(g, 1e-300), np.inf),
                    0.0)
    vk = np.log2(1.0 + g * pk) - b * pk
    for l in range(300):
        best = vk[l].max()
        if sel[l] >= 0:
            assert val[l] == pytest.approx(best, abs=1e-12)
        else:
            assert best <= 0.0


@pytest.mark.parametrize("seed", range(4))
def test_uplink_fixed_point_satisfies_sinr_equations(seed):
    rng = np.random.default_rng(seed)
    K, M = 3, 4
    H = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M)))
    H /= np.sqrt(2.0)
    alpha = 0.8
    q, status = uplink_fixed_point(H, alpha)
    assert status == 0
    for k in range(K):
        B = np.eye(M, dtype=complex)
        for i in range(K):
            if i != k:
                B += q[i] * np.outer(H[i], H[i].conj())
        gain = float((H[k].conj() @ np.linalg.solve(B, H[k])).real)
        assert q[k] * gain == pytest.approx(alpha, rel=1e-8)


def test_uplink_fixed_point_diverges_when_target_unreachable():
    rng = np.random.default_rng(5)
    K, M = 3, 1  # more users than antennas: max sum SINR bounded
    H = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M)))
    q, status = uplink_fixed_point(H, alpha=5.0)
    assert status == 1


def test_loop_and_vectorized_fixed_point_agree():
    rng = np.random.default_rng(11)
    H = (rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3)))
    q, s = uplink_fixed_point(H, 0.4)
    q2, s2 = _uplink_fixed_point_loop(
        np.ascontiguousarray(H, dtype=np.complex128), 0.4, np.zeros(2),
        10_000, 1e-11, 1e9)
    assert s == s2 == 0
    np.testing.assert_allclose(q, q2, atol=1e-9)


def test_fallback_env_flag_selects_numpy_path():
    code = (
        "import os; os.environ['CRDRA_NO_NUMBA'] = '1'\n"
        "import numpy as np\n"
        "from crdra import kernels\n"
        "assert not kernels.USE_NUMBA\n"
        "rng = np.random.default_rng(0)\n"
        "g = rng.exponential(size=(40, 3))\n"
        "b = 0.3 * rng.exponential(size=(40, 3)) + 1e-6\n"
        "sel, p, val = kernels.scalar_best_user_alloc(g, b)\n"
        "H = (rng.standard_normal((2, 3))"
        " + 1j * rng.standard_normal((2, 3)))\n"
        "q, s = kernels.uplink_fixed_point(H, 0.4)\n"
        "import json\n"
        "print(json.dumps([sel.tolist(), float(val.sum()),"
        " q.tolist(), int(s)]))\n"
    )
    env = dict(os.environ, CRDRA_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    rng = np.random.default_rng(0)
    g = rng.exponential(size=(40, 3))
    b = 0.3 * rng.exponential(size=(40, 3)) + 1e-6
    sel, p, val = kernels.scalar_best_user_alloc(g, b)
    H = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    q, s = kernels.uplink_fixed_point(H, 0.4)
    import json

    got_sel, got_val, got_q, got_s = json.loads(out.stdout)
    assert got_sel == sel.tolist()
    assert got_val == pytest.approx(float(val.sum()), abs=1e-12)
    np.testing.assert_allclose(got_q, q, atol=1e-9)
    assert got_s == s
