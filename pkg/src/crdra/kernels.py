"""Hot scalar kernels with numba-compiled and pure-numpy twins.

The compiled path is used by default; set the environment variable
``CRDRA_NO_NUMBA=1`` before import to select the numpy fallbacks (or when
numba is unavailable).  ``python -m crdra.bench_kernels`` compares the two
paths.
"""

from __future__ import annotations

import os

import numpy as np

LN2 = float(np.log(2.0))
_PRICE_FLOOR = 1e-12


def _scalar_best_user_alloc_np(g, b):
    """Vectorized single-user water-filling selection per dimension.

    g, b: (L, K) arrays of power gains and power prices.  For each row,
    each user's best scalar allocation is p_k = max(0, 1/(b_k ln2) - 1/g_k)
    with value log2(1 + g_k p_k) - b_k p_k; the user with the largest
    positive value wins (ties -> lowest index).  Returns (sel, p, val)
    with sel = -1 and p = val = 0 where no user has positive value.
    """
    g = np.asarray(g, dtype=float)
    b = np.maximum(np.asarray(b, dtype=float), _PRICE_FLOOR)
    with np.errstate(divide="ignore"):
        inv_g = np.where(g > 0, 1.0 / np.maximum(g, 1e-300), np.inf)
    p = np.maximum(1.0 / (b * LN2) - inv_g, 0.0)
    val = np.log2(1.0 + g * p) - b * p
    sel = np.argmax(val, axis=1)
    rows = np.arange(g.shape[0])
    vbest = val[rows, sel]
    off = vbest <= 0.0
    sel = np.where(off, -1, sel)
    pbest = np.where(off, 0.0, p[rows, np.maximum(sel, 0)])
    vbest = np.where(off, 0.0, vbest)
    return sel.astype(np.int64), pbest, vbest


def _scalar_best_user_alloc_loop(g, b):
    L, K = g.shape
    sel = np.empty(L, dtype=np.int64)
    pbest = np.empty(L)
    vbest = np.empty(L)
    for l in range(L):
        s = -1
        pv = 0.0
        vv = 0.0
        for k in range(K):
            bk = b[l, k]
            if bk < _PRICE_FLOOR:
                bk = _PRICE_FLOOR
            gk = g[l, k]
            if gk <= 0.0:
                continue
            p = 1.0 / (bk * LN2) - 1.0 / gk
            if p < 0.0:
                p = 0.0
            v = np.log2(1.0 + gk * p) - bk * p
            if v > vv:
                s, pv, vv = k, p, v
        sel[l] = s
        pbest[l] = pv
        vbest[l] = vv
    return sel, pbest, vbest


def _uplink_fixed_point_loop(H, alpha, q0, max_iter, tol, q_cap):
    """Fixed point of the dual-uplink power iteration.

    H: (K, M) complex user channels (rows), alpha: SINR target.  Returns
    (q, status) with status 0 converged, 1 diverged (sum power exceeded
    q_cap), 2 iteration budget exhausted.
    """
    K, M = H.shape
    q = q0.copy()
    q_new = np.empty(K)
    for _ in range(max_iter):
        for k in range(K):
            B = np.eye(M, dtype=np.complex128)
            for i in range(K):
                if i != k:
                    B += q[i] * np.outer(H[i], np.conj(H[i]))
            x = np.linalg.solve(B, H[k])
            gain = np.real(np.dot(np.conj(H[k]), x))
            q_new[k] = alpha / gain
        if q_new.sum() > q_cap:
            return q_new, 1
        delta = np.abs(q_new - q).max()
        q[:] = q_new
        if delta <= tol * max(1.0, q_new.max()):
            return q, 0
    return q, 2


_uplink_fixed_point_np = _uplink_fixed_point_loop

USE_NUMBA = os.environ.get("CRDRA_NO_NUMBA", "") != "1"
if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    _scalar_best_user_alloc_nb = njit(cache=True)(_scalar_best_user_alloc_loop)
    _uplink_fixed_point_nb = njit(cache=True)(_uplink_fixed_point_loop)

    def scalar_best_user_alloc(g, b):
        g = np.ascontiguousarray(g, dtype=np.float64)
        b = np.ascontiguousarray(b, dtype=np.float64)
        return _scalar_best_user_alloc_nb(g, b)

    def uplink_fixed_point(H, alpha, q0=None, max_iter=10_000, tol=1e-11,
                           q_cap=1e9):
        H = np.ascontiguousarray(H, dtype=np.complex128)
        if q0 is None:
            q0 = np.zeros(H.shape[0])
        return _uplink_fixed_point_nb(H, float(alpha),
                                      np.asarray(q0, dtype=np.float64),
                                      max_iter, tol, q_cap)
else:
    def scalar_best_user_alloc(g, b):
        return _scalar_best_user_alloc_np(np.asarray(g, dtype=float),
                                          np.asarray(b, dtype=float))

    def uplink_fixed_point(H, alpha, q0=None, max_iter=10_000, tol=1e-11,
                           q_cap=1e9):
        H = np.asarray(H, dtype=np.complex128)
        if q0 is None:
            q0 = np.zeros(H.shape[0])
        return _uplink_fixed_point_np(H, float(alpha),
                                      np.asarray(q0, dtype=np.float64),
                                      max_iter, tol, q_cap)
