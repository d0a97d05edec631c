"""Sinkhorn iteration kernels.

Two interchangeable backends: loop-style kernels compiled with numba, and
vectorized numpy fallbacks.  The numba path is used when numba imports
successfully; set AWT_NUMBA=0 to force the numpy path (or AWT_NUMBA=1 to
fail loudly if numba is missing).  Both backends implement the identical
update order, so they agree to float rounding.

Each kernel returns (plan, iterations, violation, overflow):
  plan       float64 (n, m) coupling built from the final scaling vectors
  iterations number of full (row, column) update sweeps performed
  violation  max absolute row/column marginal error at the last sweep
  overflow   True when a scaling factor became non-finite (standard domain)
"""

from __future__ import annotations

import os

import numpy as np

_FALSY = ("0", "false", "off", "no")
_TRUTHY = ("1", "true", "on", "yes")

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False


def _resolve_backend() -> bool:
    raw = os.environ.get("AWT_NUMBA", "").strip().lower()
    if raw in _FALSY:
        return False
    if raw in _TRUTHY and not NUMBA_AVAILABLE:
        raise RuntimeError("AWT_NUMBA=1 but numba is not importable")
    return NUMBA_AVAILABLE


USE_NUMBA = _resolve_backend()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy fallbacks


def _std_numpy(C, a, b, eps, max_iter, tol):
    K = np.exp(-C / eps)
    u = np.ones(a.size)
    v = np.ones(b.size)
    it = 0
    viol = np.inf
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        Kv = K @ v
        for it in range(1, max_iter + 1):
            u = a / Kv
            KTu = K.T @ u
            v = b / KTu
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                return np.zeros_like(K), it, np.inf, True
            Kv = K @ v
            row_err = np.max(np.abs(u * Kv - a))
            col_err = np.max(np.abs(v * KTu - b))
            viol = max(row_err, col_err)
            if viol <= tol:
                break
    P = u[:, None] * K * v[None, :]
    return P, it, viol, False


def _logsumexp_rows(M):
    mx = np.max(M, axis=1)
    return mx + np.log(np.sum(np.exp(M - mx[:, None]), axis=1))


def _logsumexp_cols(M):
    mx = np.max(M, axis=0)
    return mx + np.log(np.sum(np.exp(M - mx[None, :]), axis=0))


# Annealing schedule for the log-domain warm start: sweep at a halving
# regularization until the target is reached, carrying the dual potentials.
_ANNEAL_START = 1.0
_ANNEAL_SWEEPS = 2


def _log_numpy(C, a, b, eps, max_iter, tol):
    loga = np.log(a)
    logb = np.log(b)
    f = np.zeros(a.size)
    g = np.zeros(b.size)
    it = 0

    def sweep(e):
        nonlocal f, g
        f = e * loga - e * _logsumexp_rows((g[None, :] - C) / e)
        g = e * logb - e * _logsumexp_cols((f[:, None] - C) / e)

    e_cur = _ANNEAL_START
    while e_cur > eps:
        for _ in range(_ANNEAL_SWEEPS):
            sweep(e_cur)
            it += 1
        e_cur *= 0.5

    viol = np.inf
    for _ in range(max_iter):
        sweep(eps)
        it += 1
        P = np.exp((f[:, None] + g[None, :] - C) / eps)
        row_err = np.max(np.abs(P.sum(axis=1) - a))
        col_err = np.max(np.abs(P.sum(axis=0) - b))
        viol = max(row_err, col_err)
        if viol <= tol:
            break
    P = np.exp((f[:, None] + g[None, :] - C) / eps)
    return P, it, viol, False


# ---------------------------------------------------------------------------
# numba kernels (same update order, explicit loops)

if NUMBA_AVAILABLE:
    from numba import njit

    @njit(cache=True)
    def _std_numba(C, a, b, eps, max_iter, tol):
        n, m = C.shape
        K = np.exp(-C / eps)
        u = np.ones(n)
        v = np.ones(m)
        Kv = np.empty(n)
        KTu = np.empty(m)
        for i in range(n):
            s = 0.0
            for j in range(m):
                s += K[i, j]
            Kv[i] = s
        it = 0
        viol = np.inf
        overflow = False
        for it in range(1, max_iter + 1):
            ok = True
            for i in range(n):
                if Kv[i] > 0.0:
                    u[i] = a[i] / Kv[i]
                else:
                    ok = False
                if not np.isfinite(u[i]):
                    ok = False
            for j in range(m):
                s = 0.0
                for i in range(n):
                    s += K[i, j] * u[i]
                KTu[j] = s
                if s > 0.0:
                    v[j] = b[j] / s
                else:
                    ok = False
                if not np.isfinite(v[j]):
                    ok = False
            if not ok:
                overflow = True
                viol = np.inf
                break
            viol = 0.0
            for i in range(n):
                s = 0.0
                for j in range(m):
                    s += K[i, j] * v[j]
                Kv[i] = s
                d = abs(u[i] * s - a[i])
                if d > viol:
                    viol = d
            for j in range(m):
                d = abs(v[j] * KTu[j] - b[j])
                if d > viol:
                    viol = d
            if viol <= tol:
                break
        P = np.zeros((n, m))
        if not overflow:
            for i in range(n):
                for j in range(m):
                    P[i, j] = u[i] * K[i, j] * v[j]
        return P, it, viol, overflow

    @njit(cache=True)
    def _log_sweep_numba(C, loga, logb, f, g, e):
        n, m = C.shape
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                t = (g[j] - C[i, j]) / e
                if t > mx:
                    mx = t
            s = 0.0
            for j in range(m):
                s += np.exp((g[j] - C[i, j]) / e - mx)
            f[i] = e * loga[i] - e * (mx + np.log(s))
        for j in range(m):
            mx = -np.inf
            for i in range(n):
                t = (f[i] - C[i, j]) / e
                if t > mx:
                    mx = t
            s = 0.0
            for i in range(n):
                s += np.exp((f[i] - C[i, j]) / e - mx)
            g[j] = e * logb[j] - e * (mx + np.log(s))

    @njit(cache=True)
    def _log_numba(C, a, b, eps, max_iter, tol):
        n, m = C.shape
        loga = np.log(a)
        logb = np.log(b)
        f = np.zeros(n)
        g = np.zeros(m)
        it = 0

        e_cur = _ANNEAL_START
        while e_cur > eps:
            for _ in range(_ANNEAL_SWEEPS):
                _log_sweep_numba(C, loga, logb, f, g, e_cur)
                it += 1
            e_cur *= 0.5

        viol = np.inf
        for _ in range(max_iter):
            _log_sweep_numba(C, loga, logb, f, g, eps)
            it += 1
            viol = 0.0
            for i in range(n):
                s = 0.0
                for j in range(m):
                    s += np.exp((f[i] + g[j] - C[i, j]) / eps)
                d = abs(s - a[i])
                if d > viol:
                    viol = d
            for j in range(m):
                s = 0.0
                for i in range(n):
                    s += np.exp((f[i] + g[j] - C[i, j]) / eps)
                d = abs(s - b[j])
                if d > viol:
                    viol = d
            if viol <= tol:
                break
        P = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                P[i, j] = np.exp((f[i] + g[j] - C[i, j]) / eps)
        return P, it, viol, False


def sinkhorn_std(C, a, b, eps, max_iter, tol):
    """Standard-domain scaling sweeps on the Gibbs kernel exp(-C/eps)."""
    if USE_NUMBA:
        return _std_numba(C, a, b, eps, max_iter, tol)
    return _std_numpy(C, a, b, eps, max_iter, tol)


def sinkhorn_log(C, a, b, eps, max_iter, tol):
    """Log-domain scaling sweeps (log-sum-exp stabilized)."""
    if USE_NUMBA:
        return _log_numba(C, a, b, eps, max_iter, tol)
    return _log_numpy(C, a, b, eps, max_iter, tol)
