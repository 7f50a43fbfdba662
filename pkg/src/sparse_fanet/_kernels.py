"""Hot loops of the Hankel/IHT baseline, in two interchangeable backends.

The numba backend compiles the lift, the anti-diagonal averaging and the
whole IHT iteration (one trial per ``prange`` worker for batches).  The numpy
backend computes the same quantities with vectorized indexing and
``numpy.linalg.svd``.  Set ``SPARSE_FANET_BACKEND=numpy`` to force the
fallback; the default is numba whenever it imports.

The truncated SVD product ``U_r diag(s_r) V_r^H`` does not depend on the
phase LAPACK picks for each singular vector pair, so both backends are
deterministic without an explicit sign convention (ties between equal
singular values at the cut-off are the one exception).
"""
import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old for numba and only produces a warning
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_ENV_FLAG = "SPARSE_FANET_BACKEND"
_TINY = 1e-300


def _default_backend():
    requested = os.environ.get(_ENV_FLAG, "").strip().lower()
    if requested in ("", "numba"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested == "numpy":
        return "numpy"
    raise ValueError(f"{_ENV_FLAG} must be 'numba' or 'numpy', got {requested!r}")


_backend = _default_backend()


def get_backend():
    return _backend


def set_backend(name):
    """Switch the active backend at runtime; returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    previous, _backend = _backend, name
    return previous


# ---------------------------------------------------------------- numpy path


def _hankel_np(x, L):
    cols = x.shape[0] - L + 1
    idx = np.arange(L)[:, None] + np.arange(cols)[None, :]
    return x[idx]


def _dehankel_np(H):
    L, cols = H.shape
    idx = (np.arange(L)[:, None] + np.arange(cols)[None, :]).ravel()
    n = L + cols - 1
    counts = np.bincount(idx, minlength=n)
    flat = H.ravel()
    re = np.bincount(idx, weights=flat.real, minlength=n)
    im = np.bincount(idx, weights=flat.imag, minlength=n)
    return (re + 1j * im) / counts


def _truncate_np(H, r):
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vh[:r]


def _iht_np(y, mask, L, r, mu, max_iters, tol, reclamp):
    w = mask.astype(np.float64)
    x = y * w
    best = x.copy()
    best_res = np.inf
    n_iter = 0
    converged = False
    for it in range(max_iters):
        g = x + mu * w * (y - x)
        x_new = _dehankel_np(_truncate_np(_hankel_np(g, L), r))
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x), _TINY)
        x = x_new
        n_iter = it + 1
        res = np.linalg.norm(w * (y - x))
        if res < best_res:
            best_res = res
            best = x.copy()
        if change < tol:
            converged = True
            break
    out = x if converged else best
    if reclamp:
        out = np.where(mask, y, out)
    return out, n_iter, converged


def _iht_batch_np(Y, masks, L, r, mu, max_iters, tol, reclamp):
    out = np.empty_like(Y)
    iters = np.empty(Y.shape[0], dtype=np.int64)
    conv = np.empty(Y.shape[0], dtype=np.bool_)
    for b in range(Y.shape[0]):
        out[b], iters[b], conv[b] = _iht_np(
            Y[b], masks[b], L, r, mu, max_iters, tol, reclamp
        )
    return out, iters, conv


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _hankel_nb(x, L):
        cols = x.shape[0] - L + 1
        H = np.empty((L, cols), dtype=np.complex128)
        for i in range(L):
            for j in range(cols):
                H[i, j] = x[i + j]
        return H

    @njit(cache=True)
    def _dehankel_nb(H):
        L, cols = H.shape
        n = L + cols - 1
        acc = np.zeros(n, dtype=np.complex128)
        cnt = np.zeros(n, dtype=np.float64)
        for i in range(L):
            for j in range(cols):
                acc[i + j] += H[i, j]
                cnt[i + j] += 1.0
        return acc / cnt

    @njit(cache=True)
    def _truncate_nb(H, r):
        U, s, Vh = np.linalg.svd(H, full_matrices=False)
        L, cols = H.shape
        out = np.zeros((L, cols), dtype=np.complex128)
        for k in range(r):
            for i in range(L):
                u = U[i, k] * s[k]
                for j in range(cols):
                    out[i, j] += u * Vh[k, j]
        return out

    @njit(cache=True)
    def _norm_nb(v):
        acc = 0.0
        for k in range(v.shape[0]):
            acc += v[k].real * v[k].real + v[k].imag * v[k].imag
        return np.sqrt(acc)

    @njit(cache=True)
    def _iht_nb(y, mask, L, r, mu, max_iters, tol, reclamp):
        n = y.shape[0]
        w = np.empty(n, dtype=np.float64)
        for k in range(n):
            w[k] = 1.0 if mask[k] else 0.0
        x = y * w
        best = x.copy()
        best_res = np.inf
        n_iter = 0
        converged = False
        for it in range(max_iters):
            g = x + mu * w * (y - x)
            x_new = _dehankel_nb(_truncate_nb(_hankel_nb(g, L), r))
            change = _norm_nb(x_new - x) / max(_norm_nb(x), _TINY)
            x = x_new
            n_iter = it + 1
            res = _norm_nb(w * (y - x))
            if res < best_res:
                best_res = res
                best = x.copy()
            if change < tol:
                converged = True
                break
        out = x if converged else best
        if reclamp:
            out = out.copy()
            for k in range(n):
                if mask[k]:
                    out[k] = y[k]
        return out, n_iter, converged

    @njit(cache=True, parallel=True)
    def _iht_batch_nb(Y, masks, L, r, mu, max_iters, tol, reclamp):
        B = Y.shape[0]
        out = np.empty_like(Y)
        iters = np.empty(B, dtype=np.int64)
        conv = np.empty(B, dtype=np.bool_)
        for b in prange(B):
            xb, nb, cb = _iht_nb(Y[b], masks[b], L, r, mu, max_iters, tol, reclamp)
            out[b] = xb
            iters[b] = nb
            conv[b] = cb
        return out, iters, conv


# ---------------------------------------------------------------- dispatch


def hankel(x, L):
    x = np.ascontiguousarray(x, dtype=np.complex128)
    if _backend == "numba":
        return _hankel_nb(x, L)
    return _hankel_np(x, L)


def dehankel(H):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    if _backend == "numba":
        return _dehankel_nb(H)
    return _dehankel_np(H)


def truncate_rank(H, r):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    if _backend == "numba":
        return _truncate_nb(H, r)
    return _truncate_np(H, r)


def iht_batch(Y, masks, L, r, mu, max_iters, tol, reclamp=False):
    """Run IHT independently on each row of ``Y`` (B x N complex).

    Returns ``(X, n_iter, converged)``.
    """
    Y = np.ascontiguousarray(Y, dtype=np.complex128)
    masks = np.ascontiguousarray(masks, dtype=np.bool_)
    args = (int(L), int(r), float(mu), int(max_iters), float(tol), bool(reclamp))
    if _backend == "numba":
        return _iht_batch_nb(Y, masks, *args)
    return _iht_batch_np(Y, masks, *args)


def set_num_threads(n):
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
