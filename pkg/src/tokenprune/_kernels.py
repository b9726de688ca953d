"""Hot numeric kernels with two interchangeable backends.

``TOKENPRUNE_BACKEND=numba`` (default when numba imports) runs ``@njit`` loop
kernels; ``TOKENPRUNE_BACKEND=numpy`` runs the pure-numpy fallback. Both sum
every dot product left to right over the contraction index without fused
multiply-add, so matmul results are bit-identical across backends. Only
``exp`` differs (numpy ships its own SIMD ``exp``), which bounds cross-backend
drift to a few ulps per softmax/silu.

Sequence layout assumed by ``attention``: visual tokens occupy the first
``n_vis`` rows, query (action) tokens the last ``n_query`` rows.
"""

import os

import numpy as np

_requested = os.environ.get("TOKENPRUNE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"TOKENPRUNE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    if _requested == "numba":
        from numba import njit
    else:
        njit = None
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

BACKEND = "numba" if njit is not None else "numpy"


# --------------------------------------------------------------------------
# numpy fallback
# --------------------------------------------------------------------------

def _np_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for p in range(a.shape[1]):
        out += a[:, p : p + 1] * b[p]
    return out


def _np_rowsum(m):
    s = m[:, 0].copy()
    for j in range(1, m.shape[1]):
        s += m[:, j]
    return s


def _np_softmax_rows(m):
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return e / _np_rowsum(e)[:, None]


def _np_rms_norm(h, eps):
    out = np.empty_like(h)
    out[:, 0] = h[:, 0]
    content = h[:, 1:]
    ms = _np_rowsum(content * content) / content.shape[1]
    out[:, 1:] = content * (1.0 / np.sqrt(ms + eps))[:, None]
    return out


def _np_attention(xn, wq, wk, wv, wo, n_heads, head_dim, scale, n_vis, n_query):
    n = xn.shape[0]
    q = _np_matmul(xn, wq)
    k = _np_matmul(xn, wk)
    v = _np_matmul(xn, wv)
    probs = np.empty((n_heads, n, n))
    tap = np.empty((n_heads, n_query, n_vis))
    ctx = np.empty((n, n_heads * head_dim))
    for h in range(n_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        logits = _np_matmul(q[:, lo:hi], np.ascontiguousarray(k[:, lo:hi].T)) * scale
        probs[h] = _np_softmax_rows(logits)
        tap[h] = _np_softmax_rows(logits[n - n_query :, :n_vis])
        ctx[:, lo:hi] = _np_matmul(probs[h], v[:, lo:hi])
    return _np_matmul(ctx, wo), tap, probs


def _np_gated_ffn(xn, wg, wu, wd):
    g = _np_matmul(xn, wg)
    u = _np_matmul(xn, wu)
    return _np_matmul(g / (1.0 + np.exp(-g)) * u, wd)


def _np_l2_normalize_rows(z):
    norms = np.sqrt(_np_rowsum(z * z))
    out = np.zeros_like(z)
    ok = norms > 0.0
    out[ok] = z[ok] / norms[ok, None]
    return out


def _np_argmax_rows(c):
    return np.argmax(c, axis=1).astype(np.int64)


def _np_dot(a, b):
    s = 0.0
    for x, y in zip(a.tolist(), b.tolist()):
        s += x * y
    return s


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------

if njit is not None:
    _jit = njit(cache=True, nogil=True)

    @_jit
    def _nb_matmul(a, b):
        n, kdim = a.shape
        m = b.shape[1]
        out = np.zeros((n, m))
        i = 0
        # four output rows per pass reuse each loaded row of b; per-element
        # summation order is unchanged
        while i + 4 <= n:
            for p in range(kdim):
                a0 = a[i, p]
                a1 = a[i + 1, p]
                a2 = a[i + 2, p]
                a3 = a[i + 3, p]
                for j in range(m):
                    bj = b[p, j]
                    out[i, j] += a0 * bj
                    out[i + 1, j] += a1 * bj
                    out[i + 2, j] += a2 * bj
                    out[i + 3, j] += a3 * bj
            i += 4
        for r in range(i, n):
            for p in range(kdim):
                ap = a[r, p]
                for j in range(m):
                    out[r, j] += ap * b[p, j]
        return out

    @_jit
    def _nb_softmax_rows(m):
        n, c = m.shape
        out = np.empty((n, c))
        for i in range(n):
            mx = m[i, 0]
            for j in range(1, c):
                if m[i, j] > mx:
                    mx = m[i, j]
            s = 0.0
            for j in range(c):
                e = np.exp(m[i, j] - mx)
                out[i, j] = e
                s += e
            for j in range(c):
                out[i, j] = out[i, j] / s
        return out

    @_jit
    def _nb_rms_norm(h, eps):
        n, dim = h.shape
        out = np.empty((n, dim))
        for i in range(n):
            out[i, 0] = h[i, 0]
            ss = 0.0
            for c in range(1, dim):
                ss += h[i, c] * h[i, c]
            r = 1.0 / np.sqrt(ss / (dim - 1) + eps)
            for c in range(1, dim):
                out[i, c] = h[i, c] * r
        return out

    @_jit
    def _nb_attention(xn, wq, wk, wv, wo, n_heads, head_dim, scale, n_vis, n_query):
        n = xn.shape[0]
        q = _nb_matmul(xn, wq)
        k = _nb_matmul(xn, wk)
        v = _nb_matmul(xn, wv)
        probs = np.empty((n_heads, n, n))
        tap = np.empty((n_heads, n_query, n_vis))
        ctx = np.empty((n, n_heads * head_dim))
        for h in range(n_heads):
            lo = h * head_dim
            hi = lo + head_dim
            kt = np.ascontiguousarray(k[:, lo:hi].T)
            logits = _nb_matmul(q[:, lo:hi], kt)
            for i in range(n):
                for j in range(n):
                    logits[i, j] = logits[i, j] * scale
            probs[h] = _nb_softmax_rows(logits)
            tap[h] = _nb_softmax_rows(logits[n - n_query :, :n_vis])
            ctx[:, lo:hi] = _nb_matmul(probs[h], v[:, lo:hi])
        return _nb_matmul(ctx, wo), tap, probs

    @_jit
    def _nb_gated_ffn(xn, wg, wu, wd):
        g = _nb_matmul(xn, wg)
        u = _nb_matmul(xn, wu)
        n, m = g.shape
        act = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                gij = g[i, j]
                act[i, j] = gij / (1.0 + np.exp(-gij)) * u[i, j]
        return _nb_matmul(act, wd)

    @_jit
    def _nb_l2_normalize_rows(z):
        n, dim = z.shape
        out = np.zeros((n, dim))
        for i in range(n):
            ss = 0.0
            for c in range(dim):
                ss += z[i, c] * z[i, c]
            if ss > 0.0:
                norm = np.sqrt(ss)
                for c in range(dim):
                    out[i, c] = z[i, c] / norm
        return out

    @_jit
    def _nb_argmax_rows(c):
        n, m = c.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = 0
            for j in range(1, m):
                if c[i, j] > c[i, best]:
                    best = j
            out[i] = best
        return out

    @_jit
    def _nb_dot(a, b):
        s = 0.0
        for i in range(a.shape[0]):
            s += a[i] * b[i]
        return s


if BACKEND == "numba":
    matmul = _nb_matmul
    softmax_rows = _nb_softmax_rows
    rms_norm = _nb_rms_norm
    attention = _nb_attention
    gated_ffn = _nb_gated_ffn
    l2_normalize_rows = _nb_l2_normalize_rows
    argmax_rows = _nb_argmax_rows
    dot = _nb_dot
else:
    matmul = _np_matmul
    softmax_rows = _np_softmax_rows
    rms_norm = _np_rms_norm
    attention = _np_attention
    gated_ffn = _np_gated_ffn
    l2_normalize_rows = _np_l2_normalize_rows
    argmax_rows = _np_argmax_rows
    dot = _np_dot


def warmup():
    """Compile every kernel once so timing excludes JIT latency."""
    a = np.ones((5, 9))
    a[:, 0] = 1.0
    w = np.ones((9, 9)) * 0.01
    matmul(a, w)
    softmax_rows(a)
    xn = rms_norm(a, 1e-6)
    attention(xn, w, w, w, w, 3, 3, 0.5, 3, 1)
    gated_ffn(xn, w, w, w)
    l2_normalize_rows(a)
    argmax_rows(a)
    dot(a[0], a[1])
