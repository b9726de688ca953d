"""Dense linear-algebra and statistics primitives shared by every module.

Matrices are 2-D float64 numpy arrays and vectors 1-D float64 arrays. All
reductions run in a fixed left-to-right order so results reproduce bit for bit.
Ties resolve to the lowest index everywhere.
"""

import math

import numpy as np

from . import _kernels
from .errors import ConfigError

COSINE_EPS = 1e-12
KL_EPS = 1e-10


def as_matrix(m, name="matrix"):
    arr = np.ascontiguousarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(v, name="vector"):
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def matmul(a, b):
    """Matrix product ``a @ b`` with per-element left-to-right accumulation."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ConfigError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return _kernels.matmul(a, b)


def softmax_rows(m):
    """Row-wise softmax with max subtraction; each row sums to 1."""
    return _kernels.softmax_rows(as_matrix(m))


def dot(a, b):
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(_kernels.dot(a, b))


def norm(a):
    a = as_vector(a)
    return math.sqrt(_kernels.dot(a, a))


def cosine(a, b):
    """Cosine similarity; 0.0 when either input has (near-)zero norm."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ConfigError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(_kernels.dot(a, a))
    nb = math.sqrt(_kernels.dot(b, b))
    if na < COSINE_EPS or nb < COSINE_EPS:
        return 0.0
    if np.array_equal(a, b):
        # exact, so cos(x, x) never dips below a threshold of 1.0
        return 1.0
    c = _kernels.dot(a, b) / (na * nb)
    return min(1.0, max(-1.0, c))


def smooth_distribution(p, eps=KL_EPS):
    p = as_vector(p) + eps
    return p / math.fsum(p)


def kl_divergence(p, q):
    """KL(p || q) in nats after adding ``KL_EPS`` to both and renormalizing."""
    p = as_vector(p, "p")
    q = as_vector(q, "q")
    if p.shape != q.shape:
        raise ConfigError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    if np.any(p < 0) or np.any(q < 0):
        raise ConfigError("kl_divergence inputs must be nonnegative")
    ps = smooth_distribution(p)
    qs = smooth_distribution(q)
    kl = math.fsum(ps * np.log(ps / qs))
    # Gibbs' inequality; clamp rounding residue below zero
    return max(0.0, kl)


def top_k_indices(scores, k):
    """Indices of the ``k`` largest scores (lower index wins ties), ascending."""
    scores = as_vector(scores, "scores")
    n = scores.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k]).astype(np.int64)


def argmax_row(row):
    row = as_vector(row, "row")
    if row.shape[0] == 0:
        raise ConfigError("argmax of an empty vector")
    return int(np.argmax(row))


def argmax_rows(m):
    """Per-row argmax with lowest-index tie-break."""
    m = as_matrix(m)
    if m.shape[1] == 0:
        raise ConfigError("argmax over zero columns")
    return _kernels.argmax_rows(m)


def l2_normalize_rows(m):
    """Scale each row to unit L2 norm; all-zero rows stay zero."""
    return _kernels.l2_normalize_rows(as_matrix(m))


def check_finite(m, name="value"):
    if not np.all(np.isfinite(m)):
        raise ConfigError(f"{name} contains NaN or Inf")
    return m
