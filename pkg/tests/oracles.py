"""Slow, obviously-correct reference implementations used only by tests."""

import math
from fractions import Fraction


def layer_cost(n, d, m):
    # written out term by term in exact integers
    attn_proj = 4 * n * d * d
    attn_mix = 2 * n * n * d
    ffn = 3 * n * d * m
    return attn_proj + attn_mix + ffn


def keep_count(n_vis, rho_text):
    """K from a decimal string for rho, in exact rational arithmetic."""
    keep = (1 - Fraction(rho_text)) * n_vis
    return max(1, math.ceil(keep))


def _cos(a, b):
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (math.sqrt(na) * math.sqrt(nb))


def nearest_neighbors(current, reference):
    """Brute force over all pairs; lowest index wins ties."""
    ref = [list(b) for b in reference]
    out = []
    for a in current:
        a = list(a)
        best, best_sim = 0, -math.inf
        for j, b in enumerate(ref):
            s = _cos(a, b)
            if s > best_sim:
                best, best_sim = j, s
        out.append(best)
    return out


def predict_future_saliency(current, reference, cached):
    """Double loop over layers and tokens, one lookup at a time.

    ``cached`` is a list of per-layer score lists; returns (mapping, predicted).
    """
    mapping = nearest_neighbors(current, reference)
    predicted = []
    for layer_scores in cached:
        row = []
        for v in range(len(current)):
            row.append(layer_scores[mapping[v]])
        predicted.append(row)
    return mapping, predicted


def saliency(attention):
    """Scalar triple loop mean over heads and queries."""
    n_heads = len(attention)
    n_query = len(attention[0])
    n_vis = len(attention[0][0])
    out = []
    for v in range(n_vis):
        s = 0.0
        for h in range(n_heads):
            for t in range(n_query):
                s += attention[h][t][v]
        out.append(s / (n_heads * n_query))
    return out


def deep_mean(rows, layers):
    layers = sorted(set(layers))
    n = len(rows[0])
    out = []
    for v in range(n):
        s = 0.0
        for ell in layers:
            s += rows[ell][v]
        out.append(s / len(layers))
    return out
