from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SaliencyVector:
    """Head- and query-averaged attention mass per visual token."""

    layer: int
    timestep: int
    scores: np.ndarray

    def __len__(self):
        return self.scores.shape[0]


def saliency_scores(attention):
    """Mean of an (N_h, L_query, L_vis) attention tensor over heads and queries."""
    n_heads, n_query, n_vis = attention.shape
    total = np.zeros(n_vis)
    for h in range(n_heads):
        for t in range(n_query):
            total += attention[h, t]
    return total / (n_heads * n_query)


def compute_saliency(tap, timestep=0):
    return SaliencyVector(layer=tap.layer, timestep=timestep, scores=saliency_scores(tap.attention))
