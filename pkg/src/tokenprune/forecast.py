"""Deep-layer saliency forecasting from the latest keyframe.

Each current visual token is matched to the reference token with the highest
cosine similarity of encoder embeddings; every cached layer's saliency is then
read through that mapping. Transferred scores are not renormalized: a
many-to-one mapping duplicates mass, and the pruner only needs their order.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ConfigError
from .saliency import SaliencyVector


@dataclass(frozen=True)
class KeyframeCache:
    ref_timestep: int
    ref_embeddings: np.ndarray
    ref_saliency: tuple

    @property
    def num_layers(self):
        return len(self.ref_saliency)

    def stacked(self):
        """Cached saliency as an (L, L_vis) array."""
        return np.stack([s.scores for s in self.ref_saliency])


@dataclass(frozen=True)
class CorrespondenceMap:
    mapping: np.ndarray
    similarity: np.ndarray


def build_correspondence(current, reference):
    """Map each row of ``current`` to its most similar row of ``reference``."""
    current = numerics.as_matrix(current, "current embeddings")
    reference = numerics.as_matrix(reference, "reference embeddings")
    if current.shape != reference.shape:
        raise ConfigError(
            f"embedding shapes differ: current {current.shape} vs reference {reference.shape}"
        )
    sim = numerics.matmul(
        numerics.l2_normalize_rows(current),
        np.ascontiguousarray(numerics.l2_normalize_rows(reference).T),
    )
    return CorrespondenceMap(mapping=numerics.argmax_rows(sim), similarity=sim)


def transfer_saliency(corr, cache, timestep=0):
    """Read every cached layer through the correspondence map."""
    stacked = cache.stacked()
    if stacked.shape[1] != corr.mapping.shape[0]:
        raise ConfigError("correspondence and cache disagree on the visual token count")
    moved = stacked[:, corr.mapping]
    return tuple(
        SaliencyVector(layer=s.layer, timestep=timestep, scores=moved[i])
        for i, s in enumerate(cache.ref_saliency)
    )


def aggregate_deep(predicted, deep_set):
    """Elementwise mean of the predicted saliency over the layers in ``deep_set``."""
    layers = sorted(set(int(x) for x in deep_set))
    if not layers:
        raise ConfigError("deep layer set is empty")
    if layers[0] < 0 or layers[-1] >= len(predicted):
        raise ConfigError(f"deep layers {layers} outside [0, {len(predicted)})")
    total = np.zeros_like(predicted[layers[0]].scores)
    for ell in layers:
        total += predicted[ell].scores
    return total / len(layers)


def predict_future_saliency(current, cache, timestep=0):
    """Correspondence plus transfer; returns (predicted per-layer saliency, map)."""
    corr = build_correspondence(current, cache.ref_embeddings)
    return transfer_saliency(corr, cache, timestep), corr
