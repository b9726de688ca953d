import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ConfigError


@dataclass(frozen=True)
class PrunerConfig:
    """Pruning hyperparameters; ``deep_layers=None`` means {0, L-2, L-1}."""

    prune_layer: int = 3
    deep_layers: tuple = None
    fusion_weight: float = 0.5
    prune_ratio: float = 0.8
    keyframe_threshold: float = 0.92

    def resolved_deep_layers(self, num_layers):
        if self.deep_layers is None:
            return tuple(sorted({0, num_layers - 2, num_layers - 1}))
        return tuple(sorted(set(int(x) for x in self.deep_layers)))

    def validate(self, num_layers):
        if not 0 <= self.prune_layer < num_layers:
            raise ConfigError(f"prune_layer must be in [0, {num_layers}), got {self.prune_layer}")
        deep = self.resolved_deep_layers(num_layers)
        if not deep:
            raise ConfigError("deep_layers must be nonempty")
        if deep[0] < 0 or deep[-1] >= num_layers:
            raise ConfigError(f"deep_layers must lie in [0, {num_layers}), got {list(deep)}")
        if not 0.0 <= self.fusion_weight <= 1.0:
            raise ConfigError(f"fusion_weight must be in [0, 1], got {self.fusion_weight}")
        if not 0.0 <= self.prune_ratio < 1.0:
            raise ConfigError(f"prune_ratio must be in [0, 1), got {self.prune_ratio}")
        if not math.isfinite(self.keyframe_threshold):
            raise ConfigError("keyframe_threshold must be finite")
        return self


@dataclass(frozen=True)
class PruneDecision:
    fused_scores: np.ndarray
    keep_indices: np.ndarray
    keep_count: int
    is_keyframe: bool
    similarity: float


def keep_count(num_visual, prune_ratio):
    """K = max(1, ceil((1 - rho) * L_vis)); rounding guards float residue like 3.0000000000000004."""
    return max(1, math.ceil(round((1.0 - prune_ratio) * num_visual, 9)))


def fuse_scores(shallow, deep_pred, weight):
    shallow = numerics.as_vector(getattr(shallow, "scores", shallow), "shallow")
    deep_pred = numerics.as_vector(deep_pred, "deep prediction")
    if shallow.shape != deep_pred.shape:
        raise ConfigError(f"length mismatch: {shallow.shape[0]} vs {deep_pred.shape[0]}")
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"fusion weight must be in [0, 1], got {weight}")
    return (1.0 - weight) * shallow + weight * deep_pred


def select_keep_set(scores, prune_ratio):
    """Top-K token indices (ascending) and K."""
    scores = numerics.as_vector(scores, "scores")
    if not 0.0 <= prune_ratio < 1.0:
        raise ConfigError(f"prune_ratio must be in [0, 1), got {prune_ratio}")
    k = keep_count(scores.shape[0], prune_ratio)
    return numerics.top_k_indices(scores, k), k
