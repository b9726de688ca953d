"""Subtask-boundary detection and keyframe cache refresh."""

from dataclasses import dataclass

from . import numerics
from .errors import ConfigError, ContractError
from .forecast import KeyframeCache
from .saliency import compute_saliency

REASONS = ("initial", "threshold", "fixed_interval", "forced_full")


@dataclass(frozen=True)
class KeyframeDecision:
    timestep: int
    similarity: float
    is_keyframe: bool
    reason: str


def initial_decision():
    return KeyframeDecision(timestep=0, similarity=1.0, is_keyframe=True, reason="initial")


def detect_boundary(shallow, predicted_shallow, threshold, timestep=0):
    """Keyframe iff cos(actual shallow saliency, forecast shallow saliency) < threshold."""
    actual = getattr(shallow, "scores", shallow)
    predicted = getattr(predicted_shallow, "scores", predicted_shallow)
    kappa = numerics.cosine(actual, predicted)
    return KeyframeDecision(
        timestep=timestep, similarity=kappa, is_keyframe=kappa < threshold, reason="threshold"
    )


def fixed_interval_selector(t, n, similarity=float("nan")):
    if n < 1:
        raise ConfigError(f"keyframe interval must be >= 1, got {n}")
    return KeyframeDecision(
        timestep=t, similarity=similarity, is_keyframe=t % n == 0, reason="fixed_interval"
    )


def refresh_cache(cache, t, taps, embeddings, num_layers=None):
    """New cache anchored at ``t`` from a full-token pass; ``cache`` is superseded."""
    expected = num_layers if num_layers is not None else (
        cache.num_layers if cache is not None else len(taps)
    )
    if len(taps) != expected:
        raise ContractError(f"refresh needs taps for all {expected} layers, got {len(taps)}")
    n_vis = embeddings.shape[0]
    for tap in taps:
        if tap.width != n_vis:
            raise ContractError(
                f"layer {tap.layer} tap covers {tap.width} of {n_vis} visual tokens; "
                "refresh requires a full-token pass"
            )
    return KeyframeCache(
        ref_timestep=t,
        ref_embeddings=embeddings,
        ref_saliency=tuple(compute_saliency(tap, t) for tap in taps),
    )
