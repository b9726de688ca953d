"""Diagnostic measurements over pipeline traces."""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import numerics
from ..errors import ConfigError
from ..forecast import aggregate_deep, predict_future_saliency
from ..keyframe import refresh_cache
from ..saliency import compute_saliency
from ..toy_vla.model import forward_full, forward_suffix


def core_set(deep_saliency, core_fraction=0.1):
    scores = numerics.as_vector(getattr(deep_saliency, "scores", deep_saliency), "deep saliency")
    if not 0.0 < core_fraction <= 1.0:
        raise ConfigError(f"core_fraction must be in (0, 1], got {core_fraction}")
    k = max(1, math.ceil(round(core_fraction * scores.shape[0], 9)))
    return numerics.top_k_indices(scores, k)


def core_token_loss(keep, deep_saliency, core_fraction=0.1):
    """Fraction of the top ``core_fraction`` deep-saliency tokens missing from ``keep``."""
    core = core_set(deep_saliency, core_fraction)
    kept = set(int(i) for i in np.asarray(keep).ravel())
    lost = sum(1 for i in core if int(i) not in kept)
    return lost / len(core)


def full_pass_saliency(model, stream, timestep=0, partial=None):
    """Per-layer saliency from an unpruned forward of one step.

    ``partial`` (a prefix of the same stream) lets the pass resume from it.
    """
    if partial is None:
        _, taps = forward_full(model, stream)
    else:
        _, taps = forward_suffix(model, partial, None)
    return tuple(compute_saliency(tap, timestep) for tap in taps), taps


def actual_deep_saliency(model, episode, deep_layers, prefixes=None):
    """Deep-set mean of the unpruned saliency at every step."""
    out = []
    for t, stream in enumerate(episode):
        partial = prefixes[t] if prefixes is not None else None
        sal, _ = full_pass_saliency(model, stream, t, partial)
        out.append(aggregate_deep(sal, deep_layers))
    return out


def episode_core_loss(traces, reference, core_fraction=0.1):
    """Mean core-token loss over all steps after t=0; keyframe steps count as zero loss."""
    if len(traces) != len(reference):
        raise ConfigError("trace and reference lengths differ")
    rates = [
        core_token_loss(tr.decision.keep_indices, reference[tr.timestep], core_fraction)
        for tr in traces[1:]
    ]
    if not rates:
        return 0.0
    return math.fsum(rates) / len(rates)


def keyframe_stats(traces):
    pos = [tr.timestep for tr in traces if tr.decision.is_keyframe]
    return {"count": len(pos), "positions": pos}


@dataclass
class ForecastCurve:
    """Running sums per offset; ``rows()`` turns them into (offset, cosine, KL, n) tuples."""

    max_offset: int
    cos_sum: list = field(default_factory=list)
    kl_sum: list = field(default_factory=list)
    count: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        if self.max_offset < 1:
            raise ConfigError("max_offset must be >= 1")
        n = self.max_offset
        self.cos_sum = self.cos_sum or [0.0] * n
        self.kl_sum = self.kl_sum or [0.0] * n
        self.count = self.count or [0] * n
        self.skipped = self.skipped or [0] * n

    def add(self, offset, cos, kl):
        self.cos_sum[offset - 1] += cos
        self.kl_sum[offset - 1] += kl
        self.count[offset - 1] += 1

    def skip(self, offset):
        self.skipped[offset - 1] += 1

    def merge(self, other):
        if other.max_offset != self.max_offset:
            raise ConfigError("cannot merge curves with different max_offset")
        for i in range(self.max_offset):
            self.cos_sum[i] += other.cos_sum[i]
            self.kl_sum[i] += other.kl_sum[i]
            self.count[i] += other.count[i]
            self.skipped[i] += other.skipped[i]
        return self

    def rows(self):
        out = []
        for i in range(self.max_offset):
            n = self.count[i]
            cos = self.cos_sum[i] / n if n else float("nan")
            kl = self.kl_sum[i] / n if n else float("nan")
            out.append((i + 1, cos, kl, n))
        return out


def _segments(episode):
    starts = [0]
    for t in range(1, len(episode)):
        if episode[t].subtask != episode[t - 1].subtask:
            starts.append(t)
    ends = starts[1:] + [len(episode)]
    return list(zip(starts, ends))


def forecast_accuracy_curve(episode, model, pruner_cfg, max_offset=10):
    """Forecast quality vs. steps since the keyframe, one reference per subtask.

    Each subtask's first step is the reference; offsets that would land in the
    next subtask (or past the episode) are counted in ``skipped``.
    """
    if len(episode) <= max_offset:
        raise ConfigError(f"episode length {len(episode)} must exceed max_offset {max_offset}")
    L = model.num_layers
    deep = pruner_cfg.validate(L).resolved_deep_layers(L)
    curve = ForecastCurve(max_offset)
    actual = {}

    def saliency_at(t):
        if t not in actual:
            actual[t] = full_pass_saliency(model, episode[t], t)
        return actual[t]

    for start, end in _segments(episode):
        _, taps = saliency_at(start)
        cache = refresh_cache(None, start, taps, episode[start].visual_tokens, L)
        for off in range(1, max_offset + 1):
            t = start + off
            if t >= end:
                curve.skip(off)
                continue
            truth, _ = saliency_at(t)
            pred, _ = predict_future_saliency(episode[t].visual_tokens, cache, t)
            cos = math.fsum(numerics.cosine(truth[l].scores, pred[l].scores) for l in deep)
            kl = math.fsum(numerics.kl_divergence(truth[l].scores, pred[l].scores) for l in deep)
            curve.add(off, cos / len(deep), kl / len(deep))
    return curve
