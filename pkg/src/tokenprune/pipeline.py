"""Per-episode pruning loop and batch driver.

Every step runs layers ``0..prune_layer`` on all tokens first; the shallow
saliency from that prefix feeds the keyframe rule, and the same prefix is
finished either unpruned (keyframe) or on the selected keep set.

Variants:
  full            forecast fusion + cosine-threshold keyframes
  shallow_only    fusion weight forced to 0, keyframe only at t=0
  fixed_interval  forecast fusion, keyframes whenever t % interval == 0
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .cost_model import CostParams, full_flops, pruned_flops_for_keep
from .errors import ConfigError
from .forecast import aggregate_deep, predict_future_saliency
from .keyframe import (
    KeyframeDecision,
    detect_boundary,
    fixed_interval_selector,
    initial_decision,
    refresh_cache,
)
from .pruner import PruneDecision, fuse_scores, select_keep_set
from .saliency import compute_saliency
from .toy_vla.model import forward_prefix, forward_suffix

MODES = ("full", "shallow_only", "fixed_interval")


@dataclass(frozen=True)
class PipelineVariant:
    mode: str = "full"
    interval: int = 4

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"variant must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed_interval" and self.interval < 1:
            raise ConfigError("interval must be >= 1")
        return self


@dataclass(frozen=True)
class StepTrace:
    timestep: int
    decision: PruneDecision
    keyframe: KeyframeDecision
    ref_timestep: int
    action: np.ndarray
    flops: int
    shallow_scores: np.ndarray
    deep_forecast: np.ndarray = None

    @property
    def kept_shallow_mass(self):
        return float(self.shallow_scores[self.decision.keep_indices].sum())

    @property
    def taps_kept(self):
        """Visual width seen by the layers after the prune layer, and the shallow mass it keeps."""
        return {"width": self.decision.keep_count, "shallow_mass": self.kept_shallow_mass}


def cost_params_for(model, episode, pruner_cfg):
    first = episode[0]
    return CostParams(
        hidden_dim=model.config.hidden_dim,
        ffn_dim=model.config.ffn_dim,
        num_layers=model.num_layers,
        num_visual=first.num_visual,
        num_rest=first.rest_count,
        prune_layer=pruner_cfg.prune_layer,
        prune_ratio=pruner_cfg.prune_ratio,
    )


def _decide(variant, cfg, t, shallow, predicted):
    if predicted is None:
        return initial_decision()
    ls = cfg.prune_layer
    if variant.mode == "full":
        return detect_boundary(shallow, predicted[ls], cfg.keyframe_threshold, t)
    kappa = numerics.cosine(shallow.scores, predicted[ls].scores)
    if variant.mode == "fixed_interval":
        return fixed_interval_selector(t, variant.interval, kappa)
    # shallow_only: threshold rule with an unreachable threshold
    return KeyframeDecision(timestep=t, similarity=kappa, is_keyframe=False, reason="threshold")


def compute_prefixes(model, episode, prune_layer):
    """Layers ``0..prune_layer`` for every step; reusable across variants and ratios."""
    return [forward_prefix(model, stream, prune_layer) for stream in episode]


def run_episode(model, episode, pruner_cfg, variant=PipelineVariant(), prefixes=None):
    """Run the pruning loop over one episode; returns one StepTrace per timestep.

    ``prefixes`` may hold the output of ``compute_prefixes`` for the same
    episode and prune layer; it only saves recomputation.
    """
    if len(episode) == 0:
        raise ConfigError("episode is empty")
    variant.validate()
    L = model.num_layers
    cfg = pruner_cfg.validate(L)
    deep = cfg.resolved_deep_layers(L)
    ls = cfg.prune_layer
    weight = 0.0 if variant.mode == "shallow_only" else cfg.fusion_weight
    cost = cost_params_for(model, episode, cfg)
    full_cost = full_flops(cost)
    n_vis = cost.num_visual
    if prefixes is not None:
        if len(prefixes) != len(episode) or any(p.layer != ls for p in prefixes):
            raise ConfigError(f"prefixes must cover every step at prune layer {ls}")

    traces = []
    cache = None
    for t, stream in enumerate(episode):
        if stream.num_visual != n_vis or stream.rest_count != cost.num_rest:
            raise ConfigError(f"token counts change mid-episode at t={t}")
        partial = prefixes[t] if prefixes is not None else forward_prefix(model, stream, ls)
        shallow = compute_saliency(partial.taps[ls], t)
        predicted = None
        ref = -1
        if cache is not None:
            predicted, _ = predict_future_saliency(stream.visual_tokens, cache, t)
            ref = cache.ref_timestep
        kd = _decide(variant, cfg, t, shallow, predicted)

        deep_pred = aggregate_deep(predicted, deep) if predicted is not None else None
        if kd.is_keyframe:
            action, taps = forward_suffix(model, partial, None)
            cache = refresh_cache(cache, t, taps, stream.visual_tokens, L)
            decision = PruneDecision(
                fused_scores=shallow.scores,
                keep_indices=np.arange(n_vis),
                keep_count=n_vis,
                is_keyframe=True,
                similarity=kd.similarity,
            )
            flops = full_cost
        else:
            fused = fuse_scores(shallow, deep_pred, weight)
            keep, k = select_keep_set(fused, cfg.prune_ratio)
            action, _ = forward_suffix(model, partial, keep)
            decision = PruneDecision(
                fused_scores=fused,
                keep_indices=keep,
                keep_count=k,
                is_keyframe=False,
                similarity=kd.similarity,
            )
            flops = pruned_flops_for_keep(cost, k)
        traces.append(
            StepTrace(
                timestep=t,
                decision=decision,
                keyframe=kd,
                ref_timestep=ref,
                action=action,
                flops=flops,
                shallow_scores=shallow.scores,
                deep_forecast=deep_pred,
            )
        )
    return traces


@dataclass(frozen=True)
class EpisodeSummary:
    index: int
    checksum: str
    num_steps: int
    keyframes: tuple
    total_flops: int
    baseline_flops: int
    mean_keep_count: float

    def to_dict(self):
        return {
            "index": self.index,
            "checksum": self.checksum,
            "num_steps": self.num_steps,
            "keyframes": list(self.keyframes),
            "total_flops": self.total_flops,
            "baseline_flops": self.baseline_flops,
            "mean_keep_count": self.mean_keep_count,
        }


@dataclass(frozen=True)
class BatchReport:
    variant: PipelineVariant
    episodes: tuple
    traces: tuple = field(repr=False, default=())

    @property
    def total_flops(self):
        return sum(e.total_flops for e in self.episodes)

    @property
    def baseline_flops(self):
        return sum(e.baseline_flops for e in self.episodes)

    @property
    def total_steps(self):
        return sum(e.num_steps for e in self.episodes)

    def summary(self):
        n = len(self.episodes)
        total = self.total_flops
        return {
            "mode": self.variant.mode,
            "interval": self.variant.interval if self.variant.mode == "fixed_interval" else None,
            "episodes": n,
            "steps": self.total_steps,
            "keyframes_mean": sum(len(e.keyframes) for e in self.episodes) / n,
            "flops_total": total,
            "flops_mean_per_step": total / self.total_steps,
            "tflops_mean_per_step": total / self.total_steps / 1e12,
            "baseline_flops_total": self.baseline_flops,
            "speedup": self.baseline_flops / total,
            "mean_keep_count": sum(e.mean_keep_count * e.num_steps for e in self.episodes)
            / self.total_steps,
        }


def summarize_episode(index, episode, traces, model, pruner_cfg):
    cost = cost_params_for(model, episode, pruner_cfg)
    return EpisodeSummary(
        index=index,
        checksum=episode.checksum(),
        num_steps=len(traces),
        keyframes=tuple(tr.timestep for tr in traces if tr.decision.is_keyframe),
        total_flops=sum(tr.flops for tr in traces),
        baseline_flops=len(traces) * full_flops(cost),
        mean_keep_count=sum(tr.decision.keep_count for tr in traces) / len(traces),
    )


def run_batch(model, episodes, pruner_cfg, variant=PipelineVariant(), workers=1):
    """Run every episode independently; output order follows input order."""
    episodes = list(episodes)
    if not episodes:
        raise ConfigError("run_batch needs at least one episode")
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    def one(item):
        i, ep = item
        traces = run_episode(model, ep, pruner_cfg, variant)
        return summarize_episode(i, ep, traces, model, pruner_cfg), traces

    items = list(enumerate(episodes))
    if workers == 1:
        results = [one(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    return BatchReport(
        variant=variant,
        episodes=tuple(r[0] for r in results),
        traces=tuple(r[1] for r in results),
    )
