"""Build models and suites from a HarnessConfig and aggregate metrics."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .. import __version__
from ..cost_model import CostParams, sweep
from ..errors import ConfigError, ContractError
from ..pipeline import (
    MODES,
    PipelineVariant,
    compute_prefixes,
    run_episode,
    summarize_episode,
)
from ..pruner import PrunerConfig
from ..toy_vla.episodes import EpisodeConfig, generate_episode, suite_configs
from ..toy_vla.model import ModelConfig, build_model
from . import metrics
from .io import SCHEMA_VERSION


def model_config(cfg):
    return ModelConfig(
        num_layers=cfg["num_layers"],
        hidden_dim=cfg["hidden_dim"],
        num_heads=cfg["num_heads"],
        head_dim=cfg["head_dim"],
        ffn_dim=cfg["ffn_dim"],
        action_dim=cfg["action_dim"],
        temperature_slope=cfg["temperature_slope"],
        seed=cfg["model_seed"],
    ).validate()


def episode_base(cfg):
    return EpisodeConfig(
        num_timesteps=cfg["timesteps"],
        num_tokens=cfg["num_tokens"],
        semantic_groups=cfg["semantic_groups"],
        target_group_schedule=((0, 1),),
        motion_amplitude=cfg["motion_amplitude"],
        noise_sigma=cfg["noise_sigma"],
        seed=0,
        object_width=cfg["object_width"],
        part_width=cfg["part_width"],
        distractor_width=cfg["distractor_width"],
        distractor_salience=cfg["distractor_salience"],
        part_coarse=cfg["part_coarse"],
        num_query=cfg["num_query"],
        num_text=cfg["num_text"],
    ).validate()


def single_prune_layer(cfg):
    layers = cfg["prune_layer"]
    if len(layers) != 1:
        raise ConfigError(f"[pruner] prune_layer: expected one layer here, got {list(layers)}")
    return layers[0]


def pruner_config(cfg, num_layers):
    rhos = cfg["rho"]
    if not rhos:
        raise ConfigError("[pruner] rho: empty")
    for r in rhos:
        if not 0.0 <= r < 1.0:
            raise ConfigError(f"[pruner] rho: {r} outside [0, 1)")
    pc = PrunerConfig(
        prune_layer=single_prune_layer(cfg),
        deep_layers=cfg["deep_layers"],
        fusion_weight=cfg["lambda"],
        prune_ratio=rhos[0],
        keyframe_threshold=cfg["gamma"],
    )
    try:
        return pc.validate(num_layers)
    except ConfigError as e:
        # report the harness key names, not the dataclass field names
        msg = str(e)
        for field_name, key in _PRUNER_KEYS:
            msg = msg.replace(field_name, key)
        raise ConfigError(f"[pruner] {msg}") from e


_PRUNER_KEYS = (("fusion_weight", "lambda"), ("keyframe_threshold", "gamma"), ("prune_ratio", "rho"))


def variant_from(cfg, mode=None):
    mode = mode or cfg["variant"]
    if mode not in MODES:
        raise ConfigError(f"[variant] variant: must be one of {MODES}, got {mode!r}")
    if cfg["interval"] < 1:
        raise ConfigError("[variant] interval: must be >= 1")
    return PipelineVariant(mode=mode, interval=cfg["interval"])


def build_suite(cfg, model_cfg):
    n = cfg["episodes"]
    if n < 1:
        raise ConfigError("[run] episodes: must be >= 1")
    configs = suite_configs(n, episode_base(cfg), cfg["seed"], transitions=cfg["transitions"])
    return [generate_episode(c, model_cfg) for c in configs]


def _check_workers(cfg):
    if cfg["workers"] < 1:
        raise ConfigError("[run] workers: must be >= 1")
    return cfg["workers"]


def map_episodes(fn, episodes, workers):
    """Apply ``fn(index, episode)``; results come back in episode order."""
    items = list(enumerate(episodes))
    if workers == 1:
        return [fn(i, ep) for i, ep in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def _rho_key(rho):
    return f"{rho:g}"


def evaluate(cfg, modes):
    """Run ``modes`` at every configured rho on one shared suite."""
    mcfg = model_config(cfg)
    model = build_model(mcfg)
    base = pruner_config(cfg, model.num_layers)
    variants = [variant_from(cfg, m) for m in modes]
    episodes = build_suite(cfg, mcfg)
    measure = cfg["measure_core_loss"]
    core_fraction = cfg["core_fraction"]
    deep = base.resolved_deep_layers(model.num_layers)

    def one(index, ep):
        prefixes = compute_prefixes(model, ep, base.prune_layer)
        ref = metrics.actual_deep_saliency(model, ep, deep, prefixes) if measure else None
        out = {}
        for v in variants:
            for r in cfg["rho"]:
                pc = replace(base, prune_ratio=r)
                traces = run_episode(model, ep, pc, v, prefixes)
                out[(v.mode, r)] = {
                    "summary": summarize_episode(index, ep, traces, model, pc),
                    "core_loss": metrics.episode_core_loss(traces, ref, core_fraction)
                    if measure
                    else None,
                }
        return out

    per_episode = map_episodes(one, episodes, _check_workers(cfg))
    results = {}
    for v in variants:
        by_rho = {}
        for r in cfg["rho"]:
            cells = [pe[(v.mode, r)] for pe in per_episode]
            by_rho[_rho_key(r)] = _aggregate(cells, measure)
        entry = {"by_rho": by_rho}
        if v.mode == "fixed_interval":
            entry["interval"] = v.interval
        results[v.mode] = entry
    return {
        "model_checksum": model.checksum(),
        "episodes": [_episode_echo(i, ep) for i, ep in enumerate(episodes)],
        "variants": results,
    }


def _episode_echo(i, ep):
    return {
        "index": i,
        "checksum": ep.checksum(),
        "seed": ep.config.seed,
        "schedule": [list(p) for p in ep.config.target_group_schedule],
    }


def _aggregate(cells, measure):
    summaries = [c["summary"] for c in cells]
    steps = sum(s.num_steps for s in summaries)
    total = sum(s.total_flops for s in summaries)
    baseline = sum(s.baseline_flops for s in summaries)
    out = {
        "steps": steps,
        "flops_total": total,
        "flops_mean_per_step": total / steps,
        "tflops_mean_per_step": total / steps / 1e12,
        "baseline_flops_total": baseline,
        "speedup": baseline / total,
        "mean_keep_count": math.fsum(s.mean_keep_count * s.num_steps for s in summaries) / steps,
        "keyframes": {
            "mean_count": math.fsum(len(s.keyframes) for s in summaries) / len(summaries),
            "positions": [list(s.keyframes) for s in summaries],
        },
        "core_token_loss": None,
    }
    if measure:
        out["core_token_loss"] = math.fsum(c["core_loss"] for c in cells) / len(cells)
    return out


def forecast_report(cfg):
    mcfg = model_config(cfg)
    model = build_model(mcfg)
    pc = pruner_config(cfg, model.num_layers)
    max_offset = cfg["max_offset"]
    if max_offset < 1:
        raise ConfigError("[run] max_offset: must be >= 1")
    if cfg["timesteps"] <= max_offset:
        raise ConfigError(
            f"[episode] timesteps: must exceed max_offset ({cfg['timesteps']} <= {max_offset})"
        )
    episodes = build_suite(cfg, mcfg)
    curves = map_episodes(
        lambda i, ep: metrics.forecast_accuracy_curve(ep, model, pc, max_offset),
        episodes,
        _check_workers(cfg),
    )
    total = metrics.ForecastCurve(max_offset)
    for c in curves:
        total.merge(c)
    rows = [
        {"offset": o, "cosine": (cos if n else None), "kl": (kl if n else None), "count": n,
         "skipped": total.skipped[o - 1]}
        for o, cos, kl, n in total.rows()
    ]
    return {
        "model_checksum": model.checksum(),
        "episodes": [_episode_echo(i, ep) for i, ep in enumerate(episodes)],
        "deep_layers": list(pc.resolved_deep_layers(model.num_layers)),
        "curve": rows,
        "flagged_offsets": [r["offset"] for r in rows if r["skipped"]],
    }


def sweep_rows(cfg):
    mcfg = model_config(cfg)
    p = CostParams(
        hidden_dim=mcfg.hidden_dim,
        ffn_dim=mcfg.ffn_dim,
        num_layers=mcfg.num_layers,
        num_visual=cfg["num_tokens"],
        num_rest=cfg["num_text"] + cfg["num_query"],
    ).validate()
    for ell in cfg["prune_layer"]:
        if not 0 <= ell <= p.num_layers:
            raise ConfigError(f"[pruner] prune_layer: {ell} outside [0, {p.num_layers}]")
    for r in cfg["rho"]:
        if not 0.0 <= r <= 1.0:
            raise ConfigError(f"[pruner] rho: {r} outside [0, 1]")
    return sweep(p, cfg["rho"], cfg["prune_layer"], continuous=cfg["continuous"])


def envelope(command, cfg, body):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg.echo(),
    }
    doc.update(body)
    validate_report(doc)
    return doc


def validate_report(doc):
    """Range checks on every emitted metric."""

    def bad(msg):
        raise ContractError(f"report failed validation: {msg}")

    for mode, entry in doc.get("variants", {}).items():
        for rho, cell in entry["by_rho"].items():
            if cell["flops_total"] <= 0:
                bad(f"{mode}@{rho}: non-positive FLOPs")
            loss = cell["core_token_loss"]
            if loss is not None and not 0.0 <= loss <= 1.0:
                bad(f"{mode}@{rho}: core-token loss {loss} outside [0, 1]")
    for row in doc.get("curve", []):
        if row["cosine"] is not None and not -1.0 <= row["cosine"] <= 1.0:
            bad(f"offset {row['offset']}: cosine {row['cosine']} outside [-1, 1]")
        if row["kl"] is not None and row["kl"] < 0.0:
            bad(f"offset {row['offset']}: negative KL")
    for row in doc.get("rows", []):
        if row["flops"] <= 0:
            bad("non-positive FLOPs in sweep")
