"""Analytic per-layer FLOP model and pruning sweeps.

C(N) = 4 N d^2 + 2 N^2 d + 3 N d m, where d is the model hidden size and m the
FFN width. Pruning after layer ``prune_layer`` charges that many layers at the
full length N and the rest at N_rest + K.
"""

import csv
import io
from dataclasses import dataclass, replace

from .errors import ConfigError
from .pruner import keep_count

TERA = 1e12


@dataclass(frozen=True)
class CostParams:
    hidden_dim: int = 64
    ffn_dim: int = 128
    num_layers: int = 8
    num_visual: int = 64
    num_rest: int = 12
    prune_layer: int = 3
    prune_ratio: float = 0.8

    def validate(self):
        for name in ("hidden_dim", "ffn_dim", "num_layers", "num_visual", "num_rest"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.prune_layer <= self.num_layers:
            raise ConfigError(f"prune_layer must be in [0, {self.num_layers}]")
        if not 0.0 <= self.prune_ratio <= 1.0:
            raise ConfigError("prune_ratio must be in [0, 1]")
        return self

    @property
    def num_tokens(self):
        return self.num_visual + self.num_rest


def layer_cost(n, d, m):
    return 4 * n * d * d + 2 * n * n * d + 3 * n * d * m


def full_flops(p):
    p.validate()
    return p.num_layers * layer_cost(p.num_tokens, p.hidden_dim, p.ffn_dim)


def retained_visual(p):
    # keep_count() rejects rho == 1; here rho == 1 keeps the single-token floor
    if p.prune_ratio >= 1.0:
        return 1
    return keep_count(p.num_visual, p.prune_ratio)


def pruned_flops(p, continuous=False):
    """FLOPs with pruning; ``continuous=True`` uses N_rest + (1 - rho) N_vis unrounded."""
    p.validate()
    full_layer = layer_cost(p.num_tokens, p.hidden_dim, p.ffn_dim)
    if continuous:
        n_tilde = p.num_rest + (1.0 - p.prune_ratio) * p.num_visual
    else:
        n_tilde = p.num_rest + retained_visual(p)
    tail = layer_cost(n_tilde, p.hidden_dim, p.ffn_dim)
    return p.prune_layer * full_layer + (p.num_layers - p.prune_layer) * tail


def pruned_flops_for_keep(p, kept):
    """FLOPs of a pruned pass that actually kept ``kept`` visual tokens."""
    p.validate()
    full_layer = layer_cost(p.num_tokens, p.hidden_dim, p.ffn_dim)
    tail = layer_cost(p.num_rest + kept, p.hidden_dim, p.ffn_dim)
    return p.prune_layer * full_layer + (p.num_layers - p.prune_layer) * tail


def tflops(flops):
    return flops / TERA


@dataclass(frozen=True)
class SweepRow:
    rho: float
    prune_layer: int
    flops: float
    speedup: float


def sweep(p, rhos, prune_layers, continuous=False):
    """Grid over (rho, prune_layer), rho-major."""
    rhos = list(rhos)
    prune_layers = list(prune_layers)
    if not rhos or not prune_layers:
        raise ConfigError("sweep grids must be nonempty")
    full = full_flops(p)
    rows = []
    for rho in rhos:
        for ell in prune_layers:
            cell = replace(p, prune_ratio=rho, prune_layer=ell)
            f = pruned_flops(cell, continuous=continuous)
            rows.append(SweepRow(rho=rho, prune_layer=ell, flops=f, speedup=full / f))
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "prune_layer", "flops", "speedup"])
    for r in rows:
        flops = str(r.flops) if isinstance(r.flops, int) else f"{r.flops:.6g}"
        w.writerow([f"{r.rho:.6g}", r.prune_layer, flops, f"{r.speedup:.6g}"])
    return buf.getvalue()
