"""Seeded toy transformer with per-layer attention taps.

Each layer is pre-norm attention (q, k, v, o projections) followed by a gated
FFN (gate, up, down), mirroring the terms of the analytic cost model. Weights
are random but structured. Every head spends one column on the presence
channel and the rest on a random rotation of the attended feature block, so
query-key logits are exact weighted feature inner products. The weights shift
with depth: shallow layers respond to object identity and a bottom-up salience
cue, deep layers to the fine part feature. Logits are multiplied by
``1 + temperature_slope * layer``, which sharpens attention with depth. Layer
outputs land in scratch channels and never overwrite the attended features.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..errors import ConfigError
from .layout import FeatureLayout

RMS_EPS = 1e-6
# presence logit at layer 0, in nats; a token whose presence channel is
# negated sits 2x this far below every other key
PRESENCE_NATS = 13.0


@dataclass(frozen=True)
class AttentionGains:
    coarse: float = 0.181
    coarse_decay: float = 0.5
    fine: float = 0.18
    fine_onset: float = 0.5
    salience: float = 0.257
    jitter: float = 0.02
    attn_out: float = 0.05
    ffn_out: float = 0.08

    def content_weights(self, depth_fraction):
        f = depth_fraction
        fine_ramp = max(0.0, (f - self.fine_onset) / (1.0 - self.fine_onset))
        return {
            "coarse": self.coarse * (1.0 - self.coarse_decay * f),
            "fine": self.fine * fine_ramp**2,
            "salience": self.salience * (1.0 - f),
        }


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int = 8
    hidden_dim: int = 64
    num_heads: int = 4
    head_dim: int = 16
    ffn_dim: int = 128
    action_dim: int = 7
    temperature_slope: float = 0.75
    seed: int = 0
    gains: AttentionGains = field(default_factory=AttentionGains)

    def validate(self):
        for name in ("num_layers", "hidden_dim", "num_heads", "head_dim", "ffn_dim", "action_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.hidden_dim != self.num_heads * self.head_dim:
            raise ConfigError(
                f"hidden_dim ({self.hidden_dim}) must equal num_heads * head_dim "
                f"({self.num_heads} * {self.head_dim})"
            )
        if self.num_layers < 4:
            raise ConfigError(f"num_layers must be >= 4, got {self.num_layers}")
        if self.head_dim < 4:
            raise ConfigError("head_dim must be >= 4")
        if self.temperature_slope < 0:
            raise ConfigError("temperature_slope must be >= 0")
        FeatureLayout.for_dims(self.hidden_dim, self.head_dim)
        return self

    @property
    def layout(self):
        return FeatureLayout.for_dims(self.hidden_dim, self.head_dim)

    def layer_scale(self, layer):
        return (1.0 + self.temperature_slope * layer) / math.sqrt(self.head_dim)


@dataclass(frozen=True)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w_gate: np.ndarray
    w_up: np.ndarray
    w_down: np.ndarray
    scale: float


@dataclass(frozen=True)
class ToyModel:
    config: ModelConfig
    layers: tuple
    w_head: np.ndarray

    @property
    def num_layers(self):
        return self.config.num_layers

    def checksum(self):
        h = hashlib.sha256()
        for lw in self.layers:
            for w in (lw.wq, lw.wk, lw.wv, lw.wo, lw.w_gate, lw.w_up, lw.w_down):
                h.update(w.tobytes())
            h.update(np.float64(lw.scale).tobytes())
        h.update(self.w_head.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class LayerTap:
    """Attention from query tokens to the visual tokens present at one layer.

    ``attention`` has shape (num_heads, L_query, n_visible); ``visual_index``
    maps its columns back to original visual-token indices.
    """

    layer: int
    attention: np.ndarray
    hidden_visual: np.ndarray
    visual_index: np.ndarray
    attention_all: np.ndarray = None

    @property
    def width(self):
        return self.attention.shape[2]


def _qk_weights(rng, cfg, weights, presence_gain, jitter):
    D, H, d = cfg.hidden_dim, cfg.num_heads, cfg.head_dim
    lay = cfg.layout
    att = lay.attended
    n = att.stop - att.start
    w = np.zeros(D)
    w[lay.salience] = weights["salience"]
    w[lay.coarse] = weights["coarse"]
    w[lay.fine] = weights["fine"]
    root = np.sqrt(w[att])[:, None]
    wq = np.zeros((D, D))
    wk = np.zeros((D, D))
    for h in range(H):
        lo = h * d
        wq[0, lo] = presence_gain
        wk[0, lo] = presence_gain
        # orthogonal R keeps (root x) . (root y) exact within each head
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        rot = q * np.sign(np.diag(r))
        eq = rng.standard_normal((n, n)) / math.sqrt(n)
        ek = rng.standard_normal((n, n)) / math.sqrt(n)
        wq[att, lo + 1 : lo + 1 + n] = root * rot + jitter * eq
        wk[att, lo + 1 : lo + 1 + n] = root * rot + jitter * ek
    return wq, wk


def build_model(cfg=None):
    """Draw a seeded ToyModel; the same config always yields identical weights."""
    cfg = (cfg or ModelConfig()).validate()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x70C]))
    D, m, L = cfg.hidden_dim, cfg.ffn_dim, cfg.num_layers
    g = cfg.gains
    lay = cfg.layout
    presence_gain = math.sqrt(PRESENCE_NATS * math.sqrt(cfg.head_dim))
    layers = []
    for ell in range(L):
        weights = g.content_weights(ell / (L - 1))
        wq, wk = _qk_weights(rng, cfg, weights, presence_gain, g.jitter)
        wv = rng.standard_normal((D, D)) / math.sqrt(D - 1)
        wv[0, :] = 0.0
        wo = rng.standard_normal((D, D)) * (g.attn_out / math.sqrt(D))
        wo[:, : lay.scratch.start] = 0.0
        w_gate = rng.standard_normal((D, m)) / math.sqrt(D - 1)
        w_up = rng.standard_normal((D, m)) / math.sqrt(D - 1)
        w_gate[0, :] = 0.0
        w_up[0, :] = 0.0
        w_down = rng.standard_normal((m, D)) * (g.ffn_out / math.sqrt(m))
        w_down[:, : lay.scratch.start] = 0.0
        layers.append(
            LayerWeights(wq, wk, wv, wo, w_gate, w_up, w_down, cfg.layer_scale(ell))
        )
    w_head = rng.standard_normal((D, cfg.action_dim)) / math.sqrt(D - 1)
    w_head[0, :] = 0.0
    for lw in layers:
        for arr in (lw.wq, lw.wk, lw.wv, lw.wo, lw.w_gate, lw.w_up, lw.w_down):
            arr.setflags(write=False)
    w_head.setflags(write=False)
    return ToyModel(config=cfg, layers=tuple(layers), w_head=w_head)


@dataclass
class PartialForward:
    """Hidden state after running layers ``0..layer`` on every token."""

    hidden: np.ndarray
    taps: list
    layer: int
    n_visual: int
    n_query: int


def _check_stream(model, stream):
    D = model.config.hidden_dim
    for name in ("visual_tokens", "text_tokens", "query_tokens"):
        arr = getattr(stream, name)
        if arr.ndim != 2 or arr.shape[1] != D:
            raise ConfigError(f"{name} must have shape (*, {D}), got {arr.shape}")
    if stream.visual_tokens.shape[0] < 1 or stream.query_tokens.shape[0] < 1:
        raise ConfigError("stream needs at least one visual and one query token")


def _run_layer(model, ell, h, n_vis, n_query, visual_index, record_all):
    cfg = model.config
    lw = model.layers[ell]
    xn = K.rms_norm(h, RMS_EPS)
    attn, tap, probs = K.attention(
        xn, lw.wq, lw.wk, lw.wv, lw.wo, cfg.num_heads, cfg.head_dim, lw.scale, n_vis, n_query
    )
    h = h + attn
    h = h + K.gated_ffn(K.rms_norm(h, RMS_EPS), lw.w_gate, lw.w_up, lw.w_down)
    return h, LayerTap(
        layer=ell,
        attention=tap,
        hidden_visual=h[:n_vis].copy(),
        visual_index=visual_index,
        attention_all=probs if record_all else None,
    )


def embed(stream):
    """Stack [visual; text; query] and add the presence embedding."""
    h = np.vstack([stream.visual_tokens, stream.text_tokens, stream.query_tokens])
    h = np.ascontiguousarray(h, dtype=np.float64)
    h[:, 0] += 1.0
    return h


def forward_prefix(model, stream, upto, record_all=False):
    """Run layers ``0..upto`` (inclusive) on all tokens."""
    _check_stream(model, stream)
    if not 0 <= upto < model.num_layers:
        raise ConfigError(f"prefix layer {upto} outside [0, {model.num_layers})")
    h = embed(stream)
    n_vis = stream.visual_tokens.shape[0]
    n_query = stream.query_tokens.shape[0]
    index = np.arange(n_vis)
    taps = []
    for ell in range(upto + 1):
        h, tap = _run_layer(model, ell, h, n_vis, n_query, index, record_all)
        taps.append(tap)
    return PartialForward(hidden=h, taps=taps, layer=upto, n_visual=n_vis, n_query=n_query)


def forward_suffix(model, partial, keep=None, record_all=False):
    """Finish a forward pass from ``partial``; optionally drop visual tokens first.

    Returns (action, taps) where taps covers every layer.
    """
    h = partial.hidden
    n_vis = partial.n_visual
    index = np.arange(n_vis)
    if keep is not None:
        keep = _check_keep(keep, n_vis)
        h = np.vstack([h[keep], h[n_vis:]])
        index = keep
        n_vis = keep.shape[0]
    taps = list(partial.taps)
    for ell in range(partial.layer + 1, model.num_layers):
        h, tap = _run_layer(model, ell, h, n_vis, partial.n_query, index, record_all)
        taps.append(tap)
    return _action(model, h[h.shape[0] - partial.n_query :]), taps


def _check_keep(keep, n_vis):
    keep = np.asarray(keep, dtype=np.int64)
    if keep.ndim != 1 or keep.shape[0] == 0:
        raise ConfigError("keep set must be a nonempty 1-D index list")
    if keep.min() < 0 or keep.max() >= n_vis:
        raise ConfigError(f"keep indices must lie in [0, {n_vis})")
    if np.unique(keep).shape[0] != keep.shape[0]:
        raise ConfigError("keep indices must be unique")
    return keep


def _action(model, query_hidden):
    xn = K.rms_norm(query_hidden, RMS_EPS)
    pooled = xn[0].copy()
    for r in range(1, xn.shape[0]):
        pooled += xn[r]
    pooled /= xn.shape[0]
    return K.matmul(pooled[None, :], np.ascontiguousarray(model.w_head))[0]


def forward_full(model, stream, record_all=False):
    """All layers on all tokens. Returns (action, taps)."""
    partial = forward_prefix(model, stream, 0, record_all)
    return forward_suffix(model, partial, None, record_all)


def forward_pruned(model, stream, keep, prune_layer, record_all=False):
    """Layers ``0..prune_layer`` on all tokens, the rest on ``keep`` only."""
    if not 0 <= prune_layer < model.num_layers:
        raise ConfigError(f"prune_layer {prune_layer} outside [0, {model.num_layers})")
    keep = _check_keep(keep, stream.visual_tokens.shape[0])
    partial = forward_prefix(model, stream, prune_layer, record_all)
    return forward_suffix(model, partial, keep, record_all)
