"""Synthetic visual-token episodes with ground-truth semantic labels.

Visual tokens sit on a ring of ``num_tokens`` positions. Group 0 is
background, the last group is a small "salient clutter" distractor that
catches bottom-up attention, and every group in between is an object that a
subtask can target. Each object has a contiguous part (``part_width`` tokens)
that carries the fine feature deep layers lock onto; its coarse feature is
scaled by ``part_coarse``, so shallow layers rank the part below the rest of
the object. All objects drift along
the ring by ``motion_amplitude`` positions per step, so the attended entity
keeps its semantics while its token indices change.

Query (action) tokens encode the current target object; switching the target
per ``target_group_schedule`` produces an abrupt attention shift.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError

QUERY_COARSE = 1.0
QUERY_FINE = 1.0
QUERY_SALIENCE = 1.0
QUERY_JITTER = 0.3


@dataclass(frozen=True)
class EpisodeConfig:
    num_timesteps: int = 20
    num_tokens: int = 64
    semantic_groups: int = 4
    target_group_schedule: tuple = ((0, 1),)
    motion_amplitude: float = 0.35
    noise_sigma: float = 0.02
    seed: int = 0
    object_width: int = 18
    part_width: int = 0  # 0 -> ceil(10% of num_tokens)
    distractor_width: int = 3
    distractor_salience: float = 1.0
    part_coarse: float = 0.6
    position_scale: float = 0.5
    num_query: int = 4
    num_text: int = 8

    def __post_init__(self):
        sched = tuple((int(s), int(g)) for s, g in self.target_group_schedule)
        object.__setattr__(self, "target_group_schedule", sched)

    @property
    def resolved_part_width(self):
        if self.part_width > 0:
            return self.part_width
        return max(1, math.ceil(round(0.1 * self.num_tokens, 9)))

    @property
    def object_groups(self):
        return tuple(range(1, self.semantic_groups - 1))

    @property
    def distractor_group(self):
        return self.semantic_groups - 1

    def validate(self):
        if self.num_timesteps < 1:
            raise ConfigError("num_timesteps must be >= 1")
        if self.num_tokens < 2:
            raise ConfigError("num_tokens must be >= 2")
        if self.semantic_groups < 3:
            raise ConfigError("semantic_groups must be >= 3 (background, object, distractor)")
        if self.num_query < 1:
            raise ConfigError("num_query must be >= 1")
        if self.num_text < 0:
            raise ConfigError("num_text must be >= 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0.0 < self.part_coarse <= 1.0:
            raise ConfigError("part_coarse must be in (0, 1]")
        spacing = self.num_tokens // (self.semantic_groups - 1)
        if not 1 <= self.object_width <= spacing:
            raise ConfigError(f"object_width must be in [1, {spacing}] for this token count")
        if not 0 <= self.distractor_width <= spacing:
            raise ConfigError(f"distractor_width must be in [0, {spacing}]")
        if not 1 <= self.resolved_part_width <= self.object_width:
            raise ConfigError("part_width must be in [1, object_width]")
        sched = self.target_group_schedule
        if not sched or sched[0][0] != 0:
            raise ConfigError("target_group_schedule must start at timestep 0")
        starts = [s for s, _ in sched]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("target_group_schedule start timesteps must be strictly increasing")
        if starts[-1] >= self.num_timesteps:
            raise ConfigError("target_group_schedule start timesteps must be < num_timesteps")
        for _, g in sched:
            if g not in self.object_groups:
                raise ConfigError(f"target group {g} is not an object group {self.object_groups}")
        return self

    def target_at(self, t):
        """(subtask index, target group) in force at timestep ``t``."""
        idx = 0
        for i, (start, _) in enumerate(self.target_group_schedule):
            if start <= t:
                idx = i
        return idx, self.target_group_schedule[idx][1]

    def to_dict(self):
        d = asdict(self)
        d["target_group_schedule"] = [list(p) for p in self.target_group_schedule]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["target_group_schedule"] = tuple(tuple(p) for p in d["target_group_schedule"])
        return cls(**d)


@dataclass(frozen=True)
class TokenStream:
    timestep: int
    visual_tokens: np.ndarray
    text_tokens: np.ndarray
    query_tokens: np.ndarray
    groups: np.ndarray
    part_mask: np.ndarray
    target_group: int
    subtask: int

    @property
    def num_visual(self):
        return self.visual_tokens.shape[0]

    @property
    def rest_count(self):
        return self.text_tokens.shape[0] + self.query_tokens.shape[0]


@dataclass(frozen=True)
class Episode:
    config: EpisodeConfig
    hidden_dim: int
    streams: tuple = field(default_factory=tuple)

    def __len__(self):
        return len(self.streams)

    def __getitem__(self, i):
        return self.streams[i]

    def __iter__(self):
        return iter(self.streams)

    def checksum(self):
        h = hashlib.sha256()
        h.update(json.dumps(self.config.to_dict(), sort_keys=True).encode())
        h.update(str(self.hidden_dim).encode())
        for s in self.streams:
            for arr in (s.visual_tokens, s.text_tokens, s.query_tokens, s.groups, s.part_mask):
                h.update(np.ascontiguousarray(arr).tobytes())
            h.update(f"{s.timestep},{s.target_group},{s.subtask}".encode())
        return h.hexdigest()


def _unit_basis(rng, dim, count):
    """``count`` unit vectors in R^dim; orthonormal whenever count <= dim."""
    raw = rng.standard_normal((dim, count))
    if count <= dim:
        q, r = np.linalg.qr(raw)
        return (q * np.sign(np.diag(r))).T
    return (raw / np.linalg.norm(raw, axis=0)).T


def position_code(num_tokens, n_dims, scale):
    """Sinusoidal ring code, shape (num_tokens, n_dims), each row of norm ``scale``."""
    pos = np.arange(num_tokens)[:, None]
    freqs = np.arange(1, n_dims // 2 + 1)[None, :]
    ang = 2.0 * np.pi * pos * freqs / num_tokens
    code = np.empty((num_tokens, n_dims))
    code[:, 0::2] = np.cos(ang)
    code[:, 1::2] = np.sin(ang)
    return code * (scale / math.sqrt(n_dims // 2))


def _scene_labels(cfg, offset, direction, part_offsets, t):
    L = cfg.num_tokens
    groups = np.zeros(L, dtype=np.int64)
    part = np.zeros(L, dtype=bool)
    spacing = L / (cfg.semantic_groups - 1)
    shift = direction * cfg.motion_amplitude * t
    pw = cfg.resolved_part_width
    for i, g in enumerate(range(1, cfg.semantic_groups)):
        start = math.floor(offset + i * spacing + shift)
        width = cfg.object_width if g != cfg.distractor_group else cfg.distractor_width
        idx = (start + np.arange(width)) % L
        groups[idx] = g
        if g != cfg.distractor_group:
            po = part_offsets[g]
            part[idx[po : po + pw]] = True
    return groups, part


def generate_episode(cfg, model_cfg):
    """Render ``cfg.num_timesteps`` token streams for a model of ``model_cfg``'s width."""
    cfg = cfg.validate()
    lay = model_cfg.validate().layout
    D = lay.hidden_dim
    G = cfg.semantic_groups
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xE915]))

    n_obj = len(cfg.object_groups)
    if lay.n_coarse >= G:
        coarse = _unit_basis(rng, lay.n_coarse, G)
    else:
        # too few channels for orthonormal prototypes: background gets none
        coarse = np.zeros((G, lay.n_coarse))
        coarse[1:] = _unit_basis(rng, lay.n_coarse, G - 1)
    part_vec = np.zeros((G, lay.n_fine))
    if lay.n_fine >= G + n_obj:
        fine = _unit_basis(rng, lay.n_fine, G + n_obj)
        body = fine[:G]
        part_vec[1 : 1 + n_obj] = fine[G:]
    else:
        # same fallback: only parts carry a fine feature
        body = np.zeros((G, lay.n_fine))
        part_vec[1 : 1 + n_obj] = _unit_basis(rng, lay.n_fine, n_obj)
    pos = position_code(cfg.num_tokens, lay.n_position, cfg.position_scale)
    offset = float(rng.uniform(0.0, cfg.num_tokens))
    direction = 1.0 if rng.random() < 0.5 else -1.0
    pw = cfg.resolved_part_width
    part_offsets = {g: int(rng.integers(0, cfg.object_width - pw + 1)) for g in cfg.object_groups}

    text = np.zeros((cfg.num_text, D))
    if cfg.num_text:
        text[:, 1:] = _unit_basis(rng, D - 1, cfg.num_text) if cfg.num_text <= D - 1 else (
            rng.standard_normal((cfg.num_text, D - 1)) / math.sqrt(D - 1)
        )
    jitter = rng.standard_normal((cfg.num_query, D - 1))
    jitter /= np.linalg.norm(jitter, axis=1, keepdims=True)

    queries = {}
    for g in cfg.object_groups:
        q = np.zeros((cfg.num_query, D))
        q[:, lay.coarse] = QUERY_COARSE * coarse[g]
        q[:, lay.fine] = QUERY_FINE * part_vec[g]
        q[:, lay.salience] = QUERY_SALIENCE
        q[:, 1:] += QUERY_JITTER * jitter
        queries[g] = q

    streams = []
    for t in range(cfg.num_timesteps):
        groups, part = _scene_labels(cfg, offset, direction, part_offsets, t)
        z = np.zeros((cfg.num_tokens, D))
        z[:, lay.coarse] = coarse[groups]
        z[part, lay.coarse] *= cfg.part_coarse
        z[:, lay.fine] = np.where(part[:, None], part_vec[groups], body[groups])
        z[:, lay.position] = pos
        z[groups == cfg.distractor_group, lay.salience] = cfg.distractor_salience
        if cfg.noise_sigma > 0:
            z[:, 1:] += cfg.noise_sigma * rng.standard_normal((cfg.num_tokens, D - 1))
        subtask, target = cfg.target_at(t)
        streams.append(
            TokenStream(
                timestep=t,
                visual_tokens=z,
                text_tokens=text.copy(),
                query_tokens=queries[target].copy(),
                groups=groups,
                part_mask=part,
                target_group=target,
                subtask=subtask,
            )
        )
    return Episode(config=cfg, hidden_dim=D, streams=tuple(streams))


def suite_configs(n, base, seed, transitions=1):
    """``n`` episode configs drawn around ``base`` with random targets and switch times.

    Each config gets ``transitions`` target switches placed in the middle
    two-thirds of the episode at least two steps apart, and a distinct seed.
    """
    base.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5017E]))
    T = base.num_timesteps
    objects = base.object_groups
    if transitions and len(objects) < 2:
        raise ConfigError("transitions need at least two object groups")
    lo, hi = max(1, T // 3), max(1, (2 * T) // 3)
    if transitions and hi - lo + 1 < 2 * transitions - 1:
        raise ConfigError(f"num_timesteps={T} too short for {transitions} transitions")
    out = []
    for i in range(n):
        target = int(rng.choice(objects))
        sched = [(0, target)]
        while True:
            starts = sorted(rng.choice(np.arange(lo, hi + 1), size=transitions, replace=False).tolist())
            if all(b - a >= 2 for a, b in zip(starts, starts[1:])):
                break
        for s in starts:
            choices = [g for g in objects if g != target]
            target = int(rng.choice(choices))
            sched.append((int(s), target))
        ep_seed = int(rng.integers(0, 2**31 - 1))
        cfg = EpisodeConfig(**{**asdict(base), "target_group_schedule": tuple(sched), "seed": ep_seed})
        out.append(cfg.validate())
    return out
