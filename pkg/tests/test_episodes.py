import dataclasses

import numpy as np
import pytest

from tokenprune.errors import ConfigError
from tokenprune.toy_vla.episodes import EpisodeConfig, generate_episode, suite_configs
from tokenprune.toy_vla.model import ModelConfig, build_model, forward_full

MC = ModelConfig()


def test_static_scene():
    ep = generate_episode(EpisodeConfig(noise_sigma=0.0, motion_amplitude=0.0, num_timesteps=6), MC)
    for s in ep:
        assert np.array_equal(s.visual_tokens, ep[0].visual_tokens)


def test_transition_labels():
    cfg = EpisodeConfig(num_timesteps=20, target_group_schedule=((0, 1), (12, 2)))
    ep = generate_episode(cfg, MC)
    assert [s.target_group for s in ep] == [1] * 12 + [2] * 8
    assert [s.subtask for s in ep] == [0] * 12 + [1] * 8
    assert not np.array_equal(ep[11].query_tokens, ep[12].query_tokens)
    assert np.array_equal(ep[12].query_tokens, ep[19].query_tokens)


def test_deterministic():
    a = generate_episode(EpisodeConfig(seed=9), MC)
    b = generate_episode(EpisodeConfig(seed=9), MC)
    assert a.checksum() == b.checksum()
    for x, y in zip(a, b):
        assert x.visual_tokens.tobytes() == y.visual_tokens.tobytes()
    assert generate_episode(EpisodeConfig(seed=10), MC).checksum() != a.checksum()


def test_layout_labels():
    cfg = EpisodeConfig(seed=4)
    ep = generate_episode(cfg, MC)
    for s in ep:
        counts = np.bincount(s.groups, minlength=cfg.semantic_groups)
        assert counts[1] == counts[2] == cfg.object_width
        assert counts[3] == cfg.distractor_width
        assert s.part_mask.sum() == 2 * cfg.resolved_part_width
        assert set(s.groups[s.part_mask].tolist()) == {1, 2}


def test_objects_drift():
    ep = generate_episode(EpisodeConfig(seed=2, motion_amplitude=1.0, noise_sigma=0.0), MC)
    assert not np.array_equal(ep[0].groups, ep[5].groups)


def test_deep_layer_attends_target_part():
    model = build_model(MC)
    for seed in range(10):
        ep = generate_episode(EpisodeConfig(seed=seed, num_timesteps=4), MC)
        for s in ep:
            _, taps = forward_full(model, s)
            sal = taps[-1].attention.mean(axis=(0, 1))
            top = np.argsort(-sal, kind="stable")[: s.part_mask.sum() // 2]
            assert np.all(s.groups[top] == s.target_group)


def test_suite_configs():
    base = EpisodeConfig(num_timesteps=20)
    cfgs = suite_configs(30, base, seed=1)
    assert len({c.seed for c in cfgs}) == 30
    for c in cfgs:
        (s0, g0), (s1, g1) = c.target_group_schedule
        assert s0 == 0 and 6 <= s1 <= 13 and g0 != g1
    assert suite_configs(30, base, seed=1) == cfgs
    two = suite_configs(10, base, seed=2, transitions=2)
    assert all(len(c.target_group_schedule) == 3 for c in two)
    with pytest.raises(ConfigError):
        suite_configs(1, dataclasses.replace(base, num_timesteps=3), 0, transitions=2)


@pytest.mark.parametrize("kwargs", [
    {"num_timesteps": 0},
    {"semantic_groups": 2},
    {"object_width": 40},
    {"part_width": 30},
    {"part_coarse": 0.0},
    {"noise_sigma": -0.1},
    {"target_group_schedule": ((1, 1),)},
    {"target_group_schedule": ((0, 3),)},
    {"target_group_schedule": ((0, 1), (25, 2))},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigError):
        EpisodeConfig(**kwargs).validate()


def test_round_trip_dict():
    cfg = EpisodeConfig(target_group_schedule=((0, 2), (9, 1)), seed=3)
    assert EpisodeConfig.from_dict(cfg.to_dict()) == cfg
