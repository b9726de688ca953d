import dataclasses

import numpy as np
import pytest

from tokenprune.errors import ConfigError
from tokenprune.harness import metrics
from tokenprune.pipeline import run_episode
from tokenprune.pruner import PrunerConfig
from tokenprune.toy_vla.episodes import EpisodeConfig, generate_episode, suite_configs
from tokenprune.toy_vla.model import ModelConfig, build_model

MC = ModelConfig()


@pytest.fixture(scope="module")
def model():
    return build_model(MC)


def test_core_loss_examples():
    sal = np.full(10, 0.05)
    sal[3] = 0.55
    assert metrics.core_set(sal, 0.1).tolist() == [3]
    assert metrics.core_token_loss([0, 1, 2, 4], sal) == 1.0
    assert metrics.core_token_loss([3, 9], sal) == 0.0
    scores = np.arange(20.0)
    assert metrics.core_token_loss([18, 19, 0], scores) == 0.0
    assert metrics.core_token_loss([0, 1], scores) == 1.0
    assert metrics.core_token_loss([19, 0], scores) == 0.5
    with pytest.raises(ConfigError):
        metrics.core_set(scores, 0.0)


def test_episode_core_loss_counts_keyframes_as_zero(model):
    ep = generate_episode(EpisodeConfig(num_timesteps=4, seed=1), MC)
    cfg = PrunerConfig(keyframe_threshold=2.0)
    ref = metrics.actual_deep_saliency(model, ep, cfg.resolved_deep_layers(8))
    assert metrics.episode_core_loss(run_episode(model, ep, cfg), ref) == 0.0
    with pytest.raises(ConfigError):
        metrics.episode_core_loss(run_episode(model, ep, cfg), ref[:2])


def test_static_forecast_is_exact(model):
    cfg = EpisodeConfig(num_timesteps=6, noise_sigma=0.0, motion_amplitude=0.0, seed=2)
    ep = generate_episode(cfg, MC)
    for _, cos, kl, n in metrics.forecast_accuracy_curve(ep, model, PrunerConfig(), 5).rows():
        assert n == 1
        assert cos == pytest.approx(1.0, abs=1e-12)
        assert kl <= 1e-6


def test_single_offset_curve(model):
    ep = generate_episode(EpisodeConfig(num_timesteps=3, seed=2), MC)
    rows = metrics.forecast_accuracy_curve(ep, model, PrunerConfig(), 1).rows()
    assert len(rows) == 1 and rows[0][0] == 1


def test_boundary_offsets_skipped(model):
    cfg = EpisodeConfig(num_timesteps=8, seed=6, target_group_schedule=((0, 1), (3, 2)))
    ep = generate_episode(cfg, MC)
    curve = metrics.forecast_accuracy_curve(ep, model, PrunerConfig(), 4)
    # subtask 0 spans t=0..2, subtask 1 spans t=3..7
    assert curve.count == [2, 2, 1, 1]
    assert curve.skipped == [0, 0, 1, 1]
    with pytest.raises(ConfigError):
        metrics.forecast_accuracy_curve(ep, model, PrunerConfig(), 8)


def test_curve_merge():
    a, b = metrics.ForecastCurve(2), metrics.ForecastCurve(2)
    a.add(1, 0.9, 0.1)
    b.add(1, 0.7, 0.3)
    b.skip(2)
    rows = a.merge(b).rows()
    assert rows[0] == (1, pytest.approx(0.8), pytest.approx(0.2), 2)
    assert rows[1][3] == 0 and np.isnan(rows[1][1])
    assert a.skipped == [0, 1]
    with pytest.raises(ConfigError):
        a.merge(metrics.ForecastCurve(3))


def test_forecast_cosine_decays_with_drift(model):
    # mean over a noise-free suite; single episodes wobble as tokens realign with the lattice
    base = dataclasses.replace(EpisodeConfig(), num_timesteps=11, noise_sigma=0.0)
    total = metrics.ForecastCurve(10)
    for c in suite_configs(20, base, 3, transitions=0):
        total.merge(metrics.forecast_accuracy_curve(generate_episode(c, MC), model, PrunerConfig(), 10))
    cos = [r[1] for r in total.rows()]
    assert min(cos) >= 0.9
    assert all(b <= a for a, b in zip(cos, cos[1:]))
