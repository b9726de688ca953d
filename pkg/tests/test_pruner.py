import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tokenprune.errors import ConfigError
from tokenprune.pruner import PrunerConfig, fuse_scores, keep_count, select_keep_set


def test_keep_count_examples():
    assert keep_count(64, 0.0) == 64
    assert keep_count(64, 0.75) == 16
    assert keep_count(10, 0.99) == 1
    # (1 - 0.7) * 10 is 3.0000000000000004 in floating point
    assert keep_count(10, 0.7) == 3


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 512), st.integers(0, 99))
def test_keep_count_matches_rational_oracle(n, pct):
    rho_text = f"0.{pct:02d}"
    assert keep_count(n, float(rho_text)) == oracles.keep_count(n, rho_text)


def test_fusion_examples():
    s, d = np.array([0.2, 0.8]), np.array([0.6, 0.4])
    assert np.array_equal(fuse_scores(s, d, 0.0), s)
    assert np.array_equal(fuse_scores(s, d, 1.0), d)
    assert np.allclose(fuse_scores(s, d, 0.5), [0.4, 0.6], atol=1e-15)
    with pytest.raises(ConfigError):
        fuse_scores(s, np.ones(3), 0.5)
    with pytest.raises(ConfigError):
        fuse_scores(s, d, 1.5)


def test_select_keep_set():
    keep, k = select_keep_set([0.1, 0.4, 0.3, 0.2], 0.5)
    assert k == 2 and keep.tolist() == [1, 2]
    keep, k = select_keep_set(np.arange(5.0), 0.0)
    assert keep.tolist() == [0, 1, 2, 3, 4]
    with pytest.raises(ConfigError):
        select_keep_set([1.0, 2.0], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.floats(0, 0.98), st.floats(0.01, 10), st.floats(-5, 5),
       st.integers(0, 2**31))
def test_selection_affine_invariant(n, rho, a, b, seed):
    scores = np.random.default_rng(seed).random(n)
    k1, _ = select_keep_set(scores, rho)
    k2, _ = select_keep_set(a * scores + b, rho)
    assert np.array_equal(k1, k2)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.floats(0, 0.98), st.floats(0, 0.98), st.integers(0, 2**31))
def test_keep_sets_nest(n, r1, r2, seed):
    scores = np.random.default_rng(seed).random(n)
    lo, hi = sorted((r1, r2))
    wide, _ = select_keep_set(scores, lo)
    narrow, _ = select_keep_set(scores, hi)
    assert set(narrow.tolist()) <= set(wide.tolist())


def test_config_validation():
    assert PrunerConfig().resolved_deep_layers(8) == (0, 6, 7)
    assert PrunerConfig(deep_layers=(7, 6, 6)).resolved_deep_layers(8) == (6, 7)
    PrunerConfig().validate(8)
    bad = [
        PrunerConfig(prune_layer=8),
        PrunerConfig(deep_layers=(9,)),
        PrunerConfig(deep_layers=()),
        PrunerConfig(fusion_weight=-0.1),
        PrunerConfig(prune_ratio=1.0),
        PrunerConfig(keyframe_threshold=float("nan")),
    ]
    for cfg in bad:
        with pytest.raises(ConfigError):
            cfg.validate(8)
