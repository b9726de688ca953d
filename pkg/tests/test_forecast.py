import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tokenprune.errors import ConfigError
from tokenprune.forecast import (
    KeyframeCache,
    aggregate_deep,
    build_correspondence,
    predict_future_saliency,
    transfer_saliency,
)
from tokenprune.saliency import SaliencyVector


def cache_for(rng, z, n_layers):
    sal = tuple(
        SaliencyVector(layer=i, timestep=0, scores=rng.dirichlet(np.ones(z.shape[0])))
        for i in range(n_layers)
    )
    return KeyframeCache(ref_timestep=0, ref_embeddings=z, ref_saliency=sal)


def test_identity_correspondence():
    z = np.random.default_rng(0).standard_normal((12, 6))
    assert build_correspondence(z, z).mapping.tolist() == list(range(12))


def test_permutation_recovered():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((16, 5))
    perm = rng.permutation(16)
    # reference row perm[v] holds current row v
    ref = np.empty_like(z)
    ref[perm] = z
    assert build_correspondence(z, ref).mapping.tolist() == perm.tolist()


def test_zero_row_maps_to_zero():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((5, 4))
    z[3] = 0.0
    assert build_correspondence(z, rng.standard_normal((5, 4))).mapping[3] == 0


def test_shape_mismatch():
    with pytest.raises(ConfigError):
        build_correspondence(np.ones((3, 2)), np.ones((4, 2)))


def test_identity_transfer_is_exact():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((10, 4))
    cache = cache_for(rng, z, 4)
    pred, _ = predict_future_saliency(z, cache, timestep=5)
    for p, s in zip(pred, cache.ref_saliency):
        assert np.array_equal(p.scores, s.scores)
        assert p.timestep == 5 and p.layer == s.layer


def test_collapse_to_first_token():
    rng = np.random.default_rng(4)
    z = rng.standard_normal((6, 3))
    cache = cache_for(rng, z, 2)
    corr = build_correspondence(z, z)
    corr = type(corr)(mapping=np.zeros(6, dtype=np.int64), similarity=corr.similarity)
    for p, s in zip(transfer_saliency(corr, cache), cache.ref_saliency):
        assert np.all(p.scores == s.scores[0])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 24), st.integers(2, 6), st.integers(1, 5), st.integers(0, 2**31))
def test_matches_double_loop_oracle(n, dim, n_layers, seed):
    rng = np.random.default_rng(seed)
    ref = rng.standard_normal((n, dim))
    cur = ref + 0.3 * rng.standard_normal((n, dim))
    cache = cache_for(rng, ref, n_layers)
    pred, corr = predict_future_saliency(cur, cache)
    mapping, expect = oracles.predict_future_saliency(
        cur.tolist(), ref.tolist(), [s.scores.tolist() for s in cache.ref_saliency]
    )
    assert corr.mapping.tolist() == mapping
    assert [p.scores.tolist() for p in pred] == expect


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 16), st.integers(2, 6), st.floats(0.01, 100), st.integers(0, 2**31))
def test_mapping_scale_invariant(n, dim, s, seed):
    rng = np.random.default_rng(seed)
    ref, cur = rng.standard_normal((n, dim)), rng.standard_normal((n, dim))
    assert np.array_equal(
        build_correspondence(cur, ref).mapping, build_correspondence(s * cur, ref).mapping
    )


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2**31))
def test_transfer_stays_in_cached_range(n, seed):
    rng = np.random.default_rng(seed)
    ref = rng.standard_normal((n, 3))
    cache = cache_for(rng, ref, 2)
    pred, _ = predict_future_saliency(rng.standard_normal((n, 3)), cache)
    for p, s in zip(pred, cache.ref_saliency):
        assert s.scores.min() <= p.scores.min() and p.scores.max() <= s.scores.max()


def test_aggregate_deep():
    rng = np.random.default_rng(5)
    rows = [SaliencyVector(i, 0, rng.random(7)) for i in range(8)]
    assert np.array_equal(aggregate_deep(rows, [4]), rows[4].scores)
    assert np.allclose(aggregate_deep(rows, [1, 2]), (rows[1].scores + rows[2].scores) / 2)
    expect = oracles.deep_mean([r.scores.tolist() for r in rows], [0, 6, 7])
    assert np.allclose(aggregate_deep(rows, (0, 6, 7)), expect, rtol=1e-15)
    with pytest.raises(ConfigError):
        aggregate_deep(rows, [])
    with pytest.raises(ConfigError):
        aggregate_deep(rows, [8])
