import json
import os
import subprocess
import sys

import numpy as np
import pytest

from tokenprune import _kernels as K

needs_numba = pytest.mark.skipif(K.BACKEND != "numba", reason="numba backend not active")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@needs_numba
def test_matmul_bit_identical_across_backends(rng):
    for n in (1, 3, 4, 7, 9):
        a, b = rng.standard_normal((n, 6)), rng.standard_normal((6, 5))
        assert np.array_equal(K._nb_matmul(a, b), K._np_matmul(a, b))


@needs_numba
def test_elementwise_kernels_agree(rng):
    x = rng.standard_normal((6, 9))
    assert np.allclose(K._nb_softmax_rows(x), K._np_softmax_rows(x), rtol=0, atol=1e-14)
    assert np.allclose(K._nb_rms_norm(x, 1e-6), K._np_rms_norm(x, 1e-6), rtol=1e-13)
    assert np.array_equal(K._nb_l2_normalize_rows(x) != 0, K._np_l2_normalize_rows(x) != 0)
    assert np.allclose(K._nb_l2_normalize_rows(x), K._np_l2_normalize_rows(x), rtol=1e-14)
    assert np.array_equal(K._nb_argmax_rows(x), K._np_argmax_rows(x))
    assert K._nb_dot(x[0], x[1]) == K._np_dot(x[0], x[1])


@needs_numba
def test_attention_and_ffn_agree(rng):
    n, D, H, d = 10, 8, 2, 4
    xn = rng.standard_normal((n, D))
    ws = [rng.standard_normal((D, D)) * 0.3 for _ in range(4)]
    a_nb = K._nb_attention(xn, *ws, H, d, 0.5, 6, 2)
    a_np = K._np_attention(xn, *ws, H, d, 0.5, 6, 2)
    for x, y in zip(a_nb, a_np):
        assert x.shape == y.shape
        assert np.allclose(x, y, rtol=1e-12, atol=1e-14)
    wg, wu, wd = rng.standard_normal((D, 12)), rng.standard_normal((D, 12)), rng.standard_normal((12, D))
    assert np.allclose(K._nb_gated_ffn(xn, wg, wu, wd), K._np_gated_ffn(xn, wg, wu, wd), rtol=1e-12)


def test_tap_is_softmax_over_visual_keys(rng):
    n, D, H, d, n_vis, n_q = 9, 8, 2, 4, 5, 2
    xn = rng.standard_normal((n, D))
    ws = [rng.standard_normal((D, D)) for _ in range(4)]
    _, tap, probs = K.attention(xn, *ws, H, d, 0.7, n_vis, n_q)
    assert tap.shape == (H, n_q, n_vis)
    assert np.allclose(tap.sum(axis=2), 1.0)
    assert np.allclose(probs.sum(axis=2), 1.0)
    # renormalizing the full rows over visual columns gives the tap
    sub = probs[:, n - n_q :, :n_vis]
    assert np.allclose(sub / sub.sum(axis=2, keepdims=True), tap)


_SCRIPT = """
import json, sys
from tokenprune import _kernels
from tokenprune.toy_vla.episodes import EpisodeConfig, generate_episode
from tokenprune.toy_vla.model import ModelConfig, build_model, forward_full
cfg = ModelConfig()
model = build_model(cfg)
ep = generate_episode(EpisodeConfig(num_timesteps=2, seed=3), cfg)
acts = [forward_full(model, s)[0].tolist() for s in ep]
print(json.dumps({"backend": _kernels.BACKEND, "checksum": model.checksum(), "actions": acts}))
"""


def _run(backend):
    env = dict(os.environ, TOKENPRUNE_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", _SCRIPT], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout)


def test_backends_agree_end_to_end():
    a, b = _run("numpy"), _run("numba")
    assert a["backend"] == "numpy" and b["backend"] == "numba"
    assert a["checksum"] == b["checksum"]
    assert np.allclose(a["actions"], b["actions"], rtol=1e-9, atol=1e-12)


def test_unknown_backend_rejected():
    env = dict(os.environ, TOKENPRUNE_BACKEND="fortran")
    r = subprocess.run([sys.executable, "-c", "import tokenprune"], env=env, capture_output=True,
                       text=True)
    assert r.returncode != 0
    assert "TOKENPRUNE_BACKEND" in r.stderr
