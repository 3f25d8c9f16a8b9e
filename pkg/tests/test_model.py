# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src import diffcore as dc
from src.corpus import BOS, EOS
from src.deptree import DepTree, chain_heads, sdc_matrix
from src.errors import CheckpointError, ConfigurationError, DataError
from src.model import (
    ModelParams,
    attention_config,
    decode_step,
    encode,
    init_params,
    initial_state,
    param_shapes,
    run_encoder,
    sentence_loss,
    step_distribution,
    zero_params,
)
from tests.conftest import random_tree, tiny_config, tiny_params


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def reference_gru(prefix, x, h, p):
    z = sigmoid(x @ p[f"{prefix}_Wz"] + h @ p[f"{prefix}_Uz"] + p[f"{prefix}_bz"])
    r = sigmoid(x @ p[f"{prefix}_Wr"] + h @ p[f"{prefix}_Ur"] + p[f"{prefix}_br"])
    cand = np.tanh(x @ p[f"{prefix}_Wh"] + (r * h) @ p[f"{prefix}_Uh"] + p[f"{prefix}_bh"])
    return (1.0 - z) * h + z * cand


def reference_global_loss(src, tgt, p):
    """Plain numpy composition of encoder, global attention and prediction layer."""
    hid = p["W_init"].shape[0]
    xs = [p["E_x"][i] for i in src]
    fwd, h = [], np.zeros(hid)
    for x in xs:
        h = reference_gru("enc_fwd", x, h, p)
        fwd.append(h)
    bwd, h = [None] * len(xs), np.zeros(hid)
    for j in reversed(range(len(xs))):
        h = reference_gru("enc_bwd", xs[j], h, p)
        bwd[j] = h
    H = np.stack([np.concatenate([f, b]) for f, b in zip(fwd, bwd)])
    s = np.tanh(bwd[0] @ p["W_init"] + p["b_init"])
    total, prev = 0.0, BOS
    for gold in list(tgt) + [EOS]:
        e = np.tanh(s @ p["W_a"] + H @ p["U_a"]) @ p["v_a"]
        alpha = np.exp(e - e.max())
        alpha /= alpha.sum()
        c = alpha @ H
        emb = p["E_y"][prev]
        s = reference_gru("dec", np.concatenate([emb, c]), s, p)
        t = np.tanh(emb @ p["L_w"] + s @ p["L_d"] + c @ p["L_cg"])
        z = t @ p["L_o"]
        total += -(z[gold] - (z.max() + math.log(np.exp(z - z.max()).sum())))
        prev = gold
    return total / (len(tgt) + 1)


def test_param_shapes_follow_attention_kind():
    glob = param_shapes(tiny_config("global"))
    double = param_shapes(tiny_config("double"))
    assert "W_p" not in glob and "L_cs" not in glob
    assert {"W_p", "v_p", "L_cg", "L_cs"} <= set(double)
    assert glob["U_a"] == (10, 5)
    assert glob["dec_Wz"] == (4 + 10, 5)
    assert glob["L_o"] == (4, 6)
    assert set(param_shapes(tiny_config("double_local"))) - set(glob) == {"W_p", "v_p", "L_cl"}


def test_init_params_deterministic_and_bounded():
    config = tiny_config("syntax", init_scale=0.1)
    a = init_params(config, np.random.default_rng(5))
    b = init_params(config, np.random.default_rng(5))
    for name in a.values:
        assert np.array_equal(a.values[name], b.values[name])
        assert np.all(np.abs(a.values[name]) <= 0.1)


def test_check_schema_errors():
    config = tiny_config("double")
    params = tiny_params(tiny_config("global"))
    with pytest.raises(ConfigurationError, match="L_cs"):
        params.check_schema(config)
    params = tiny_params(config)
    params.values["L_o"] = np.zeros((3, 3))
    with pytest.raises(CheckpointError):
        params.check_schema(config)
    params = tiny_params(config)
    params.values["v_a"][0] = np.nan
    with pytest.raises(CheckpointError):
        params.check_schema(config)


def test_zero_parameters_give_uniform_predictions():
    config = tiny_config("global")
    params = zero_params(config).constants()
    encoded = run_encoder([4, 5, 6], params)
    assert np.array_equal(encoded.annotations.value, np.zeros((3, 10)))
    state = initial_state(encoded, params)
    logits, _, _ = decode_step(state, BOS, encoded.annotations, attention_config(config), params)
    assert np.array_equal(logits.value, np.zeros(6))
    assert np.allclose(step_distribution(logits), 1.0 / 6)
    loss = sentence_loss([4, 5, 6], [3, 4], params, attention_config(config))
    assert loss.item() == pytest.approx(math.log(6), abs=1e-12)


def test_sentence_loss_matches_numpy_composition(rng):
    config = tiny_config("global")
    params = tiny_params(config, seed=3)
    src, tgt = [4, 1, 6, 2], [5, 3, 4]
    loss = sentence_loss(src, tgt, params.constants(), attention_config(config)).item()
    assert loss == pytest.approx(reference_global_loss(src, tgt, params.values), abs=1e-12)


def test_double_with_zero_syntax_context_equals_global():
    rng = np.random.default_rng(11)
    glob_config, double_config = tiny_config("global"), tiny_config("double")
    g_attn, d_attn = attention_config(glob_config), attention_config(double_config)
    steps = 0
    for instance in range(10):
        glob = tiny_params(glob_config, seed=instance)
        double = tiny_params(double_config, seed=100 + instance)
        for name, value in glob.values.items():
            double.values[name] = value.copy()
        double.values["L_cs"] = np.zeros_like(double.values["L_cs"])

        src = [int(i) for i in rng.integers(0, glob_config.src_vocab_size, size=int(rng.integers(1, 9)))]
        tree = random_tree(len(src), rng)
        g_p, d_p = glob.constants(), double.constants()
        H_g, H_d = encode(src, g_p), encode(src, d_p)
        s_g = initial_state(run_encoder(src, g_p), g_p)
        s_d = initial_state(run_encoder(src, d_p), d_p)
        mask = sdc_matrix(tree).dist
        for _ in range(10):
            prev = int(rng.integers(0, glob_config.tgt_vocab_size))
            z_g, s_g, _ = decode_step(s_g, prev, H_g, g_attn, g_p)
            z_d, s_d, _ = decode_step(s_d, prev, H_d, d_attn, d_p, mask)
            assert np.array_equal(z_g.value, z_d.value)
            assert np.array_equal(s_g.value, s_d.value)
            steps += 1

        tgt = [int(i) for i in rng.integers(3, glob_config.tgt_vocab_size, size=3)]
        assert sentence_loss(src, tgt, g_p, g_attn).item() == sentence_loss(src, tgt, d_p, d_attn, tree).item()
    assert steps == 100


def test_reversed_source_with_swapped_directions(rng):
    config = tiny_config("global")
    params = tiny_params(config, seed=4)
    swapped = params.copy()
    for suffix in ("Wz", "Wr", "Wh", "Uz", "Ur", "Uh", "bz", "br", "bh"):
        swapped.values[f"enc_fwd_{suffix}"] = params.values[f"enc_bwd_{suffix}"].copy()
        swapped.values[f"enc_bwd_{suffix}"] = params.values[f"enc_fwd_{suffix}"].copy()
    src = [4, 1, 6, 5, 2]
    H = encode(src, params.constants()).value
    H_rev = encode(src[::-1], swapped.constants()).value
    hid = config.hidden_dim
    for j in range(len(src)):
        mirrored = H[len(src) - 1 - j]
        assert np.allclose(H_rev[j, :hid], mirrored[hid:], atol=1e-14)
        assert np.allclose(H_rev[j, hid:], mirrored[:hid], atol=1e-14)


@pytest.mark.parametrize("kind", ["global", "local", "syntax", "double", "double_local"])
def test_decode_step_shapes_and_distribution(kind, rng):
    config = tiny_config(kind)
    params = tiny_params(config).constants()
    src = [4, 5, 6]
    tree = DepTree(tokens=["a", "b", "c"], heads=chain_heads(3))
    encoded = run_encoder(src, params)
    assert encoded.annotations.shape == (3, 10)
    state = initial_state(encoded, params)
    logits, new_state, out = decode_step(state, BOS, encoded.annotations, attention_config(config), params,
                                         sdc_matrix(tree).dist)
    assert logits.shape == (6,)
    assert new_state.shape == (5,)
    assert abs(step_distribution(logits).sum() - 1.0) < 1e-12
    assert set(out.contexts) == set(config.kind.context_keys)


def test_tree_length_mismatch_is_data_error():
    config = tiny_config("syntax")
    params = tiny_params(config).constants()
    tree = DepTree(tokens=["a", "b"], heads=chain_heads(2))
    with pytest.raises(DataError):
        sentence_loss([4, 5, 6], [3], params, attention_config(config), tree)


def test_syntax_kind_without_tree_is_configuration_error():
    config = tiny_config("syntax")
    with pytest.raises(ConfigurationError):
        sentence_loss([4, 5], [3], tiny_params(config).constants(), attention_config(config))


def test_out_of_vocabulary_id_is_data_error():
    config = tiny_config("global")
    params = tiny_params(config).constants()
    with pytest.raises(DataError):
        sentence_loss([4, 99], [3], params, attention_config(config))
    with pytest.raises(DataError):
        sentence_loss([], [3], params, attention_config(config))


def test_dropout_only_changes_training_loss():
    config = tiny_config("global", dropout=0.5)
    params = tiny_params(config).constants()
    attn = attention_config(config)
    clean = sentence_loss([4, 5, 6], [3, 4], params, attn).item()
    same = sentence_loss([4, 5, 6], [3, 4], params, attn, dropout_p=0.5, rng=np.random.default_rng(0), train=False)
    noisy = sentence_loss([4, 5, 6], [3, 4], params, attn, dropout_p=0.5, rng=np.random.default_rng(0), train=True)
    assert same.item() == clean
    assert noisy.item() != clean


def test_model_params_copy_is_deep():
    params = tiny_params(tiny_config())
    copied = params.copy()
    copied.values["E_x"][0, 0] += 1.0
    assert params.values["E_x"][0, 0] != copied.values["E_x"][0, 0]
    assert isinstance(copied, ModelParams)
    tensors = params.tensors()
    assert all(t.requires_grad for t in tensors.values())
    assert not any(t.requires_grad for t in params.constants().values())
    assert dc.Tensor is type(tensors["E_x"])
