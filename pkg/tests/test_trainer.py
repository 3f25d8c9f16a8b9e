# -*- coding: utf-8 -*-
import numpy as np
import pytest

from src import config as app_config
from src import diffcore as dc
from src.checkpoint import load_checkpoint, read_training_log
from src.corpus import Vocabulary, encode_corpus, generate_synthetic, split_corpus
from src.errors import ConfigurationError, NumericError
from src.model import attention_config, init_params
from src.trainer import dev_accuracy, train
from src.utils import rng_streams
from tests.conftest import tiny_config


def copy_examples(n_pairs=24, n_dev=4, seed=0, task="copy", vocab_size=4, max_len=4):
    data = generate_synthetic(task, n_pairs + n_dev, vocab_size, max_len, np.random.default_rng(seed))
    train_data, dev_data = split_corpus(data, n_dev)
    src_vocab = Vocabulary.build(train_data.src + dev_data.src)
    tgt_vocab = Vocabulary.build(train_data.tgt + dev_data.tgt)
    return (encode_corpus(train_data, src_vocab, tgt_vocab), encode_corpus(dev_data, src_vocab, tgt_vocab),
            src_vocab, tgt_vocab)


def copy_config(src_vocab, tgt_vocab, **overrides):
    values = dict(src_vocab_size=len(src_vocab), tgt_vocab_size=len(tgt_vocab), batch_size=4, epochs=2)
    values.update(overrides)
    return tiny_config(**values)


def test_zero_epochs_saves_initial_parameters(tmp_path):
    train_ex, dev_ex, sv, tv = copy_examples()
    config = copy_config(sv, tv, epochs=0)
    result = train(train_ex, dev_ex, config, out_dir=tmp_path, src_vocab=sv, tgt_vocab=tv, progress=False)
    expected = init_params(config, rng_streams(config.seed)["init"])
    ckpt = load_checkpoint(tmp_path / app_config.CHECKPOINT_FILENAME)
    for name, value in expected.values.items():
        assert np.array_equal(result.best_params.values[name], value)
        assert np.array_equal(ckpt.params.values[name], value)
    assert ckpt.metadata["epoch"] == 0
    assert result.history == []


def test_same_seed_gives_identical_checkpoints(tmp_path):
    train_ex, dev_ex, sv, tv = copy_examples()
    config = copy_config(sv, tv, dropout=0.3)
    for run in ("a", "b"):
        train(train_ex, dev_ex, config, out_dir=tmp_path / run, src_vocab=sv, tgt_vocab=tv, progress=False)
    first = (tmp_path / "a" / app_config.CHECKPOINT_FILENAME).read_bytes()
    second = (tmp_path / "b" / app_config.CHECKPOINT_FILENAME).read_bytes()
    assert first == second


def test_different_seed_gives_different_parameters():
    train_ex, dev_ex, sv, tv = copy_examples()
    a = train(train_ex, dev_ex, copy_config(sv, tv, seed=1, epochs=1), progress=False)
    b = train(train_ex, dev_ex, copy_config(sv, tv, seed=2, epochs=1), progress=False)
    assert not np.array_equal(a.params.values["E_x"], b.params.values["E_x"])


def test_training_loss_decreases_on_copy_task():
    train_ex, _, sv, tv = copy_examples(n_pairs=20, n_dev=1)
    config = copy_config(sv, tv, epochs=8, batch_size=5)
    result = train(train_ex, [], config, progress=False)
    losses = [r["train_loss"] for r in result.history]
    assert len(losses) == 8
    assert losses[-1] < losses[0]


def test_run_directory_contents(tmp_path):
    train_ex, dev_ex, sv, tv = copy_examples()
    config = copy_config(sv, tv, epochs=3)
    result = train(train_ex, dev_ex, config, out_dir=tmp_path, src_vocab=sv, tgt_vocab=tv, progress=False)
    records = read_training_log(tmp_path / app_config.TRAIN_LOG_FILENAME)
    assert [r["epoch"] for r in records] == [1, 2, 3]
    assert set(records[0]) == {"epoch", "train_loss", "dev_metric", "wall_time"}
    assert (tmp_path / app_config.RUN_CONFIG_FILENAME).exists()

    ckpt = load_checkpoint(result.checkpoint_path)
    assert ckpt.metadata["epoch"] == result.best_epoch
    best = max(r["dev_metric"] for r in records)
    assert result.best_dev_metric == best
    # ties keep the earliest epoch
    assert result.best_epoch == min(r["epoch"] for r in records if r["dev_metric"] == best)
    for name, value in result.best_params.values.items():
        assert np.array_equal(ckpt.params.values[name], value)


def test_without_dev_set_last_epoch_is_kept(tmp_path):
    train_ex, _, sv, tv = copy_examples()
    config = copy_config(sv, tv, epochs=2)
    result = train(train_ex, [], config, out_dir=tmp_path, progress=False)
    assert result.best_epoch == 2
    assert result.best_dev_metric is None
    ckpt = load_checkpoint(result.checkpoint_path)
    assert np.array_equal(ckpt.params.values["L_o"], result.params.values["L_o"])


def test_syntax_kind_without_masks_is_configuration_error():
    train_ex, dev_ex, sv, tv = copy_examples()
    for ex in train_ex:
        ex.mask = None
    config = copy_config(sv, tv, attention="syntax")
    with pytest.raises(ConfigurationError):
        train(train_ex, dev_ex, config, progress=False)


def test_empty_training_corpus_is_configuration_error():
    with pytest.raises(ConfigurationError):
        train([], [], tiny_config(), progress=False)


@pytest.mark.parametrize("kind", ["syntax", "double", "double_local"])
def test_every_kind_trains_one_epoch(kind):
    train_ex, dev_ex, sv, tv = copy_examples(task="tree_neighbor")
    config = copy_config(sv, tv, attention=kind, epochs=1)
    result = train(train_ex, dev_ex, config, progress=False)
    assert np.isfinite(result.history[0]["train_loss"])
    assert 0.0 <= result.history[0]["dev_metric"] <= 1.0

def test_non_finite_gradient_stops_training(monkeypatch):
    train_ex, dev_ex, sv, tv = copy_examples()
    real_backward = dc.backward

    def overflowing_backward(loss):
        grads = real_backward(loss)
        grads["L_o"] = np.full_like(grads["L_o"], np.inf)
        return grads

    monkeypatch.setattr(dc, "backward", overflowing_backward)
    with pytest.raises(NumericError, match=r"Epoch 1, batch 1: Non-finite gradient for L_o"):
        train(train_ex, dev_ex, copy_config(sv, tv, epochs=1), progress=False)



def test_dev_accuracy_counts_eos():
    train_ex, dev_ex, sv, tv = copy_examples()
    config = copy_config(sv, tv)
    params = init_params(config, np.random.default_rng(0))
    accuracy = dev_accuracy(dev_ex, params, config)
    assert 0.0 <= accuracy <= 1.0
    assert dev_accuracy([], params, config) == 0.0
    assert attention_config(config).kind.value == "global"


# --- Desk-scale end-to-end runs ---

@pytest.mark.slow
def test_global_attention_learns_copy_task():
    train_ex, dev_ex, sv, tv = copy_examples(n_pairs=1000, n_dev=100, vocab_size=20, max_len=10)
    config = tiny_config(src_vocab_size=len(sv), tgt_vocab_size=len(tv), embed_dim=32, hidden_dim=64,
                         max_len=10, batch_size=16, epochs=30, window=10, dropout=0.0, init_scale=0.08)
    result = train(train_ex, dev_ex, config, progress=False)
    assert result.best_dev_metric > 0.95


@pytest.mark.slow
def test_syntax_attention_learns_chain_copy_task():
    train_ex, dev_ex, sv, tv = copy_examples(n_pairs=1000, n_dev=100, vocab_size=20, max_len=10)
    config = tiny_config("syntax", src_vocab_size=len(sv), tgt_vocab_size=len(tv), embed_dim=32, hidden_dim=64,
                         max_len=10, batch_size=16, epochs=30, n=4, window=10, dropout=0.0, init_scale=0.08)
    result = train(train_ex, dev_ex, config, progress=False)
    assert result.best_dev_metric > 0.90


@pytest.mark.slow
def test_syntax_attention_keeps_up_with_local_on_tree_neighbor_task():
    wins = 0
    for seed in range(5):
        train_ex, dev_ex, sv, tv = copy_examples(n_pairs=400, n_dev=50, seed=seed, task="tree_neighbor",
                                                 vocab_size=10, max_len=8)
        scores = {}
        for kind in ("syntax", "local"):
            config = tiny_config(kind, src_vocab_size=len(sv), tgt_vocab_size=len(tv), embed_dim=16, hidden_dim=32,
                                 max_len=8, batch_size=16, epochs=15, n=2, window=3, dropout=0.0,
                                 init_scale=0.08, seed=seed)
            scores[kind] = train(train_ex, dev_ex, config, progress=False).best_dev_metric
        wins += scores["syntax"] >= scores["local"]
    assert wins >= 3
