# -*- coding: utf-8 -*-
import os

import numpy as np
import pytest

from src.config import ModelConfig
from src.deptree import DepTree, chain_heads, random_heads
from src.model import init_params


def pytest_collection_modifyitems(config, items):
    if os.getenv("SDATT_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="desk-scale run; set SDATT_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def chain_tree():
    return DepTree(tokens=("a", "b", "c"), heads=chain_heads(3))


def tiny_config(attention="global", **overrides) -> ModelConfig:
    values = dict(src_vocab_size=7, tgt_vocab_size=6, embed_dim=4, hidden_dim=5, attention=attention,
                  n=2, window=3, dropout=0.0, init_scale=0.5, max_len=6, seed=7, batch_size=2, epochs=1)
    values.update(overrides)
    return ModelConfig(**values).validate()


def tiny_params(model_config: ModelConfig, seed: int = 0):
    return init_params(model_config, np.random.default_rng(seed))


def random_tree(J: int, rng: np.random.Generator) -> DepTree:
    return DepTree(tokens=[f"t{j}" for j in range(J)], heads=random_heads(J, rng))
