# -*- coding: utf-8 -*-
"""
Finite-difference checks of every differentiable op and of the full model on
a 4-word toy sentence, as run by `main.py gradcheck`.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from . import attention as att
from . import diffcore as dc
from .attention import AttentionKind
from .config import ModelConfig
from .corpus import BOS
from .deptree import DepTree, sdc_matrix
from .diffcore import Tensor
from .model import attention_config, init_params, initial_state, decode_step, run_encoder, sentence_loss, gru_step

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_THRESHOLD = 1e-4

Builder = Callable[[Dict[str, Tensor]], Tensor]


@dataclass
class GradCheckResult:
    name: str
    error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.error < self.threshold


def _project(out: Tensor, weights: np.ndarray) -> Tensor:
    """Random linear read-out so that no op's gradient is trivially zero."""
    return dc.sum_all(dc.mul(out, weights))


def op_cases(rng: np.random.Generator) -> Dict[str, Tuple[Builder, Dict[str, np.ndarray]]]:
    r = lambda *shape: rng.normal(size=shape)
    w3, w4, w34 = r(3), r(4), r(3, 4)
    mask = np.array([False, True, False, False])
    table_row = 2
    drop_seed = int(rng.integers(1 << 31))
    sdc_row = np.array([2, 1, 0, 3])

    return {
        "add": (lambda p: _project(dc.add(p["a"], p["b"]), w34), {"a": r(3, 4), "b": r(4)}),
        "sub": (lambda p: _project(dc.sub(p["a"], p["b"]), w34), {"a": r(3, 4), "b": r(3, 4)}),
        "mul": (lambda p: _project(dc.mul(p["a"], p["b"]), w34), {"a": r(3, 4), "b": r(3, 1)}),
        "scalar_mul": (lambda p: _project(dc.scalar_mul(p["a"], -1.7), w4), {"a": r(4)}),
        "add_n": (lambda p: _project(dc.add_n([p["a"], p["b"], p["a"]]), w4), {"a": r(4), "b": r(4)}),
        "matmul_vm": (lambda p: _project(dc.matmul(p["x"], p["W"]), w4), {"x": r(3), "W": r(3, 4)}),
        "matmul_mv": (lambda p: _project(dc.matmul(p["W"], p["x"]), w3), {"W": r(3, 4), "x": r(4)}),
        "matmul_mm": (lambda p: _project(dc.matmul(p["A"], p["B"]), w34), {"A": r(3, 2), "B": r(2, 4)}),
        "dot": (lambda p: dc.dot(p["x"], p["y"]), {"x": r(4), "y": r(4)}),
        "concat": (lambda p: _project(dc.concat([p["x"], p["y"]]), w4), {"x": r(1), "y": r(3)}),
        "stack": (lambda p: _project(dc.stack([p["x"], p["y"], p["x"]]), w34), {"x": r(4), "y": r(4)}),
        "tanh": (lambda p: _project(dc.tanh(p["x"]), w34), {"x": r(3, 4)}),
        "sigmoid": (lambda p: _project(dc.sigmoid(p["x"]), w34), {"x": r(3, 4)}),
        "exp": (lambda p: _project(dc.exp(p["x"]), w4), {"x": r(4)}),
        "softmax": (lambda p: _project(dc.softmax(p["x"]), w4), {"x": r(4)}),
        "masked_fill": (lambda p: _project(dc.softmax(dc.masked_fill(p["x"], mask)), w4), {"x": r(4)}),
        "embedding_lookup": (lambda p: _project(dc.embedding_lookup(p["E"], table_row), w4), {"E": r(5, 4)}),
        "dropout": (
            lambda p: _project(dc.dropout(p["x"], 0.3, np.random.default_rng(drop_seed), train=True), w34),
            {"x": r(3, 4)},
        ),
        "cross_entropy": (lambda p: dc.cross_entropy(p["z"], 1), {"z": r(5)}),
        "gru_step": (
            lambda p: _project(gru_step("g", p["x"], p["h"], p), w3),
            {"x": r(2), "h": r(3), **{f"g_{k}{gate}": r(*shape) for gate in "zrh"
                                       for k, shape in (("W", (2, 3)), ("U", (3, 3)), ("b", (3,)))}},
        ),
        "local_weights": (
            lambda p: _project(att.local_weights(dc.softmax(p["e"]), dc.scalar_mul(dc.sigmoid(p["q"]), 4.0), 10, 4), w4),
            {"e": r(4), "q": np.array(r())},
        ),
        "sdatt_weights": (
            lambda p: _project(att.sdatt_weights(att.sdatt_scores(p["e"], sdc_row, 1.0), sdc_row, 2), w4),
            {"e": r(4)},
        ),
    }


def run_op_checks(seed: int, eps: float = DEFAULT_EPS, threshold: float = DEFAULT_THRESHOLD) -> List[GradCheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, (builder, inputs) in op_cases(rng).items():
        error = dc.grad_check(builder, inputs, eps=eps)
        results.append(GradCheckResult(f"op:{name}", error, threshold))
    return results


# --- Full model ---

TOY_TREE = DepTree(tokens=("a", "b", "c", "d"), heads=(2, 0, 2, 3))
TOY_SOURCE = (4, 5, 6, 7)
TOY_TARGET = (4, 6, 5)

# Central differences at eps=1e-5 carry ~1e-11 of round-off; coordinates
# below this floor cannot be checked to 1e-4 relative error.
GRAD_FLOOR = 1e-6
MAX_DRAWS = 24


def toy_config(kind: str, seed: int) -> ModelConfig:
    return ModelConfig(src_vocab_size=9, tgt_vocab_size=7, embed_dim=3, hidden_dim=3, attention=kind,
                       n=1, window=10, dropout=0.0, init_scale=1.5, seed=seed)


def _toy_builders(kind: str, seed: int) -> Dict[str, Builder]:
    attn = attention_config(toy_config(kind, seed))
    mask = sdc_matrix(TOY_TREE)

    def step_loss(p: Dict[str, Tensor]) -> Tensor:
        encoded = run_encoder(TOY_SOURCE, p)
        state = initial_state(encoded, p)
        logits, _, _ = decode_step(state, BOS, encoded.annotations, attn, p, mask)
        return dc.cross_entropy(logits, TOY_TARGET[0])

    def full_loss(p: Dict[str, Tensor]) -> Tensor:
        return sentence_loss(TOY_SOURCE, TOY_TARGET, p, attn, mask)

    return {f"{kind}:decode_step": step_loss, f"{kind}:sentence_loss": full_loss}


def smallest_gradient(builders: Sequence[Builder], values: Dict[str, np.ndarray]) -> float:
    """Smallest non-zero |d loss / d theta| over every coordinate and builder."""
    smallest = np.inf
    for builder in builders:
        grads = dc.backward(builder({name: dc.parameter(v, name=name) for name, v in values.items()}))
        for g in grads.values():
            magnitudes = np.abs(g[g != 0.0])
            if magnitudes.size:
                smallest = min(smallest, float(magnitudes.min()))
    return smallest


def toy_params(kind: str, seed: int) -> Dict[str, np.ndarray]:
    """
    First parameter draw from `seed` whose non-zero gradients all clear
    GRAD_FLOOR. Exact zeros (unused embedding rows, masked positions) are
    reproduced exactly by finite differences and are allowed.
    """
    model_config = toy_config(kind, seed)
    builders = list(_toy_builders(kind, seed).values())
    rng = np.random.default_rng(seed)
    best, best_floor = None, -1.0
    for draw in range(MAX_DRAWS):
        values = init_params(model_config, rng).values
        floor = smallest_gradient(builders, values)
        if floor >= GRAD_FLOOR:
            if draw:
                log.debug(f"{kind}: toy draw {draw} clears the gradient floor ({floor:.2e})")
            return values
        if floor > best_floor:
            best, best_floor = values, floor
    log.warning(f"{kind}: no toy draw clears the gradient floor; smallest gradient {best_floor:.2e}")
    return best


def model_cases(kind: str, seed: int) -> Dict[str, Tuple[Builder, Dict[str, np.ndarray]]]:
    values = toy_params(kind, seed)
    return {name: (builder, values) for name, builder in _toy_builders(kind, seed).items()}


def run_model_checks(kind: str, seed: int, eps: float = DEFAULT_EPS,
                     threshold: float = DEFAULT_THRESHOLD) -> List[GradCheckResult]:
    return [GradCheckResult(f"model:{name}", dc.grad_check(builder, inputs, eps=eps), threshold)
            for name, (builder, inputs) in model_cases(kind, seed).items()]


def run_suite(kinds: Sequence[str], seed: int, eps: float = DEFAULT_EPS,
              threshold: float = DEFAULT_THRESHOLD) -> List[GradCheckResult]:
    results = run_op_checks(seed, eps, threshold)
    for kind in kinds:
        results.extend(run_model_checks(AttentionKind(kind).value, seed, eps, threshold))
    for result in results:
        status = "ok" if result.passed else "FAILED"
        log.info(f"{result.name:<32} max relative error {result.error:.3e}  {status}")
    return results
