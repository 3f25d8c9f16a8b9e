# -*- coding: utf-8 -*-
"""
Bidirectional GRU encoder and attention-conditioned GRU decoder.

Parameter naming follows the prediction layer
    logits = L_o tanh(L_w E_y[y_prev] + L_d s_i + sum_k L_ck c_k)
with one context matrix per context vector the attention kind produces.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import diffcore as dc
from .attention import AttentionConfig, AttentionOutput, attend
from .config import ModelConfig
from .corpus import BOS, EOS
from .deptree import DepTree, SdcMatrix, sdc_matrix
from .diffcore import Tensor
from .errors import CheckpointError, ConfigurationError, DataError

log = logging.getLogger(__name__)

GRU_GATES = ("z", "r", "h")


def attention_config(config: ModelConfig) -> AttentionConfig:
    return AttentionConfig(kind=config.kind, window=config.window, n=config.n,
                           linear_sdc_support=config.linear_sdc_support)


def _gru_shapes(prefix: str, in_dim: int, hidden: int) -> Dict[str, Tuple[int, ...]]:
    shapes: Dict[str, Tuple[int, ...]] = {}
    for gate in GRU_GATES:
        shapes[f"{prefix}_W{gate}"] = (in_dim, hidden)
        shapes[f"{prefix}_U{gate}"] = (hidden, hidden)
        shapes[f"{prefix}_b{gate}"] = (hidden,)
    return shapes


def param_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Every trainable matrix the configured kind needs, in a fixed order."""
    emb, hid = config.embed_dim, config.hidden_dim
    ann = 2 * hid
    readout = emb
    kind = config.kind
    shapes: Dict[str, Tuple[int, ...]] = {
        "E_x": (config.src_vocab_size, emb),
        "E_y": (config.tgt_vocab_size, emb),
    }
    shapes.update(_gru_shapes("enc_fwd", emb, hid))
    shapes.update(_gru_shapes("enc_bwd", emb, hid))
    shapes["W_init"] = (hid, hid)
    shapes["b_init"] = (hid,)
    shapes.update(_gru_shapes("dec", emb + ann, hid))
    shapes["W_a"] = (hid, hid)
    shapes["U_a"] = (ann, hid)
    shapes["v_a"] = (hid,)
    if kind.uses_position:
        shapes["W_p"] = (hid, hid)
        shapes["v_p"] = (hid,)
    shapes["L_w"] = (emb, readout)
    shapes["L_d"] = (hid, readout)
    for key in kind.context_keys:
        shapes[key] = (ann, readout)
    shapes["L_o"] = (readout, config.tgt_vocab_size)
    return shapes


@dataclass
class ModelParams:
    """Named float64 arrays; the single owner of the trainable state."""
    values: Dict[str, np.ndarray]

    def tensors(self) -> Dict[str, Tensor]:
        return {name: dc.parameter(value, name=name) for name, value in self.values.items()}

    def constants(self) -> Dict[str, Tensor]:
        return {name: Tensor(value, name=name) for name, value in self.values.items()}

    def copy(self) -> "ModelParams":
        return ModelParams({name: value.copy() for name, value in self.values.items()})

    def check_schema(self, config: ModelConfig) -> "ModelParams":
        expected = param_shapes(config)
        missing = [name for name in expected if name not in self.values]
        if missing:
            raise ConfigurationError(
                f"Parameters for attention kind '{config.attention}' are missing: {', '.join(missing)}"
            )
        for name, shape in expected.items():
            if self.values[name].shape != shape:
                raise CheckpointError(f"Parameter {name} has shape {self.values[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.values[name])):
                raise CheckpointError(f"Parameter {name} holds non-finite values")
        return self


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Uniform in [-init_scale, init_scale], drawn in declaration order."""
    scale = config.init_scale
    values = {
        name: rng.uniform(-scale, scale, size=shape).astype(dc.DTYPE)
        for name, shape in param_shapes(config).items()
    }
    return ModelParams(values)


def zero_params(config: ModelConfig) -> ModelParams:
    return ModelParams({name: np.zeros(shape, dtype=dc.DTYPE) for name, shape in param_shapes(config).items()})


def gru_step(prefix: str, x: Tensor, h: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """h' = h + z * (h~ - h), i.e. (1 - z) h + z h~."""
    def gate(name: str, hidden: Tensor) -> Tensor:
        return dc.add(dc.add(dc.matmul(x, params[f"{prefix}_W{name}"]),
                             dc.matmul(hidden, params[f"{prefix}_U{name}"])),
                      params[f"{prefix}_b{name}"])

    z = dc.sigmoid(gate("z", h))
    r = dc.sigmoid(gate("r", h))
    candidate = dc.tanh(gate("h", dc.mul(r, h)))
    return dc.add(h, dc.mul(z, dc.sub(candidate, h)))


@dataclass
class EncoderOutput:
    annotations: Tensor  # J x 2*hidden
    backward_first: Tensor  # backward GRU state at position 0


def _check_ids(ids: Sequence[int], vocab_size: int, side: str) -> None:
    if len(ids) == 0:
        raise DataError(f"Empty {side} sentence")
    for i in ids:
        if not 0 <= i < vocab_size:
            raise DataError(f"{side} token id {i} outside vocabulary of size {vocab_size}")


def run_encoder(
    src_ids: Sequence[int],
    params: Mapping[str, Tensor],
    dropout_p: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    train: bool = False,
) -> EncoderOutput:
    table = params["E_x"]
    _check_ids(src_ids, table.shape[0], "source")
    hidden = params["enc_fwd_Uz"].shape[0]
    embedded = [dc.dropout(dc.embedding_lookup(table, int(i)), dropout_p, rng, train) for i in src_ids]

    h = Tensor(np.zeros(hidden))
    forward: List[Tensor] = []
    for x in embedded:
        h = gru_step("enc_fwd", x, h, params)
        forward.append(h)

    h = Tensor(np.zeros(hidden))
    backward: List[Tensor] = [None] * len(embedded)
    for j in range(len(embedded) - 1, -1, -1):
        h = gru_step("enc_bwd", embedded[j], h, params)
        backward[j] = h

    H = dc.stack([dc.concat([f, b]) for f, b in zip(forward, backward)])
    return EncoderOutput(annotations=H, backward_first=backward[0])


def encode(src_ids: Sequence[int], params: Mapping[str, Tensor]) -> Tensor:
    """Source annotations h_j = [forward_j; backward_j]."""
    return run_encoder(src_ids, params).annotations


def initial_state(encoded: EncoderOutput, params: Mapping[str, Tensor]) -> Tensor:
    return dc.tanh(dc.add(dc.matmul(encoded.backward_first, params["W_init"]), params["b_init"]))


def decode_step(
    state: Tensor,
    y_prev_id: int,
    H: Tensor,
    attn: AttentionConfig,
    params: Mapping[str, Tensor],
    mask=None,
    dropout_p: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    train: bool = False,
) -> Tuple[Tensor, Tensor, AttentionOutput]:
    """One decoder step: attention on s_{i-1}, GRU update, prediction layer."""
    if attn.kind.uses_syntax and mask is None:
        raise ConfigurationError(f"Attention kind '{attn.kind.value}' needs the source SDC mask")
    out = attend(attn, state, state, H, params, mask=mask)
    emb = dc.dropout(dc.embedding_lookup(params["E_y"], int(y_prev_id)), dropout_p, rng, train)
    new_state = gru_step("dec", dc.concat([emb, out.context]), state, params)

    terms = [dc.matmul(emb, params["L_w"]), dc.matmul(new_state, params["L_d"])]
    for key in attn.kind.context_keys:
        terms.append(dc.matmul(out.contexts[key], params[key]))
    readout = dc.dropout(dc.tanh(dc.add_n(terms)), dropout_p, rng, train)
    logits = dc.matmul(readout, params["L_o"])
    return logits, new_state, out


def resolve_mask(source: Union[None, DepTree, SdcMatrix, np.ndarray], src_len: int) -> Optional[np.ndarray]:
    """Accepts a tree, a mask matrix or nothing; checks it covers the source sentence."""
    if source is None:
        return None
    if isinstance(source, DepTree):
        source = sdc_matrix(source)
    dist = np.asarray(getattr(source, "dist", source))
    if dist.shape != (src_len, src_len):
        raise DataError(f"Dependency tree covers {dist.shape[0]} words but the source sentence has {src_len}")
    return dist


def sentence_loss(
    src_ids: Sequence[int],
    tgt_ids: Sequence[int],
    params: Mapping[str, Tensor],
    attn: AttentionConfig,
    tree: Union[None, DepTree, SdcMatrix, np.ndarray] = None,
    dropout_p: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    train: bool = False,
) -> Tensor:
    """Mean teacher-forced negative log-likelihood over the target tokens plus EOS."""
    mask = resolve_mask(tree, len(src_ids))
    if attn.kind.uses_syntax and mask is None:
        raise ConfigurationError(f"Attention kind '{attn.kind.value}' needs a dependency tree per sentence")
    _check_ids(tgt_ids, params["E_y"].shape[0], "target")

    encoded = run_encoder(src_ids, params, dropout_p, rng, train)
    H = dc.dropout(encoded.annotations, dropout_p, rng, train)
    state = initial_state(encoded, params)

    losses = []
    prev = BOS
    for gold in list(tgt_ids) + [EOS]:
        logits, state, _ = decode_step(state, prev, H, attn, params, mask, dropout_p, rng, train)
        losses.append(dc.cross_entropy(logits, int(gold)))
        prev = gold
    return dc.scalar_mul(dc.add_n(losses), 1.0 / len(losses))


def step_distribution(logits: Tensor) -> np.ndarray:
    """Probability vector of one decoder step."""
    return np.exp(dc.log_softmax_values(logits.value))
