# -*- coding: utf-8 -*-
"""
Length-capped beam search and greedy decoding over a frozen model.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import diffcore as dc
from .attention import AttentionConfig, AttentionOutput
from .corpus import BOS, EOS
from .diffcore import Tensor
from .errors import ConfigurationError
from .model import decode_step, initial_state, resolve_mask, run_encoder

log = logging.getLogger(__name__)


@dataclass
class Hypothesis:
    tokens: Tuple[int, ...] = ()
    score: float = 0.0  # sum of token log-probabilities
    state: Optional[Tensor] = None
    attention: List[np.ndarray] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return bool(self.tokens) and self.tokens[-1] == EOS

    @property
    def last_token(self) -> int:
        return self.tokens[-1] if self.tokens else BOS

    def output_ids(self) -> List[int]:
        """Tokens without the closing EOS."""
        return list(self.tokens[:-1] if self.finished else self.tokens)


@dataclass
class _Source:
    H: Tensor
    state: Tensor
    mask: Optional[np.ndarray]


def _prepare(src_ids: Sequence[int], params: Mapping[str, Tensor], attn: AttentionConfig, tree) -> _Source:
    mask = resolve_mask(tree, len(src_ids))
    if attn.kind.uses_syntax and mask is None:
        raise ConfigurationError(f"Attention kind '{attn.kind.value}' needs a dependency tree for every source sentence")
    encoded = run_encoder(src_ids, params)
    return _Source(H=encoded.annotations, state=initial_state(encoded, params), mask=mask)


def attention_row(out: AttentionOutput) -> np.ndarray:
    """Weights of one step; double kinds give the global weights followed by the secondary (syntax or local) ones."""
    if out.secondary is None:
        return out.weights.value
    return np.concatenate([out.weights.value, out.secondary.weights.value])


def _step(source: _Source, hyp: Hypothesis, attn: AttentionConfig, params: Mapping[str, Tensor]):
    logits, state, out = decode_step(hyp.state, hyp.last_token, source.H, attn, params, source.mask)
    return dc.log_softmax_values(logits.value), state, attention_row(out)


def beam_search(
    src_ids: Sequence[int],
    params: Mapping[str, Tensor],
    attn: AttentionConfig,
    tree=None,
    beam: int = 12,
    max_len: int = 20,
    keep_attention: bool = False,
) -> Hypothesis:
    """
    Expands every live hypothesis by every target token and keeps the `beam`
    best candidates. A candidate ending in EOS, or reaching max_len tokens,
    is finished. Search stops once no live hypothesis can beat the best
    finished one (scores only decrease as tokens append).
    """
    if beam < 1:
        raise ConfigurationError(f"Beam size must be >= 1, got {beam}")
    if max_len < 1:
        raise ConfigurationError(f"max_len must be >= 1, got {max_len}")

    with dc.no_grad():
        source = _prepare(src_ids, params, attn, tree)
        live = [Hypothesis(state=source.state)]
        finished: List[Hypothesis] = []

        for _ in range(max_len):
            cand_scores, cand_origin = [], []
            steps = []
            for k, hyp in enumerate(live):
                log_probs, state, weights = _step(source, hyp, attn, params)
                steps.append((state, weights))
                cand_scores.append(hyp.score + log_probs)
                cand_origin.append(np.full(log_probs.shape[0], k))
            scores = np.concatenate(cand_scores)
            origins = np.concatenate(cand_origin)
            tokens = np.concatenate([np.arange(len(s)) for s in cand_scores])

            # Stable order: equal scores keep hypothesis rank, then token id
            chosen = np.argsort(-scores, kind="stable")[:beam]
            next_live: List[Hypothesis] = []
            for c in chosen:
                parent = live[origins[c]]
                state, weights = steps[origins[c]]
                hyp = Hypothesis(
                    tokens=parent.tokens + (int(tokens[c]),),
                    score=float(scores[c]),
                    state=state,
                    attention=parent.attention + [weights] if keep_attention else [],
                )
                if hyp.finished or len(hyp.tokens) >= max_len:
                    finished.append(hyp)
                else:
                    next_live.append(hyp)
            live = next_live

            if not live:
                break
            best_finished = max((h.score for h in finished), default=-np.inf)
            if best_finished >= live[0].score:
                break

    best = finished[0]
    for hyp in finished[1:]:
        if hyp.score > best.score:
            best = hyp
    log.debug(f"Beam search kept {len(finished)} finished hypotheses; best score {best.score:.4f}")
    return best


def greedy_decode(
    src_ids: Sequence[int],
    params: Mapping[str, Tensor],
    attn: AttentionConfig,
    tree=None,
    max_len: int = 20,
    keep_attention: bool = False,
) -> Hypothesis:
    """Argmax token at every step until EOS or max_len tokens."""
    if max_len < 1:
        raise ConfigurationError(f"max_len must be >= 1, got {max_len}")
    with dc.no_grad():
        source = _prepare(src_ids, params, attn, tree)
        hyp = Hypothesis(state=source.state)
        while not hyp.finished and len(hyp.tokens) < max_len:
            log_probs, state, weights = _step(source, hyp, attn, params)
            token = int(np.argmax(log_probs))
            hyp = Hypothesis(
                tokens=hyp.tokens + (token,),
                score=hyp.score + float(log_probs[token]),
                state=state,
                attention=hyp.attention + [weights] if keep_attention else [],
            )
    return hyp


def forced_accuracy_counts(
    src_ids: Sequence[int],
    tgt_ids: Sequence[int],
    params: Mapping[str, Tensor],
    attn: AttentionConfig,
    tree=None,
) -> Tuple[int, int]:
    """(positions greedy decoding gets right, positions) over tgt + EOS."""
    gold = list(tgt_ids) + [EOS]
    hyp = greedy_decode(src_ids, params, attn, tree, max_len=len(gold))
    correct = sum(1 for g, p in zip(gold, hyp.tokens) if g == p)
    return correct, len(gold)
