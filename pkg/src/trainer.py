# -*- coding: utf-8 -*-

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import tqdm

from . import config as app_config
from . import diffcore as dc
from .beam_search import forced_accuracy_counts
from .checkpoint import TrainingLog, save_checkpoint
from .config import ModelConfig
from .corpus import Example, Vocabulary
from .errors import ConfigurationError, NumericError
from .model import ModelParams, attention_config, init_params, sentence_loss
from .utils import atomic_write_text, rng_streams

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    params: ModelParams  # after the last epoch
    best_params: ModelParams
    best_epoch: int
    best_dev_metric: Optional[float]
    history: List[Dict[str, Any]] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None


def dev_accuracy(examples: Sequence[Example], params: ModelParams, model_config: ModelConfig) -> float:
    """Share of gold target positions (EOS included) that greedy decoding reproduces."""
    attn = attention_config(model_config)
    tensors = params.constants()
    correct = total = 0
    for ex in examples:
        c, t = forced_accuracy_counts(ex.src_ids, ex.tgt_ids, tensors, attn, ex.mask)
        correct += c
        total += t
    return correct / total if total else 0.0


def _batch_gradients(
    batch: Sequence[Example],
    params: ModelParams,
    model_config: ModelConfig,
    rng: np.random.Generator,
) -> Tuple[Dict[str, np.ndarray], float]:
    """Summed gradients and summed per-sentence losses over one minibatch."""
    attn = attention_config(model_config)
    tensors = params.tensors()
    totals = {name: np.zeros_like(value) for name, value in params.values.items()}
    loss_sum = 0.0
    for ex in batch:
        loss = sentence_loss(ex.src_ids, ex.tgt_ids, tensors, attn, ex.mask,
                             dropout_p=model_config.dropout, rng=rng, train=True)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"Non-finite loss {value}")
        for name, grad in dc.backward(loss).items():
            totals[name] += grad
        loss_sum += value
    for name, grad in totals.items():
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"Non-finite gradient for {name}")
    return totals, loss_sum


def _check_inputs(train_examples: Sequence[Example], dev_examples: Sequence[Example], model_config: ModelConfig):
    if not train_examples:
        raise ConfigurationError("Training corpus is empty")
    if model_config.kind.uses_syntax:
        for what, examples in (("training", train_examples), ("dev", dev_examples)):
            if any(ex.mask is None for ex in examples):
                raise ConfigurationError(
                    f"Attention kind '{model_config.attention}' needs a dependency tree for every {what} sentence"
                )


def train(
    train_examples: Sequence[Example],
    dev_examples: Sequence[Example],
    model_config: ModelConfig,
    out_dir: Optional[Union[str, Path]] = None,
    src_vocab: Optional[Vocabulary] = None,
    tgt_vocab: Optional[Vocabulary] = None,
    progress: bool = True,
) -> TrainResult:
    """
    Shuffled minibatch ADADELTA for `epochs` epochs. With a dev set the
    checkpoint keeps the epoch with the best dev accuracy (ties keep the
    earlier epoch); without one it keeps the last epoch.
    """
    model_config.validate()
    _check_inputs(train_examples, dev_examples, model_config)
    streams = rng_streams(model_config.seed)
    params = init_params(model_config, streams["init"])
    state = dc.AdadeltaState(rho=model_config.rho, eps=model_config.eps)

    out_dir = Path(out_dir) if out_dir is not None else None
    train_log = None
    checkpoint_path = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out_dir / app_config.RUN_CONFIG_FILENAME, _config_json(model_config))
        train_log = TrainingLog(out_dir / app_config.TRAIN_LOG_FILENAME)
        checkpoint_path = out_dir / app_config.CHECKPOINT_FILENAME

    def save(best: ModelParams, epoch: int, metric: Optional[float]):
        if checkpoint_path is not None:
            save_checkpoint(best, model_config, checkpoint_path, src_vocab, tgt_vocab,
                            metadata={"epoch": epoch, "dev_metric": metric})

    best_params, best_epoch, best_metric = params.copy(), 0, None
    if model_config.epochs == 0:
        log.info("Zero epochs requested; saving the initial parameters")
        save(best_params, 0, None)

    history: List[Dict[str, Any]] = []
    n = len(train_examples)
    log.info(f"Training '{model_config.attention}' model on {n} pairs for {model_config.epochs} epochs "
             f"(batch {model_config.batch_size}, {sum(v.size for v in params.values.values())} parameters)")

    for epoch in range(1, model_config.epochs + 1):
        started = time.monotonic()
        order = streams["shuffle"].permutation(n)
        epoch_loss = 0.0
        batch_starts = range(0, n, model_config.batch_size)
        with tqdm.tqdm(total=n, desc=f"epoch {epoch}", unit="sent", leave=False, disable=not progress) as pbar:
            for batch_no, start in enumerate(batch_starts, start=1):
                batch = [train_examples[i] for i in order[start:start + model_config.batch_size]]
                try:
                    grads, batch_loss = _batch_gradients(batch, params, model_config, streams["dropout"])
                except NumericError as e:
                    raise NumericError(f"Epoch {epoch}, batch {batch_no}: {e}") from e
                dc.adadelta_step(params.values, grads, state, lr=model_config.lr)
                epoch_loss += batch_loss
                pbar.update(len(batch))
                pbar.set_postfix(loss=f"{batch_loss / len(batch):.4f}")

        train_loss = epoch_loss / n
        dev_metric = dev_accuracy(dev_examples, params, model_config) if dev_examples else None
        record = {
            "epoch": epoch,
            "train_loss": train_loss,
            "dev_metric": dev_metric,
            "wall_time": round(time.monotonic() - started, 3),
        }
        history.append(record)
        if train_log is not None:
            train_log.append(record)
        dev_label = f"{dev_metric:.4f}" if dev_metric is not None else "n/a"
        log.info(f"Epoch {epoch}/{model_config.epochs}: train loss {train_loss:.4f}, dev accuracy {dev_label}")

        if dev_metric is None or best_metric is None or dev_metric > best_metric:
            best_params, best_epoch, best_metric = params.copy(), epoch, dev_metric
            save(best_params, epoch, dev_metric)

    if best_metric is not None:
        log.info(f"✅ Best dev accuracy {best_metric:.4f} at epoch {best_epoch}")
    return TrainResult(params=params, best_params=best_params, best_epoch=best_epoch,
                       best_dev_metric=best_metric, history=history, checkpoint_path=checkpoint_path)


def _config_json(model_config: ModelConfig) -> str:
    return json.dumps(model_config.to_dict(), indent=2, sort_keys=True) + "\n"
