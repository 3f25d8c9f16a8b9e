# -*- coding: utf-8 -*-
"""
Vocabularies, aligned parallel corpora (plus source dependency trees) and the
bundled synthetic tasks used for desk-scale runs.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .deptree import DepTree, SdcMatrix, chain_heads, random_heads, read_conllu, sdc_matrix, serialize_conllu
from .errors import ConfigurationError, DataError
from .utils import atomic_write_text, read_lines

log = logging.getLogger(__name__)

# Reserved ids shared by source and target vocabularies
PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<s>", "</s>", "<unk>")

SYNTHETIC_TASKS = ("copy", "reverse", "tree_neighbor")


def tokenize(line: str) -> List[str]:
    return line.split()


class Vocabulary:
    """Word <-> id map; the first four ids are the reserved tokens."""

    def __init__(self, words: Sequence[str] = ()):
        self.itos: List[str] = list(RESERVED_TOKENS)
        self.stoi: Dict[str, int] = {w: i for i, w in enumerate(self.itos)}
        for word in words:
            if word not in self.stoi:
                self.stoi[word] = len(self.itos)
                self.itos.append(word)

    @classmethod
    def build(cls, sentences: Sequence[Sequence[str]], limit: Optional[int] = None) -> "Vocabulary":
        """Keeps the `limit` most frequent words; ties go to the word seen first."""
        counts: Counter = Counter()
        first_seen: Dict[str, int] = {}
        for sentence in sentences:
            for word in sentence:
                counts[word] += 1
                first_seen.setdefault(word, len(first_seen))
        ranked = sorted(counts, key=lambda w: (-counts[w], first_seen[w]))
        if limit is not None:
            if len(ranked) > limit:
                log.info(f"Vocabulary limited to {limit} of {len(ranked)} word types; the rest map to <unk>")
            ranked = ranked[:limit]
        return cls(ranked)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, word: str) -> bool:
        return word in self.stoi

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.stoi.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        """Stops at EOS; drops PAD and BOS."""
        words = []
        for i in ids:
            if i == EOS:
                break
            if i in (PAD, BOS):
                continue
            words.append(self.itos[i] if 0 <= i < len(self.itos) else RESERVED_TOKENS[UNK])
        return words

    def to_list(self) -> List[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, items: Sequence[str]) -> "Vocabulary":
        items = list(items)
        if tuple(items[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise DataError("Stored vocabulary does not start with the reserved tokens")
        return cls(items[len(RESERVED_TOKENS):])


@dataclass
class ParallelCorpus:
    src: List[List[str]]
    tgt: List[List[str]] = field(default_factory=list)
    trees: Optional[List[DepTree]] = None

    def __len__(self) -> int:
        return len(self.src)

    def subset(self, indices: Sequence[int]) -> "ParallelCorpus":
        return ParallelCorpus(
            src=[self.src[i] for i in indices],
            tgt=[self.tgt[i] for i in indices] if self.tgt else [],
            trees=[self.trees[i] for i in indices] if self.trees is not None else None,
        )


@dataclass
class Example:
    """One encoded sentence pair ready for the model."""
    src_ids: List[int]
    tgt_ids: List[int]
    mask: Optional[SdcMatrix] = None


def _read_sentences(path: Union[str, Path]) -> List[List[str]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Corpus file {path} not found")
    sentences = []
    for line_number, line in enumerate(read_lines(path), start=1):
        tokens = tokenize(line)
        if not tokens:
            raise DataError(f"{path}: line {line_number} is an empty sentence")
        sentences.append(tokens)
    return sentences


def _attach_trees(src: List[List[str]], src_path: Union[str, Path], conllu_path: Union[str, Path]) -> List[DepTree]:
    conllu_path = Path(conllu_path)
    if not conllu_path.exists():
        raise DataError(f"Tree file {conllu_path} not found")
    trees = read_conllu(conllu_path)
    if len(trees) != len(src):
        raise DataError(f"{src_path} has {len(src)} sentences but {conllu_path} has {len(trees)} trees")
    for i, (tokens, tree) in enumerate(zip(src, trees), start=1):
        if tree.length != len(tokens):
            raise DataError(
                f"Sentence {i}: {src_path} has {len(tokens)} tokens but the tree in {conllu_path} has {tree.length}"
            )
    return trees


def read_source(src_path: Union[str, Path], conllu_path: Optional[Union[str, Path]] = None) -> ParallelCorpus:
    src = _read_sentences(src_path)
    trees = _attach_trees(src, src_path, conllu_path) if conllu_path is not None else None
    return ParallelCorpus(src=src, trees=trees)


def read_parallel(
    src_path: Union[str, Path],
    tgt_path: Union[str, Path],
    conllu_path: Optional[Union[str, Path]] = None,
) -> ParallelCorpus:
    """Aligned source/target files, one whitespace-tokenized sentence per line."""
    corpus = read_source(src_path, conllu_path)
    tgt = _read_sentences(tgt_path)
    if len(tgt) != len(corpus.src):
        raise DataError(f"Line counts differ: {src_path} has {len(corpus.src)} lines, {tgt_path} has {len(tgt)}")
    corpus.tgt = tgt
    log.info(f"Read {len(corpus)} sentence pairs from {src_path} / {tgt_path}"
             + (f" with trees from {conllu_path}" if conllu_path else ""))
    return corpus


def filter_max_len(corpus: ParallelCorpus, max_len: int) -> Tuple[ParallelCorpus, int]:
    """Drops pairs whose source or target is longer than max_len."""
    keep = [i for i in range(len(corpus)) if len(corpus.src[i]) <= max_len and len(corpus.tgt[i]) <= max_len]
    dropped = len(corpus) - len(keep)
    if dropped:
        log.warning(f"⚠ Dropped {dropped} of {len(corpus)} pairs longer than max_len={max_len}")
    return corpus.subset(keep), dropped


def encode_corpus(corpus: ParallelCorpus, src_vocab: Vocabulary, tgt_vocab: Vocabulary) -> List[Example]:
    examples = []
    for i in range(len(corpus)):
        mask = sdc_matrix(corpus.trees[i]) if corpus.trees is not None else None
        tgt_ids = tgt_vocab.encode(corpus.tgt[i]) if corpus.tgt else []
        examples.append(Example(src_ids=src_vocab.encode(corpus.src[i]), tgt_ids=tgt_ids, mask=mask))
    return examples


def require_trees(corpus: ParallelCorpus, needs_syntax: bool, what: str) -> None:
    if needs_syntax and corpus.trees is None:
        raise ConfigurationError(f"The attention kind needs source dependency trees for the {what} corpus")


# --- Synthetic tasks ---

def _synthetic_pair(task: str, words: List[str], heads: List[int]) -> List[str]:
    if task == "copy":
        return list(words)
    if task == "reverse":
        return list(reversed(words))
    # tree_neighbor: each word is replaced by its head word; the root keeps its own
    return [words[h - 1] if h else words[j] for j, h in enumerate(heads)]


def generate_synthetic(
    task: str,
    n_pairs: int,
    vocab_size: int,
    max_len: int,
    rng: np.random.Generator,
    min_len: int = 1,
) -> ParallelCorpus:
    """Random sentences over words w0..w{vocab_size-1} with a tree per source sentence."""
    if task not in SYNTHETIC_TASKS:
        raise ConfigurationError(f"Unknown synthetic task '{task}' (choose from {', '.join(SYNTHETIC_TASKS)})")
    if not 1 <= min_len <= max_len or vocab_size < 1 or n_pairs < 1:
        raise ConfigurationError(
            f"Synthetic task needs 1 <= min_len <= max_len, vocab_size >= 1 and n_pairs >= 1 "
            f"(got min_len={min_len}, max_len={max_len}, vocab_size={vocab_size}, n_pairs={n_pairs})"
        )
    src, tgt, trees = [], [], []
    for _ in range(n_pairs):
        J = int(rng.integers(min_len, max_len + 1))
        words = [f"w{int(k)}" for k in rng.integers(0, vocab_size, size=J)]
        heads = random_heads(J, rng) if task == "tree_neighbor" else chain_heads(J)
        src.append(words)
        tgt.append(_synthetic_pair(task, words, heads))
        trees.append(DepTree(tokens=words, heads=heads))
    log.info(f"Generated {n_pairs} '{task}' pairs (vocab {vocab_size}, length {min_len}..{max_len})")
    return ParallelCorpus(src=src, tgt=tgt, trees=trees)


def write_corpus(corpus: ParallelCorpus, prefix: Union[str, Path]) -> Dict[str, Path]:
    """Writes <prefix>.src, <prefix>.tgt and <prefix>.conllu atomically."""
    prefix = Path(prefix)
    paths = {
        "src": atomic_write_text(prefix.with_name(prefix.name + ".src"), "".join(" ".join(s) + "\n" for s in corpus.src)),
        "tgt": atomic_write_text(prefix.with_name(prefix.name + ".tgt"), "".join(" ".join(s) + "\n" for s in corpus.tgt)),
    }
    if corpus.trees is not None:
        paths["conllu"] = atomic_write_text(prefix.with_name(prefix.name + ".conllu"), serialize_conllu(corpus.trees))
    return paths


def split_corpus(corpus: ParallelCorpus, n_dev: int) -> Tuple[ParallelCorpus, ParallelCorpus]:
    """Last n_dev pairs become the dev set."""
    n_train = len(corpus) - n_dev
    return corpus.subset(range(n_train)), corpus.subset(range(n_train, len(corpus)))
