# -*- coding: utf-8 -*-
"""
Case-insensitive corpus BLEU-4 and source-length bucket reports.
"""

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .corpus import tokenize
from .errors import DataError

log = logging.getLogger(__name__)

Sentence = Union[str, Sequence[str]]


@dataclass
class BleuReport:
    bleu: float
    precisions: List[Optional[float]]  # None for orders no hypothesis is long enough to contain
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    matches: List[int] = field(default_factory=list)
    totals: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class BucketReport:
    bounds: List[int]  # upper bounds; bucket k holds lengths in (bounds[k] - width, bounds[k]]
    bleu: List[Optional[float]]
    counts: List[int]
    width: int = 10

    def to_dict(self) -> Dict:
        return asdict(self)


def _tokens(sentence: Sentence, case_insensitive: bool) -> List[str]:
    tokens = tokenize(sentence) if isinstance(sentence, str) else list(sentence)
    return [t.lower() for t in tokens] if case_insensitive else tokens


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _references(entry) -> List:
    """A string or token list is one reference; a list of token lists holds alternatives."""
    if isinstance(entry, str):
        return [entry]
    if entry and not isinstance(entry[0], str):
        return list(entry)
    return [entry]


def bleu(
    hyps: Sequence[Sentence],
    refs: Sequence,
    max_n: int = 4,
    case_insensitive: bool = True,
    smoothing: bool = False,
) -> BleuReport:
    """
    Corpus BLEU: clipped n-gram matches and hypothesis n-gram counts are summed
    over the corpus before forming precisions. The brevity penalty uses the
    reference length closest to each hypothesis (shorter one on ties).
    With `smoothing`, every order's precision is (matches + 1) / (total + 1).
    """
    if len(hyps) != len(refs):
        raise DataError(f"{len(hyps)} hypotheses but {len(refs)} references")
    if not hyps:
        raise DataError("Cannot score an empty corpus")

    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref_entry in zip(hyps, refs):
        h = _tokens(hyp, case_insensitive)
        rs = [_tokens(r, case_insensitive) for r in _references(ref_entry)]
        hyp_len += len(h)
        ref_len += min((len(r) for r in rs), key=lambda L: (abs(L - len(h)), L))
        for n in range(1, max_n + 1):
            counts = _ngrams(h, n)
            max_ref: Counter = Counter()
            for r in rs:
                max_ref |= _ngrams(r, n)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            totals[n - 1] += sum(counts.values())

    if smoothing:
        precisions = [(m + 1) / (t + 1) for m, t in zip(matches, totals)]
    else:
        precisions = [m / t if t else None for m, t in zip(matches, totals)]

    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0

    used = [p for p in precisions if p is not None]
    if not used or min(used) == 0.0 or bp == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(math.fsum(math.log(p) for p in used) / len(used))
    return BleuReport(bleu=score, precisions=precisions, brevity_penalty=bp, hyp_len=hyp_len,
                      ref_len=ref_len, matches=matches, totals=totals)


def bucket_bounds(src_lens: Sequence[int], width: int = 10, max_bound: Optional[int] = None) -> List[int]:
    if width < 1:
        raise DataError(f"Bucket width must be >= 1, got {width}")
    longest = max(src_lens) if src_lens else 0
    top = max(longest, max_bound or 0, 1)
    return list(range(width, math.ceil(top / width) * width + 1, width))


def bucket_index(length: int, width: int) -> int:
    """Length L falls in (k*width, (k+1)*width]; lengths 0 and 1..width share bucket 0."""
    return max(math.ceil(length / width) - 1, 0)


def bucket_report(
    hyps: Sequence[Sentence],
    refs: Sequence,
    src_lens: Sequence[int],
    bucket_width: int = 10,
    max_bound: Optional[int] = None,
    **bleu_kwargs,
) -> BucketReport:
    """BLEU recomputed independently on the sentences of each source-length bucket."""
    if not len(hyps) == len(refs) == len(src_lens):
        raise DataError(f"Unaligned inputs: {len(hyps)} hypotheses, {len(refs)} references, {len(src_lens)} source lengths")
    bounds = bucket_bounds(src_lens, bucket_width, max_bound)
    members: List[List[int]] = [[] for _ in bounds]
    for i, length in enumerate(src_lens):
        members[bucket_index(length, bucket_width)].append(i)

    scores: List[Optional[float]] = []
    for idx in members:
        if not idx:
            scores.append(None)
            continue
        scores.append(bleu([hyps[i] for i in idx], [refs[i] for i in idx], **bleu_kwargs).bleu)
    return BucketReport(bounds=bounds, bleu=scores, counts=[len(m) for m in members], width=bucket_width)


def compare_buckets(
    systems: Mapping[str, Sequence[Sentence]],
    refs: Sequence,
    src_lens: Sequence[int],
    bucket_width: int = 10,
    **bleu_kwargs,
) -> Dict[str, BucketReport]:
    """One bucket report per system over a shared bound list."""
    top = max(src_lens) if src_lens else 0
    return {
        name: bucket_report(hyps, refs, src_lens, bucket_width, max_bound=top, **bleu_kwargs)
        for name, hyps in systems.items()
    }


# --- Formatting ---

def format_bleu(report: BleuReport, label: Optional[str] = None) -> str:
    precisions = "/".join("-" if p is None else f"{100 * p:.1f}" for p in report.precisions)
    prefix = f"{label}: " if label else ""
    return (f"{prefix}BLEU {100 * report.bleu:.2f} ({precisions}, BP={report.brevity_penalty:.3f}, "
            f"hyp_len={report.hyp_len}, ref_len={report.ref_len})")


def format_bucket_table(reports: Mapping[str, BucketReport]) -> str:
    """Rows are length buckets, one BLEU column per system."""
    names = list(reports)
    first = reports[names[0]]
    header = ["length", "sentences"] + names
    rows: List[Tuple[str, ...]] = []
    for k, bound in enumerate(first.bounds):
        cells = [f"({bound - first.width},{bound}]", str(first.counts[k])]
        for name in names:
            value = reports[name].bleu[k]
            cells.append("-" if value is None else f"{100 * value:.2f}")
        rows.append(tuple(cells))
    widths = [max(len(header[c]), *(len(r[c]) for r in rows)) if rows else len(header[c]) for c in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines) + "\n"
