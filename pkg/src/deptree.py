# -*- coding: utf-8 -*-
"""
Dependency trees and syntax-distance-constraint (SDC) masks.

Trees are read from CoNLL-U (or its three-column ID/FORM/HEAD subset). The SDC
matrix holds the tree hop count between every pair of source words; row j is
the mask consulted when the decoder aligns to word j.
"""

import io
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FormatError, MaskIndexError, ParseError, StructureError

log = logging.getLogger(__name__)

# CoNLL-U column indices
ID, FORM, HEAD = 0, 1, 6
CONLLU_COLUMNS = 10


@dataclass(frozen=True)
class DepTree:
    """One source sentence: surface tokens plus 1-based heads (0 marks the root)."""
    tokens: Tuple[str, ...]
    heads: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        validate_heads(self.heads, n_tokens=len(self.tokens))

    @property
    def length(self) -> int:
        return len(self.tokens)

    def edges(self) -> List[Tuple[int, int]]:
        """(dependent, head) pairs as 0-based indices."""
        return [(j, h - 1) for j, h in enumerate(self.heads) if h != 0]

    @property
    def root(self) -> int:
        return self.heads.index(0)


@dataclass(frozen=True, eq=False)
class SdcMatrix:
    """J x J matrix of pairwise tree distances."""
    dist: np.ndarray

    def __post_init__(self):
        dist = np.array(self.dist, dtype=np.int64)
        dist.setflags(write=False)
        object.__setattr__(self, "dist", dist)

    @property
    def size(self) -> int:
        return int(self.dist.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, SdcMatrix) and np.array_equal(self.dist, other.dist)

    def __hash__(self) -> int:
        return hash(self.dist.tobytes())


def validate_heads(heads: Sequence[int], n_tokens: Optional[int] = None) -> None:
    """Raises StructureError unless heads describe a single rooted tree."""
    J = len(heads)
    if J == 0:
        raise StructureError("Empty sentence: a tree needs at least one token")
    if n_tokens is not None and n_tokens != J:
        raise StructureError(f"{n_tokens} tokens but {J} heads")
    for j, h in enumerate(heads):
        if h < 0 or h > J:
            raise StructureError(f"Head {h} of token {j + 1} is outside [0, {J}]")
    roots = [j + 1 for j, h in enumerate(heads) if h == 0]
    if len(roots) != 1:
        raise StructureError(f"Expected exactly one root, found {len(roots)} ({roots})")

    # Every token must reach the root by following heads
    state = [0] * J  # 0 unvisited, 1 on current path, 2 reaches root
    for start in range(J):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            head = heads[node]
            if head == 0:
                break
            node = head - 1
        if state[node] == 1 and heads[node] != 0:
            cycle = " -> ".join(str(p + 1) for p in path[path.index(node):])
            raise StructureError(f"Cycle in dependency heads: {cycle} -> {node + 1}")
        for p in path:
            state[p] = 2


def _parse_row(columns: List[str], line_number: int) -> Optional[Tuple[int, str, int]]:
    """Returns (id, form, head) or None for rows that are not plain word nodes."""
    if len(columns) >= 7:
        id_str, form, head_str = columns[ID], columns[FORM], columns[HEAD]
    elif len(columns) == 3:
        id_str, form, head_str = columns
    else:
        raise ParseError(f"expected 3 or at least 7 tab-separated columns, found {len(columns)}", line_number)

    # Multiword token ranges (1-2) and empty nodes (1.1) are not tree nodes
    if "-" in id_str or "." in id_str:
        return None
    try:
        token_id = int(id_str)
    except ValueError:
        raise ParseError(f"non-integer ID '{id_str}'", line_number)
    try:
        head = int(head_str)
    except ValueError:
        raise ParseError(f"non-integer HEAD '{head_str}' for token {token_id}", line_number)
    return token_id, form, head


def _build_tree(rows: List[Tuple[int, str, int]], first_line: int) -> DepTree:
    ids = [r[0] for r in rows]
    if ids != list(range(1, len(rows) + 1)):
        raise StructureError(f"Sentence starting at line {first_line}: token IDs are not 1..{len(rows)} in order")
    try:
        return DepTree(tokens=[r[1] for r in rows], heads=[r[2] for r in rows])
    except StructureError as e:
        raise StructureError(f"Sentence starting at line {first_line}: {e}")


def parse_conllu(text: str) -> List[DepTree]:
    """Parses blank-line-separated CoNLL-U sentences into validated trees."""
    trees: List[DepTree] = []
    rows: List[Tuple[int, str, int]] = []
    first_line = 0
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if line.startswith("#"):
            continue
        if not line.strip():
            if rows:
                trees.append(_build_tree(rows, first_line))
                rows = []
            continue
        parsed = _parse_row(line.split("\t"), line_number)
        if parsed is None:
            continue
        if not rows:
            first_line = line_number
        rows.append(parsed)
    if rows:
        trees.append(_build_tree(rows, first_line))
    log.debug("Parsed %d dependency trees", len(trees))
    return trees


def read_conllu(path: Union[str, Path]) -> List[DepTree]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_conllu(f.read())


def serialize_conllu(trees: Sequence[DepTree], full_columns: bool = True) -> str:
    """Writes trees back as CoNLL-U; unknown columns are filled with '_'."""
    blocks = []
    for tree in trees:
        lines = []
        for j, (form, head) in enumerate(zip(tree.tokens, tree.heads), start=1):
            if full_columns:
                cols = [str(j), form, "_", "_", "_", "_", str(head), "root" if head == 0 else "dep", "_", "_"]
            else:
                cols = [str(j), form, str(head)]
            lines.append("\t".join(cols))
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def sdc_matrix(tree: DepTree) -> SdcMatrix:
    """All-pairs tree distances by one BFS per node."""
    J = tree.length
    neighbours: List[List[int]] = [[] for _ in range(J)]
    for dep, head in tree.edges():
        neighbours[dep].append(head)
        neighbours[head].append(dep)

    dist = np.full((J, J), -1, dtype=np.int64)
    for source in range(J):
        row = dist[source]
        row[source] = 0
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nxt in neighbours[node]:
                if row[nxt] < 0:
                    row[nxt] = row[node] + 1
                    queue.append(nxt)
    return SdcMatrix(dist)


def sdc_row(m: SdcMatrix, p: int) -> np.ndarray:
    """Row p of the mask matrix (distances of every word to word p)."""
    if not 0 <= p < m.size:
        raise MaskIndexError(f"Mask row {p} out of range for a {m.size}-word sentence")
    return m.dist[p]


def format_mask_tsv(m: SdcMatrix) -> str:
    return "".join("\t".join(str(int(v)) for v in row) + "\n" for row in m.dist)


def write_mask_tsv(m: SdcMatrix, sink: IO[str]) -> None:
    sink.write(format_mask_tsv(m))


def _parse_mask_lines(lines: Sequence[Tuple[int, str]]) -> SdcMatrix:
    rows = []
    for line_number, line in lines:
        fields = line.split("\t")
        try:
            rows.append([int(v) for v in fields])
        except ValueError:
            raise FormatError(f"line {line_number}: non-integer field in mask row {line!r}")
    J = len(rows)
    if J == 0:
        raise FormatError("Empty mask block")
    for (line_number, _), row in zip(lines, rows):
        if len(row) != J:
            raise FormatError(f"line {line_number}: ragged mask row with {len(row)} fields, expected {J}")
    dist = np.array(rows, dtype=np.int64)
    if np.any(dist < 0) or np.any(np.diag(dist) != 0) or not np.array_equal(dist, dist.T):
        raise FormatError("Mask is not a distance matrix (negative entry, non-zero diagonal or asymmetric)")
    return SdcMatrix(dist)


def _as_text(source: Union[str, IO[str]]) -> str:
    return source.read() if hasattr(source, "read") else str(source)


def read_mask_tsv(source: Union[str, IO[str]]) -> SdcMatrix:
    """Reads exactly one J x J mask block."""
    lines = [(i, l) for i, l in enumerate(_as_text(source).splitlines(), start=1) if l.strip()]
    return _parse_mask_lines(lines)


def read_mask_blocks(source: Union[str, IO[str]]) -> List[SdcMatrix]:
    """Reads blank-line separated mask blocks (the output of the mask command)."""
    blocks: List[SdcMatrix] = []
    current: List[Tuple[int, str]] = []
    for i, line in enumerate(_as_text(source).splitlines(), start=1):
        if line.strip():
            current.append((i, line))
        elif current:
            blocks.append(_parse_mask_lines(current))
            current = []
    if current:
        blocks.append(_parse_mask_lines(current))
    return blocks


def format_mask_blocks(matrices: Sequence[SdcMatrix]) -> str:
    buf = io.StringIO()
    for i, m in enumerate(matrices):
        if i:
            buf.write("\n")
        write_mask_tsv(m, buf)
    return buf.getvalue()


def chain_heads(J: int) -> List[int]:
    """Left-branching chain: word 1 is the root, word j depends on word j-1."""
    return [0] + list(range(1, J))


def random_heads(J: int, rng: np.random.Generator) -> List[int]:
    """Uniformly attaches each word to an earlier one, then shuffles positions."""
    parent = [-1] + [int(rng.integers(0, k)) for k in range(1, J)]
    order = rng.permutation(J)  # order[k] = surface position of construction node k
    heads = [0] * J
    for k in range(J):
        heads[order[k]] = 0 if parent[k] < 0 else int(order[parent[k]]) + 1
    return heads
