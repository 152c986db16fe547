"""Independent oracles shared by the test modules.

Everything here recomputes expected values by a different route than the
library: exhaustive path enumeration for the CRF quantities, per-cell
classification for the transition fill map, and a literal transcription of
the classic conlleval chunk-boundary rules for span extraction.
"""

from __future__ import annotations

import numpy as np

from fewtag.core import LabeledSequence, Tag
from fewtag.crf import TransitionMatrix


def seq_from(spec: str) -> LabeledSequence:
    """Build a LabeledSequence from "token:TAG token:TAG ..." shorthand."""
    tokens, tags = [], []
    for part in spec.split():
        token, tag = part.split(":", 1)
        tokens.append(token)
        tags.append(Tag.parse(tag))
    return LabeledSequence(tokens=tuple(tokens), tags=tuple(tags))


def tags_from(spec: str) -> list[Tag]:
    return [Tag.parse(p) for p in spec.split()]


# ---------------------------------------------------------------------------
# Exhaustive CRF oracle


def all_paths_scores(
    emissions: np.ndarray, matrix: TransitionMatrix, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Every tag sequence (rows) with its score, by direct enumeration."""
    n, t = emissions.shape
    grids = np.meshgrid(*([np.arange(t)] * n), indexing="ij")
    paths = np.stack(grids, axis=-1).reshape(-1, n)
    scores = lam * emissions[np.arange(n), paths].sum(axis=1)
    if n > 1:
        scores += matrix.scores[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    if matrix.start is not None:
        scores += matrix.start[paths[:, 0]]
    return paths, scores


def brute_log_partition(emissions, matrix, lam) -> float:
    _, scores = all_paths_scores(emissions, matrix, lam)
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_marginals(emissions, matrix, lam):
    paths, scores = all_paths_scores(emissions, matrix, lam)
    m = scores.max()
    weights = np.exp(scores - m)
    posterior = weights / weights.sum()
    n, t = emissions.shape
    node = np.zeros((n, t))
    for j in range(n):
        np.add.at(node[j], paths[:, j], posterior)
    edge = np.zeros((max(n - 1, 0), t, t))
    for j in range(n - 1):
        np.add.at(edge[j], (paths[:, j], paths[:, j + 1]), posterior)
    return node, edge


def brute_viterbi(emissions, matrix, lam) -> tuple[list[int], float]:
    paths, scores = all_paths_scores(emissions, matrix, lam)
    best = int(np.argmax(scores))
    return [int(x) for x in paths[best]], float(scores[best])


# ---------------------------------------------------------------------------
# conlleval-style chunking oracle (BIO subset of the classic script's rules)


def _split(tag: Tag) -> tuple[str, str]:
    return (tag.kind, tag.label.name if tag.label else "")


def conlleval_spans(tags) -> set[tuple[str, int, int]]:
    """Span set via the start_of_chunk / end_of_chunk boundary functions."""

    def end_of_chunk(prev_tag, cur_tag, prev_type, cur_type):
        if prev_tag == "B" and cur_tag == "B":
            return True
        if prev_tag == "B" and cur_tag == "O":
            return True
        if prev_tag == "I" and cur_tag == "B":
            return True
        if prev_tag == "I" and cur_tag == "O":
            return True
        if prev_tag != "O" and prev_type != cur_type:
            return True
        return False

    def start_of_chunk(prev_tag, cur_tag, prev_type, cur_type):
        if cur_tag == "B":
            return True
        if prev_tag == "O" and cur_tag == "I":
            return True
        if cur_tag != "O" and prev_type != cur_type:
            return True
        return False

    spans = set()
    prev_tag, prev_type = "O", ""
    start = None
    for j, tag in enumerate(tags):
        cur_tag, cur_type = _split(tag)
        if start is not None and end_of_chunk(prev_tag, cur_tag, prev_type, cur_type):
            spans.add((prev_type, start, j - 1))
            start = None
        if cur_tag != "O" and start_of_chunk(prev_tag, cur_tag, prev_type, cur_type):
            start = j
        prev_tag, prev_type = cur_tag, cur_type
    if start is not None:
        spans.add((prev_type, start, len(tags) - 1))
    return spans


# ---------------------------------------------------------------------------
# Transition fill-map oracle: classify one concrete cell at a time


def classify_cell(from_tag: Tag, to_tag: Tag) -> tuple[str, str]:
    row = from_tag.kind
    if to_tag.kind == "O":
        return row, "O"
    if row == "O":
        return row, "sB" if to_tag.kind == "B" else "sI"
    same = from_tag.label == to_tag.label
    if to_tag.kind == "B":
        return row, "sB" if same else "dB"
    return row, "sI" if same else "dI"
