"""Linear-chain CRF with a label-set-independent transition table.

Transitions are learned over abstract tag patterns rather than concrete
tags: a 3x5 table indexed by source class {O, B, I} and target class
{O, sB, dB, sI, dI}, where the s/d prefix distinguishes transitions into
the same versus a different label. The cells (O, dB) and (O, dI) do not
exist (leaving O there is no "same" label to differ from), so the table
has exactly 13 entries. ``expand`` stamps the table onto the concrete
(2m+1)-tag transition matrix of any label set, which is what lets a table
trained on source domains score transitions in a domain with unseen labels.

A sequence y is scored as TRANS(y) + lambda * EMIT(y); all dynamic
programming runs in log-space with log-sum-exp stabilization. Start
transitions (a 3-entry vector over {O, B, I}) are optional and default to
disabled; end transitions are never modeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .core import LabelSet, Tag
from .emission import NEG_INF_SCORE

ROW_NAMES = ("O", "B", "I")
COL_NAMES = ("O", "sB", "dB", "sI", "dI")

# Row-major order, skipping the two structurally absent O-row cells.
TABLE_ENTRIES: tuple[tuple[str, str], ...] = (
    ("O", "O"), ("O", "sB"), ("O", "sI"),
    ("B", "O"), ("B", "sB"), ("B", "dB"), ("B", "sI"), ("B", "dI"),
    ("I", "O"), ("I", "sB"), ("I", "dB"), ("I", "sI"), ("I", "dI"),
)
ENTRY_INDEX: dict[tuple[str, str], int] = {pair: i for i, pair in enumerate(TABLE_ENTRIES)}
NUM_ENTRIES = len(TABLE_ENTRIES)  # 13


@dataclass
class TransitionTable:
    """13 abstract transition log-potentials, plus optional start scores.

    Entries are unconstrained (globally normalized by the partition
    function); ``start`` holds scores for the virtual start into {O, B, I}
    or ``None`` when start transitions are disabled.
    """

    entries: np.ndarray
    start: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.shape != (NUM_ENTRIES,):
            raise ValueError(f"need exactly {NUM_ENTRIES} entries")
        if self.start is not None:
            self.start = np.asarray(self.start, dtype=float)
            if self.start.shape != (3,):
                raise ValueError("start scores cover exactly {O, B, I}")

    @classmethod
    def zeros(cls, with_start: bool = False) -> "TransitionTable":
        return cls(
            entries=np.zeros(NUM_ENTRIES),
            start=np.zeros(3) if with_start else None,
        )

    def get(self, row: str, col: str) -> float:
        """Value of one abstract cell; (O, dB) and (O, dI) do not exist."""
        return float(self.entries[ENTRY_INDEX[(row, col)]])


@dataclass
class TransitionMatrix:
    """Concrete (2m+1)-tag transition scores expanded from a table."""

    scores: np.ndarray
    start: np.ndarray | None = None

    @property
    def num_tags(self) -> int:
        return self.scores.shape[0]


def _tag_class(index: int) -> int:
    """0 for O, 1 for B-*, 2 for I-* under the canonical tag order."""
    if index == 0:
        return 0
    return 1 if index % 2 == 1 else 2


def _tag_label(index: int) -> int:
    return (index - 1) // 2


@lru_cache(maxsize=None)
def fill_maps(num_labels: int) -> tuple[np.ndarray, np.ndarray]:
    """(cell -> table entry, tag -> start row) index maps for m labels."""
    num_tags = 2 * num_labels + 1
    cell_map = np.empty((num_tags, num_tags), dtype=int)
    for a in range(num_tags):
        row = ROW_NAMES[_tag_class(a)]
        for b in range(num_tags):
            bcls = _tag_class(b)
            if bcls == 0:
                col = "O"
            elif row == "O":
                col = "sB" if bcls == 1 else "sI"
            else:
                same = _tag_label(a) == _tag_label(b)
                if bcls == 1:
                    col = "sB" if same else "dB"
                else:
                    col = "sI" if same else "dI"
            cell_map[a, b] = ENTRY_INDEX[(row, col)]
    start_map = np.array([_tag_class(t) for t in range(num_tags)])
    cell_map.setflags(write=False)
    start_map.setflags(write=False)
    return cell_map, start_map


def expand(table: TransitionTable, label_set: LabelSet) -> TransitionMatrix:
    """Stamp the abstract table onto the label set's concrete tag grid."""
    cell_map, start_map = fill_maps(label_set.num_labels)
    start = table.start[start_map] if table.start is not None else None
    return TransitionMatrix(scores=table.entries[cell_map], start=start)


def _as_indices(y: Sequence[Tag] | Sequence[int], label_set: LabelSet) -> np.ndarray:
    if len(y) and isinstance(y[0], Tag):
        return np.array(label_set.indices_of(list(y)), dtype=int)
    return np.asarray(y, dtype=int)


def sequence_score(
    y: Sequence[int],
    emissions: np.ndarray,
    matrix: TransitionMatrix,
    lam: float,
) -> float:
    """TRANS(y) + lambda * EMIT(y) for one concrete tag index sequence."""
    y = np.asarray(y, dtype=int)
    n = len(y)
    if emissions.shape[0] != n:
        raise ValueError("emission rows must match sequence length")
    score = lam * emissions[np.arange(n), y].sum()
    if n > 1:
        score += matrix.scores[y[:-1], y[1:]].sum()
    if matrix.start is not None:
        score += matrix.start[y[0]]
    return float(score)


def _lattice(emissions: np.ndarray, matrix: TransitionMatrix, lam: float):
    scaled = lam * emissions
    start = matrix.start if matrix.start is not None else np.zeros(emissions.shape[1])
    return scaled, start


def log_partition(emissions: np.ndarray, matrix: TransitionMatrix, lam: float) -> float:
    """log sum over all tag sequences of exp(sequence score), forward pass."""
    scaled, start = _lattice(emissions, matrix, lam)
    alpha = start + scaled[0]
    for j in range(1, scaled.shape[0]):
        alpha = logsumexp(alpha[:, None] + matrix.scores, axis=0) + scaled[j]
    return float(logsumexp(alpha))


def _forward_backward(emissions: np.ndarray, matrix: TransitionMatrix, lam: float):
    scaled, start = _lattice(emissions, matrix, lam)
    n, t = scaled.shape
    log_alpha = np.empty((n, t))
    log_alpha[0] = start + scaled[0]
    for j in range(1, n):
        log_alpha[j] = logsumexp(log_alpha[j - 1][:, None] + matrix.scores, axis=0) + scaled[j]
    log_beta = np.zeros((n, t))
    for j in range(n - 2, -1, -1):
        log_beta[j] = logsumexp(
            matrix.scores + scaled[j + 1][None, :] + log_beta[j + 1][None, :], axis=1
        )
    log_z = float(logsumexp(log_alpha[-1]))
    return log_alpha, log_beta, log_z, scaled


def marginals(
    emissions: np.ndarray, matrix: TransitionMatrix, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior node and edge marginals via forward-backward."""
    log_alpha, log_beta, log_z, scaled = _forward_backward(emissions, matrix, lam)
    n, t = scaled.shape
    node = np.exp(log_alpha + log_beta - log_z)
    edge = np.empty((max(n - 1, 0), t, t))
    for j in range(n - 1):
        edge[j] = np.exp(
            log_alpha[j][:, None]
            + matrix.scores
            + scaled[j + 1][None, :]
            + log_beta[j + 1][None, :]
            - log_z
        )
    return node, edge


@dataclass
class CrfGradients:
    loss: float
    grad_table: np.ndarray  # (13,)
    grad_start: np.ndarray | None  # (3,) when start transitions are enabled
    grad_lambda: float
    grad_emissions: np.ndarray  # (n, 2m+1)


def nll_and_gradients(
    gold: Sequence[Tag] | Sequence[int],
    emissions: np.ndarray,
    table: TransitionTable,
    label_set: LabelSet,
    lam: float,
) -> CrfGradients:
    """Negative log-likelihood of the gold sequence and its exact gradients.

    loss = log Z - sequence_score(gold). The gradient w.r.t. each concrete
    transition cell is (expected count) - (gold count); table-entry gradients
    sum the cell gradients over the expansion fill map. grad_lambda is the
    expected minus gold emission total; emission gradients are
    lambda * (node marginal - gold indicator).
    """
    y = _as_indices(gold, label_set)
    matrix = expand(table, label_set)
    cell_map, start_map = fill_maps(label_set.num_labels)
    n, t = emissions.shape

    log_alpha, log_beta, log_z, scaled = _forward_backward(emissions, matrix, lam)
    node = np.exp(log_alpha + log_beta - log_z)
    loss = log_z - sequence_score(y, emissions, matrix, lam)

    grad_cells = np.zeros((t, t))
    for j in range(n - 1):
        grad_cells += np.exp(
            log_alpha[j][:, None]
            + matrix.scores
            + scaled[j + 1][None, :]
            + log_beta[j + 1][None, :]
            - log_z
        )
    np.add.at(grad_cells, (y[:-1], y[1:]), -1.0)
    grad_table = np.bincount(
        cell_map.ravel(), weights=grad_cells.ravel(), minlength=NUM_ENTRIES
    )

    grad_start = None
    if table.start is not None:
        first = node[0].copy()
        first[y[0]] -= 1.0
        grad_start = np.bincount(start_map, weights=first, minlength=3)

    grad_lambda = float((emissions * node).sum() - emissions[np.arange(n), y].sum())

    grad_emissions = lam * node
    grad_emissions[np.arange(n), y] -= lam

    return CrfGradients(
        loss=float(loss),
        grad_table=grad_table,
        grad_start=grad_start,
        grad_lambda=grad_lambda,
        grad_emissions=grad_emissions,
    )


def viterbi(emissions: np.ndarray, matrix: TransitionMatrix, lam: float) -> list[int]:
    """Highest-scoring tag index sequence; ties break to the lower index."""
    scaled, start = _lattice(emissions, matrix, lam)
    n, t = scaled.shape
    delta = start + scaled[0]
    backptr = np.empty((n, t), dtype=int)
    for j in range(1, n):
        candidate = delta[:, None] + matrix.scores
        backptr[j] = np.argmax(candidate, axis=0)  # first (lowest) index wins ties
        delta = candidate[backptr[j], np.arange(t)] + scaled[j]
    path = [int(np.argmax(delta))]
    for j in range(n - 1, 0, -1):
        path.append(int(backptr[j, path[-1]]))
    path.reverse()
    return path


def rule_decode(emissions: np.ndarray, label_set: LabelSet) -> list[int]:
    """Greedy left-to-right decoding that blocks BIO-illegal continuations.

    At each position the highest-emission tag compatible with the previous
    choice wins (I-l only after B-l or I-l); if every compatible tag sits at
    the absent-evidence sentinel, the position falls back to O.
    """
    n, t = emissions.shape
    path: list[int] = []
    prev = None
    for j in range(n):
        scores = emissions[j].astype(float).copy()
        for idx in range(2, t, 2):  # I-tags
            legal = prev is not None and prev in (idx - 1, idx)
            if not legal:
                scores[idx] = -np.inf
        best = int(np.argmax(scores))
        if scores[best] <= NEG_INF_SCORE:
            best = 0
        path.append(best)
        prev = best
    return path
