"""Episode-grouped evaluation: span F1, bigram accuracy, report emission.

Span extraction follows conlleval semantics (lenient: an I without a
compatible predecessor starts a new span). The episode metric averages
per-sample precision and recall over the episode's K samples first, then
takes the harmonic mean; a pooled mode that counts over the concatenated
episode instead is available behind a flag. Reported F1 is the mean over
episodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import LabeledSequence, Tag
from .sampler import FewShotDataset

Span = tuple[str, int, int]  # (label name, start, end) with inclusive end

BIGRAM_CATEGORIES: tuple[tuple[str, str], ...] = (
    ("Border", "O-O"),
    ("Border", "O-B"),
    ("Border", "B-O"),
    ("Border", "I-O"),
    ("Border", "B-I/I-B"),
    ("Inner", "B-I"),
    ("Inner", "I-I"),
    ("Start", "S-B"),
    ("Start", "S-O"),
)


def extract_spans(tags: Sequence[Tag]) -> set[Span]:
    """Labeled spans under conlleval chunking rules.

    B-l opens a span; I-l continues a span of the same label and otherwise
    opens a new one; O, a different label, or a new B closes the open span.
    Predictions need not be BIO-valid.
    """
    spans: set[Span] = set()
    open_label: str | None = None
    start = 0
    for j, tag in enumerate(tags):
        if tag.kind == "O":
            if open_label is not None:
                spans.add((open_label, start, j - 1))
                open_label = None
        elif tag.kind == "B":
            if open_label is not None:
                spans.add((open_label, start, j - 1))
            open_label, start = tag.label.name, j
        else:  # I
            if open_label is None or open_label != tag.label.name:
                if open_label is not None:
                    spans.add((open_label, start, j - 1))
                open_label, start = tag.label.name, j
    if open_label is not None:
        spans.add((open_label, start, len(tags) - 1))
    return spans


SamplePair = tuple[Sequence[Tag], Sequence[Tag]]  # (gold, predicted)


def _sample_pr(gold: Sequence[Tag], pred: Sequence[Tag]) -> tuple[float, float]:
    if len(gold) != len(pred):
        raise ValueError(f"gold/prediction length mismatch: {len(gold)} vs {len(pred)}")
    gold_spans = extract_spans(gold)
    pred_spans = extract_spans(pred)
    hit = len(gold_spans & pred_spans)
    # Degenerate denominators: an empty prediction is perfectly precise only
    # against an empty gold, and vice versa for recall.
    if pred_spans:
        precision = hit / len(pred_spans)
    else:
        precision = 1.0 if not gold_spans else 0.0
    if gold_spans:
        recall = hit / len(gold_spans)
    else:
        recall = 1.0 if not pred_spans else 0.0
    return precision, recall


def episode_f1(samples: Sequence[SamplePair]) -> tuple[float, float, float]:
    """(P, R, F) with P and R averaged per-sample before the harmonic mean."""
    if not samples:
        raise ValueError("an episode needs at least one sample")
    ps, rs = zip(*(_sample_pr(gold, pred) for gold, pred in samples))
    p = sum(ps) / len(ps)
    r = sum(rs) / len(rs)
    f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return p, r, f


def episode_f1_pooled(samples: Sequence[SamplePair]) -> tuple[float, float, float]:
    """Alternative: pool span counts over the episode, then compute P, R, F."""
    if not samples:
        raise ValueError("an episode needs at least one sample")
    hit = n_pred = n_gold = 0
    for gold, pred in samples:
        if len(gold) != len(pred):
            raise ValueError(f"gold/prediction length mismatch: {len(gold)} vs {len(pred)}")
        gold_spans = extract_spans(gold)
        pred_spans = extract_spans(pred)
        hit += len(gold_spans & pred_spans)
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
    p = hit / n_pred if n_pred else (1.0 if n_gold == 0 else 0.0)
    r = hit / n_gold if n_gold else (1.0 if n_pred == 0 else 0.0)
    f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
    return p, r, f


def _classify_bigram(prev: Tag | None, cur: Tag) -> tuple[str, str]:
    """Map one gold bigram (virtual start uses prev=None) to its category."""
    if prev is None:
        return ("Start", "S-O") if cur.kind == "O" else ("Start", "S-B")
    if prev.kind == "O":
        return ("Border", "O-O") if cur.kind == "O" else ("Border", "O-B")
    if cur.kind == "O":
        return ("Border", "B-O") if prev.kind == "B" else ("Border", "I-O")
    # both in spans: same span only for B->I / I->I with matching labels
    if cur.kind == "I" and prev.label == cur.label:
        return ("Inner", "B-I") if prev.kind == "B" else ("Inner", "I-I")
    return ("Border", "B-I/I-B")


def bigram_accuracy(
    samples: Sequence[SamplePair],
) -> dict[tuple[str, str], tuple[float, float]]:
    """Per bigram category: (proportion of gold bigrams, prediction accuracy).

    A bigram is correct iff the predictions at both of its positions match
    gold; the virtual start bigram needs only position 0 correct. Proportions
    are over all bigrams including the virtual start pairs.
    """
    totals = {key: 0 for key in BIGRAM_CATEGORIES}
    correct = {key: 0 for key in BIGRAM_CATEGORIES}
    grand = 0
    for gold, pred in samples:
        if len(gold) != len(pred):
            raise ValueError(f"gold/prediction length mismatch: {len(gold)} vs {len(pred)}")
        if not gold:
            continue
        key = _classify_bigram(None, gold[0])
        totals[key] += 1
        grand += 1
        if pred[0] == gold[0]:
            correct[key] += 1
        for j in range(1, len(gold)):
            key = _classify_bigram(gold[j - 1], gold[j])
            totals[key] += 1
            grand += 1
            if pred[j - 1] == gold[j - 1] and pred[j] == gold[j]:
                correct[key] += 1
    out: dict[tuple[str, str], tuple[float, float]] = {}
    for key in BIGRAM_CATEGORIES:
        if totals[key] == 0:
            continue
        out[key] = (totals[key] / grand, correct[key] / totals[key])
    return out


@dataclass
class EvalReport:
    per_episode_f1: list[float]
    mean_f1: float
    mean_precision: float
    mean_recall: float
    per_bigram: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        bigrams = {
            category: {
                name: {"proportion": prop, "accuracy": acc}
                for (cat, name), (prop, acc) in self.per_bigram.items()
                if cat == category
            }
            for category in ("Border", "Inner", "Start")
        }
        return {
            "mean_f1": self.mean_f1,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "per_episode_f1": self.per_episode_f1,
            "bigrams": {k: v for k, v in bigrams.items() if v},
            "config": self.config,
        }

    def to_text(self) -> str:
        lines = [
            f"episodes: {len(self.per_episode_f1)}",
            f"mean episode F1: {self.mean_f1:.4f}  (P {self.mean_precision:.4f}, "
            f"R {self.mean_recall:.4f})",
        ]
        if self.per_bigram:
            lines.append("")
            lines.append(f"{'category':<8} {'bigram':<10} {'proportion':>10} {'accuracy':>9}")
            for (cat, name), (prop, acc) in self.per_bigram.items():
                lines.append(f"{cat:<8} {name:<10} {prop:>9.2%} {acc:>8.2%}")
        return "\n".join(lines) + "\n"


def evaluate(
    dataset: FewShotDataset,
    model,
    decoder: str = "viterbi",
    pooled: bool = False,
    with_bigrams: bool = False,
    workers: int | None = None,
) -> EvalReport:
    """Decode every query, group by support set, and average episode F1."""
    if not dataset.support_ids:
        raise ValueError("dataset has no support_id linkage")

    def decode_one(pair: tuple[int, object]) -> list[Tag]:
        index, episode = pair
        return model.decode(episode, decoder=decoder, query_id=index)

    items = list(enumerate(dataset.episodes))
    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(pool.map(decode_one, items))
    else:
        predictions = [decode_one(item) for item in items]

    groups: dict[str, list[SamplePair]] = {}
    order: list[str] = []
    for (index, episode), pred in zip(items, predictions):
        sid = dataset.support_ids[index]
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        groups[sid].append((list(episode.query.tags), pred))

    metric = episode_f1_pooled if pooled else episode_f1
    per_p, per_r, per_f = [], [], []
    for sid in order:
        p, r, f = metric(groups[sid])
        per_p.append(p)
        per_r.append(r)
        per_f.append(f)

    per_bigram = {}
    if with_bigrams:
        all_samples = [pair for sid in order for pair in groups[sid]]
        per_bigram = bigram_accuracy(all_samples)

    k = len(per_f)
    return EvalReport(
        per_episode_f1=per_f,
        mean_f1=sum(per_f) / k,
        mean_precision=sum(per_p) / k,
        mean_recall=sum(per_r) / k,
        per_bigram=per_bigram,
        config={"decoder": decoder, "pooled": pooled},
    )


def write_report(path_json: str, path_text: str, report: EvalReport) -> None:
    with open(path_json, "w", encoding="utf-8") as handle:
        json.dump(report.to_json(), handle, indent=2)
        handle.write("\n")
    with open(path_text, "w", encoding="utf-8") as handle:
        handle.write(report.to_text())


def write_predictions_conll(
    path: str,
    episodes: Iterable[LabeledSequence],
    predictions: Iterable[Sequence[Tag]],
) -> None:
    """token<TAB>gold<TAB>predicted rows, directly consumable by conlleval."""
    with open(path, "w", encoding="utf-8") as handle:
        for query, pred in zip(episodes, predictions):
            for token, gold_tag, pred_tag in zip(query.tokens, query.tags, pred):
                handle.write(f"{token}\t{gold_tag}\t{pred_tag}\n")
            handle.write("\n")
