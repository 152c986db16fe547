"""Core domain types: labels, BIO tags, sentences, support sets, episodes.

Everything here is immutable after construction and safe to share across
threads. Tag indices follow one canonical order per label set: ``O`` first,
then a ``(B-l, I-l)`` pair per label in insertion order, so a set of ``m``
labels yields ``2m + 1`` tags.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class DataError(ValueError):
    """Malformed or insufficient input data (corpus files, episode files)."""


@dataclass(frozen=True)
class Label:
    """A domain-specific slot/entity label, e.g. ``artist`` or ``city``."""

    name: str

    def __post_init__(self) -> None:
        if not self.name or any(c.isspace() for c in self.name):
            raise ValueError(f"label name must be non-empty without whitespace: {self.name!r}")


@dataclass(frozen=True)
class Tag:
    """One BIO token tag: Outside, Begin(label) or Inside(label)."""

    kind: str  # "O", "B" or "I"
    label: Label | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("O", "B", "I"):
            raise ValueError(f"tag kind must be O, B or I: {self.kind!r}")
        if self.kind == "O" and self.label is not None:
            raise ValueError("O tag carries no label")
        if self.kind != "O" and self.label is None:
            raise ValueError(f"{self.kind} tag requires a label")

    @staticmethod
    def outside() -> "Tag":
        return OUTSIDE

    @staticmethod
    def begin(label: Label | str) -> "Tag":
        return Tag("B", label if isinstance(label, Label) else Label(label))

    @staticmethod
    def inside(label: Label | str) -> "Tag":
        return Tag("I", label if isinstance(label, Label) else Label(label))

    @staticmethod
    def parse(text: str) -> "Tag":
        """Parse ``O``, ``B-<label>`` or ``I-<label>``."""
        if text == "O":
            return OUTSIDE
        if len(text) > 2 and text[1] == "-" and text[0] in ("B", "I"):
            return Tag(text[0], Label(text[2:]))
        raise DataError(f"cannot parse tag {text!r}")

    def __str__(self) -> str:
        if self.kind == "O":
            return "O"
        assert self.label is not None
        return f"{self.kind}-{self.label.name}"


OUTSIDE = Tag("O")


class LabelSet:
    """Ordered set of labels plus the derived canonical tag list.

    The tag list is ``[O, B-l1, I-l1, B-l2, I-l2, ...]`` in label insertion
    order; index 0 is always ``O``. The index mapping is a bijection and
    stable for the lifetime of the object.
    """

    def __init__(self, labels: Iterable[Label | str]):
        seen: dict[str, Label] = {}
        for item in labels:
            label = item if isinstance(item, Label) else Label(item)
            if label.name in seen:
                raise ValueError(f"duplicate label: {label.name}")
            seen[label.name] = label
        self._labels: tuple[Label, ...] = tuple(seen.values())
        tags: list[Tag] = [OUTSIDE]
        for label in self._labels:
            tags.append(Tag("B", label))
            tags.append(Tag("I", label))
        self._tags: tuple[Tag, ...] = tuple(tags)
        self._index: dict[Tag, int] = {tag: i for i, tag in enumerate(tags)}

    @property
    def labels(self) -> tuple[Label, ...]:
        return self._labels

    @property
    def tags(self) -> tuple[Tag, ...]:
        return self._tags

    @property
    def num_labels(self) -> int:
        return len(self._labels)

    @property
    def num_tags(self) -> int:
        return len(self._tags)

    def tag_index(self, tag: Tag) -> int:
        try:
            return self._index[tag]
        except KeyError:
            name = tag.label.name if tag.label else "O"
            raise KeyError(f"unknown label in tag {tag}: {name!r}") from None

    def tag_at(self, index: int) -> Tag:
        return self._tags[index]

    def indices_of(self, tags: Sequence[Tag]) -> list[int]:
        return [self.tag_index(t) for t in tags]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelSet) and self._labels == other._labels

    def __hash__(self) -> int:
        return hash(self._labels)

    def __repr__(self) -> str:
        return f"LabelSet({[l.name for l in self._labels]})"


@dataclass(frozen=True)
class LabeledSequence:
    """A tokenized sentence with one tag per token."""

    tokens: tuple[str, ...]
    tags: tuple[Tag, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.tags) or len(self.tokens) == 0:
            raise ValueError(
                f"need equal, nonzero token/tag counts: {len(self.tokens)} vs {len(self.tags)}"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    def labels_present(self) -> set[str]:
        """Names of labels occurring in this sentence (as B or I), once each."""
        return {t.label.name for t in self.tags if t.label is not None}


@dataclass(frozen=True)
class SupportSet:
    """The few labeled sentences available for a target domain."""

    pairs: tuple[LabeledSequence, ...]
    shot: int

    def __len__(self) -> int:
        return len(self.pairs)

    def label_counts(self) -> dict[str, int]:
        """Sentence-level presence count per label (a sentence counts once)."""
        counts: dict[str, int] = {}
        for pair in self.pairs:
            for name in pair.labels_present():
                counts[name] = counts.get(name, 0) + 1
        return counts


@dataclass(frozen=True)
class Episode:
    """One query sentence paired with a k-shot support set."""

    query: LabeledSequence
    support: SupportSet
    domain_name: str = ""


def validate_bio(seq: LabeledSequence | Sequence[Tag]) -> list[int]:
    """Positions where an Inside tag lacks a compatible predecessor.

    A tag sequence is BIO-valid iff the returned list is empty: every
    ``I-l`` must directly follow ``B-l`` or ``I-l`` of the same label.
    """
    tags = seq.tags if isinstance(seq, LabeledSequence) else tuple(seq)
    violations: list[int] = []
    for j, tag in enumerate(tags):
        if tag.kind != "I":
            continue
        prev = tags[j - 1] if j > 0 else None
        if prev is None or prev.kind == "O" or prev.label != tag.label:
            violations.append(j)
    return violations


def label_set_of(sentences: Iterable[LabeledSequence]) -> LabelSet:
    """Label set spanned by the given sentences, in sorted-name order."""
    names: set[str] = set()
    for sent in sentences:
        names.update(sent.labels_present())
    return LabelSet(sorted(names))


def episode_label_set(episode: Episode) -> LabelSet:
    """Label universe of one episode (support plus query), sorted by name."""
    return label_set_of(list(episode.support.pairs) + [episode.query])


# ---------------------------------------------------------------------------
# CoNLL-column ingestion: one "token<TAB>tag" per line, blank line between
# sentences, UTF-8. Gold data must be BIO-valid; violations are rejected with
# their positions.


def parse_conll(lines: Iterable[str], source: str = "<input>") -> list[LabeledSequence]:
    sentences: list[LabeledSequence] = []
    tokens: list[str] = []
    tags: list[Tag] = []

    def flush(lineno: int) -> None:
        if not tokens:
            return
        seq = LabeledSequence(tokens=tuple(tokens), tags=tuple(tags))
        bad = validate_bio(seq)
        if bad:
            raise DataError(
                f"{source}: sentence ending at line {lineno} violates BIO at positions {bad}"
            )
        sentences.append(seq)
        tokens.clear()
        tags.clear()

    lineno = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush(lineno)
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{source}:{lineno}: expected 'token<TAB>tag', got {line!r}")
        token, tag_text = parts
        tokens.append(token)
        tags.append(Tag.parse(tag_text))
    flush(lineno)
    return sentences


def read_conll(path: str) -> list[LabeledSequence]:
    with open(path, encoding="utf-8") as handle:
        return parse_conll(handle, source=path)


def write_conll(path: str, sentences: Iterable[LabeledSequence]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for sent in sentences:
            for token, tag in zip(sent.tokens, sent.tags):
                handle.write(f"{token}\t{tag}\n")
            handle.write("\n")
