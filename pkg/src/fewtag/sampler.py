"""K-shot support set construction and episode dataset assembly.

A k-shot support set must satisfy two criteria:

1. every label of the domain appears in at least ``k`` of its sentences
   (sentence-level presence: a sentence "includes" a label if the label
   occurs as B or I anywhere in its tags, counted once per sentence);
2. it is minimal: removing any sentence drops some label below ``k``.

``sample_support_set`` builds such a set by sampling sentences per label
until all counts reach ``k``, then sweeping the members in the order they
were added and deleting each one whose removal keeps criterion 1 intact.
A nonzero retention probability keeps each would-be-deleted sentence with
that probability, which deliberately relaxes criterion 2 to make the
sample distribution more uniform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    DataError,
    Episode,
    LabelSet,
    LabeledSequence,
    SupportSet,
    Tag,
    validate_bio,
)


@dataclass(frozen=True)
class SamplerConfig:
    shot: int
    retention_probability: float = 0.2
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.shot < 1:
            raise ValueError("shot must be >= 1")
        if not 0.0 <= self.retention_probability <= 1.0:
            raise ValueError("retention_probability must lie in [0, 1]")


@dataclass(frozen=True)
class FewShotDataset:
    """Episodes grouped into contiguous runs sharing one support set."""

    episodes: tuple[Episode, ...]
    queries_per_support: int
    support_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.support_ids and len(self.support_ids) != len(self.episodes):
            raise ValueError("support_ids must align with episodes")

    def groups(self) -> list[tuple[str, list[Episode]]]:
        """Contiguous (support_id, episodes) groups in file order."""
        if not self.episodes:
            return []
        ids = self.support_ids or tuple(
            f"g{i // self.queries_per_support:04d}" for i in range(len(self.episodes))
        )
        out: list[tuple[str, list[Episode]]] = []
        for sid, episode in zip(ids, self.episodes):
            if out and out[-1][0] == sid:
                out[-1][1].append(episode)
            else:
                out.append((sid, [episode]))
        return out


def _check_coverage(
    domain: Sequence[LabeledSequence], label_set: LabelSet, shot: int
) -> list[set[int]]:
    """Sentence index sets per label; error if any label is under-supplied."""
    carriers: dict[str, set[int]] = {label.name: set() for label in label_set.labels}
    for i, sent in enumerate(domain):
        for name in sent.labels_present():
            if name in carriers:
                carriers[name].add(i)
    for label in label_set.labels:
        have = len(carriers[label.name])
        if have < shot:
            raise DataError(
                f"label {label.name!r} occurs in {have} sentences, "
                f"but shot={shot} requires at least {shot}"
            )
    return [carriers[label.name] for label in label_set.labels]


def sample_support_set(
    domain: Sequence[LabeledSequence],
    label_set: LabelSet,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> SupportSet:
    """Sample one k-shot support set from ``domain``.

    With ``retention_probability == 0`` the result satisfies both criteria;
    with a positive retention probability only criterion 1 is guaranteed.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    k = config.shot
    carriers = _check_coverage(domain, label_set, k)

    members: list[int] = []  # in the order they were added
    in_set: set[int] = set()
    counts = {label.name: 0 for label in label_set.labels}

    def add(index: int) -> None:
        members.append(index)
        in_set.add(index)
        for name in domain[index].labels_present():
            if name in counts:
                counts[name] += 1

    def remove(index: int) -> None:
        in_set.discard(index)
        for name in domain[index].labels_present():
            if name in counts:
                counts[name] -= 1

    for label, carrier_set in zip(label_set.labels, carriers):
        while counts[label.name] < k:
            candidates = sorted(carrier_set - in_set)
            add(int(rng.choice(candidates)))

    # Removal sweep in insertion order: drop every member whose removal keeps
    # all counts at k, except that each such member survives with probability
    # retention_probability.
    for index in list(members):
        remove(index)
        if any(counts[label.name] < k for label in label_set.labels):
            add_back = True
        elif config.retention_probability > 0 and rng.random() < config.retention_probability:
            add_back = True
        else:
            add_back = False
            members.remove(index)
        if add_back:
            in_set.add(index)
            for name in domain[index].labels_present():
                if name in counts:
                    counts[name] += 1

    return SupportSet(pairs=tuple(domain[i] for i in members), shot=k)


def build_dataset(
    domain: Sequence[LabeledSequence],
    label_set: LabelSet,
    config: SamplerConfig,
    n_support_sets: int,
    n_queries: int,
    domain_name: str = "",
) -> FewShotDataset:
    """Assemble ``n_queries`` episodes over ``n_support_sets`` support sets.

    Episodes come out grouped: ``ceil(n_queries / n_support_sets)`` queries
    attach to each support set (the last group may be smaller). Queries are
    drawn without replacement within a group, from the domain minus the
    group's support set, and with replacement across groups.
    """
    if n_support_sets < 1 or n_queries < 1:
        raise ValueError("need at least one support set and one query")
    rng = np.random.default_rng(config.rng_seed)
    per_group = math.ceil(n_queries / n_support_sets)

    episodes: list[Episode] = []
    support_ids: list[str] = []
    remaining = n_queries
    for g in range(n_support_sets):
        if remaining <= 0:
            break
        support = sample_support_set(domain, label_set, config, rng)
        support_members = {id(p) for p in support.pairs}
        pool = [i for i, sent in enumerate(domain) if id(sent) not in support_members]
        group_size = min(per_group, remaining)
        if len(pool) < group_size:
            raise DataError(
                f"domain has only {len(pool)} sentences outside the support set, "
                f"cannot draw {group_size} disjoint queries"
            )
        picked = rng.choice(len(pool), size=group_size, replace=False)
        sid = f"{domain_name or 'domain'}-s{g:04d}"
        for q in sorted(int(i) for i in picked):
            episodes.append(
                Episode(query=domain[pool[q]], support=support, domain_name=domain_name)
            )
            support_ids.append(sid)
        remaining -= group_size

    return FewShotDataset(
        episodes=tuple(episodes),
        queries_per_support=per_group,
        support_ids=tuple(support_ids),
    )


# ---------------------------------------------------------------------------
# Episode JSONL: one episode per line with fields `domain`, `query` (tokens,
# tags), `support` (list of {tokens, tags}) and `support_id`. This file is the
# contract consumed by the trainer, the evaluator and the embedding exporter.


def _sequence_to_json(seq: LabeledSequence) -> dict:
    return {"tokens": list(seq.tokens), "tags": [str(t) for t in seq.tags]}


def _sequence_from_json(obj: dict, source: str) -> LabeledSequence:
    seq = LabeledSequence(
        tokens=tuple(obj["tokens"]),
        tags=tuple(Tag.parse(t) for t in obj["tags"]),
    )
    bad = validate_bio(seq)
    if bad:
        raise DataError(f"{source}: gold tags violate BIO at positions {bad}")
    return seq


def write_episodes(path: str, dataset: FewShotDataset) -> None:
    ids = dataset.support_ids or tuple(
        f"g{i // dataset.queries_per_support:04d}" for i in range(len(dataset.episodes))
    )
    with open(path, "w", encoding="utf-8") as handle:
        for episode, sid in zip(dataset.episodes, ids):
            record = {
                "domain": episode.domain_name,
                "support_id": sid,
                "query": _sequence_to_json(episode.query),
                "support": [_sequence_to_json(p) for p in episode.support.pairs],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_episodes(path: str, shot: int = 1) -> FewShotDataset:
    episodes: list[Episode] = []
    support_ids: list[str] = []
    support_cache: dict[str, SupportSet] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            source = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{source}: invalid JSON ({exc})") from None
            sid = record.get("support_id")
            if sid is None:
                raise DataError(f"{source}: missing support_id")
            if sid in support_cache:
                support = support_cache[sid]
            else:
                support = SupportSet(
                    pairs=tuple(
                        _sequence_from_json(p, source) for p in record["support"]
                    ),
                    shot=shot,
                )
                support_cache[sid] = support
            episodes.append(
                Episode(
                    query=_sequence_from_json(record["query"], source),
                    support=support,
                    domain_name=record.get("domain", ""),
                )
            )
            support_ids.append(str(sid))
    if not episodes:
        raise DataError(f"{path}: no episodes")
    sizes = [len(g) for _, g in _group_sizes(support_ids)]
    return FewShotDataset(
        episodes=tuple(episodes),
        queries_per_support=max(sizes),
        support_ids=tuple(support_ids),
    )


def _group_sizes(ids: Sequence[str]) -> list[tuple[str, list[int]]]:
    out: list[tuple[str, list[int]]] = []
    for i, sid in enumerate(ids):
        if out and out[-1][0] == sid:
            out[-1][1].append(i)
        else:
            out.append((sid, [i]))
    return out
