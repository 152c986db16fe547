import itertools
import json

import numpy as np
import pytest

from fewtag.core import DataError, LabelSet
from fewtag.sampler import (
    SamplerConfig,
    build_dataset,
    read_episodes,
    sample_support_set,
    write_episodes,
)

from helpers import seq_from


def criterion1(pairs, label_names, k):
    counts = {name: 0 for name in label_names}
    for pair in pairs:
        for name in pair.labels_present():
            counts[name] += 1
    return all(counts[name] >= k for name in label_names)


def criterion2(pairs, label_names, k):
    """Brute force: removing any one member must break criterion 1."""
    return all(
        not criterion1(pairs[:i] + pairs[i + 1 :], label_names, k)
        for i in range(len(pairs))
    )


def two_label_domain():
    return [
        seq_from("a:B-l1 x:O"),
        seq_from("b:B-l2 y:O"),
    ]


def test_each_label_needs_its_unique_carrier():
    domain = two_label_domain()
    ls = LabelSet(["l1", "l2"])
    support = sample_support_set(domain, ls, SamplerConfig(shot=1, retention_probability=0.0))
    assert set(support.pairs) == set(domain)


def test_minimal_result_is_one_of_the_valid_minimal_subsets():
    domain = [
        seq_from("a:B-l1 b:B-l2"),  # covers both
        seq_from("c:B-l1 x:O"),
        seq_from("d:B-l2 y:O"),
    ]
    ls = LabelSet(["l1", "l2"])
    names = ["l1", "l2"]
    # oracle: enumerate all subsets satisfying both criteria at k=1
    valid = []
    for r in range(1, 4):
        for combo in itertools.combinations(domain, r):
            if criterion1(list(combo), names, 1) and criterion2(tuple(combo), names, 1):
                valid.append(set(combo))
    assert {frozenset([domain[0]])} | {frozenset([domain[1], domain[2]])} == {
        frozenset(s) for s in valid
    }
    for seed in range(20):
        support = sample_support_set(
            domain, ls, SamplerConfig(shot=1, retention_probability=0.0, rng_seed=seed)
        )
        assert set(support.pairs) in valid


@pytest.mark.parametrize("k", [1, 2])
def test_criteria_on_random_domains(k):
    rng = np.random.default_rng(7)
    names = ["l1", "l2", "l3"]
    for trial in range(25):
        domain = []
        for i in range(12):
            present = [n for n in names if rng.random() < 0.5] or [names[int(rng.integers(3))]]
            spec = " ".join(f"t{i}_{j}:B-{n}" for j, n in enumerate(present)) + f" e{i}:O"
            domain.append(seq_from(spec))
        ls = LabelSet(names)
        config = SamplerConfig(shot=k, retention_probability=0.0, rng_seed=trial)
        try:
            support = sample_support_set(domain, ls, config)
        except DataError:
            continue  # some random domains under-supply a label; that path errors
        assert criterion1(support.pairs, names, k)
        assert criterion2(support.pairs, names, k)


def test_retention_keeps_criterion1_but_relaxes_minimality():
    names = ["l1", "l2"]
    # singles for each label plus sentences covering both: the greedy phase
    # overshoots often enough that the removal pass has real work to do
    domain = (
        [seq_from(f"a{i}:B-l1 x{i}:O") for i in range(6)]
        + [seq_from(f"b{i}:B-l2 y{i}:O") for i in range(6)]
        + [seq_from(f"c{i}:B-l1 d{i}:B-l2") for i in range(6)]
    )
    ls = LabelSet(names)
    sizes = {0.0: [], 0.9: []}
    for retention in sizes:
        for seed in range(40):
            support = sample_support_set(
                domain, ls, SamplerConfig(shot=1, retention_probability=retention, rng_seed=seed)
            )
            assert criterion1(support.pairs, names, 1)
            sizes[retention].append(len(support))
    assert np.mean(sizes[0.9]) > np.mean(sizes[0.0])
    # retention keeps members that strict minimality would have deleted
    assert any(
        not criterion2(
            sample_support_set(
                domain, ls, SamplerConfig(shot=1, retention_probability=0.9, rng_seed=s)
            ).pairs,
            names,
            1,
        )
        for s in range(40)
    )


def test_undersupplied_label_error_names_label_and_count():
    domain = [seq_from("a:B-l1 x:O")]
    ls = LabelSet(["l1", "l2"])
    with pytest.raises(DataError, match="'l2'.*0"):
        sample_support_set(domain, ls, SamplerConfig(shot=1))


def test_same_seed_same_support():
    domain = [seq_from(f"t{i}:B-l1 u{i}:B-l2") for i in range(8)]
    ls = LabelSet(["l1", "l2"])
    config = SamplerConfig(shot=2, retention_probability=0.2, rng_seed=11)
    a = sample_support_set(domain, ls, config)
    b = sample_support_set(domain, ls, config)
    assert a == b


def test_mean_support_size_grows_with_shot():
    rng = np.random.default_rng(0)
    names = ["l1", "l2", "l3"]
    domain = []
    for i in range(40):
        present = [n for n in names if rng.random() < 0.4] or [names[i % 3]]
        domain.append(seq_from(" ".join(f"w{i}_{j}:B-{n}" for j, n in enumerate(present))))
    ls = LabelSet(names)
    sizes = {}
    for k in (1, 5):
        sizes[k] = np.mean(
            [
                len(
                    sample_support_set(
                        domain, ls, SamplerConfig(shot=k, retention_probability=0.0, rng_seed=s)
                    )
                )
                for s in range(20)
            ]
        )
    assert sizes[5] > sizes[1]


def make_domain(n=30):
    return [seq_from(f"t{i}:B-l1 u{i}:B-l2 x{i}:O") for i in range(n)]


class TestBuildDataset:
    def test_grouping_counts(self):
        domain = make_domain(30)
        ls = LabelSet(["l1", "l2"])
        ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=5), 10, 200, "dom")
        assert len(ds.episodes) == 200
        assert ds.queries_per_support == 20
        groups = ds.groups()
        assert len(groups) == 10
        assert all(len(g) == 20 for _, g in groups)

    def test_query_never_in_own_support(self):
        domain = make_domain(6)
        ls = LabelSet(["l1", "l2"])
        ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=1), 1, 1, "dom")
        episode = ds.episodes[0]
        assert episode.query not in episode.support.pairs

    def test_all_queries_disjoint_from_support(self):
        domain = make_domain(25)
        ls = LabelSet(["l1", "l2"])
        ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=9), 5, 100, "dom")
        for episode in ds.episodes:
            assert episode.query not in episode.support.pairs

    def test_domain_too_small_errors(self):
        domain = make_domain(3)
        ls = LabelSet(["l1", "l2"])
        with pytest.raises(DataError, match="disjoint queries"):
            build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=0), 1, 10, "dom")

    def test_last_group_may_be_smaller(self):
        domain = make_domain(30)
        ls = LabelSet(["l1", "l2"])
        ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=2), 3, 7, "dom")
        assert [len(g) for _, g in ds.groups()] == [3, 3, 1]

    def test_determinism_byte_identical_files(self, tmp_path):
        domain = make_domain(30)
        ls = LabelSet(["l1", "l2"])
        paths = []
        for name in ("a.jsonl", "b.jsonl"):
            ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=4), 4, 40, "dom")
            path = tmp_path / name
            write_episodes(str(path), ds)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]


def test_jsonl_schema_and_roundtrip(tmp_path):
    domain = make_domain(20)
    ls = LabelSet(["l1", "l2"])
    ds = build_dataset(domain, ls, SamplerConfig(shot=1, rng_seed=8), 2, 6, "dom")
    path = tmp_path / "episodes.jsonl"
    write_episodes(str(path), ds)

    lines = path.read_text().splitlines()
    assert len(lines) == 6
    record = json.loads(lines[0])
    assert set(record) == {"domain", "support_id", "query", "support"}
    assert set(record["query"]) == {"tokens", "tags"}

    loaded = read_episodes(str(path))
    assert len(loaded.episodes) == 6
    assert loaded.support_ids[0] == loaded.support_ids[2]
    assert [e.query for e in loaded.episodes] == [e.query for e in ds.episodes]


def test_read_episodes_rejects_bio_violations(tmp_path):
    path = tmp_path / "bad.jsonl"
    record = {
        "domain": "d",
        "support_id": "s0",
        "query": {"tokens": ["a", "b"], "tags": ["O", "I-x"]},
        "support": [{"tokens": ["c"], "tags": ["B-x"]}],
    }
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(DataError, match="BIO"):
        read_episodes(str(path))
