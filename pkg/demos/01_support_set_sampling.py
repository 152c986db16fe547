#!/usr/bin/env python3
"""Building k-shot support sets with the minimum-including sampler.

A k-shot support set must cover every label of the domain at least k times
(counting sentences, not occurrences), and it must be minimal: dropping any
sentence breaks the coverage. This script walks through the construction on
a small synthetic domain and shows how the retention probability trades
minimality for a more uniform sample distribution.
"""

import numpy as np

from fewtag import SamplerConfig, build_dataset, label_set_of, sample_support_set, write_episodes
from fewtag.synthetic import make_domain

rng = np.random.default_rng(0)
sentences, label_set = make_domain("demo", rng, n_labels=3, n_sentences=40)

print(f"domain: {len(sentences)} sentences, labels = {[l.name for l in label_set.labels]}")
print("example sentence:")
for token, tag in zip(sentences[0].tokens, sentences[0].tags):
    print(f"  {token:<16} {tag}")

# --- strict minimal support sets (retention 0) --------------------------------
for k in (1, 2):
    support = sample_support_set(
        sentences, label_set, SamplerConfig(shot=k, retention_probability=0.0, rng_seed=7)
    )
    print(f"\nk={k}: support set of {len(support)} sentences, per-label counts:")
    for name, count in sorted(support.label_counts().items()):
        print(f"  {name:<10} {count}")
    # minimality: removing any member must break some label's coverage
    for i in range(len(support.pairs)):
        reduced = support.pairs[:i] + support.pairs[i + 1 :]
        counts = {}
        for pair in reduced:
            for name in pair.labels_present():
                counts[name] = counts.get(name, 0) + 1
        assert any(counts.get(l.name, 0) < k for l in label_set.labels)
    print(f"  minimal: removing any sentence breaks {k}-shot coverage")

# --- retention keeps extra sentences ------------------------------------------
sizes = {p: [] for p in (0.0, 0.2, 0.8)}
for p in sizes:
    for seed in range(30):
        support = sample_support_set(
            sentences, label_set, SamplerConfig(shot=1, retention_probability=p, rng_seed=seed)
        )
        sizes[p].append(len(support))
print("\nmean support size by retention probability (k=1):")
for p, values in sizes.items():
    print(f"  retention {p:.1f}: {np.mean(values):.2f}")

# --- full episode dataset ------------------------------------------------------
dataset = build_dataset(
    sentences,
    label_set_of(sentences),
    SamplerConfig(shot=1, retention_probability=0.2, rng_seed=1),
    n_support_sets=4,
    n_queries=20,
    domain_name="demo",
)
print(f"\nbuilt {len(dataset.episodes)} episodes over {len(dataset.groups())} support sets")
print(f"queries per support set: {dataset.queries_per_support}")
write_episodes("/tmp/fewtag_demo_episodes.jsonl", dataset)
print("episode file written to /tmp/fewtag_demo_episodes.jsonl")
