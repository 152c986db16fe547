#!/usr/bin/env python3
"""The command-line pipeline: sample -> train -> eval -> analyze.

Everything that affects results sits in one JSON config; commands only pick
the stage. This script materializes a small multi-domain corpus as CoNLL
files, writes a config, and drives the four subcommands through
``fewtag.cli.main`` exactly as a shell session would.
"""

import json
import pathlib
import tempfile

from fewtag.cli import main
from fewtag.core import write_conll
from fewtag.synthetic import make_corpus

root = pathlib.Path(tempfile.mkdtemp(prefix="fewtag-cli-demo-"))
corpus_dir = root / "corpus"
corpus_dir.mkdir()

corpus = make_corpus(11, ["weatherish", "musicish", "bookish", "foodish"], n_sentences=40)
for name, (sentences, _) in corpus.items():
    write_conll(str(corpus_dir / f"{name}.conll"), sentences)
print(f"corpus: {sorted(p.name for p in corpus_dir.iterdir())}")

config = {
    "seed": 7,
    "paths": {
        "corpus_dir": str(corpus_dir),
        "episodes_dir": str(root / "episodes"),
        "checkpoint": str(root / "out" / "checkpoint.json"),
        "output_dir": str(root / "out"),
    },
    "data": {
        "target_domain": "weatherish",
        "dev_domain": "musicish",
        "shot": 1,
        "retention_probability": 0.2,
        "train_support_sets": 3,
        "train_queries": 24,
        "dev_support_sets": 2,
        "dev_queries": 12,
        "test_support_sets": 4,
        "test_queries": 32,
    },
    "embedding": {"dim": 16, "mode": "pairwise", "source": "toy_attention"},
    "training": {
        "batch_size": 4,
        "learning_rate": 5e-3,
        "max_epochs": 6,
        "early_stop_patience_epochs": 2,
        "scorer": "nmn",
    },
    "evaluation": {"decoder": "viterbi"},
    "workers": 1,
}
config_path = root / "config.json"
config_path.write_text(json.dumps(config, indent=2))

for argv in (
    ["sample", "--config", str(config_path)],
    ["train", "--config", str(config_path)],
    ["eval", "--config", str(config_path), "--decoder", "viterbi"],
    ["eval", "--config", str(config_path), "--decoder", "rule"],
    ["analyze", "--config", str(config_path)],
):
    print(f"\n$ fewtag {' '.join(argv)}")
    code = main(argv)
    assert code == 0, f"command failed with exit code {code}"

print(f"\nartifacts under {root / 'out'}:")
for path in sorted((root / "out").iterdir()):
    print(f"  {path.name}")
