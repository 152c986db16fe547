import json
import os

import numpy as np
import pytest

from fewtag.cli import main
from fewtag.core import write_conll
from fewtag.model import load_checkpoint
from fewtag.synthetic import make_corpus


@pytest.fixture()
def workspace(tmp_path):
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    corpus = make_corpus(99, ["alpha", "beta", "gamma", "delta"], n_sentences=30)
    for name, (sentences, _) in corpus.items():
        write_conll(str(corpus_dir / f"{name}.conll"), sentences)
    config = {
        "seed": 5,
        "paths": {
            "corpus_dir": str(corpus_dir),
            "episodes_dir": str(tmp_path / "episodes"),
            "checkpoint": str(tmp_path / "out" / "checkpoint.json"),
            "output_dir": str(tmp_path / "out"),
        },
        "data": {
            "target_domain": "alpha",
            "dev_domain": "beta",
            "shot": 1,
            "retention_probability": 0.2,
            "train_support_sets": 2,
            "train_queries": 8,
            "dev_support_sets": 1,
            "dev_queries": 4,
            "test_support_sets": 2,
            "test_queries": 8,
        },
        "embedding": {"dim": 8, "mode": "pairwise", "source": "toy_attention"},
        "training": {
            "batch_size": 4,
            "learning_rate": 1e-3,
            "max_epochs": 2,
            "early_stop_patience_epochs": 2,
            "scorer": "nmn",
        },
        "evaluation": {"decoder": "viterbi"},
        "workers": 1,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return tmp_path, config_path, config


def rewrite(config_path, config):
    config_path.write_text(json.dumps(config, indent=2))


def test_full_pipeline(workspace):
    tmp_path, config_path, _ = workspace
    assert main(["sample", "--config", str(config_path)]) == 0
    episodes_dir = tmp_path / "episodes"
    assert (episodes_dir / "train.jsonl").exists()
    assert (episodes_dir / "dev.jsonl").exists()
    assert (episodes_dir / "test.jsonl").exists()
    train_lines = (episodes_dir / "train.jsonl").read_text().splitlines()
    assert len(train_lines) == 16  # 8 queries for each of the 2 source domains
    domains = {json.loads(line)["domain"] for line in train_lines}
    assert domains == {"gamma", "delta"}

    assert main(["train", "--config", str(config_path)]) == 0
    checkpoint = tmp_path / "out" / "checkpoint.json"
    assert checkpoint.exists()
    assert (tmp_path / "out" / "loss_history.csv").exists()

    assert main(["eval", "--config", str(config_path), "--dump-predictions"]) == 0
    report = json.loads((tmp_path / "out" / "report-viterbi.json").read_text())
    assert 0.0 <= report["mean_f1"] <= 1.0
    assert len(report["per_episode_f1"]) == 2
    assert (tmp_path / "out" / "predictions-viterbi.conll").exists()

    assert main(["analyze", "--config", str(config_path)]) == 0
    analysis = json.loads((tmp_path / "out" / "analysis.json").read_text())
    assert analysis["bigrams"]


def test_sample_idempotent(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    first = (tmp_path / "episodes" / "train.jsonl").read_bytes()
    main(["sample", "--config", str(config_path)])
    assert (tmp_path / "episodes" / "train.jsonl").read_bytes() == first


def test_train_deterministic(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    main(["train", "--config", str(config_path)])
    first = (tmp_path / "out" / "loss_history.csv").read_bytes()
    main(["train", "--config", str(config_path)])
    assert (tmp_path / "out" / "loss_history.csv").read_bytes() == first


def test_missing_config_is_usage_error(tmp_path, capsys):
    assert main(["sample", "--config", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_missing_corpus_path_exit_code_and_message(workspace, capsys):
    tmp_path, config_path, config = workspace
    config["paths"]["corpus_dir"] = str(tmp_path / "missing-corpus")
    rewrite(config_path, config)
    assert main(["sample", "--config", str(config_path)]) == 1
    assert "missing-corpus" in capsys.readouterr().err


def test_unknown_domain_is_data_error(workspace, capsys):
    _, config_path, config = workspace
    config["data"]["target_domain"] = "nonexistent"
    rewrite(config_path, config)
    assert main(["sample", "--config", str(config_path)]) == 2
    assert "nonexistent" in capsys.readouterr().err


def test_undersupplied_label_surfaces_domain_name(workspace, capsys):
    tmp_path, config_path, config = workspace
    config["data"]["shot"] = 50  # more than any label can supply
    rewrite(config_path, config)
    assert main(["sample", "--config", str(config_path)]) == 2
    err = capsys.readouterr().err
    assert "domain" in err and "shot=50" in err


def test_no_transition_flag_zeroes_table(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    assert main(["train", "--config", str(config_path), "--no-transition"]) == 0
    model, _, _ = load_checkpoint(str(tmp_path / "out" / "checkpoint.json"))
    assert np.all(model.table.entries == 0.0)
    assert model.use_dependency_transfer is False


def test_scorer_flag_changes_checkpoint(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    checkpoints = {}
    for scorer in ("mn", "nmn"):
        main(["train", "--config", str(config_path), "--scorer", scorer])
        model, _, _ = load_checkpoint(str(tmp_path / "out" / "checkpoint.json"))
        checkpoints[scorer] = (model.lam, model.table.entries.copy())
    assert checkpoints["mn"][0] != checkpoints["nmn"][0] or not np.allclose(
        checkpoints["mn"][1], checkpoints["nmn"][1]
    )


def test_resume_matches_uninterrupted(workspace):
    tmp_path, config_path, config = workspace
    main(["sample", "--config", str(config_path)])

    config["training"]["max_epochs"] = 4
    rewrite(config_path, config)
    main(["train", "--config", str(config_path)])
    uninterrupted = (tmp_path / "out" / "loss_history.csv").read_bytes()

    config["training"]["max_epochs"] = 2
    rewrite(config_path, config)
    main(["train", "--config", str(config_path)])
    config["training"]["max_epochs"] = 4
    rewrite(config_path, config)
    assert main(["train", "--config", str(config_path), "--resume"]) == 0
    assert (tmp_path / "out" / "loss_history.csv").read_bytes() == uninterrupted


def test_decoder_comparison_reports(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    main(["train", "--config", str(config_path)])
    for decoder in ("viterbi", "rule", "argmax"):
        assert main(["eval", "--config", str(config_path), "--decoder", decoder]) == 0
        assert (tmp_path / "out" / f"report-{decoder}.json").exists()


def test_eval_analysis_flag_adds_bigram_breakdown(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    main(["train", "--config", str(config_path)])
    assert main(["eval", "--config", str(config_path), "--analysis", "bigrams"]) == 0
    report = json.loads((tmp_path / "out" / "report-viterbi.json").read_text())
    assert report["bigrams"]


def test_eval_idempotent(workspace):
    tmp_path, config_path, _ = workspace
    main(["sample", "--config", str(config_path)])
    main(["train", "--config", str(config_path)])
    main(["eval", "--config", str(config_path)])
    first = (tmp_path / "out" / "report-viterbi.json").read_bytes()
    main(["eval", "--config", str(config_path)])
    assert (tmp_path / "out" / "report-viterbi.json").read_bytes() == first


def test_env_var_overrides_paths(workspace, monkeypatch):
    tmp_path, config_path, config = workspace
    main(["sample", "--config", str(config_path)])
    main(["train", "--config", str(config_path)])
    moved = tmp_path / "elsewhere.json"
    os.rename(config["paths"]["checkpoint"], moved)
    assert main(["eval", "--config", str(config_path)]) == 1  # checkpoint gone
    monkeypatch.setenv("FEWTAG_CHECKPOINT", str(moved))
    assert main(["eval", "--config", str(config_path)]) == 0


def test_usage_error_on_unknown_command(capsys):
    assert main(["frobnicate", "--config", "x"]) == 1
