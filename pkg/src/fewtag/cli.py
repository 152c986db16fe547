"""Command-line surface: sample, train, eval, analyze.

Everything affecting results lives in a JSON config file; flags only pick
commands, paths and ablations, so a config plus a seed reproduces a run
byte for byte. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import DataError, label_set_of, read_conll
from .embedding import EmbeddingConfig, EmbeddingDump, EncoderParams, init_attention_params
from .evaluation import evaluate, write_predictions_conll, write_report
from .model import load_checkpoint, save_checkpoint
from .sampler import FewShotDataset, SamplerConfig, build_dataset, read_episodes, write_episodes
from .trainer import NumericalError, TrainConfig, save_history, train

ENV_PREFIX = "FEWTAG_"
PATH_KEYS = ("corpus_dir", "episodes_dir", "checkpoint", "output_dir", "embedding_dump")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit code 1, not argparse's 2
        raise UsageError(message)


def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as handle:
        try:
            config = json.load(handle)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid config JSON in {path}: {exc}")
    paths = config.setdefault("paths", {})
    for key in PATH_KEYS:
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env:
            paths[key] = env
    return config


def _require_path(config: dict, key: str, must_exist: bool = True) -> str:
    value = config.get("paths", {}).get(key)
    if not value:
        raise UsageError(f"config is missing paths.{key}")
    if must_exist and not os.path.exists(value):
        raise UsageError(f"paths.{key} does not exist: {value}")
    return value


def _output_dir(config: dict) -> str:
    out = config.get("paths", {}).get("output_dir", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _derived_seed(*parts: int) -> int:
    state = np.random.SeedSequence(list(parts)).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def _read_corpus(corpus_dir: str) -> dict[str, list]:
    domains = {}
    for entry in sorted(os.listdir(corpus_dir)):
        if entry.endswith((".conll", ".txt", ".tsv")):
            name = os.path.splitext(entry)[0]
            domains[name] = read_conll(os.path.join(corpus_dir, entry))
    if not domains:
        raise DataError(f"no corpus files (*.conll, *.txt, *.tsv) in {corpus_dir}")
    return domains


def cmd_sample(config: dict) -> int:
    corpus_dir = _require_path(config, "corpus_dir")
    episodes_dir = config.get("paths", {}).get("episodes_dir") or os.path.join(
        _output_dir(config), "episodes"
    )
    os.makedirs(episodes_dir, exist_ok=True)

    data = config.get("data", {})
    seed = int(config.get("seed", 0))
    domains = _read_corpus(corpus_dir)
    target = data.get("target_domain")
    dev = data.get("dev_domain")
    for role, name in (("target", target), ("dev", dev)):
        if name not in domains:
            raise DataError(f"{role} domain {name!r} not in corpus ({sorted(domains)})")
    if target == dev:
        raise UsageError("target and dev domains must differ")
    train_names = [d for d in sorted(domains) if d not in (target, dev)]
    if not train_names:
        raise DataError("no source domains left for training")

    shot = int(data.get("shot", 1))
    retention = float(data.get("retention_probability", 0.2))
    splits = {
        "train": (train_names, data.get("train_support_sets", 10), data.get("train_queries", 100)),
        "dev": ([dev], data.get("dev_support_sets", 5), data.get("dev_queries", 50)),
        "test": ([target], data.get("test_support_sets", 5), data.get("test_queries", 50)),
    }
    for split_idx, (split, (names, n_support, n_queries)) in enumerate(splits.items()):
        episodes: list = []
        support_ids: list[str] = []
        qps = 1
        for domain_idx, name in enumerate(names):
            sentences = domains[name]
            try:
                dataset = build_dataset(
                    sentences,
                    label_set_of(sentences),
                    SamplerConfig(
                        shot=shot,
                        retention_probability=retention,
                        rng_seed=_derived_seed(seed, split_idx, domain_idx),
                    ),
                    n_support_sets=int(n_support),
                    n_queries=int(n_queries),
                    domain_name=name,
                )
            except DataError as exc:
                raise DataError(f"domain {name!r}: {exc}") from None
            episodes.extend(dataset.episodes)
            support_ids.extend(dataset.support_ids)
            qps = max(qps, dataset.queries_per_support)
        path = os.path.join(episodes_dir, f"{split}.jsonl")
        write_episodes(
            path,
            FewShotDataset(
                episodes=tuple(episodes),
                queries_per_support=qps,
                support_ids=tuple(support_ids),
            ),
        )
        print(f"wrote {len(episodes)} episodes to {path}")
    return 0


def _build_encoder(config: dict, embed_config: EmbeddingConfig) -> EncoderParams:
    seed = int(config.get("seed", 0))
    emb = config.get("embedding", {})
    encoder = EncoderParams()
    if embed_config.source == "toy_attention":
        encoder.attention = init_attention_params(
            embed_config.dim,
            np.random.default_rng([seed, 7]),
            scale=float(emb.get("attention_scale", 1.0)),
        )
    if embed_config.source == "external_dump":
        dump_dir = _require_path(config, "embedding_dump")
        encoder.dump = EmbeddingDump.open(dump_dir)
    return encoder


def _embed_config(config: dict) -> EmbeddingConfig:
    emb = config.get("embedding", {})
    return EmbeddingConfig(
        dim=int(emb.get("dim", 16)),
        mode=emb.get("mode", "pairwise"),
        source=emb.get("source", "toy_attention"),
        projection=bool(emb.get("projection", False)),
    )


def cmd_train(config: dict, args: argparse.Namespace) -> int:
    episodes_dir = _require_path(config, "episodes_dir")
    shot = int(config.get("data", {}).get("shot", 1))
    train_set = read_episodes(os.path.join(episodes_dir, "train.jsonl"), shot=shot)
    dev_set = read_episodes(os.path.join(episodes_dir, "dev.jsonl"), shot=shot)

    tr = dict(config.get("training", {}))
    if args.no_transition:
        tr["use_dependency_transfer"] = False
    if args.no_pairwise:
        tr["use_pairwise"] = False
    if args.fixed_lambda is not None:
        tr["learnable_lambda"] = False
        tr["lambda_init"] = args.fixed_lambda
    if args.scorer:
        tr["scorer"] = args.scorer
    train_config = TrainConfig(
        batch_size=int(tr.get("batch_size", 4)),
        learning_rate=float(tr.get("learning_rate", 1e-5)),
        lambda_init=tr.get("lambda_init"),
        early_stop_patience_epochs=int(tr.get("early_stop_patience_epochs", 2)),
        max_epochs=int(tr.get("max_epochs", 10)),
        rng_seed=int(config.get("seed", 0)),
        use_dependency_transfer=bool(tr.get("use_dependency_transfer", True)),
        use_pairwise=bool(tr.get("use_pairwise", True)),
        learnable_lambda=bool(tr.get("learnable_lambda", True)),
        scorer=tr.get("scorer", "nmn"),
        use_start=bool(tr.get("use_start", False)),
    )
    embed_config = _embed_config(config)
    encoder = _build_encoder(config, embed_config)

    resume_state = None
    checkpoint_path = config.get("paths", {}).get("checkpoint") or os.path.join(
        _output_dir(config), "checkpoint.json"
    )
    if args.resume:
        if not os.path.exists(checkpoint_path):
            raise UsageError(f"--resume needs an existing checkpoint at {checkpoint_path}")
        _, resume_state, _ = load_checkpoint(checkpoint_path)
        if resume_state is None:
            raise UsageError("checkpoint carries no trainer state to resume from")

    result = train(
        list(train_set.episodes),
        list(dev_set.episodes),
        train_config,
        embed_config,
        encoder,
        resume_state=resume_state,
    )
    save_checkpoint(checkpoint_path, result.model, result.trainer_state, config_echo=config)
    history_path = os.path.join(_output_dir(config), "loss_history.csv")
    save_history(history_path, result.history)
    print(
        f"trained {len(result.history)} epochs; best dev loss {result.best_dev_loss:.6f}; "
        f"checkpoint at {checkpoint_path}"
    )
    return 0


def _load_eval_inputs(config: dict, args: argparse.Namespace):
    episodes_dir = _require_path(config, "episodes_dir")
    checkpoint_path = _require_path(config, "checkpoint")
    shot = int(config.get("data", {}).get("shot", 1))
    split = getattr(args, "split", None) or "test"
    dataset = read_episodes(os.path.join(episodes_dir, f"{split}.jsonl"), shot=shot)
    model, _, _ = load_checkpoint(checkpoint_path)
    if model.embed_config.source == "external_dump":
        model.encoder.dump = EmbeddingDump.open(_require_path(config, "embedding_dump"))
    return dataset, model


def cmd_eval(config: dict, args: argparse.Namespace) -> int:
    dataset, model = _load_eval_inputs(config, args)
    ev = config.get("evaluation", {})
    decoder = args.decoder or ev.get("decoder") or model.default_decoder
    report = evaluate(
        dataset,
        model,
        decoder=decoder,
        pooled=bool(ev.get("pooled", False)),
        with_bigrams=args.analysis == "bigrams" or bool(ev.get("bigrams", False)),
        workers=config.get("workers") or os.cpu_count(),
    )
    out = _output_dir(config)
    suffix = f"-{decoder}"
    write_report(
        os.path.join(out, f"report{suffix}.json"),
        os.path.join(out, f"report{suffix}.txt"),
        report,
    )
    if args.dump_predictions:
        predictions = [
            model.decode(episode, decoder=decoder, query_id=i)
            for i, episode in enumerate(dataset.episodes)
        ]
        write_predictions_conll(
            os.path.join(out, f"predictions{suffix}.conll"),
            [e.query for e in dataset.episodes],
            predictions,
        )
    print(f"mean episode F1 ({decoder}): {report.mean_f1:.4f}")
    return 0


def cmd_analyze(config: dict, args: argparse.Namespace) -> int:
    dataset, model = _load_eval_inputs(config, args)
    decoder = args.decoder or model.default_decoder
    report = evaluate(
        dataset,
        model,
        decoder=decoder,
        with_bigrams=True,
        workers=config.get("workers") or os.cpu_count(),
    )
    out = _output_dir(config)
    write_report(
        os.path.join(out, "analysis.json"), os.path.join(out, "analysis.txt"), report
    )
    print(report.to_text())
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fewtag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="build episode files from a corpus directory")
    p_sample.add_argument("--config", required=True)

    p_train = sub.add_parser("train", help="train a transition table on source episodes")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--no-transition", action="store_true")
    p_train.add_argument("--no-pairwise", action="store_true")
    p_train.add_argument("--fixed-lambda", type=float, default=None)
    p_train.add_argument("--scorer", choices=("mn", "nmn", "proto", "nearest"))
    p_train.add_argument("--resume", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on episode files")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--decoder", choices=("viterbi", "rule", "argmax"))
    p_eval.add_argument("--split", choices=("train", "dev", "test"))
    p_eval.add_argument("--analysis", choices=("bigrams",))
    p_eval.add_argument("--dump-predictions", action="store_true")

    p_an = sub.add_parser("analyze", help="bigram-type accuracy breakdown for a checkpoint")
    p_an.add_argument("--config", required=True)
    p_an.add_argument("--decoder", choices=("viterbi", "rule", "argmax"))
    p_an.add_argument("--split", choices=("train", "dev", "test"))

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        if args.command == "sample":
            return cmd_sample(config)
        if args.command == "train":
            return cmd_train(config, args)
        if args.command == "eval":
            return cmd_eval(config, args)
        if args.command == "analyze":
            return cmd_analyze(config, args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
