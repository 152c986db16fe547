"""Training loop: Adam on the negative log-likelihood of gold sequences.

The trainable set is {abstract table entries, start vector if enabled,
lambda if learnable, projection matrix if enabled}; base embeddings and
the toy attention layer stay frozen. Dev loss drives early stopping, and
the returned model carries the parameters from the best dev epoch.

Determinism contract: the same seed and inputs give bit-identical loss
histories. Per-epoch shuffles derive from (seed, epoch) alone, so a run
resumed from a checkpoint continues exactly where the uninterrupted run
would have gone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as dc_replace
from typing import Iterable, Sequence

import numpy as np

from .core import Episode, LabelSet, episode_label_set
from .crf import TransitionTable, nll_and_gradients
from .embedding import EmbeddingConfig, EncoderParams, PairEmbedding, embed_episode
from .emission import projection_gradient, score_episode


class NumericalError(RuntimeError):
    """Non-finite loss; the run is aborted rather than silently skipped."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    learning_rate: float = 1e-5
    lambda_init: float | None = None  # None: drawn uniformly from [0, 1]
    early_stop_patience_epochs: int = 2
    max_epochs: int = 10
    rng_seed: int = 0
    use_dependency_transfer: bool = True
    use_pairwise: bool = True
    learnable_lambda: bool = True
    scorer: str = "nmn"
    use_start: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.early_stop_patience_epochs < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")


@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One Adam update with bias correction; params update in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for key, grad in grads.items():
        if key not in state.m:
            state.m[key] = np.zeros_like(params[key])
            state.v[key] = np.zeros_like(params[key])
        state.m[key] = beta1 * state.m[key] + (1.0 - beta1) * grad
        state.v[key] = beta2 * state.v[key] + (1.0 - beta2) * grad * grad
        m_hat = state.m[key] / bc1
        v_hat = state.v[key] / bc2
        params[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass
class _Prepared:
    """Per-episode inputs that stay fixed across epochs."""

    raw: PairEmbedding
    support_tags: list
    label_set: LabelSet
    gold: np.ndarray


def _prepare(
    episodes: Sequence[Episode], embed_config: EmbeddingConfig, encoder: EncoderParams
) -> tuple[list[_Prepared], int]:
    """Per-episode fixed inputs, dropping episodes with unlearnable gold.

    A gold tag that never occurs in the support set scores the negative
    sentinel, so the gold path has zero probability at any positive lambda;
    such episodes carry no usable gradient and are excluded. The count of
    exclusions is returned for reporting.
    """
    out = []
    skipped = 0
    for i, episode in enumerate(episodes):
        label_set = episode_label_set(episode)
        support_tags = [p.tags for p in episode.support.pairs]
        evidence = np.zeros(label_set.num_tags, dtype=bool)
        for tags in support_tags:
            for tag in tags:
                evidence[label_set.tag_index(tag)] = True
        gold = np.array(label_set.indices_of(list(episode.query.tags)))
        if not evidence[gold].all():
            skipped += 1
            continue
        raw = embed_episode(episode, embed_config, encoder, query_id=i)
        out.append(
            _Prepared(
                raw=raw,
                support_tags=support_tags,
                label_set=label_set,
                gold=gold,
            )
        )
    return out, skipped


@dataclass
class TrainResult:
    model: "object"  # fewtag.model.Model; late import avoids a cycle
    history: list[tuple[int, float, float]]
    best_dev_loss: float
    trainer_state: dict
    skipped_episodes: int = 0


def _episode_loss_and_grads(
    prep: _Prepared,
    table: TransitionTable,
    lam: float,
    projection: np.ndarray | None,
    scorer: str,
    need_projection_grad: bool,
):
    emissions = score_episode(scorer, prep.raw, prep.support_tags, prep.label_set, projection)
    grads = nll_and_gradients(prep.gold, emissions, table, prep.label_set, lam)
    grad_w = None
    if need_projection_grad and projection is not None:
        grad_w = projection_gradient(
            scorer, prep.raw, prep.support_tags, prep.label_set, projection, grads.grad_emissions
        )
    return grads, grad_w


def _snapshot(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def _state_to_json(params, adam: AdamState, epoch, best_dev, bad, best_params, history):
    return {
        "epoch": epoch,
        "params": {k: v.tolist() for k, v in params.items()},
        "best_params": {k: v.tolist() for k, v in best_params.items()},
        "adam": {
            "t": adam.t,
            "m": {k: v.tolist() for k, v in adam.m.items()},
            "v": {k: v.tolist() for k, v in adam.v.items()},
        },
        "best_dev_loss": best_dev,
        "bad_epochs": bad,
        "history": [[int(e), float(tr), float(dv)] for e, tr, dv in history],
    }


def train(
    train_episodes: Sequence[Episode],
    dev_episodes: Sequence[Episode],
    config: TrainConfig,
    embed_config: EmbeddingConfig,
    encoder: EncoderParams,
    resume_state: dict | None = None,
) -> TrainResult:
    """Minimize mean episode NLL with Adam; return the best-dev model."""
    from .model import Model

    if not train_episodes:
        raise ValueError("training set is empty")
    train_domains = {e.domain_name for e in train_episodes if e.domain_name}
    dev_domains = {e.domain_name for e in dev_episodes if e.domain_name}
    if train_domains & dev_domains:
        raise ValueError(
            f"train and dev must come from disjoint domains; shared: {sorted(train_domains & dev_domains)}"
        )

    mode = "pairwise" if config.use_pairwise else "independent"
    embed_config = dc_replace(embed_config, mode=mode)

    prepared_train, skipped_train = _prepare(train_episodes, embed_config, encoder)
    prepared_dev, skipped_dev = _prepare(dev_episodes, embed_config, encoder)
    if not prepared_train:
        raise ValueError(
            "training set is empty after dropping episodes whose gold tags "
            "have no support evidence"
        )

    rng = np.random.default_rng(config.rng_seed)
    lam0 = rng.uniform(0.0, 1.0) if config.lambda_init is None else config.lambda_init

    if resume_state is None:
        params: dict[str, np.ndarray] = {
            "table": np.zeros(13),
            "lambda": np.array(float(lam0)),
        }
        if config.use_start:
            params["start"] = np.zeros(3)
        if embed_config.projection:
            params["projection"] = np.eye(embed_config.dim)
        adam = AdamState()
        start_epoch = 0
        best_dev = math.inf
        bad = 0
        best_params = _snapshot(params)
        history: list[tuple[int, float, float]] = []
    else:
        params = {k: np.asarray(v, dtype=float) for k, v in resume_state["params"].items()}
        best_params = {
            k: np.asarray(v, dtype=float) for k, v in resume_state["best_params"].items()
        }
        adam = AdamState(
            t=resume_state["adam"]["t"],
            m={k: np.asarray(v, dtype=float) for k, v in resume_state["adam"]["m"].items()},
            v={k: np.asarray(v, dtype=float) for k, v in resume_state["adam"]["v"].items()},
        )
        start_epoch = resume_state["epoch"]
        best_dev = resume_state["best_dev_loss"]
        bad = resume_state["bad_epochs"]
        history = [(int(e), float(t), float(d)) for e, t, d in resume_state["history"]]

    trainable = []
    if config.use_dependency_transfer:
        trainable.append("table")
        if config.use_start:
            trainable.append("start")
    if config.learnable_lambda:
        trainable.append("lambda")
    if embed_config.projection:
        trainable.append("projection")

    def current_table() -> TransitionTable:
        return TransitionTable(
            entries=params["table"], start=params.get("start") if config.use_start else None
        )

    def mean_dev_loss() -> float:
        total = 0.0
        table = current_table()
        lam = float(params["lambda"])
        w = params.get("projection")
        for prep in prepared_dev:
            grads, _ = _episode_loss_and_grads(prep, table, lam, w, config.scorer, False)
            total += grads.loss
        return total / len(prepared_dev) if prepared_dev else math.nan

    stopped = False
    for epoch in range(start_epoch + 1, config.max_epochs + 1):
        order = np.random.default_rng([config.rng_seed, epoch]).permutation(len(prepared_train))
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = [prepared_train[i] for i in order[lo : lo + config.batch_size]]
            grad_acc = {k: np.zeros_like(params[k]) for k in trainable}
            batch_loss = 0.0
            table = current_table()
            lam = float(params["lambda"])
            w = params.get("projection")
            for prep in batch:
                grads, grad_w = _episode_loss_and_grads(
                    prep, table, lam, w, config.scorer, "projection" in trainable
                )
                if not math.isfinite(grads.loss):
                    raise NumericalError(f"non-finite loss at epoch {epoch}")
                batch_loss += grads.loss
                if "table" in grad_acc:
                    grad_acc["table"] += grads.grad_table
                if "start" in grad_acc and grads.grad_start is not None:
                    grad_acc["start"] += grads.grad_start
                if "lambda" in grad_acc:
                    grad_acc["lambda"] += grads.grad_lambda
                if "projection" in grad_acc and grad_w is not None:
                    grad_acc["projection"] += grad_w
            scale = 1.0 / len(batch)
            grad_acc = {k: v * scale for k, v in grad_acc.items()}
            epoch_loss += batch_loss
            adam_step(params, grad_acc, adam, config.learning_rate)

        train_loss = epoch_loss / len(prepared_train)
        dev_loss = mean_dev_loss()
        if not math.isfinite(train_loss) or (prepared_dev and not math.isfinite(dev_loss)):
            raise NumericalError(f"non-finite epoch loss at epoch {epoch}")
        history.append((epoch, train_loss, dev_loss))

        reference = dev_loss if prepared_dev else train_loss
        if reference < best_dev:
            best_dev = reference
            best_params = _snapshot(params)
            bad = 0
        else:
            bad += 1
            if bad >= config.early_stop_patience_epochs:
                stopped = True
        if stopped:
            break

    final_epoch = history[-1][0] if history else start_epoch
    model = Model(
        table=TransitionTable(
            entries=best_params["table"],
            start=best_params.get("start") if config.use_start else None,
        ),
        lam=float(best_params["lambda"]),
        scorer=config.scorer,
        embed_config=embed_config,
        encoder=encoder,
        projection=best_params.get("projection"),
        use_dependency_transfer=config.use_dependency_transfer,
    )
    return TrainResult(
        model=model,
        history=history,
        best_dev_loss=best_dev,
        trainer_state=_state_to_json(params, adam, final_epoch, best_dev, bad, best_params, history),
        skipped_episodes=skipped_train + skipped_dev,
    )


def save_history(path: str, history: Iterable[tuple[int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("epoch,train_loss,dev_loss\n")
        for epoch, train_loss, dev_loss in history:
            handle.write(f"{epoch},{train_loss!r},{dev_loss!r}\n")
