"""Model bundle: transition table, lambda, projection, scorer and encoder.

This is what training produces and evaluation consumes. The checkpoint
format is versioned JSON holding the 13(+3) table entries, lambda, the
projection matrix when present, the in-process encoder parameters, and an
echo of the run configuration. Writes are atomic (write-temp, rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .core import Episode, LabelSet, Tag, episode_label_set
from .crf import TransitionTable, expand, rule_decode, viterbi
from .embedding import (
    AttentionParams,
    EmbeddingConfig,
    EncoderParams,
    embed_episode,
)
from .emission import score_episode

CHECKPOINT_VERSION = 1

DECODERS = ("viterbi", "rule", "argmax")


@dataclass
class Model:
    table: TransitionTable
    lam: float
    scorer: str
    embed_config: EmbeddingConfig
    encoder: EncoderParams
    projection: np.ndarray | None = None
    use_dependency_transfer: bool = True

    def emissions_for(
        self, episode: Episode, query_id: int | None = None
    ) -> tuple[np.ndarray, LabelSet]:
        label_set = episode_label_set(episode)
        raw = embed_episode(episode, self.embed_config, self.encoder, query_id=query_id)
        support_tags = [p.tags for p in episode.support.pairs]
        emissions = score_episode(
            self.scorer, raw, support_tags, label_set, self.projection
        )
        return emissions, label_set

    def decode(
        self, episode: Episode, decoder: str = "viterbi", query_id: int | None = None
    ) -> list[Tag]:
        emissions, label_set = self.emissions_for(episode, query_id=query_id)
        if decoder == "viterbi":
            matrix = expand(self.table, label_set)
            path = viterbi(emissions, matrix, self.lam)
        elif decoder == "rule":
            path = rule_decode(emissions, label_set)
        elif decoder == "argmax":
            path = [int(t) for t in np.argmax(emissions, axis=1)]
        else:
            raise ValueError(f"unknown decoder {decoder!r}, expected one of {DECODERS}")
        return [label_set.tag_at(t) for t in path]

    @property
    def default_decoder(self) -> str:
        return "viterbi" if self.use_dependency_transfer else "argmax"


def _array_or_none(value) -> np.ndarray | None:
    return None if value is None else np.asarray(value, dtype=float)


def _encoder_to_json(encoder: EncoderParams) -> dict:
    att = None
    if encoder.attention is not None:
        att = {
            "wq": encoder.attention.wq.tolist(),
            "wk": encoder.attention.wk.tolist(),
            "wv": encoder.attention.wv.tolist(),
            "separator": encoder.attention.separator.tolist(),
        }
    lookup = None
    if encoder.lookup is not None:
        lookup = {token: np.asarray(vec).tolist() for token, vec in encoder.lookup.items()}
    return {"attention": att, "lookup": lookup}


def _encoder_from_json(obj: dict | None) -> EncoderParams:
    if obj is None:
        return EncoderParams()
    att = None
    if obj.get("attention") is not None:
        raw = obj["attention"]
        att = AttentionParams(
            wq=np.asarray(raw["wq"], dtype=float),
            wk=np.asarray(raw["wk"], dtype=float),
            wv=np.asarray(raw["wv"], dtype=float),
            separator=np.asarray(raw["separator"], dtype=float),
        )
    lookup = None
    if obj.get("lookup") is not None:
        lookup = {t: np.asarray(v, dtype=float) for t, v in obj["lookup"].items()}
    return EncoderParams(lookup=lookup, attention=att)


def save_checkpoint(
    path: str,
    model: Model,
    trainer_state: dict | None = None,
    config_echo: dict | None = None,
) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "model": {
            "scorer": model.scorer,
            "lambda": float(model.lam),
            "table": model.table.entries.tolist(),
            "start": None if model.table.start is None else model.table.start.tolist(),
            "projection": None if model.projection is None else model.projection.tolist(),
            "use_dependency_transfer": model.use_dependency_transfer,
            "embedding": {
                "dim": model.embed_config.dim,
                "mode": model.embed_config.mode,
                "source": model.embed_config.source,
                "projection": model.embed_config.projection,
            },
            "encoder": _encoder_to_json(model.encoder),
        },
        "trainer_state": trainer_state,
        "config": config_echo,
    }
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".checkpoint-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(payload, handle)
            handle.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str) -> tuple[Model, dict | None, dict | None]:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {payload.get('version')!r}")
    spec = payload["model"]
    emb = spec["embedding"]
    model = Model(
        table=TransitionTable(
            entries=np.asarray(spec["table"], dtype=float),
            start=_array_or_none(spec["start"]),
        ),
        lam=float(spec["lambda"]),
        scorer=spec["scorer"],
        embed_config=EmbeddingConfig(
            dim=int(emb["dim"]),
            mode=emb["mode"],
            source=emb["source"],
            projection=bool(emb["projection"]),
        ),
        encoder=_encoder_from_json(spec.get("encoder")),
        projection=_array_or_none(spec["projection"]),
        use_dependency_transfer=bool(spec.get("use_dependency_transfer", True)),
    )
    return model, payload.get("trainer_state"), payload.get("config")
