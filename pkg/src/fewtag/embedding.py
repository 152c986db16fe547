"""Per-token vector representations for query/support pairs.

Two axes are configurable:

* mode: ``pairwise`` contextualizes the query jointly with each support
  sentence (the query gets one representation per pairing, and support
  tokens are conditioned on the query); ``independent`` embeds every
  sentence alone.
* source: ``static_lookup`` (table rows, hash fallback), ``toy_attention``
  (static base vectors plus one self-attention layer), or ``external_dump``
  (vectors precomputed offline by the exporter).

The only trainable parameter downstream of the encoder is an optional
h-by-h linear projection; it is applied by callers via ``apply_projection``
so that raw vectors stay available for gradient computation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DataError, Episode


@dataclass(frozen=True)
class EmbeddingConfig:
    dim: int
    mode: str = "pairwise"  # "pairwise" | "independent"
    source: str = "toy_attention"  # "static_lookup" | "toy_attention" | "external_dump"
    projection: bool = False

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.mode not in ("pairwise", "independent"):
            raise ValueError(f"unknown mode: {self.mode}")
        if self.source not in ("static_lookup", "toy_attention", "external_dump"):
            raise ValueError(f"unknown source: {self.source}")


@dataclass(frozen=True)
class PairEmbedding:
    """Vectors for one episode.

    ``query_vectors`` has shape (N_S, n, h): one length-n vector sequence per
    support pairing. ``support_vectors`` holds one (len_s, h) array per
    support sentence. In independent mode all N_S query copies are equal.
    """

    query_vectors: np.ndarray
    support_vectors: tuple[np.ndarray, ...]

    @property
    def n_support(self) -> int:
        return self.query_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.query_vectors.shape[2]

    def query_mean(self) -> np.ndarray:
        """Per-token query vectors averaged over the N_S pairings, (n, h)."""
        return self.query_vectors.mean(axis=0)


@dataclass(frozen=True)
class AttentionParams:
    """Single-head scaled dot-product attention weights plus separator."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    separator: np.ndarray


@dataclass
class EncoderParams:
    """Everything embed_episode needs besides the config.

    ``lookup`` maps tokens to base vectors (hash fallback covers the rest);
    ``attention`` is required for the toy_attention source; ``dump`` is the
    opened external dump for the external_dump source.
    """

    lookup: dict[str, np.ndarray] | None = None
    attention: AttentionParams | None = None
    dump: "EmbeddingDump | None" = None


def hash_vector(token: str, dim: int) -> np.ndarray:
    """Deterministic unit vector derived from the lowercased token bytes."""
    digest = hashlib.sha256(token.lower().encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)


def base_vectors(tokens: Sequence[str], params: EncoderParams, dim: int) -> np.ndarray:
    rows = []
    lookup = params.lookup or {}
    for token in tokens:
        vec = lookup.get(token)
        rows.append(np.asarray(vec, dtype=float) if vec is not None else hash_vector(token, dim))
    return np.stack(rows)


def init_attention_params(
    dim: int,
    rng: np.random.Generator,
    scale: float = 1.0,
    value_scale: float | None = None,
) -> AttentionParams:
    std = scale / math.sqrt(dim)
    v_std = (value_scale if value_scale is not None else scale) / math.sqrt(dim)
    return AttentionParams(
        wq=rng.normal(0.0, std, size=(dim, dim)),
        wk=rng.normal(0.0, std, size=(dim, dim)),
        wv=rng.normal(0.0, v_std, size=(dim, dim)),
        separator=rng.normal(0.0, 1.0, size=dim),
    )


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def _attend(seq: np.ndarray, params: AttentionParams) -> np.ndarray:
    """seq + softmax(QK^T / sqrt(h)) V over one concatenated sequence."""
    q = seq @ params.wq.T
    k = seq @ params.wk.T
    v = seq @ params.wv.T
    weights = _softmax_rows(q @ k.T / math.sqrt(seq.shape[1]))
    return seq + weights @ v


def toy_pair_encode(
    query_tokens: Sequence[str],
    support_tokens: Sequence[str],
    base: tuple[np.ndarray, np.ndarray],
    attention_params: AttentionParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Jointly contextualize one query/support pair.

    Attention runs over ``[query ; separator ; support]`` and the result is
    split back; the residual keeps zero-valued attention a passthrough.
    """
    query_base, support_base = base
    if len(query_tokens) != query_base.shape[0] or len(support_tokens) != support_base.shape[0]:
        raise ValueError("base vectors must align with tokens")
    seq = np.concatenate([query_base, attention_params.separator[None, :], support_base])
    out = _attend(seq, attention_params)
    nq = query_base.shape[0]
    return out[:nq], out[nq + 1 :]


def toy_encode_single(base: np.ndarray, attention_params: AttentionParams) -> np.ndarray:
    """Contextualize one sentence alone (independent mode)."""
    return _attend(base, attention_params)


def embed_episode(
    episode: Episode,
    config: EmbeddingConfig,
    params: EncoderParams,
    query_id: int | None = None,
) -> PairEmbedding:
    """Embed one episode's query and support sentences.

    Raw encoder output only; any trainable projection is applied afterwards
    via ``apply_projection``.
    """
    if config.source == "external_dump":
        if params.dump is None:
            raise ValueError("external_dump source requires an opened dump")
        if query_id is None:
            raise KeyError("external_dump source requires the episode's query_id")
        return params.dump.load(query_id)

    n_support = len(episode.support.pairs)
    query_base = base_vectors(episode.query.tokens, params, config.dim)
    support_base = [base_vectors(p.tokens, params, config.dim) for p in episode.support.pairs]

    if config.source == "static_lookup":
        query_vectors = np.broadcast_to(
            query_base, (n_support,) + query_base.shape
        ).copy()
        return PairEmbedding(
            query_vectors=query_vectors, support_vectors=tuple(support_base)
        )

    if params.attention is None:
        raise ValueError("toy_attention source requires attention parameters")

    if config.mode == "independent":
        query_out = toy_encode_single(query_base, params.attention)
        supports = tuple(toy_encode_single(sb, params.attention) for sb in support_base)
        query_vectors = np.broadcast_to(query_out, (n_support,) + query_out.shape).copy()
        return PairEmbedding(query_vectors=query_vectors, support_vectors=supports)

    query_list = []
    support_list = []
    for pair, sb in zip(episode.support.pairs, support_base):
        q_out, s_out = toy_pair_encode(
            episode.query.tokens, pair.tokens, (query_base, sb), params.attention
        )
        query_list.append(q_out)
        support_list.append(s_out)
    return PairEmbedding(
        query_vectors=np.stack(query_list), support_vectors=tuple(support_list)
    )


def apply_projection(emb: PairEmbedding, w: np.ndarray | None) -> PairEmbedding:
    """Map every vector through the linear projection (rows -> rows @ w.T)."""
    if w is None:
        return emb
    return PairEmbedding(
        query_vectors=emb.query_vectors @ w.T,
        support_vectors=tuple(sv @ w.T for sv in emb.support_vectors),
    )


# ---------------------------------------------------------------------------
# External dump: manifest.json + index.jsonl + vectors.bin (little-endian
# float32, C order). Each index record stores the element offset of its
# episode's block and explicit shapes: the query block (N_S, n, h) followed by
# one (len_s, h) block per support sentence.


class EmbeddingDump:
    """Read-only view of an exported embedding dump directory."""

    def __init__(self, manifest: dict, index: dict[int, dict], vectors: np.ndarray):
        self.manifest = manifest
        self._index = index
        self._vectors = vectors

    @classmethod
    def open(cls, directory: str, verify_checksum: bool = True) -> "EmbeddingDump":
        import os

        manifest_path = os.path.join(directory, "manifest.json")
        with open(manifest_path, encoding="utf-8") as handle:
            manifest = json.load(handle)
        vectors_path = os.path.join(directory, manifest["vectors_file"])
        with open(vectors_path, "rb") as handle:
            blob = handle.read()
        if verify_checksum:
            digest = hashlib.sha256(blob).hexdigest()
            if digest != manifest["checksum_sha256"]:
                raise DataError(
                    f"{vectors_path}: checksum mismatch "
                    f"(manifest {manifest['checksum_sha256'][:12]}..., file {digest[:12]}...)"
                )
        vectors = np.frombuffer(blob, dtype="<f4").astype(np.float64)
        index: dict[int, dict] = {}
        with open(os.path.join(directory, manifest["index_file"]), encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    record = json.loads(line)
                    index[int(record["query_id"])] = record
        return cls(manifest, index, vectors)

    def __len__(self) -> int:
        return len(self._index)

    def load(self, query_id: int) -> PairEmbedding:
        record = self._index.get(query_id)
        if record is None:
            raise KeyError(f"episode query_id={query_id} not present in dump")
        offset = int(record["offset"])
        n_support, n, dim = record["query_shape"]
        if dim != self.manifest["dim"]:
            raise DataError(
                f"query_id={query_id}: record dim {dim} != manifest dim {self.manifest['dim']}"
            )
        count = n_support * n * dim
        query = self._vectors[offset : offset + count].reshape(n_support, n, dim)
        offset += count
        supports = []
        for length, sdim in record["support_shapes"]:
            if sdim != dim:
                raise DataError(f"query_id={query_id}: support dim {sdim} != {dim}")
            block = self._vectors[offset : offset + length * sdim].reshape(length, sdim)
            supports.append(block)
            offset += length * sdim
        emb = PairEmbedding(query_vectors=query, support_vectors=tuple(supports))
        if not np.isfinite(emb.query_vectors).all() or any(
            not np.isfinite(sv).all() for sv in emb.support_vectors
        ):
            raise DataError(f"query_id={query_id}: non-finite vectors in dump")
        return emb
