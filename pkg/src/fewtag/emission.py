"""Emission scoring: per-token, per-tag similarity against the support set.

Four scorers share one contract: given the pair embeddings of an episode
and the support tags, produce an (n, 2m+1) score matrix over the domain's
canonical tag list. Similarity is the dot product throughout. Tags with no
support evidence get the ``NEG_INF_SCORE`` sentinel instead of being
dropped, so matrix shapes stay uniform across episodes of one domain.

Scorers count support tokens, not spans: a three-token entity contributes
three support tokens to its tag's pool. In pairwise mode, the similarity
between query token j and support token k uses the embeddings from the
pairing with k's sentence (both sides); the prototypical scorer, which
needs a single query vector, uses the mean over the N_S pairings.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import LabelSet, Tag
from .embedding import PairEmbedding, apply_projection

NEG_INF_SCORE = -1e9

EmissionMatrix = np.ndarray  # (n, 2m+1), float

SupportTags = Sequence[Sequence[Tag]]


def _tag_counts(support_tags: SupportTags, label_set: LabelSet) -> np.ndarray:
    counts = np.zeros(label_set.num_tags, dtype=int)
    for tags in support_tags:
        for tag in tags:
            counts[label_set.tag_index(tag)] += 1
    return counts


def matching_score(
    pair_emb: PairEmbedding, support_tags: SupportTags, label_set: LabelSet
) -> EmissionMatrix:
    """Sum of dot products against all support tokens carrying each tag."""
    n = pair_emb.query_vectors.shape[1]
    scores = np.zeros((n, label_set.num_tags))
    counts = _tag_counts(support_tags, label_set)
    for s, tags in enumerate(support_tags):
        sims = pair_emb.query_vectors[s] @ pair_emb.support_vectors[s].T  # (n, len_s)
        idx = label_set.indices_of(tags)
        np.add.at(scores.T, idx, sims.T)
    scores[:, counts == 0] = NEG_INF_SCORE
    return scores


def normalized_matching_score(
    pair_emb: PairEmbedding, support_tags: SupportTags, label_set: LabelSet
) -> EmissionMatrix:
    """Matching score divided by each tag's support token count."""
    counts = _tag_counts(support_tags, label_set)
    scores = matching_score(pair_emb, support_tags, label_set)
    present = counts > 0
    scores[:, present] = scores[:, present] / counts[present]
    return scores


def prototypical_score(
    pair_emb: PairEmbedding, support_tags: SupportTags, label_set: LabelSet
) -> EmissionMatrix:
    """Dot product against the mean support vector (prototype) of each tag."""
    counts = _tag_counts(support_tags, label_set)
    dim = pair_emb.dim
    protos = np.zeros((label_set.num_tags, dim))
    for s, tags in enumerate(support_tags):
        idx = label_set.indices_of(tags)
        np.add.at(protos, idx, pair_emb.support_vectors[s])
    present = counts > 0
    protos[present] /= counts[present, None]
    scores = pair_emb.query_mean() @ protos.T
    scores[:, ~present] = NEG_INF_SCORE
    return scores


def nearest_token_score(
    pair_emb: PairEmbedding, support_tags: SupportTags, label_set: LabelSet
) -> EmissionMatrix:
    """Maximum dot product over each tag's support tokens."""
    n = pair_emb.query_vectors.shape[1]
    scores = np.full((n, label_set.num_tags), -np.inf)
    for s, tags in enumerate(support_tags):
        sims = pair_emb.query_vectors[s] @ pair_emb.support_vectors[s].T
        for k, tag in enumerate(tags):
            t = label_set.tag_index(tag)
            np.maximum(scores[:, t], sims[:, k], out=scores[:, t])
    scores[np.isneginf(scores)] = NEG_INF_SCORE
    return scores


SCORERS: dict[str, Callable[[PairEmbedding, SupportTags, LabelSet], EmissionMatrix]] = {
    "mn": matching_score,
    "nmn": normalized_matching_score,
    "proto": prototypical_score,
    "nearest": nearest_token_score,
}


def score_episode(
    scorer: str,
    raw_emb: PairEmbedding,
    support_tags: SupportTags,
    label_set: LabelSet,
    projection: np.ndarray | None = None,
) -> EmissionMatrix:
    """Apply the optional projection, then the named scorer."""
    try:
        fn = SCORERS[scorer]
    except KeyError:
        raise ValueError(f"unknown scorer {scorer!r}, expected one of {sorted(SCORERS)}")
    return fn(apply_projection(raw_emb, projection), support_tags, label_set)


def projection_gradient(
    scorer: str,
    raw_emb: PairEmbedding,
    support_tags: SupportTags,
    label_set: LabelSet,
    projection: np.ndarray,
    grad_scores: np.ndarray,
) -> np.ndarray:
    """Gradient of the loss w.r.t. the projection matrix W.

    Every scorer's entry is a sum of weighted bilinear forms (W a) . (W b)
    over raw vector pairs (a, b); d/dW of one such form is W (b a^T + a b^T),
    so the total gradient is W (P + P^T) with P the grad-weighted sum of
    b a^T over contributing pairs. The nearest-token scorer contributes only
    its argmax pair per entry (subgradient).
    """
    dim = raw_emb.dim
    counts = _tag_counts(support_tags, label_set)
    p = np.zeros((dim, dim))

    if scorer in ("mn", "nmn"):
        for s, tags in enumerate(support_tags):
            idx = label_set.indices_of(tags)
            g = grad_scores[:, idx]  # (n, len_s)
            if scorer == "nmn":
                g = g / counts[idx]
            # sum_j g[j, k] * a_{j,s} per support token k, then b_k outer rows
            weighted = g.T @ raw_emb.query_vectors[s]  # (len_s, h)
            p += raw_emb.support_vectors[s].T @ weighted
    elif scorer == "proto":
        protos = np.zeros((label_set.num_tags, dim))
        for s, tags in enumerate(support_tags):
            idx = label_set.indices_of(tags)
            np.add.at(protos, idx, raw_emb.support_vectors[s])
        present = counts > 0
        protos[present] /= counts[present, None]
        query_mean = raw_emb.query_mean()
        g = grad_scores.copy()
        g[:, ~present] = 0.0
        p += protos.T @ (g.T @ query_mean)
    elif scorer == "nearest":
        proj = apply_projection(raw_emb, projection)
        n = raw_emb.query_vectors.shape[1]
        best = np.full((n, label_set.num_tags), -np.inf)
        best_pair = np.full((n, label_set.num_tags, 2), -1, dtype=int)
        for s, tags in enumerate(support_tags):
            sims = proj.query_vectors[s] @ proj.support_vectors[s].T
            for k, tag in enumerate(tags):
                t = label_set.tag_index(tag)
                better = sims[:, k] > best[:, t]
                best[better, t] = sims[better, k]
                best_pair[better, t] = (s, k)
        for j in range(n):
            for t in np.flatnonzero(counts > 0):
                g = grad_scores[j, t]
                if g == 0.0:
                    continue
                s, k = best_pair[j, t]
                a = raw_emb.query_vectors[s][j]
                b = raw_emb.support_vectors[s][k]
                p += g * np.outer(b, a)
    else:
        raise ValueError(f"unknown scorer {scorer!r}")

    return projection @ (p + p.T)
