"""Synthetic multi-domain corpora for desk-scale experiments and tests.

Each generated domain gets its own label set (so transferring transition
structure across domains is a real test) but draws entity interiors from
one shared, deliberately ambiguous token pool: interior tokens reappear
under other labels and as plain O tokens, which is what gives transition
modeling, label-count normalization and pair-wise context something to
fix. Per-label head tokens anchor span starts; per-label preferences over
the interior pool correlate query spans with same-label support spans.

Token vectors come from the deterministic hash embedding, so experiments
are reproducible end to end from a single seed.
"""

from __future__ import annotations

import numpy as np

from .core import Episode, Label, LabelSet, LabeledSequence, SupportSet, Tag
from .embedding import AttentionParams, hash_vector

AMBIGUOUS_POOL = [f"amb{i}" for i in range(8)]
GENERIC_POOL = [f"filler{i}" for i in range(10)]


def uniform_mix_attention(dim: int, strength: float = 0.6) -> AttentionParams:
    """Fixed attention that adds a uniform mix of the paired sequence.

    Zero query/key maps make every position attend uniformly, so each token
    absorbs the pairing's mean vector scaled by ``strength``: a deterministic
    stand-in for topical context mixing.
    """
    return AttentionParams(
        wq=np.zeros((dim, dim)),
        wk=np.zeros((dim, dim)),
        wv=strength * np.eye(dim),
        separator=hash_vector("[sep]", dim),
    )


def sharp_identity_attention(dim: int, kappa: float = 4.0, gamma: float = 0.8) -> AttentionParams:
    """Fixed attention that concentrates on near-duplicate tokens.

    Scaled-identity query/key maps make softmax weights spike on tokens with
    matching identity, so a token mostly absorbs copies of itself from the
    sequence it is encoded with. In pairwise mode that includes the support
    tokens it will be scored against, which sharpens genuine matches in a
    way per-sentence encoding cannot.
    """
    return AttentionParams(
        wq=kappa * np.eye(dim),
        wk=kappa * np.eye(dim),
        wv=gamma * np.eye(dim),
        separator=hash_vector("[sep]", dim),
    )


def domain_label_names(domain_name: str, n_labels: int) -> list[str]:
    return [f"{domain_name}.L{j}" for j in range(n_labels)]


def synthetic_lookup(sentences, dim: int) -> dict[str, np.ndarray]:
    """Structured base vectors for tokens produced by ``make_domain``.

    Tokens of one role share a group component (any two heads of the same
    label are similar, all O-ish tokens lean on a common direction, interior
    tokens share one pool regardless of label), plus a per-token hash part
    heavy enough that exact string matches stand out from group matches.
    Group directions are orthonormalized so the only cross-role confusion
    is the one built in deliberately through the shared interior pool.
    """

    def token_group(token: str) -> str:
        if token.startswith("filler"):
            return "outside"
        if token.startswith("amb"):
            return "amb"
        if ".head" in token:
            return f"head:{token.rsplit('.head', 1)[0]}"
        return f"token:{token}"

    vocab: list[str] = []
    seen = set()
    for sent in sentences:
        for token in sent.tokens:
            if token not in seen:
                seen.add(token)
                vocab.append(token)
    groups = sorted({token_group(t) for t in vocab})
    raw = np.stack([hash_vector(f"[group:{g}]", dim) for g in groups])
    q, _ = np.linalg.qr(raw.T)  # orthonormal directions, one per group
    basis = {g: q[:, i] for i, g in enumerate(groups)}

    lookup: dict[str, np.ndarray] = {}
    for token in vocab:
        group = basis[token_group(token)]
        noise = hash_vector(token, dim)
        if token.startswith("filler"):
            lookup[token] = group + 0.45 * noise
        elif token.startswith("amb"):
            lookup[token] = 0.5 * group + 0.85 * noise
        elif ".head" in token:
            lookup[token] = 0.85 * group + 0.85 * noise
        else:
            lookup[token] = noise
    return lookup


def make_domain(
    domain_name: str,
    rng: np.random.Generator,
    n_labels: int = 3,
    n_sentences: int = 60,
    heads_per_label: int = 3,
    amb_concentration: float = 0.25,
) -> tuple[list[LabeledSequence], LabelSet]:
    """Generate one domain of BIO-valid sentences with 1-2 entities each.

    Span interiors draw from the shared ambiguous pool under a peaked
    per-label preference (so a query span tends to reuse the strings of
    same-label support spans), while interior tokens also show up uniformly
    in O positions; that overlap is what the transition model has to sort
    out.
    """
    labels = domain_label_names(domain_name, n_labels)
    heads = {l: [f"{l}.head{i}" for i in range(heads_per_label)] for l in labels}
    amb_pref = {l: rng.dirichlet(amb_concentration * np.ones(len(AMBIGUOUS_POOL))) for l in labels}

    def generic_block() -> tuple[list[str], list[Tag]]:
        toks = [GENERIC_POOL[rng.integers(len(GENERIC_POOL))]]
        if rng.random() < 0.45:  # ambiguous token in an O position
            toks.append(AMBIGUOUS_POOL[rng.integers(len(AMBIGUOUS_POOL))])
        return toks, [Tag.outside()] * len(toks)

    def entity_block(label: str) -> tuple[list[str], list[Tag]]:
        toks = [heads[label][rng.integers(heads_per_label)]]
        tags = [Tag.begin(label)]
        n_body = int(rng.choice([0, 1, 2], p=[0.4, 0.2, 0.4]))
        for _ in range(n_body):
            toks.append(AMBIGUOUS_POOL[rng.choice(len(AMBIGUOUS_POOL), p=amb_pref[label])])
            tags.append(Tag.inside(label))
        return toks, tags

    sentences: list[LabeledSequence] = []
    for i in range(n_sentences):
        # round-robin first entity so every label is well represented
        first = labels[i % n_labels]
        entity_labels = [first]
        if rng.random() < 0.45:
            others = [l for l in labels if l != first]
            entity_labels.append(others[rng.integers(len(others))])
        tokens: list[str] = []
        tags: list[Tag] = []
        for label in entity_labels:
            g_toks, g_tags = generic_block()
            tokens += g_toks
            tags += g_tags
            e_toks, e_tags = entity_block(label)
            tokens += e_toks
            tags += e_tags
        g_toks, g_tags = generic_block()
        tokens += g_toks
        tags += g_tags
        sentences.append(LabeledSequence(tokens=tuple(tokens), tags=tuple(tags)))
    return sentences, LabelSet(labels)


def make_corpus(
    seed: int,
    domain_names: list[str],
    n_labels: int = 3,
    n_sentences: int = 60,
) -> dict[str, tuple[list[LabeledSequence], LabelSet]]:
    """One synthetic domain per name, each seeded from (seed, position)."""
    corpus = {}
    for i, name in enumerate(domain_names):
        rng = np.random.default_rng([seed, i])
        corpus[name] = make_domain(name, rng, n_labels=n_labels, n_sentences=n_sentences)
    return corpus


def overfit_episode(scale: float = 2.5, dim: int = 16) -> tuple[Episode, dict[str, np.ndarray]]:
    """A single episode whose gold path dominates under matching emissions.

    Query tokens reappear verbatim in the support with the gold tags, and
    the returned lookup assigns each token an orthogonal basis vector scaled
    so dot-product margins are wide enough for a short optimization run to
    saturate the model.
    """
    query = LabeledSequence(
        tokens=("on", "alpha", "amb0", "amb1", "done", "beta"),
        tags=(
            Tag.outside(),
            Tag.begin("x"),
            Tag.inside("x"),
            Tag.inside("x"),
            Tag.outside(),
            Tag.begin("y"),
        ),
    )
    support = SupportSet(
        pairs=(
            LabeledSequence(
                tokens=("on", "alpha", "amb0", "amb1", "done"),
                tags=(
                    Tag.outside(),
                    Tag.begin("x"),
                    Tag.inside("x"),
                    Tag.inside("x"),
                    Tag.outside(),
                ),
            ),
            LabeledSequence(
                tokens=("beta", "done"),
                tags=(Tag.begin("y"), Tag.outside()),
            ),
        ),
        shot=1,
    )
    vocab = set(query.tokens)
    for pair in support.pairs:
        vocab.update(pair.tokens)
    if len(vocab) > dim:
        raise ValueError("dim must cover the vocabulary for orthogonal vectors")
    lookup = {}
    for i, token in enumerate(sorted(vocab)):
        vec = np.zeros(dim)
        vec[i] = scale
        lookup[token] = vec
    return Episode(query=query, support=support, domain_name="overfit"), lookup
