"""Few-shot sequence labeling toolkit.

Combines similarity-based emission scoring over query/support pairs with
a label-set-independent transition table in a linear-chain CRF, plus the
episode sampling, training and evaluation machinery around it.
"""

from .core import (
    DataError,
    Episode,
    Label,
    LabelSet,
    LabeledSequence,
    SupportSet,
    Tag,
    episode_label_set,
    label_set_of,
    parse_conll,
    read_conll,
    validate_bio,
    write_conll,
)
from .crf import (
    TransitionMatrix,
    TransitionTable,
    expand,
    log_partition,
    marginals,
    nll_and_gradients,
    rule_decode,
    sequence_score,
    viterbi,
)
from .embedding import (
    AttentionParams,
    EmbeddingConfig,
    EmbeddingDump,
    EncoderParams,
    PairEmbedding,
    apply_projection,
    embed_episode,
    hash_vector,
    init_attention_params,
    toy_pair_encode,
)
from .emission import (
    NEG_INF_SCORE,
    matching_score,
    nearest_token_score,
    normalized_matching_score,
    prototypical_score,
    score_episode,
)
from .evaluation import (
    EvalReport,
    bigram_accuracy,
    episode_f1,
    episode_f1_pooled,
    evaluate,
    extract_spans,
)
from .model import Model, load_checkpoint, save_checkpoint
from .sampler import (
    FewShotDataset,
    SamplerConfig,
    build_dataset,
    read_episodes,
    sample_support_set,
    write_episodes,
)
from .trainer import AdamState, NumericalError, TrainConfig, TrainResult, adam_step, train

__version__ = "0.1.0"
