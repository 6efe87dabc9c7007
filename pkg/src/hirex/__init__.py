"""Hierarchical reinforcement learning for joint entity and relation
extraction: a scanning relation-detection policy launches a per-relation
entity-tagging policy, trained end to end from sampled episodes."""

from .corpus import (
    OverlapClass,
    RelationSchema,
    Sentence,
    Span,
    SynthConfig,
    Token,
    Triple,
    classify_overlap,
    filter_corpus,
    generate_synthetic,
    load_corpus,
    load_schema,
    save_corpus,
    save_schema,
)
from .encoder import Vocabulary, embed, encode, encode_backward
from .environment import (
    EpisodeTrace,
    OracleScript,
    episode_final_reward,
    extract,
    format_trace,
    high_reward,
    low_reward,
    run_episode,
    subtask_final_reward,
)
from .evaluation import (
    EvalReport,
    evaluate_model,
    evaluate_predictions,
    score_overlap_subsets,
    score_relation_detection,
    score_triples,
)
from .model import Model, ModelConfig, init_model
from .policy import (
    AgentState,
    action_distribution,
    high_state,
    low_state,
    option_distribution,
    policy_backward,
    subtask_context,
)
from .tagging import EntityTag, assemble_triple, decode_spans, gold_tags
from .training import (
    Checkpoint,
    TrainConfig,
    compute_returns,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)

__version__ = "0.1.0"
