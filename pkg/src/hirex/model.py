"""Parameter container tying together encoder and both policy heads."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .corpus import RelationSchema
from .encoder import EncoderParams, Vocabulary, build_vocabulary, init_encoder_params
from .tagging import TAG_COUNT

__all__ = ["ModelConfig", "HighPolicyParams", "LowPolicyParams", "Model", "init_model"]

INIT_SCALE = 0.08


@dataclass(frozen=True)
class ModelConfig:
    """Vector dimensions; every default is 300."""

    word_dim: int = 300
    hidden_dim: int = 300
    state_dim: int = 300
    type_dim: int = 300
    tag_dim: int = 300

    def __post_init__(self):
        if self.hidden_dim % 2:
            raise ValueError("hidden_dim must be even (two concatenated directions)")
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"{f.name} must be positive")

    @classmethod
    def uniform(cls, dim: int) -> "ModelConfig":
        return cls(word_dim=dim, hidden_dim=dim, state_dim=dim, type_dim=dim, tag_dim=dim)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


@dataclass
class HighPolicyParams:
    """Relation-detection policy: state MLP, option head, type embeddings.

    ``type_emb`` has one row per relation type plus a trailing reserved row
    used before any relation has been detected.
    """

    state_W: np.ndarray
    state_b: np.ndarray
    option_W: np.ndarray
    option_b: np.ndarray
    type_emb: np.ndarray


@dataclass
class LowPolicyParams:
    """Entity-tagging policy: state MLP, context projector, per-relation
    action heads, tag embeddings (7 tags plus a reserved initial row)."""

    state_W: np.ndarray
    state_b: np.ndarray
    ctx_W: np.ndarray
    ctx_b: np.ndarray
    action_W: np.ndarray  # (|R|, TAG_COUNT, state_dim)
    action_b: np.ndarray  # (|R|, TAG_COUNT)
    tag_emb: np.ndarray


@dataclass
class Model:
    config: ModelConfig
    schema: RelationSchema
    vocab: Vocabulary
    encoder: EncoderParams
    high: HighPolicyParams
    low: LowPolicyParams

    #: reserved type-embedding row used before the first detected relation
    @property
    def initial_type_row(self) -> int:
        return len(self.schema)

    #: reserved tag-embedding row used at the first step of a subtask
    @property
    def initial_tag_row(self) -> int:
        return TAG_COUNT

    def tensors(self) -> dict[str, np.ndarray]:
        """All learnable tensors in a fixed, checkpoint-stable order."""
        out: dict[str, np.ndarray] = {}
        for f in fields(self.encoder):
            out[f"encoder.{f.name}"] = getattr(self.encoder, f.name)
        for f in fields(self.high):
            out[f"high.{f.name}"] = getattr(self.high, f.name)
        for f in fields(self.low):
            out[f"low.{f.name}"] = getattr(self.low, f.name)
        return out

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros(v.shape, dtype=np.float64) for k, v in self.tensors().items()}

    def set_tensors(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameters in place, preserving array identity."""
        for name, arr in self.tensors().items():
            arr[...] = values[name]

    def astype(self, dtype) -> "Model":
        """Detached copy with all tensors cast to ``dtype`` (the vocabulary
        shares the copied embedding table)."""
        enc = replace(
            self.encoder,
            **{f.name: getattr(self.encoder, f.name).astype(dtype) for f in fields(self.encoder)},
        )
        high = replace(
            self.high,
            **{f.name: getattr(self.high, f.name).astype(dtype) for f in fields(self.high)},
        )
        low = replace(
            self.low,
            **{f.name: getattr(self.low, f.name).astype(dtype) for f in fields(self.low)},
        )
        vocab = Vocabulary(self.vocab.tokens, self.vocab.token_to_id, enc.embedding)
        return Model(self.config, self.schema, vocab, enc, high, low)


def init_model(
    config: ModelConfig,
    schema: RelationSchema,
    token_iter,
    seed: int,
    pretrained: Optional[dict[str, np.ndarray]] = None,
    dtype=np.float32,
) -> Model:
    """Initialize all parameters uniformly in [-0.08, 0.08] (forget-gate
    biases at 1.0), building the vocabulary from ``token_iter``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    vocab = build_vocabulary(
        token_iter, config.word_dim, rng, pretrained=pretrained, init_scale=INIT_SCALE, dtype=dtype
    )
    encoder = init_encoder_params(
        vocab, config.hidden_dim, rng, init_scale=INIT_SCALE, dtype=dtype
    )

    def weights(*shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape).astype(dtype)

    n_rel = len(schema)
    d_s, d_h = config.state_dim, config.hidden_dim
    high = HighPolicyParams(
        state_W=weights(d_s, d_h + config.type_dim + d_s),
        state_b=weights(d_s),
        option_W=weights(n_rel + 1, d_s),
        option_b=weights(n_rel + 1),
        type_emb=weights(n_rel + 1, config.type_dim),
    )
    low = LowPolicyParams(
        state_W=weights(d_s, d_h + config.tag_dim + d_s + d_s),
        state_b=weights(d_s),
        ctx_W=weights(d_s, d_s),
        ctx_b=weights(d_s),
        action_W=weights(n_rel, TAG_COUNT, d_s),
        action_b=weights(n_rel, TAG_COUNT),
        tag_emb=weights(TAG_COUNT + 1, config.tag_dim),
    )
    return Model(config, schema, vocab, encoder, high, low)
