"""High-level option policy and low-level tagging policy.

Both policies share a recurrence over agent states: each new state is a
tanh-squashed affine map of the current token encoding, an embedding of
the latest choice context, and the previous state, which may come from
either level (the scan and its subtasks chain through one state stream).
``policy_backward`` differentiates the sampled-trajectory surrogate
``sum_t R_t * log p_t`` through the full computation graph: the heads,
the state recursions across both levels, the context projector, the
type/tag embeddings, and the sentence encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .encoder import encode_backward
from .model import HighPolicyParams, LowPolicyParams, Model

if TYPE_CHECKING:  # pragma: no cover
    from .environment import EpisodeTrace

__all__ = [
    "AgentState",
    "high_state",
    "option_distribution",
    "low_state",
    "subtask_context",
    "action_distribution",
    "policy_backward",
]

HIGH = "high"
LOW = "low"


@dataclass
class AgentState:
    """State vector with a level marker; the previous state fed into either
    level may carry either marker."""

    vector: np.ndarray
    level: str

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def log_prob_of(logits: np.ndarray, choice: int) -> float:
    shifted = logits - logits.max()
    return float(shifted[choice] - np.log(np.exp(shifted).sum()))


def high_state(
    h_t: np.ndarray,
    latest_type_embedding: np.ndarray,
    prev: AgentState,
    params: HighPolicyParams,
) -> AgentState:
    """tanh(W [h_t ; latest-type embedding ; previous state] + b)."""
    concat = np.concatenate([h_t, latest_type_embedding, prev.vector])
    vec = np.tanh(params.state_W @ concat + params.state_b)
    return AgentState(vec, HIGH)


def option_distribution(state: AgentState, params: HighPolicyParams) -> np.ndarray:
    """Softmax over all |R|+1 options; NR is never masked."""
    if state.level != HIGH:
        raise ValueError("option_distribution expects a high-level state")
    return softmax(params.option_W @ state.vector + params.option_b)


def subtask_context(option_state: AgentState, params: LowPolicyParams) -> np.ndarray:
    """Context vector projected from the state that launched the subtask;
    computed once per subtask and shared by all of its steps."""
    return np.tanh(params.ctx_W @ option_state.vector + params.ctx_b)


def low_state(
    h_t: np.ndarray,
    prev_tag_embedding: np.ndarray,
    prev: AgentState,
    option_state: AgentState,
    params: LowPolicyParams,
    context: Optional[np.ndarray] = None,
) -> AgentState:
    """tanh(W [h_t ; previous-tag embedding ; previous state ; context] + b).

    ``context`` short-circuits recomputation when the caller already holds
    the subtask's context vector; otherwise it is derived from
    ``option_state``.
    """
    if context is None:
        context = subtask_context(option_state, params)
    concat = np.concatenate([h_t, prev_tag_embedding, prev.vector, context])
    vec = np.tanh(params.state_W @ concat + params.state_b)
    return AgentState(vec, LOW)


def action_distribution(state: AgentState, relation: int, params: LowPolicyParams) -> np.ndarray:
    """Softmax over the 7 entity tags using the head of ``relation``."""
    if state.level != LOW:
        raise ValueError("action_distribution expects a low-level state")
    if not 0 <= relation < params.action_W.shape[0]:
        raise ValueError(f"relation id {relation} has no action head")
    return softmax(params.action_W[relation] @ state.vector + params.action_b[relation])


def policy_backward(
    trace: "EpisodeTrace", returns: np.ndarray, model: Model
) -> dict[str, np.ndarray]:
    """Gradient of ``sum_t returns[t] * log p(choice_t)`` for every tensor.

    Walks the interleaved step list in reverse, accumulating state
    gradients along the cross-level chain, routing subtask-context
    gradients back into the launching high state, and finally running the
    encoder's reverse pass on the pooled per-position gradients.
    """
    steps = trace.steps
    if len(returns) != len(steps):
        raise ValueError("returns must align with the trace steps")
    grads = model.zero_grads()
    d_h = model.config.hidden_dim
    d_r = model.config.type_dim
    d_e = model.config.tag_dim
    d_s = model.config.state_dim

    d_state = np.zeros((len(steps), d_s))
    d_ctx = np.zeros((len(trace.subtasks), d_s))
    d_hidden = np.zeros((len(trace.sentence), d_h))

    high, low = model.high, model.low
    for k in range(len(steps) - 1, -1, -1):
        step = steps[k]
        probs = step.probs
        d_logits = -returns[k] * probs
        d_logits[step.choice] += returns[k]

        ds = d_state[k]
        state = step.state
        if step.level == HIGH:
            grads["high.option_W"] += np.outer(d_logits, state)
            grads["high.option_b"] += d_logits
            ds = ds + high.option_W.T @ d_logits
            if step.subtask is not None:
                ctx = trace.subtasks[step.subtask].context
                dzc = d_ctx[step.subtask] * (1.0 - ctx * ctx)
                grads["low.ctx_W"] += np.outer(dzc, state)
                grads["low.ctx_b"] += dzc
                ds = ds + low.ctx_W.T @ dzc
            dz = ds * (1.0 - state * state)
            grads["high.state_W"] += np.outer(dz, step.concat)
            grads["high.state_b"] += dz
            dcat = high.state_W.T @ dz
            d_hidden[step.position] += dcat[:d_h]
            grads["high.type_emb"][step.embedding_row] += dcat[d_h : d_h + d_r]
            if k > 0:
                d_state[k - 1] += dcat[d_h + d_r :]
        else:
            relation = trace.subtasks[step.subtask].option
            grads["low.action_W"][relation] += np.outer(d_logits, state)
            grads["low.action_b"][relation] += d_logits
            ds = ds + low.action_W[relation].T @ d_logits
            dz = ds * (1.0 - state * state)
            grads["low.state_W"] += np.outer(dz, step.concat)
            grads["low.state_b"] += dz
            dcat = low.state_W.T @ dz
            d_hidden[step.position] += dcat[:d_h]
            grads["low.tag_emb"][step.embedding_row] += dcat[d_h : d_h + d_e]
            if k > 0:
                d_state[k - 1] += dcat[d_h + d_e : d_h + d_e + d_s]
            d_ctx[step.subtask] += dcat[d_h + d_e + d_s :]

    enc_grads = encode_backward(d_hidden, trace.encoder_cache, model.encoder, trace.token_ids)
    for name, grad in enc_grads.items():
        grads[f"encoder.{name}"] = grad
    return grads
