"""Episode runner for the two-level extraction process, plus all rewards.

An episode scans the sentence once.  At every position the high-level
policy picks an option: NR advances the scan, any relation type launches
a full-sentence tagging subtask before the scan resumes.  Every step is
recorded with its state, distribution, choice, log-probability, and
reward, which is what training consumes.  The total step count is always
``L * (1 + number of non-NR options)``.

Reward shape: option steps earn +1 for a relation type that still has an
unmatched gold triple (one gold instance is consumed per +1), 0 for NR,
and -1 otherwise.  Tag steps earn +/-1 against the subtask's gold tag,
scaled down to +/-alpha on non-entity positions; subtasks launched on a
wrong option carry zero tag rewards throughout.  A +/-1 bonus for the
complete tag sequence folds into a subtask's last step, and a sentence
F_beta score over the detected relations folds into the last option step.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import Sentence, Triple
from .encoder import EncoderCache, embed, encode
from .model import Model
from .policy import (
    HIGH,
    LOW,
    AgentState,
    log_prob_of,
    softmax,
    subtask_context,
)
from .tagging import EntityTag, assemble_triple, decode_spans, gold_tags

__all__ = [
    "HighStep",
    "LowStep",
    "SubtaskRecord",
    "EpisodeTrace",
    "OracleScript",
    "high_reward",
    "low_reward",
    "subtask_final_reward",
    "episode_final_reward",
    "run_episode",
    "extract",
    "format_trace",
]


@dataclass
class HighStep:
    position: int
    time: int
    state: np.ndarray
    concat: np.ndarray
    embedding_row: int  # type-embedding row fed into the state
    probs: np.ndarray
    choice: int  # sampled option id
    log_prob: float
    reward: float
    subtask: Optional[int]  # index of the launched subtask, if any
    level: str = HIGH

    @property
    def option(self) -> int:
        return self.choice


@dataclass
class LowStep:
    position: int
    time: int
    state: np.ndarray
    concat: np.ndarray
    embedding_row: int  # tag-embedding row fed into the state
    probs: np.ndarray
    choice: int  # sampled entity tag id
    log_prob: float
    reward: float
    subtask: int  # owning subtask index
    level: str = LOW

    @property
    def action(self) -> int:
        return self.choice


@dataclass
class SubtaskRecord:
    launch_position: int
    launch_step: int  # index into the trace step list
    option: int  # relation id
    context: np.ndarray
    gold: Optional[list[EntityTag]]
    matched: Optional[int]  # gold triple index claimed by this subtask
    valid: bool
    predicted: list[EntityTag] = field(default_factory=list)
    final_reward: float = 0.0
    triple: Optional[Triple] = None


@dataclass
class EpisodeTrace:
    sentence: Sentence
    steps: list  # interleaved HighStep/LowStep, time order
    subtasks: list[SubtaskRecord]
    final_reward: float  # sentence-level F_beta, already folded in
    predicted: list[Triple]  # one entry per subtask that assembled a triple
    token_ids: np.ndarray
    hidden: np.ndarray
    encoder_cache: EncoderCache
    gold_available: bool

    @property
    def total_steps(self) -> int:
        return len(self.steps)

    def high_steps(self) -> list[HighStep]:
        return [s for s in self.steps if s.level == HIGH]

    def options(self) -> list[int]:
        return [s.choice for s in self.steps if s.level == HIGH]


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------


def high_reward(option: int, gold_remaining: Counter, nr_id: int) -> float:
    """0 for NR; +1 when the option still has an unconsumed gold instance
    (which this call consumes); -1 otherwise."""
    if option == nr_id:
        return 0.0
    if gold_remaining[option] > 0:
        gold_remaining[option] -= 1
        return 1.0
    return -1.0


def low_reward(
    action: EntityTag, gold: EntityTag, alpha: float, subtask_valid: bool
) -> float:
    """Signed match reward against the gold tag, down-weighted to alpha on
    non-entity gold positions; zero throughout an invalid subtask."""
    if not subtask_valid:
        return 0.0
    weight = alpha if gold is EntityTag.N else 1.0
    return weight if action == gold else -weight


def subtask_final_reward(
    predicted: Sequence[EntityTag], gold: Sequence[EntityTag], subtask_valid: bool
) -> float:
    """+1 for a perfectly tagged subtask, -1 otherwise, 0 when invalid."""
    if len(predicted) != len(gold):
        raise ValueError(
            f"tag sequence lengths differ: {len(predicted)} vs {len(gold)}"
        )
    if not subtask_valid:
        return 0.0
    return 1.0 if all(p == g for p, g in zip(predicted, gold)) else -1.0


def _fbeta(pred: Counter, gold: Counter, beta: float) -> float:
    n_pred = sum(pred.values())
    n_gold = sum(gold.values())
    if n_pred == 0 or n_gold == 0:
        return 0.0
    tp = sum((pred & gold).values())
    prec = tp / n_pred
    rec = tp / n_gold
    if prec + rec == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * prec * rec / (b2 * prec + rec)


def episode_final_reward(predicted_types: Counter, gold_types: Counter, beta: float) -> float:
    """Weighted harmonic mean of per-sentence precision and recall over the
    detected relation multiset; 0 when nothing was predicted or matched."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return _fbeta(Counter(predicted_types), Counter(gold_types), beta)


# ---------------------------------------------------------------------------
# Scripted oracle choices
# ---------------------------------------------------------------------------


@dataclass
class OracleScript:
    """Choice schedule that reproduces the gold annotation.

    Each gold triple's relation type fires at (or right after) the last
    token of its later entity mention, and subtasks emit their gold tag
    sequences verbatim.
    """

    option_at: dict[int, int]  # position -> relation id
    use_gold_tags: bool = True

    @classmethod
    def for_sentence(cls, sentence: Sentence) -> "OracleScript":
        length = len(sentence)
        taken: set[int] = set()
        schedule: dict[int, int] = {}
        order = sorted(
            range(len(sentence.gold)),
            key=lambda i: max(sentence.gold[i].source.end, sentence.gold[i].target.end),
        )
        for idx in order:
            triple = sentence.gold[idx]
            desired = max(triple.source.end, triple.target.end) - 1
            position = next((p for p in range(desired, length) if p not in taken), None)
            if position is None:
                raise ValueError(
                    "cannot schedule oracle options: no free position at or after "
                    f"token {desired} in a {length}-token sentence"
                )
            taken.add(position)
            schedule[position] = triple.relation
        return cls(option_at=schedule)


# ---------------------------------------------------------------------------
# Episode runner
# ---------------------------------------------------------------------------


def _pick(probs: np.ndarray, mode: str, rng: Optional[np.random.Generator]) -> int:
    if mode == "greedy":
        return int(np.argmax(probs))
    if rng is None:
        raise ValueError("sampling mode requires an rng")
    cumulative = np.cumsum(probs.astype(np.float64))
    idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(idx, len(probs) - 1)


def run_episode(
    sentence: Sentence,
    model: Model,
    mode: str = "sample",
    gold_available: bool = True,
    rng: Optional[np.random.Generator] = None,
    alpha: float = 0.1,
    beta: float = 0.9,
    final_reward_mode: str = "types",
    script: Optional[OracleScript] = None,
) -> EpisodeTrace:
    """Run one full scan of the sentence and record every decision.

    ``mode`` picks between sampling and argmax; a ``script`` overrides the
    choices entirely.  With ``gold_available`` the per-step and final
    rewards are attached (and folded into the last step of their scope);
    otherwise all rewards stay zero.
    """
    if mode not in ("sample", "greedy"):
        raise ValueError(f"mode must be 'sample' or 'greedy', got {mode!r}")
    if final_reward_mode not in ("types", "triples"):
        raise ValueError(f"unknown final_reward_mode {final_reward_mode!r}")
    if len(sentence) == 0:
        raise ValueError("cannot run an episode on an empty sentence")

    schema = model.schema
    nr_id = schema.nr_id
    token_ids = model.vocab.ids_of(sentence.texts)
    emb = model.vocab.vectors[token_ids]
    hidden, cache = encode(emb, model.encoder)

    d_s = model.config.state_dim
    dtype = hidden.dtype
    state = AgentState(np.zeros(d_s, dtype=dtype), HIGH)
    latest_type_row = model.initial_type_row

    steps: list = []
    subtasks: list[SubtaskRecord] = []
    consumed: set[int] = set()
    need_gold = gold_available or (script is not None and script.use_gold_tags)

    time = 0
    for i in range(len(sentence)):
        time += 1
        concat = np.concatenate(
            [hidden[i], model.high.type_emb[latest_type_row], state.vector]
        )
        vec = np.tanh(model.high.state_W @ concat + model.high.state_b)
        state = AgentState(vec, HIGH)
        logits = model.high.option_W @ vec + model.high.option_b
        probs = softmax(logits)
        if script is not None:
            option = script.option_at.get(i, nr_id)
        else:
            option = _pick(probs, mode, rng)

        step = HighStep(
            position=i,
            time=time,
            state=vec,
            concat=concat,
            embedding_row=latest_type_row,
            probs=probs,
            choice=option,
            log_prob=log_prob_of(logits, option),
            reward=0.0,
            subtask=None,
        )
        steps.append(step)

        if option == nr_id:
            continue

        # Launch the tagging subtask for this relation.
        gold_seq = None
        matched = None
        if need_gold:
            gold_seq, matched = gold_tags(sentence, option, consumed)
            if matched is not None:
                consumed.add(matched)
        valid = matched is not None
        if gold_available:
            step.reward = 1.0 if valid else -1.0

        launch_state = state
        context = subtask_context(launch_state, model.low)
        sub = SubtaskRecord(
            launch_position=i,
            launch_step=len(steps) - 1,
            option=option,
            context=context,
            gold=gold_seq,
            matched=matched,
            valid=valid,
        )
        step.subtask = len(subtasks)
        subtasks.append(sub)
        latest_type_row = option

        prev_tag_row = model.initial_tag_row
        for j in range(len(sentence)):
            time += 1
            concat = np.concatenate(
                [hidden[j], model.low.tag_emb[prev_tag_row], state.vector, context]
            )
            vec = np.tanh(model.low.state_W @ concat + model.low.state_b)
            state = AgentState(vec, LOW)
            logits = model.low.action_W[option] @ vec + model.low.action_b[option]
            probs = softmax(logits)
            if script is not None and script.use_gold_tags and gold_seq is not None:
                action = int(gold_seq[j])
            else:
                action = _pick(probs, mode, rng)
            tag = EntityTag(action)
            sub.predicted.append(tag)

            reward = 0.0
            if gold_available:
                reward = low_reward(tag, gold_seq[j], alpha, valid)
            steps.append(
                LowStep(
                    position=j,
                    time=time,
                    state=vec,
                    concat=concat,
                    embedding_row=prev_tag_row,
                    probs=probs,
                    choice=action,
                    log_prob=log_prob_of(logits, action),
                    reward=reward,
                    subtask=step.subtask,
                )
            )
            prev_tag_row = action

        if gold_available:
            sub.final_reward = subtask_final_reward(sub.predicted, gold_seq, valid)
            steps[-1].reward += sub.final_reward

        sources, targets = decode_spans(sub.predicted, strict=False)
        sub.triple = assemble_triple(option, sources, targets)

    predicted = [sub.triple for sub in subtasks if sub.triple is not None]
    final = 0.0
    if gold_available:
        if final_reward_mode == "types":
            pred_counter = Counter(sub.option for sub in subtasks)
            gold_counter = Counter(t.relation for t in sentence.gold)
        else:
            pred_counter = Counter(predicted)
            gold_counter = Counter(sentence.gold)
        final = episode_final_reward(pred_counter, gold_counter, beta)
        last_high = next(s for s in reversed(steps) if s.level == HIGH)
        last_high.reward += final

    return EpisodeTrace(
        sentence=sentence,
        steps=steps,
        subtasks=subtasks,
        final_reward=final,
        predicted=predicted,
        token_ids=token_ids,
        hidden=hidden,
        encoder_cache=cache,
        gold_available=gold_available,
    )


def extract(
    sentence: Sentence, model: Model, script: Optional[OracleScript] = None
) -> list[Triple]:
    """Greedy inference: deduplicated triples from one episode."""
    trace = run_episode(
        sentence, model, mode="greedy", gold_available=False, script=script
    )
    seen: set[Triple] = set()
    out: list[Triple] = []
    for triple in trace.predicted:
        if triple not in seen:
            seen.add(triple)
            out.append(triple)
    return out


def format_trace(trace: EpisodeTrace, model: Model) -> str:
    """One line per step: time, level, position, choice, log-prob, reward."""
    lines = []
    for step in trace.steps:
        if step.level == HIGH:
            choice = model.schema.name_of(step.choice)
        else:
            choice = EntityTag(step.choice).label
        lines.append(
            f"t={step.time} level={step.level} pos={step.position} "
            f"choice={choice} logp={step.log_prob:.6f} reward={step.reward:+.4f}"
        )
    return "\n".join(lines)
