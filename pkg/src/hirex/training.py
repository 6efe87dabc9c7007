"""Discounted returns, REINFORCE training loop, checkpoints, grad checks.

Returns decompose hierarchically: option-step returns discount straight
to the next option step (one step after NR, a whole subtask's length
after a launched relation), while tag-step returns discount only inside
their own subtask.  Training accumulates the gradient of
``sum_t R_t * log p_t`` over a sampled minibatch, clips its global norm,
and takes a plain ascent step; an adaptive-moment optimizer and a
moving-average return baseline are available behind the config.
"""

from __future__ import annotations

import io
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import RelationSchema, Sentence
from .encoder import Vocabulary
from .environment import EpisodeTrace, run_episode
from .model import Model, ModelConfig, init_model
from .policy import HIGH, policy_backward
from .tagging import TAG_COUNT

__all__ = [
    "TrainConfig",
    "ReturnsAnnotatedTrace",
    "Checkpoint",
    "TrainingError",
    "CheckpointError",
    "CorruptCheckpointError",
    "VersionMismatchError",
    "ShapeMismatchError",
    "compute_returns",
    "train_step",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "grad_check",
    "analytic_gradients",
    "numeric_gradients",
    "compare_gradients",
    "replay_surrogate",
]

CHECKPOINT_MAGIC = b"HRLX"
CHECKPOINT_VERSION = 1
VALIDATION_FRACTION = 0.005


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 4e-5
    batch_size: int = 16
    alpha: float = 0.1
    beta: float = 0.9
    gamma: float = 0.95
    epochs: int = 10
    seed: int = 0
    clip_norm: float = 5.0
    final_reward_mode: str = "types"
    optimizer: str = "sgd"  # "sgd" or "adam"
    use_baseline: bool = False
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.final_reward_mode not in ("types", "triples"):
            raise ValueError("final_reward_mode must be 'types' or 'triples'")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "epochs": self.epochs,
            "seed": self.seed,
            "clip_norm": self.clip_norm,
            "final_reward_mode": self.final_reward_mode,
            "optimizer": self.optimizer,
            "use_baseline": self.use_baseline,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class ReturnsAnnotatedTrace:
    trace: EpisodeTrace
    returns: np.ndarray  # one return per trace step, in step order


def compute_returns(trace: EpisodeTrace, gamma: float) -> ReturnsAnnotatedTrace:
    """Per-step discounted returns along the two-level decomposition.

    Option steps chain to the next option step with exponent equal to the
    elapsed time (1 after NR, subtask length + 1 otherwise); no option
    reward accrues inside a subtask.  Tag steps chain stepwise within
    their subtask only.
    """
    steps = trace.steps
    if not steps:
        raise ValueError("cannot compute returns for an empty trace")
    returns = np.zeros(len(steps), dtype=np.float64)

    next_return = 0.0
    next_time = None
    for idx in range(len(steps) - 1, -1, -1):
        step = steps[idx]
        if step.level != HIGH:
            continue
        if next_time is None:
            returns[idx] = step.reward
        else:
            returns[idx] = step.reward + gamma ** (next_time - step.time) * next_return
        next_return = returns[idx]
        next_time = step.time

    by_subtask: dict[int, list[int]] = {}
    for idx, step in enumerate(steps):
        if step.level != HIGH:
            by_subtask.setdefault(step.subtask, []).append(idx)
    for indices in by_subtask.values():
        acc = 0.0
        for idx in reversed(indices):
            acc = steps[idx].reward + gamma * acc
            returns[idx] = acc
    return ReturnsAnnotatedTrace(trace=trace, returns=returns)


# ---------------------------------------------------------------------------
# Gradient plumbing
# ---------------------------------------------------------------------------


def _global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients in place so the global norm is at most
    ``clip_norm``; returns the pre-clip norm."""
    norm = _global_norm(grads)
    if clip_norm > 0 and norm > clip_norm:
        scale = clip_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators plus the moving-average return baselines.

    High- and low-level returns live on different scales, so each level
    keeps its own baseline.
    """

    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)

    def update_baseline(self, level: str, value: float, momentum: float = 0.9) -> float:
        if level not in self.baselines:
            self.baselines[level] = value
        else:
            self.baselines[level] = momentum * self.baselines[level] + (1.0 - momentum) * value
        return self.baselines[level]


def _apply_update(
    model: Model, grads: dict[str, np.ndarray], config: TrainConfig, opt: OptimizerState
) -> None:
    """Gradient-ascent step on the surrogate; Adam when configured."""
    tensors = model.tensors()
    if config.optimizer == "adam":
        opt.step += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        for name, p in tensors.items():
            g = grads[name]
            if name not in opt.m:
                opt.m[name] = np.zeros(p.shape, dtype=np.float64)
                opt.v[name] = np.zeros(p.shape, dtype=np.float64)
            opt.m[name] = b1 * opt.m[name] + (1 - b1) * g
            opt.v[name] = b2 * opt.v[name] + (1 - b2) * g * g
            m_hat = opt.m[name] / (1 - b1 ** opt.step)
            v_hat = opt.v[name] / (1 - b2 ** opt.step)
            update = config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            p[...] = (p.astype(np.float64) + update).astype(p.dtype)
    else:
        for name, p in tensors.items():
            p[...] = (p.astype(np.float64) + config.learning_rate * grads[name]).astype(
                p.dtype
            )


@dataclass
class StepStats:
    surrogate: float
    mean_reward: float
    mean_fbeta: float
    grad_norm: float


def _episode_gradients(
    sentence: Sentence,
    model: Model,
    config: TrainConfig,
    rng: np.random.Generator,
    opt: Optional[OptimizerState],
) -> tuple[dict[str, np.ndarray], float, float, float]:
    trace = run_episode(
        sentence,
        model,
        mode="sample",
        gold_available=True,
        rng=rng,
        alpha=config.alpha,
        beta=config.beta,
        final_reward_mode=config.final_reward_mode,
    )
    annotated = compute_returns(trace, config.gamma)
    returns = annotated.returns
    if config.use_baseline and opt is not None:
        is_high = np.array([s.level == HIGH for s in trace.steps])
        returns = returns.copy()
        for level, mask in ((HIGH, is_high), ("low", ~is_high)):
            if mask.any():
                baseline = opt.update_baseline(level, float(returns[mask].mean()))
                returns[mask] -= baseline
    grads = policy_backward(trace, returns, model)
    surrogate = float(
        np.dot(returns, np.array([s.log_prob for s in trace.steps]))
    )
    total_reward = float(sum(s.reward for s in trace.steps))
    return grads, surrogate, total_reward, trace.final_reward


def train_step(
    batch: Sequence[Sentence],
    model: Model,
    config: TrainConfig,
    rng: np.random.Generator,
    opt: Optional[OptimizerState] = None,
) -> StepStats:
    """One sampled-episode REINFORCE update over a minibatch (in place)."""
    if not batch:
        raise ValueError("train_step needs a non-empty batch")
    if opt is None:
        opt = OptimizerState()

    if config.workers > 1 and len(batch) > 1:
        # Episode order (and so RNG use) stays deterministic: each episode
        # gets its own child generator, results merge in batch order.
        child_seeds = rng.integers(0, 2**63 - 1, size=len(batch))
        child_rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in child_seeds]
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(
                pool.map(
                    lambda pair: _episode_gradients(pair[0], model, config, pair[1], opt),
                    zip(batch, child_rngs),
                )
            )
    else:
        results = [_episode_gradients(s, model, config, rng, opt) for s in batch]

    total = model.zero_grads()
    surrogate = reward = fbeta = 0.0
    for grads, s, r, f in results:
        for name in total:
            total[name] += grads[name]
        surrogate += s
        reward += r
        fbeta += f
    scale = 1.0 / len(batch)
    for g in total.values():
        g *= scale

    for name, g in total.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in parameter {name!r}")

    norm = clip_gradients(total, config.clip_norm)
    _apply_update(model, total, config, opt)
    return StepStats(
        surrogate=surrogate * scale,
        mean_reward=reward * scale,
        mean_fbeta=fbeta * scale,
        grad_norm=norm,
    )


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    train_config: TrainConfig
    model_config: ModelConfig
    schema: RelationSchema
    vocab_tokens: list[str]
    tensors: dict[str, np.ndarray]  # float32 copies in manifest order
    version: int = CHECKPOINT_VERSION

    @classmethod
    def from_model(cls, model: Model, train_config: TrainConfig) -> "Checkpoint":
        return cls(
            train_config=train_config,
            model_config=model.config,
            schema=model.schema,
            vocab_tokens=list(model.vocab.tokens),
            tensors={
                k: np.ascontiguousarray(v, dtype=np.float32)
                for k, v in model.tensors().items()
            },
        )

    def to_model(self) -> Model:
        from .encoder import EncoderParams
        from .model import HighPolicyParams, LowPolicyParams

        t = {k: v.copy() for k, v in self.tensors.items()}
        vocab = Vocabulary(
            list(self.vocab_tokens),
            {tok: i for i, tok in enumerate(self.vocab_tokens)},
            t["encoder.embedding"],
        )
        encoder = EncoderParams(
            embedding=t["encoder.embedding"],
            fw_Wx=t["encoder.fw_Wx"],
            fw_Wh=t["encoder.fw_Wh"],
            fw_b=t["encoder.fw_b"],
            bw_Wx=t["encoder.bw_Wx"],
            bw_Wh=t["encoder.bw_Wh"],
            bw_b=t["encoder.bw_b"],
        )
        high = HighPolicyParams(
            state_W=t["high.state_W"],
            state_b=t["high.state_b"],
            option_W=t["high.option_W"],
            option_b=t["high.option_b"],
            type_emb=t["high.type_emb"],
        )
        low = LowPolicyParams(
            state_W=t["low.state_W"],
            state_b=t["low.state_b"],
            ctx_W=t["low.ctx_W"],
            ctx_b=t["low.ctx_b"],
            action_W=t["low.action_W"],
            action_b=t["low.action_b"],
            tag_emb=t["low.tag_emb"],
        )
        return Model(self.model_config, self.schema, vocab, encoder, high, low)


def expected_tensor_shapes(
    model_config: ModelConfig, schema: RelationSchema, vocab_size: int
) -> dict[str, tuple[int, ...]]:
    h = model_config.hidden_dim // 2
    d_w, d_h = model_config.word_dim, model_config.hidden_dim
    d_s, d_r, d_e = model_config.state_dim, model_config.type_dim, model_config.tag_dim
    n_rel = len(schema)
    return {
        "encoder.embedding": (vocab_size, d_w),
        "encoder.fw_Wx": (4 * h, d_w),
        "encoder.fw_Wh": (4 * h, h),
        "encoder.fw_b": (4 * h,),
        "encoder.bw_Wx": (4 * h, d_w),
        "encoder.bw_Wh": (4 * h, h),
        "encoder.bw_b": (4 * h,),
        "high.state_W": (d_s, d_h + d_r + d_s),
        "high.state_b": (d_s,),
        "high.option_W": (n_rel + 1, d_s),
        "high.option_b": (n_rel + 1,),
        "high.type_emb": (n_rel + 1, d_r),
        "low.state_W": (d_s, d_h + d_e + d_s + d_s),
        "low.state_b": (d_s,),
        "low.ctx_W": (d_s, d_s),
        "low.ctx_b": (d_s,),
        "low.action_W": (n_rel, TAG_COUNT, d_s),
        "low.action_b": (n_rel, TAG_COUNT),
        "low.tag_emb": (TAG_COUNT + 1, d_e),
    }


def _validate_shapes(ckpt: Checkpoint) -> None:
    expected = expected_tensor_shapes(
        ckpt.model_config, ckpt.schema, len(ckpt.vocab_tokens)
    )
    if set(expected) != set(ckpt.tensors):
        missing = sorted(set(expected) - set(ckpt.tensors))
        extra = sorted(set(ckpt.tensors) - set(expected))
        raise ShapeMismatchError(f"tensor manifest mismatch: missing={missing} extra={extra}")
    for name, shape in expected.items():
        got = tuple(ckpt.tensors[name].shape)
        if got != shape:
            raise ShapeMismatchError(
                f"tensor {name!r} has shape {got}, expected {shape} for this schema"
            )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    header = {
        "train_config": ckpt.train_config.to_dict(),
        "model_config": ckpt.model_config.to_dict(),
        "schema": list(ckpt.schema.names),
        "vocab": list(ckpt.vocab_tokens),
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in ckpt.tensors.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    for arr in ckpt.tensors.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> Checkpoint:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise CorruptCheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", data[4:8])
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version}, expected {CHECKPOINT_VERSION}"
        )
    (header_len,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + header_len:
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: bad header ({exc})") from None

    try:
        train_config = TrainConfig.from_dict(header["train_config"])
        model_config = ModelConfig.from_dict(header["model_config"])
        schema = RelationSchema(tuple(header["schema"]))
        vocab_tokens = list(header["vocab"])
        manifest = header["tensors"]
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"{path}: incomplete header ({exc})") from None

    tensors: dict[str, np.ndarray] = {}
    offset = 12 + header_len
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if offset + nbytes > len(data):
            raise CorruptCheckpointError(f"{path}: truncated tensor payload")
        tensors[entry["name"]] = np.frombuffer(
            data, dtype="<f4", count=count, offset=offset
        ).reshape(shape).copy()
        offset += nbytes
    if offset != len(data):
        raise CorruptCheckpointError(f"{path}: trailing bytes after tensor payload")

    ckpt = Checkpoint(
        train_config=train_config,
        model_config=model_config,
        schema=schema,
        vocab_tokens=vocab_tokens,
        tensors=tensors,
        version=version,
    )
    _validate_shapes(ckpt)
    return ckpt


# ---------------------------------------------------------------------------
# Full training loop
# ---------------------------------------------------------------------------


def train(
    corpus: Sequence[Sentence],
    schema: RelationSchema,
    config: TrainConfig,
    model_config: Optional[ModelConfig] = None,
    pretrained: Optional[dict[str, np.ndarray]] = None,
) -> tuple[Checkpoint, list[dict]]:
    """Train on the (already filtered) corpus; keep the checkpoint with the
    best validation triple F1.

    A 0.5% slice of the corpus (at least one sentence) is held out for the
    per-epoch greedy validation pass.
    """
    from .evaluation import evaluate_model

    if not corpus:
        raise ValueError("training corpus is empty")
    model_config = model_config or ModelConfig()

    seed_seq = np.random.SeedSequence(config.seed)
    init_seed, split_seed, train_seed = (
        int(s.generate_state(1)[0]) for s in seed_seq.spawn(3)
    )

    token_iter = (tok.text for s in corpus for tok in s.tokens)
    model = init_model(model_config, schema, token_iter, init_seed, pretrained=pretrained)

    split_rng = np.random.Generator(np.random.PCG64(split_seed))
    order = split_rng.permutation(len(corpus))
    n_val = max(1, int(len(corpus) * VALIDATION_FRACTION))
    val_set = [corpus[i] for i in order[:n_val]]
    train_set = [corpus[i] for i in order[n_val:]]
    if not train_set:  # tiny corpora still need something to train on
        train_set = val_set

    rng = np.random.Generator(np.random.PCG64(train_seed))
    opt = OptimizerState()
    metrics: list[dict] = []
    best = Checkpoint.from_model(model, config)
    best_f1 = -1.0

    for epoch in range(config.epochs):
        perm = rng.permutation(len(train_set))
        epoch_reward = 0.0
        epoch_fbeta = 0.0
        n_batches = 0
        for start in range(0, len(train_set), config.batch_size):
            batch = [train_set[i] for i in perm[start : start + config.batch_size]]
            stats = train_step(batch, model, config, rng, opt)
            epoch_reward += stats.mean_reward
            epoch_fbeta += stats.mean_fbeta
            n_batches += 1
        report = evaluate_model(model, val_set)
        entry = {
            "epoch": epoch,
            "mean_reward": epoch_reward / n_batches,
            "mean_fbeta": epoch_fbeta / n_batches,
            "val_precision": report.overall.precision,
            "val_recall": report.overall.recall,
            "val_f1": report.overall.f1,
        }
        metrics.append(entry)
        if report.overall.f1 > best_f1:
            best_f1 = report.overall.f1
            best = Checkpoint.from_model(model, config)
    return best, metrics


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def replay_surrogate(trace: EpisodeTrace, model: Model, returns: np.ndarray) -> float:
    """Recompute ``sum_t R_t * log p_t`` for a frozen trace under the given
    parameters (choices and returns fixed, activations recomputed)."""
    from .encoder import encode
    from .policy import log_prob_of

    emb = model.vocab.vectors[trace.token_ids]
    hidden, _ = encode(emb, model.encoder)
    d_s = model.config.state_dim
    state = np.zeros(d_s, dtype=hidden.dtype)
    total = 0.0
    context_by_subtask: dict[int, np.ndarray] = {}
    for idx, step in enumerate(trace.steps):
        if step.level == HIGH:
            concat = np.concatenate(
                [hidden[step.position], model.high.type_emb[step.embedding_row], state]
            )
            state = np.tanh(model.high.state_W @ concat + model.high.state_b)
            logits = model.high.option_W @ state + model.high.option_b
            if step.subtask is not None:
                context_by_subtask[step.subtask] = np.tanh(
                    model.low.ctx_W @ state + model.low.ctx_b
                )
        else:
            relation = trace.subtasks[step.subtask].option
            concat = np.concatenate(
                [
                    hidden[step.position],
                    model.low.tag_emb[step.embedding_row],
                    state,
                    context_by_subtask[step.subtask],
                ]
            )
            state = np.tanh(model.low.state_W @ concat + model.low.state_b)
            logits = model.low.action_W[relation] @ state + model.low.action_b[relation]
        total += returns[idx] * log_prob_of(logits, step.choice)
    return total


def analytic_gradients(
    trace: EpisodeTrace, model: Model, returns: np.ndarray
) -> dict[str, np.ndarray]:
    return policy_backward(trace, returns, model)


def numeric_gradients(
    trace: EpisodeTrace,
    model: Model,
    returns: np.ndarray,
    step_size: float = 1e-4,
) -> dict[str, np.ndarray]:
    """Central finite differences of the frozen-trace surrogate, one
    parameter element at a time."""
    grads = {}
    for name, tensor in model.tensors().items():
        grad = np.zeros(tensor.shape, dtype=np.float64)
        flat = tensor.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.shape[0]):
            original = flat[i]
            flat[i] = original + step_size
            plus = replay_surrogate(trace, model, returns)
            flat[i] = original - step_size
            minus = replay_surrogate(trace, model, returns)
            flat[i] = original
            gflat[i] = (plus - minus) / (2.0 * step_size)
        grads[name] = grad
    return grads


def compare_gradients(
    analytic: dict[str, np.ndarray],
    numeric: dict[str, np.ndarray],
    floor: float = 1e-4,
) -> dict[str, float]:
    """Per-tensor max elementwise relative error with a small-denominator
    floor (tiny gradients compare by absolute difference against the floor)."""
    errors = {}
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        errors[name] = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
    return errors


@dataclass
class GradCheckReport:
    instances: list[dict]
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def _random_small_sentence(rng: np.random.Generator, max_length: int, n_rel: int) -> Sentence:
    """Tiny sentence with one single-token-span gold triple, for grad checks."""
    length = int(rng.integers(2, max_length + 1))
    tokens = [f"tok{int(rng.integers(6))}" for _ in range(length)]
    source, target = rng.choice(length, size=2, replace=False)
    from .corpus import Span, Triple

    triple = Triple(
        Span(int(source), int(source) + 1),
        int(rng.integers(n_rel)),
        Span(int(target), int(target) + 1),
    )
    return Sentence.from_texts(tokens, [triple])


def grad_check(
    n_instances: int = 20,
    tolerance: float = 1e-3,
    seed: int = 0,
    max_length: int = 4,
    max_hidden: int = 8,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients on random small
    sampled episodes (all computation in float64)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    schema = RelationSchema(("relA", "relB"))
    instances = []
    worst = 0.0
    for k in range(n_instances):
        hidden = 2 * int(rng.integers(1, max_hidden // 2 + 1))
        sentence = _random_small_sentence(rng, max_length, len(schema))
        model = init_model(
            ModelConfig.uniform(hidden),
            schema,
            (t.text for t in sentence.tokens),
            seed=int(rng.integers(2**31)),
            dtype=np.float64,
        )
        trace = run_episode(sentence, model, mode="sample", rng=rng)
        returns = compute_returns(trace, gamma=0.95).returns
        errors = compare_gradients(
            analytic_gradients(trace, model, returns),
            numeric_gradients(trace, model, returns),
        )
        inst_max = max(errors.values())
        worst = max(worst, inst_max)
        instances.append(
            {
                "instance": k,
                "hidden_dim": hidden,
                "length": len(sentence),
                "steps": trace.total_steps,
                "max_relative_error": inst_max,
                "per_tensor": errors,
            }
        )
    return GradCheckReport(instances=instances, max_relative_error=worst, tolerance=tolerance)
