"""Token embedding and bidirectional LSTM encoding with exact backprop.

The encoder turns a sentence into one hidden vector per position: a
forward and a backward LSTM pass over the word embeddings, concatenated.
Both passes use the standard gated cell (input/forget/output gates plus a
tanh candidate) from zero initial states.  The backward-mode functions
return gradients that match central finite differences to high precision;
the training module relies on that exactness.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Vocabulary",
    "EncoderParams",
    "EncoderCache",
    "build_vocabulary",
    "load_embedding_file",
    "embed",
    "encode",
    "encode_backward",
    "init_encoder_params",
]

UNK_TOKEN = "<unk>"
UNK_ID = 0


@dataclass
class Vocabulary:
    """Token-to-id map plus the live id-to-vector table.

    ``vectors`` is the same array object as the model's embedding tensor,
    so in-place training updates stay visible here.
    """

    tokens: list[str]
    token_to_id: dict[str, int]
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def ids_of(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)


def build_vocabulary(
    token_iter,
    dim: int,
    rng: np.random.Generator,
    pretrained: Optional[dict[str, np.ndarray]] = None,
    init_scale: float = 0.08,
    dtype=np.float32,
) -> Vocabulary:
    """Collect the distinct tokens (id 0 reserved for unknowns) and build
    the embedding table, preferring pretrained rows where available."""
    tokens = [UNK_TOKEN]
    seen = {UNK_TOKEN}
    for tok in token_iter:
        if tok not in seen:
            seen.add(tok)
            tokens.append(tok)
    vectors = rng.uniform(-init_scale, init_scale, size=(len(tokens), dim)).astype(dtype)
    if pretrained:
        for i, tok in enumerate(tokens):
            vec = pretrained.get(tok)
            if vec is not None:
                if vec.shape != (dim,):
                    raise ValueError(
                        f"pretrained vector for {tok!r} has dimension {vec.shape[0]}, "
                        f"expected {dim}"
                    )
                vectors[i] = vec.astype(dtype)
    return Vocabulary(tokens, {t: i for i, t in enumerate(tokens)}, vectors)


def load_embedding_file(path, dim: int) -> dict[str, np.ndarray]:
    """Read `token v1 ... vD` lines into a token-to-vector map."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(
                    f"{path}:{line_no}: expected {dim} values after the token, "
                    f"got {len(parts) - 1}"
                )
            table[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    return table


def embed(tokens: Sequence, vocab: Vocabulary) -> np.ndarray:
    """Row t is the vector for token t; unknown tokens map to the UNK row."""
    texts = [t.text if hasattr(t, "text") else t for t in tokens]
    if not texts:
        return np.zeros((0, vocab.dim), dtype=vocab.vectors.dtype)
    return vocab.vectors[vocab.ids_of(texts)]


@dataclass
class EncoderParams:
    """Embedding table plus one weight set per direction.

    Gate weights are packed along the first axis in (input, forget,
    output, candidate) order, so each W has 4H rows for hidden size H.
    The concatenated output dimension is 2H.
    """

    embedding: np.ndarray
    fw_Wx: np.ndarray
    fw_Wh: np.ndarray
    fw_b: np.ndarray
    bw_Wx: np.ndarray
    bw_Wh: np.ndarray
    bw_b: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return 2 * self.fw_Wh.shape[1]

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {
            f.name: np.zeros_like(getattr(self, f.name), dtype=np.float64)
            for f in fields(self)
        }


def init_encoder_params(
    vocab: Vocabulary,
    hidden_dim: int,
    rng: np.random.Generator,
    init_scale: float = 0.08,
    forget_bias: float = 1.0,
    dtype=np.float32,
) -> EncoderParams:
    if hidden_dim % 2:
        raise ValueError(f"hidden_dim must be even, got {hidden_dim}")
    h = hidden_dim // 2
    d_w = vocab.dim

    def weights(rows, cols):
        return rng.uniform(-init_scale, init_scale, size=(rows, cols)).astype(dtype)

    def bias():
        b = rng.uniform(-init_scale, init_scale, size=4 * h).astype(dtype)
        b[h : 2 * h] = forget_bias
        return b

    return EncoderParams(
        embedding=vocab.vectors,
        fw_Wx=weights(4 * h, d_w),
        fw_Wh=weights(4 * h, h),
        fw_b=bias(),
        bw_Wx=weights(4 * h, d_w),
        bw_Wh=weights(4 * h, h),
        bw_b=bias(),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class _DirectionCache:
    xs: np.ndarray  # inputs in processing order, (L, d_w)
    gates: list  # per step (i, f, o, g)
    cells: list  # per step c_t
    cell_tanh: list  # per step tanh(c_t)
    hiddens: list  # per step h_t


@dataclass
class EncoderCache:
    forward: _DirectionCache
    backward: _DirectionCache


def _lstm_pass(xs: np.ndarray, Wx, Wh, b, h_size: int) -> _DirectionCache:
    h = np.zeros(h_size, dtype=xs.dtype)
    c = np.zeros(h_size, dtype=xs.dtype)
    cache = _DirectionCache(xs=xs, gates=[], cells=[], cell_tanh=[], hiddens=[])
    for x in xs:
        z = Wx @ x + Wh @ h + b
        i = _sigmoid(z[:h_size])
        f = _sigmoid(z[h_size : 2 * h_size])
        o = _sigmoid(z[2 * h_size : 3 * h_size])
        g = np.tanh(z[3 * h_size :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.gates.append((i, f, o, g))
        cache.cells.append(c)
        cache.cell_tanh.append(tc)
        cache.hiddens.append(h)
    return cache


def encode(emb: np.ndarray, params: EncoderParams) -> tuple[np.ndarray, EncoderCache]:
    """Run both directions over the embedded sentence.

    Returns the (L, 2H) matrix of concatenated [forward; backward] states
    and the activation cache needed by ``encode_backward``.
    """
    length = emb.shape[0]
    if length < 1:
        raise ValueError("cannot encode an empty sentence")
    h = params.fw_Wh.shape[1]
    fw = _lstm_pass(emb, params.fw_Wx, params.fw_Wh, params.fw_b, h)
    bw = _lstm_pass(emb[::-1], params.bw_Wx, params.bw_Wh, params.bw_b, h)
    hidden = np.empty((length, 2 * h), dtype=emb.dtype)
    for t in range(length):
        hidden[t, :h] = fw.hiddens[t]
        hidden[t, h:] = bw.hiddens[length - 1 - t]
    return hidden, EncoderCache(forward=fw, backward=bw)


def _lstm_pass_backward(
    d_hidden: np.ndarray, cache: _DirectionCache, Wx, Wh, b
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT for one direction given d(loss)/d(h_t) in processing order.

    Returns (dWx, dWh, db, d_xs).
    """
    h_size = Wh.shape[1]
    steps = len(cache.hiddens)
    dWx = np.zeros_like(Wx, dtype=np.float64)
    dWh = np.zeros_like(Wh, dtype=np.float64)
    db = np.zeros_like(b, dtype=np.float64)
    d_xs = np.zeros_like(cache.xs, dtype=np.float64)
    dh_carry = np.zeros(h_size)
    dc_carry = np.zeros(h_size)
    for t in range(steps - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        tc = cache.cell_tanh[t]
        c_prev = cache.cells[t - 1] if t > 0 else np.zeros(h_size)
        h_prev = cache.hiddens[t - 1] if t > 0 else np.zeros(h_size)

        dh = d_hidden[t] + dh_carry
        do = dh * tc
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev

        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g * g),
            ]
        )
        dWx += np.outer(dz, cache.xs[t])
        dWh += np.outer(dz, h_prev)
        db += dz
        d_xs[t] = Wx.T @ dz
        dh_carry = Wh.T @ dz
        dc_carry = dc * f
    return dWx, dWh, db, d_xs


def encode_backward(
    grad_hidden: np.ndarray,
    cache: EncoderCache,
    params: EncoderParams,
    token_ids: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact reverse-mode gradients of ``encode`` plus the embedding rows.

    ``grad_hidden`` is d(loss)/d(hidden states), shape (L, 2H).  Repeated
    tokens accumulate their per-position contributions into one embedding
    row.
    """
    length = grad_hidden.shape[0]
    h = params.fw_Wh.shape[1]
    grads = params.zero_grads()

    d_fw = np.ascontiguousarray(grad_hidden[:, :h])
    d_bw = np.ascontiguousarray(grad_hidden[::-1, h:])

    fw_Wx, fw_Wh, fw_b, d_x_fw = _lstm_pass_backward(
        d_fw, cache.forward, params.fw_Wx, params.fw_Wh, params.fw_b
    )
    bw_Wx, bw_Wh, bw_b, d_x_bw = _lstm_pass_backward(
        d_bw, cache.backward, params.bw_Wx, params.bw_Wh, params.bw_b
    )
    grads["fw_Wx"] = fw_Wx
    grads["fw_Wh"] = fw_Wh
    grads["fw_b"] = fw_b
    grads["bw_Wx"] = bw_Wx
    grads["bw_Wh"] = bw_Wh
    grads["bw_b"] = bw_b

    d_emb = d_x_fw + d_x_bw[::-1]
    for t in range(length):
        grads["embedding"][token_ids[t]] += d_emb[t]
    return grads
