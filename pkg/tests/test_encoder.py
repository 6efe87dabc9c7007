import math

import numpy as np
import pytest

from hirex.encoder import (
    EncoderParams,
    Vocabulary,
    build_vocabulary,
    embed,
    encode,
    encode_backward,
    init_encoder_params,
    load_embedding_file,
)


def make_vocab(tokens, dim, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    return build_vocabulary(tokens, dim, rng, dtype=np.float64)


def make_params(vocab, hidden_dim, seed=1):
    rng = np.random.Generator(np.random.PCG64(seed))
    return init_encoder_params(vocab, hidden_dim, rng, dtype=np.float64)


# ---------------------------------------------------------------------------
# Vocabulary and embedding lookups
# ---------------------------------------------------------------------------


def test_embed_known_token_is_stored_row():
    vocab = make_vocab(["alpha", "beta"], dim=5)
    out = embed(["beta", "alpha"], vocab)
    assert np.array_equal(out[0], vocab.vectors[vocab.token_to_id["beta"]])
    assert np.array_equal(out[1], vocab.vectors[vocab.token_to_id["alpha"]])


def test_embed_unknown_token_maps_to_unk_row():
    vocab = make_vocab(["alpha"], dim=4)
    out = embed(["never-seen"], vocab)
    assert np.array_equal(out[0], vocab.vectors[0])


def test_embed_empty_sentence():
    vocab = make_vocab(["alpha"], dim=4)
    out = embed([], vocab)
    assert out.shape == (0, 4)


def test_pretrained_rows_are_used(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("alpha 1.0 2.0 3.0\n", encoding="utf-8")
    table = load_embedding_file(path, dim=3)
    rng = np.random.Generator(np.random.PCG64(0))
    vocab = build_vocabulary(["alpha", "beta"], 3, rng, pretrained=table)
    assert np.allclose(vocab.vectors[vocab.token_to_id["alpha"]], [1.0, 2.0, 3.0])


def test_embedding_file_dimension_mismatch(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("alpha 1.0 2.0\n", encoding="utf-8")
    with pytest.raises(ValueError, match="expected 3"):
        load_embedding_file(path, dim=3)


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------


def test_zero_weights_give_zero_states():
    vocab = make_vocab(["a", "b"], dim=3)
    params = make_params(vocab, hidden_dim=4)
    for name in ("fw_Wx", "fw_Wh", "fw_b", "bw_Wx", "bw_Wh", "bw_b"):
        getattr(params, name)[...] = 0.0
    hidden, _ = encode(embed(["a", "b", "a"], vocab), params)
    assert np.array_equal(hidden, np.zeros((3, 4)))


def test_single_token_shape():
    vocab = make_vocab(["a"], dim=3)
    params = make_params(vocab, hidden_dim=6)
    hidden, _ = encode(embed(["a"], vocab), params)
    assert hidden.shape == (1, 6)


def test_empty_sentence_rejected():
    vocab = make_vocab(["a"], dim=3)
    params = make_params(vocab, hidden_dim=4)
    with pytest.raises(ValueError):
        encode(np.zeros((0, 3)), params)


def test_determinism():
    vocab = make_vocab(["a", "b", "c"], dim=4)
    params = make_params(vocab, hidden_dim=6)
    emb = embed(["a", "c", "b"], vocab)
    h1, _ = encode(emb, params)
    h2, _ = encode(emb, params)
    assert np.array_equal(h1, h2)


def scalar_lstm_step(x, h_prev, c_prev, wx, wh, b):
    """Independent scalar oracle for one cell step (1-d input and hidden).

    wx/wh/b are 4-vectors in (input, forget, output, candidate) order.
    """

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    z = [wx[k] * x + wh[k] * h_prev + b[k] for k in range(4)]
    i, f, o = sig(z[0]), sig(z[1]), sig(z[2])
    g = math.tanh(z[3])
    c = f * c_prev + i * g
    h = o * math.tanh(c)
    return h, c


def test_two_token_forward_matches_scalar_oracle():
    # 1-d embeddings and a 1-unit cell per direction (hidden_dim 2)
    vocab = make_vocab(["x", "y"], dim=1)
    vocab.vectors[...] = 0.0
    vocab.vectors[vocab.token_to_id["x"]] = 0.4
    vocab.vectors[vocab.token_to_id["y"]] = -0.7

    params = make_params(vocab, hidden_dim=2)
    fw = ([0.5, -0.3, 0.8, 1.1], [0.2, 0.4, -0.6, 0.9], [0.1, 1.0, -0.2, 0.3])
    bw = ([-0.4, 0.7, 0.25, -0.9], [0.55, -0.15, 0.35, 0.05], [0.0, 1.0, 0.6, -0.45])
    params.fw_Wx[...] = np.array(fw[0]).reshape(4, 1)
    params.fw_Wh[...] = np.array(fw[1]).reshape(4, 1)
    params.fw_b[...] = np.array(fw[2])
    params.bw_Wx[...] = np.array(bw[0]).reshape(4, 1)
    params.bw_Wh[...] = np.array(bw[1]).reshape(4, 1)
    params.bw_b[...] = np.array(bw[2])

    hidden, _ = encode(embed(["x", "y"], vocab), params)

    h1, c1 = scalar_lstm_step(0.4, 0.0, 0.0, *fw)
    h2, _ = scalar_lstm_step(-0.7, h1, c1, *fw)
    r2, rc2 = scalar_lstm_step(-0.7, 0.0, 0.0, *bw)
    r1, _ = scalar_lstm_step(0.4, r2, rc2, *bw)

    expected = np.array([[h1, r1], [h2, r2]])
    assert np.allclose(hidden, expected, atol=1e-12)


# ---------------------------------------------------------------------------
# Backward pass vs central differences
# ---------------------------------------------------------------------------


def loss_of(vocab, params, token_ids, weights):
    hidden, _ = encode(vocab.vectors[token_ids], params)
    return float(np.sum(hidden * weights))


def numeric_grad(vocab, params, token_ids, weights, tensor, step=1e-4):
    grad = np.zeros_like(tensor)
    flat, gflat = tensor.reshape(-1), grad.reshape(-1)
    for k in range(flat.shape[0]):
        original = flat[k]
        flat[k] = original + step
        plus = loss_of(vocab, params, token_ids, weights)
        flat[k] = original - step
        minus = loss_of(vocab, params, token_ids, weights)
        flat[k] = original
        gflat[k] = (plus - minus) / (2 * step)
    return grad


def test_backward_matches_finite_differences():
    vocab = make_vocab(["a", "b", "c"], dim=3, seed=2)
    params = make_params(vocab, hidden_dim=8, seed=3)
    token_ids = vocab.ids_of(["a", "c", "b"])
    rng = np.random.Generator(np.random.PCG64(4))
    weights = rng.normal(size=(3, 8))

    hidden, cache = encode(vocab.vectors[token_ids], params)
    grads = encode_backward(weights, cache, params, token_ids)

    for name in ("fw_Wx", "fw_Wh", "fw_b", "bw_Wx", "bw_Wh", "bw_b", "embedding"):
        tensor = params.embedding if name == "embedding" else getattr(params, name)
        numeric = numeric_grad(vocab, params, token_ids, weights, tensor)
        denom = np.maximum(np.maximum(np.abs(grads[name]), np.abs(numeric)), 1e-4)
        rel = np.max(np.abs(grads[name] - numeric) / denom)
        assert rel <= 1e-3, f"{name}: relative error {rel}"


def test_zero_upstream_gradient_gives_zero_grads():
    vocab = make_vocab(["a", "b"], dim=3)
    params = make_params(vocab, hidden_dim=4)
    token_ids = vocab.ids_of(["a", "b"])
    _, cache = encode(vocab.vectors[token_ids], params)
    grads = encode_backward(np.zeros((2, 4)), cache, params, token_ids)
    for g in grads.values():
        assert np.allclose(g, 0.0)


def test_repeated_token_accumulates_embedding_gradient():
    vocab = make_vocab(["a", "b"], dim=2, seed=5)
    params = make_params(vocab, hidden_dim=4, seed=6)
    token_ids = vocab.ids_of(["a", "b", "a"])
    rng = np.random.Generator(np.random.PCG64(7))
    weights = rng.normal(size=(3, 4))

    _, cache = encode(vocab.vectors[token_ids], params)
    grads = encode_backward(weights, cache, params, token_ids)
    row = vocab.token_to_id["a"]
    numeric = numeric_grad(vocab, params, token_ids, weights, params.embedding)
    assert np.allclose(grads["embedding"][row], numeric[row], rtol=1e-4, atol=1e-6)
    # both occurrences contribute: gradient differs from a single-occurrence run
    single_ids = vocab.ids_of(["a", "b", "b"])
    _, cache1 = encode(vocab.vectors[single_ids], params)
    grads1 = encode_backward(weights, cache1, params, single_ids)
    assert not np.allclose(grads["embedding"][row], grads1["embedding"][row])


def test_init_forget_gate_bias_is_one():
    vocab = make_vocab(["a"], dim=3)
    params = make_params(vocab, hidden_dim=6)
    h = 3
    assert np.all(params.fw_b[h : 2 * h] == 1.0)
    assert np.all(params.bw_b[h : 2 * h] == 1.0)
    assert np.all(np.abs(params.fw_Wx) <= 0.08)


def test_odd_hidden_dim_rejected():
    vocab = make_vocab(["a"], dim=3)
    rng = np.random.Generator(np.random.PCG64(0))
    with pytest.raises(ValueError):
        init_encoder_params(vocab, 5, rng)
