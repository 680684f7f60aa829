import numpy as np
import pytest

from bilingseg.corpus import ParallelCorpus, split_train_valid
from bilingseg.neural import (
    AttentionModel, ModelConfig, NeuralError, SoftAlignmentMatrix, TrainConfig, Vocab,
    average_matrices, build_vocab, compute_grads, forced_decode_matrices, forced_decode_matrix,
    gradient_check, greedy_decode, load_model, make_batch, save_model, train_model,
)
from bilingseg.synthetic import copy_corpus
from conftest import make_pair

TINY = ModelConfig(src_emb=6, tgt_emb=5, enc_hidden=4, dec_hidden=8, att_hidden=7, dtype="float64")
SMALL = ModelConfig(src_emb=32, tgt_emb=16, enc_hidden=32, dec_hidden=32, att_hidden=32)


def tiny_model(seed=3, jitter=True):
    src = [["x", "y", "z"], ["y", "x"], ["z"]]
    tgt = [list("abca"), list("ba"), list("cc")]
    m = AttentionModel(build_vocab(src), build_vocab(tgt), TINY, seed=seed)
    if jitter:
        rng = np.random.default_rng(0)
        for t in m.params.values():
            t.data += rng.normal(0, 0.1, t.data.shape)
    return m, m.batch(list(zip(src, tgt)))


def test_build_vocab_min_count():
    v = build_vocab([["a", "a", "b", "a"]], min_count=2)
    assert v.itos == ("<pad>", "<s>", "</s>", "<unk>", "a")
    assert v.encode(["b"]) == [Vocab.unk]


def test_build_vocab_order_deterministic():
    sents = [["b", "c", "a", "c"], ["a"]]
    v = build_vocab(sents)
    assert v.itos[4:] == ("a", "c", "b")
    assert build_vocab(sents) == v


def test_vocab_extra_symbol_reserved():
    v = build_vocab([["a"]], extra=["#"])
    assert v.itos[4] == "#"


def test_vocab_rejects_duplicates():
    with pytest.raises(NeuralError):
        Vocab(("<pad>", "<s>", "</s>", "<unk>", "a", "a"))


def test_attend_singleton():
    m, _ = tiny_model()
    h = np.arange(8.0)
    alpha, c = m.attend(h[None], np.ones(8))
    np.testing.assert_allclose(alpha, [1.0])
    np.testing.assert_allclose(c, h)


def test_attend_equal_scores_uniform():
    m, _ = tiny_model()
    H = np.tile(np.linspace(-1, 1, 8), (4, 1))   # identical annotations give identical scores
    alpha, _ = m.attend(H, np.zeros(8))
    np.testing.assert_allclose(alpha, 0.25, atol=1e-15)


def test_attend_context_is_convex_combination():
    m, _ = tiny_model()
    rng = np.random.default_rng(2)
    H = rng.normal(size=(5, 8))
    alpha, c = m.attend(H, rng.normal(size=8))
    assert alpha.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(c, alpha @ H)


def test_gradient_check_double_precision():
    m, b = tiny_model()
    err, per = gradient_check(m, b, epsilon=1e-5)
    assert err < 1e-6, per


def test_gradient_check_extended_precision_oracle():
    m, b = tiny_model(seed=4)
    err, per = gradient_check(m, b, epsilon=1e-4, floor=1e-12, fd_dtype="longdouble")
    assert err < 1e-6, per


def test_gradient_check_rejects_empty_target():
    m, _ = tiny_model()
    with pytest.raises(NeuralError):
        m.batch([(["x"], [])])


def test_constant_output_bias_gradient():
    # zero output weights: logits equal the bias, so d(mean NLL)/d(bias) = softmax(bias) - empirical frequency
    m, b = tiny_model(jitter=False)
    m.params["out_w"].data[:] = 0.0
    m.params["out_b"].data[:] = np.random.default_rng(5).normal(size=len(m.tgt_vocab))
    _, grads = compute_grads(m, b)
    bias = m.params["out_b"].data
    p = np.exp(bias - bias.max())
    p /= p.sum()
    targets = b.tgt_out[b.tgt_mask]
    freq = np.bincount(targets, minlength=len(bias)) / targets.size
    np.testing.assert_allclose(grads["out_b"], p - freq, atol=1e-12)
    num = np.zeros_like(bias)
    for i in range(bias.size):
        old = bias[i]
        bias[i] = old + 1e-6
        hi = float(m.loss(b).data)
        bias[i] = old - 1e-6
        lo = float(m.loss(b).data)
        bias[i] = old
        num[i] = (hi - lo) / 2e-6
    np.testing.assert_allclose(grads["out_b"], num, atol=1e-9)


def test_make_batch_layout():
    b = make_batch([[4, 5], [6]], [[7, 8, 9], [7]])
    assert b.tgt_in[0].tolist() == [Vocab.bos, 7, 8, 9]
    assert b.tgt_out[1].tolist() == [7, Vocab.eos, 0, 0]
    assert b.n_tokens == 4 + 2
    with pytest.raises(NeuralError):
        make_batch([[]], [[1]])


def test_forced_decode_shape_and_rows(rng):
    m, _ = tiny_model()
    pair = make_pair("p", "x y", ["abc"])
    mat = forced_decode_matrix(m, pair)
    assert mat.shape == (3, 2)
    np.testing.assert_allclose(mat.entries.sum(axis=1), 1.0, atol=1e-12)


def test_forced_decode_batched_equals_single():
    m, _ = tiny_model()
    pairs = [make_pair("p1", "x y z", ["ab", "c"]), make_pair("p2", "y", ["cabba"]), make_pair("p3", "z x", ["a"])]
    together = forced_decode_matrices(m, pairs, batch_size=8)
    for p, mat in zip(pairs, together):
        np.testing.assert_allclose(mat.entries, forced_decode_matrix(m, p).entries, atol=1e-12)


def test_unknown_source_token_keeps_column():
    m, _ = tiny_model()
    mat = forced_decode_matrix(m, make_pair("p", "x NEVER-SEEN", ["ab"]))
    assert mat.shape == (2, 2)


def test_average_matrices():
    a = SoftAlignmentMatrix(np.array([[1.0, 0.0]]), ("x", "y"), ("a",))
    b = SoftAlignmentMatrix(np.array([[0.0, 1.0]]), ("x", "y"), ("a",))
    np.testing.assert_array_equal(average_matrices([a, b]).entries, [[0.5, 0.5]])
    np.testing.assert_array_equal(average_matrices([a, a]).entries, a.entries)
    with pytest.raises(NeuralError):
        average_matrices([a, SoftAlignmentMatrix(np.ones((1, 1)), ("x",), ("a",))])


def test_matrix_shape_checked():
    with pytest.raises(NeuralError):
        SoftAlignmentMatrix(np.ones((2, 2)) / 2, ("x",), ("a", "b"))


def test_greedy_decode_zero_len():
    m, _ = tiny_model()
    assert greedy_decode(m, ["x"], 0) == []
    assert greedy_decode(m, ["x", "y"], 5) == greedy_decode(m, ["x", "y"], 5)


def _toy_corpus(n=40):
    return copy_corpus(n, vocab=4, min_len=2, max_len=4, seed=9)


def test_zero_learning_rate_keeps_parameters():
    c = _toy_corpus()
    cfg = TrainConfig(epochs=1, learning_rate=0.0, seed=2, batch_size=8)
    m, log = train_model(c, c, cfg, SMALL)
    fresh = AttentionModel(m.src_vocab, m.tgt_vocab, SMALL, seed=2)
    for k, v in fresh.arrays().items():
        np.testing.assert_array_equal(m.arrays()[k], v)
    assert len(log.epochs) == 2


def test_training_deterministic():
    c = _toy_corpus()
    cfg = TrainConfig(epochs=3, seed=5, batch_size=8)
    _, a = train_model(c, c, cfg, SMALL)
    _, b = train_model(c, c, cfg, SMALL)
    assert a.epochs == b.epochs


def test_training_rejects_empty():
    with pytest.raises(NeuralError):
        train_model(ParallelCorpus(()), ParallelCorpus(()))


def test_checkpoint_round_trip(tmp_path):
    m, _ = tiny_model()
    m32 = AttentionModel(m.src_vocab, m.tgt_vocab, SMALL, seed=1)
    save_model(m32, tmp_path / "m.ckpt")
    back = load_model(tmp_path / "m.ckpt")
    assert back.config == m32.config and back.tgt_vocab == m32.tgt_vocab
    for k, v in m32.arrays().items():
        np.testing.assert_array_equal(back.arrays()[k], v)


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad"
    p.write_bytes(b"hello\nend\n")
    with pytest.raises(NeuralError):
        load_model(p)


def test_copy_task():
    corpus = copy_corpus(500, seed=0)
    train, valid = split_train_valid(corpus, 0.1, 0)
    model, log = train_model(train, valid, TrainConfig(epochs=40, seed=1), SMALL)
    v0 = log.epochs[0]["valid_loss"]
    assert log.best_valid <= 0.1 * v0
    offsets = []
    for mat in forced_decode_matrices(model, list(valid)):
        T, A = mat.shape
        offsets.append(np.mean([abs(int(np.argmax(mat.entries[t])) - t * A / T) for t in range(T)]))
    assert np.mean(offsets) <= 1.0
    exact = [greedy_decode(model, p.source_tokens, 20) == list(p.target_phonemes) for p in valid]
    assert np.mean(exact) >= 0.9
