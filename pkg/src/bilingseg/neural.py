"""Attention encoder-decoder from translation words to phoneme sequences.

The encoder is a bidirectional GRU over source word embeddings; its
annotations ``H = h_1..h_A`` are attended by a two-layer GRU decoder. At
each target step the first decoder layer reads the previous symbol, its
state queries the attention (``alpha = softmax(align(h_i, s))``, context
``c = sum_i alpha_i h_i``), and the second layer reads ``[s; c]``. The
attention rows recorded under teacher forcing are the soft-alignment
matrices used for segmentation.
"""

from __future__ import annotations

import io
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .corpus import ParallelCorpus, UtterancePair

logger = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
RESERVED = (PAD, BOS, EOS, UNK)


class NeuralError(ValueError):
    pass


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.itos)) != len(self.itos):
            raise NeuralError("vocabulary has duplicate entries")
        if self.itos[: len(RESERVED)] != RESERVED:
            raise NeuralError("reserved tokens must open the vocabulary")
        object.__setattr__(self, "_stoi", {t: i for i, t in enumerate(self.itos)})

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self._stoi

    def index(self, token: str) -> int:
        return self._stoi.get(token, 3)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self._stoi.get(t, 3) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    pad, bos, eos, unk = 0, 1, 2, 3


def build_vocab(sentences: Iterable[Sequence[str]], min_count: int = 1, extra: Sequence[str] = ()) -> Vocab:
    """Vocabulary ordered by descending frequency, then lexicographically.

    ``extra`` symbols (the soft-boundary marker) are reserved right after the
    special tokens whether or not they occur.
    """
    counts = Counter(t for s in sentences for t in s)
    head = list(RESERVED) + [t for t in extra if t not in RESERVED]
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in head), key=lambda t: (-counts[t], t))
    return Vocab(tuple(head + kept))


@dataclass(frozen=True)
class ModelConfig:
    src_emb: int = 64
    tgt_emb: int = 16
    enc_hidden: int = 64
    dec_hidden: int = 64
    att_hidden: int = 64
    dtype: str = "float32"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 1
    patience: int = 10
    clip_norm: float = 5.0


@dataclass(frozen=True)
class SoftAlignmentMatrix:
    """T x A attention weights: row t is the distribution over source tokens at target step t."""

    entries: np.ndarray
    source_tokens: tuple[str, ...]
    target_symbols: tuple[str, ...]
    invalid_rows: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=np.float64))
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        object.__setattr__(self, "target_symbols", tuple(self.target_symbols))
        if self.entries.shape != (len(self.target_symbols), len(self.source_tokens)):
            raise NeuralError(
                f"matrix shape {self.entries.shape} does not match "
                f"{len(self.target_symbols)} target x {len(self.source_tokens)} source tokens")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def bad_rows(self, tol: float = 1e-5) -> list[int]:
        e = self.entries
        ok = np.all(e >= 0, axis=1) & (np.abs(e.sum(axis=1) - 1.0) <= tol)
        return [int(i) for i in np.flatnonzero(~ok)]

    def validate(self, tol: float = 1e-5) -> "SoftAlignmentMatrix":
        bad = self.bad_rows(tol)
        if bad:
            raise NeuralError(f"rows {bad} are not probability distributions")
        return self


def average_matrices(matrices: Sequence[SoftAlignmentMatrix]) -> SoftAlignmentMatrix:
    if not matrices:
        raise NeuralError("nothing to average")
    first = matrices[0]
    for m in matrices[1:]:
        if m.shape != first.shape:
            raise NeuralError(f"shape mismatch: {m.shape} vs {first.shape}")
        if m.source_tokens != first.source_tokens or m.target_symbols != first.target_symbols:
            raise NeuralError("matrices belong to different sentence pairs")
    mean = np.mean([m.entries for m in matrices], axis=0)
    return SoftAlignmentMatrix(mean, first.source_tokens, first.target_symbols)


def _glorot(rng, n_in, n_out, dtype):
    lim = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-lim, lim, size=(n_in, n_out)).astype(dtype)


def init_params(n_src: int, n_tgt: int, cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    dt = np.dtype(cfg.dtype)
    E, He, Hd, K, Et = cfg.src_emb, cfg.enc_hidden, cfg.dec_hidden, cfg.att_hidden, cfg.tgt_emb
    ctx = 2 * He
    p = {
        "src_emb": (rng.standard_normal((n_src, E)) * 0.1).astype(dt),
        "tgt_emb": (rng.standard_normal((n_tgt, Et)) * 0.1).astype(dt),
    }
    for d in ("fwd", "bwd"):
        p[f"enc_{d}_wx"] = _glorot(rng, E, 3 * He, dt)
        p[f"enc_{d}_bx"] = np.zeros(3 * He, dt)
        p[f"enc_{d}_wh"] = _glorot(rng, He, 3 * He, dt)
        p[f"enc_{d}_bh"] = np.zeros(3 * He, dt)
    p["att_wh"] = _glorot(rng, ctx, K, dt)
    p["att_ws"] = _glorot(rng, Hd, K, dt)
    p["att_b"] = np.zeros(K, dt)
    p["att_v"] = _glorot(rng, K, 1, dt)
    for layer, n_in in (("dec1", Et), ("dec2", Hd + ctx)):
        p[f"{layer}_wx"] = _glorot(rng, n_in, 3 * Hd, dt)
        p[f"{layer}_bx"] = np.zeros(3 * Hd, dt)
        p[f"{layer}_wh"] = _glorot(rng, Hd, 3 * Hd, dt)
        p[f"{layer}_bh"] = np.zeros(3 * Hd, dt)
        p[f"{layer}_init_w"] = _glorot(rng, ctx, Hd, dt)
        p[f"{layer}_init_b"] = np.zeros(Hd, dt)
    p["out_w"] = _glorot(rng, Hd + ctx, n_tgt, dt)
    p["out_b"] = np.zeros(n_tgt, dt)
    return p


@dataclass
class Batch:
    src: np.ndarray        # (B, A) int
    src_mask: np.ndarray   # (B, A) bool
    tgt_in: np.ndarray     # (B, T+1) int, BOS-prefixed
    tgt_out: np.ndarray    # (B, T+1) int, EOS-terminated
    tgt_mask: np.ndarray   # (B, T+1) bool
    src_lens: np.ndarray
    tgt_lens: np.ndarray   # without EOS

    @property
    def n_tokens(self) -> int:
        return int(self.tgt_mask.sum())


def make_batch(src_seqs: Sequence[Sequence[int]], tgt_seqs: Sequence[Sequence[int]]) -> Batch:
    if not src_seqs or any(len(s) == 0 for s in src_seqs):
        raise NeuralError("empty source sequence")
    if any(len(t) == 0 for t in tgt_seqs):
        raise NeuralError("empty target sequence")
    B = len(src_seqs)
    A = max(len(s) for s in src_seqs)
    T1 = max(len(t) for t in tgt_seqs) + 1
    src = np.zeros((B, A), np.int64)
    tgt_in = np.zeros((B, T1), np.int64)
    tgt_out = np.zeros((B, T1), np.int64)
    for b, (s, t) in enumerate(zip(src_seqs, tgt_seqs)):
        src[b, :len(s)] = s
        tgt_in[b, 0] = Vocab.bos
        tgt_in[b, 1:len(t) + 1] = t
        tgt_out[b, :len(t)] = t
        tgt_out[b, len(t)] = Vocab.eos
    src_lens = np.array([len(s) for s in src_seqs])
    tgt_lens = np.array([len(t) for t in tgt_seqs])
    return Batch(src, np.arange(A)[None, :] < src_lens[:, None], tgt_in, tgt_out,
                 np.arange(T1)[None, :] <= tgt_lens[:, None], src_lens, tgt_lens)


class AttentionModel:
    """Parameters plus vocabularies; the forward pass builds an autodiff graph."""

    def __init__(self, src_vocab: Vocab, tgt_vocab: Vocab, config: ModelConfig | None = None,
                 seed: int = 0, params: dict[str, np.ndarray] | None = None):
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.config = config or ModelConfig()
        if params is None:
            params = init_params(len(src_vocab), len(tgt_vocab), self.config, seed)
        self.params = {k: ad.parameter(v) for k, v in params.items()}

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def copy(self) -> "AttentionModel":
        return AttentionModel(self.src_vocab, self.tgt_vocab, self.config,
                              params={k: v.copy() for k, v in self.arrays().items()})

    def batch(self, pairs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> Batch:
        return make_batch([self.src_vocab.encode(s) for s, _ in pairs], [self.tgt_vocab.encode(t) for _, t in pairs])

    # -- forward pieces -------------------------------------------------
    def encode(self, src: np.ndarray, src_mask: np.ndarray):
        p = self.params
        B, A = src.shape
        dt = self.dtype
        He = self.config.enc_hidden
        mask = src_mask.astype(dt)
        states = {}
        for d, order in (("fwd", range(A)), ("bwd", range(A - 1, -1, -1))):
            h = ad.Tensor(np.zeros((B, He), dt))
            out = [None] * A
            for i in order:
                gx = ad.embedding(p["src_emb"], src[:, i]) @ p[f"enc_{d}_wx"] + p[f"enc_{d}_bx"]
                h = ad.gru_cell(gx, h, p[f"enc_{d}_wh"], p[f"enc_{d}_bh"], mask[:, i:i + 1])
                out[i] = h
            states[d] = out
        H = ad.stack([ad.concat([f, b], axis=1) for f, b in zip(states["fwd"], states["bwd"])], axis=1)
        lens = mask.sum(axis=1, keepdims=True)
        mean = ad.sum(H * mask[:, :, None], axis=1) * (1.0 / lens)
        return H, mean

    def _init_states(self, mean):
        p = self.params
        return (ad.tanh(mean @ p["dec1_init_w"] + p["dec1_init_b"]),
                ad.tanh(mean @ p["dec2_init_w"] + p["dec2_init_b"]))

    def _attend(self, H, Hp, query, src_mask):
        p = self.params
        B, A = src_mask.shape
        q = ad.reshape(query @ p["att_ws"], (B, 1, -1))
        scores = ad.reshape(ad.tanh(Hp + q + p["att_b"]) @ p["att_v"], (B, A))
        alpha = ad.softmax(scores, src_mask)
        return alpha, ad.weighted_sum(alpha, H)

    def attend(self, H: np.ndarray, query: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Attention over annotations ``H`` (A, 2*enc_hidden) for one decoder state.

        Returns the weights (A,) and the context vector ``sum_i alpha_i h_i``.
        """
        H = ad.Tensor(np.asarray(H, self.dtype)[None])
        Hp = H @ self.params["att_wh"]
        mask = np.ones((1, H.shape[1]), bool)
        alpha, c = self._attend(H, Hp, ad.Tensor(np.asarray(query, self.dtype)[None]), mask)
        return alpha.data[0], c.data[0]

    def _step(self, prev_ids, u, s, H, Hp, src_mask):
        p = self.params
        e = ad.embedding(p["tgt_emb"], prev_ids)
        u = ad.gru_cell(e @ p["dec1_wx"] + p["dec1_bx"], u, p["dec1_wh"], p["dec1_bh"])
        alpha, c = self._attend(H, Hp, u, src_mask)
        s = ad.gru_cell(ad.concat([u, c], axis=1) @ p["dec2_wx"] + p["dec2_bx"], s, p["dec2_wh"], p["dec2_bh"])
        return u, s, alpha, ad.concat([s, c], axis=1)

    def forward(self, batch: Batch):
        """Teacher-forced pass: (summed token NLL, list of attention Tensors per step)."""
        p = self.params
        H, mean = self.encode(batch.src, batch.src_mask)
        Hp = H @ p["att_wh"]
        u, s = self._init_states(mean)
        outs, alphas = [], []
        for t in range(batch.tgt_in.shape[1]):
            u, s, alpha, o = self._step(batch.tgt_in[:, t], u, s, H, Hp, batch.src_mask)
            outs.append(o)
            alphas.append(alpha)
        B, T1 = batch.tgt_in.shape
        O = ad.reshape(ad.stack(outs, axis=1), (B * T1, -1))
        logits = O @ p["out_w"] + p["out_b"]
        nll = ad.cross_entropy(logits, batch.tgt_out.reshape(-1), batch.tgt_mask.reshape(-1))
        return nll, alphas

    def loss(self, batch: Batch) -> ad.Tensor:
        """Mean NLL per target token (EOS included)."""
        nll, _ = self.forward(batch)
        return nll * (1.0 / batch.n_tokens)

    def attention(self, batch: Batch) -> np.ndarray:
        """Attention weights (B, T+1, A) under teacher forcing."""
        _, alphas = self.forward(batch)
        return np.stack([a.data for a in alphas], axis=1)


class Adam:
    def __init__(self, params: dict[str, ad.Tensor], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr, self.b1, self.b2, self.eps = params, lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p.data = (p.data - update).astype(p.data.dtype)


def compute_grads(model: AttentionModel, batch: Batch) -> tuple[float, dict[str, np.ndarray]]:
    for t in model.params.values():
        t.grad = None
    loss = model.loss(batch)
    loss.backward()
    grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in model.params.items()}
    return float(loss.data), grads


def _pairs_of(corpus: ParallelCorpus):
    return [(p.source_tokens, p.target_phonemes) for p in corpus]


def _batches(model, pairs, batch_size, rng=None):
    """Length-bucketed batches; shuffled when ``rng`` is given, else in order."""
    idx = np.arange(len(pairs))
    if rng is not None:
        idx = rng.permutation(len(pairs))
    pool = batch_size * 50
    groups = []
    for start in range(0, len(idx), pool):
        chunk = sorted(idx[start:start + pool], key=lambda i: (len(pairs[i][1]), i))
        groups.extend(chunk[j:j + batch_size] for j in range(0, len(chunk), batch_size))
    if rng is not None:
        groups = [groups[i] for i in rng.permutation(len(groups))]
    for g in groups:
        yield g, model.batch([pairs[i] for i in g])


def evaluate_loss(model: AttentionModel, corpus: ParallelCorpus, batch_size: int = 64) -> float:
    pairs = _pairs_of(corpus)
    total = n = 0.0
    for _, b in _batches(model, pairs, batch_size):
        nll, _ = model.forward(b)
        total += float(nll.data)
        n += b.n_tokens
    return total / n


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_valid: float = math.inf


def train_model(
    train: ParallelCorpus,
    valid: ParallelCorpus,
    config: TrainConfig | None = None,
    model_config: ModelConfig | None = None,
    src_vocab: Vocab | None = None,
    tgt_vocab: Vocab | None = None,
    extra_target_symbols: Sequence[str] = (),
) -> tuple[AttentionModel, TrainingLog]:
    """Minimize teacher-forced cross-entropy with Adam; keep the best-on-valid parameters.

    Epoch 0 in the log is the untrained model. Training stops early after
    ``patience`` epochs without validation improvement.
    """
    cfg = config or TrainConfig()
    if not len(train):
        raise NeuralError("empty training set")
    src_vocab = src_vocab or build_vocab(p.source_tokens for p in train)
    tgt_vocab = tgt_vocab or build_vocab((p.target_phonemes for p in train), extra=extra_target_symbols)
    model = AttentionModel(src_vocab, tgt_vocab, model_config, seed=cfg.seed)
    opt = Adam(model.params, lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    pairs = _pairs_of(train)
    eval_on = valid if len(valid) else train
    log = TrainingLog()
    v0 = evaluate_loss(model, eval_on)
    log.epochs.append({"epoch": 0, "train_loss": None, "valid_loss": v0})
    log.best_epoch, log.best_valid = 0, v0
    best = model.copy()
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        total = tokens = 0.0
        for bi, (_, batch) in enumerate(_batches(model, pairs, cfg.batch_size, rng)):
            loss, grads = compute_grads(model, batch)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            if cfg.clip_norm:
                norm = math.sqrt(float(np.sum([np.sum(g.astype(np.float64) ** 2) for g in grads.values()])))
                if norm > cfg.clip_norm:
                    grads = {k: g * (cfg.clip_norm / norm) for k, g in grads.items()}
            opt.step(grads)
            total += loss * batch.n_tokens
            tokens += batch.n_tokens
        v = evaluate_loss(model, eval_on)
        log.epochs.append({"epoch": epoch, "train_loss": total / tokens, "valid_loss": v})
        logger.info("epoch %d train %.4f valid %.4f", epoch, total / tokens, v)
        if v < log.best_valid:
            log.best_epoch, log.best_valid = epoch, v
            best = model.copy()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, log.best_epoch)
                break
    return best, log


def forced_decode_matrices(model: AttentionModel, pairs: Sequence[UtterancePair],
                           batch_size: int = 64) -> list[SoftAlignmentMatrix]:
    """Attention matrices for many pairs, decoding their reference targets."""
    out: list[SoftAlignmentMatrix | None] = [None] * len(pairs)
    seqs = [(p.source_tokens, p.target_phonemes) for p in pairs]
    for s, t in seqs:
        if not s or not t:
            raise NeuralError("empty source or target")
    for idx, batch in _batches(model, seqs, batch_size):
        att = model.attention(batch)
        for row, i in enumerate(idx):
            A, T = batch.src_lens[row], batch.tgt_lens[row]
            m = SoftAlignmentMatrix(att[row, :T, :A], seqs[i][0], seqs[i][1])
            out[i] = m.validate()
    return out


def forced_decode_matrix(model: AttentionModel, pair: UtterancePair) -> SoftAlignmentMatrix:
    if not pair.source_tokens or not pair.target_phonemes:
        raise NeuralError("empty source or target")
    return forced_decode_matrices(model, [pair])[0]


def greedy_decode(model: AttentionModel, source_tokens: Sequence[str], max_len: int) -> list[str]:
    """Argmax decoding until EOS or ``max_len`` symbols."""
    if max_len <= 0:
        return []
    p = model.params
    src = np.array([model.src_vocab.encode(source_tokens)])
    mask = np.ones_like(src, dtype=bool)
    H, mean = model.encode(src, mask)
    Hp = H @ p["att_wh"]
    u, s = model._init_states(mean)
    prev = np.array([Vocab.bos])
    out = []
    for _ in range(max_len):
        u, s, _, o = model._step(prev, u, s, H, Hp, mask)
        logits = o.data @ p["out_w"].data + p["out_b"].data
        k = int(np.argmax(logits[0]))
        if k == Vocab.eos:
            break
        out.append(model.tgt_vocab.itos[k])
        prev = np.array([k])
    return out


def gradient_check(model: AttentionModel, batch: Batch, epsilon: float = 1e-5,
                   floor: float = 1e-4, fd_dtype: str | None = None) -> tuple[float, dict[str, float]]:
    """Compare backprop gradients to central differences on every parameter entry.

    Returns the overall max relative error ``|a - n| / max(|a|, |n|, floor)``
    and the per-tensor maxima. Use a float64 model. Double-precision
    differences carry ~1e-11 absolute roundoff, so ``floor`` keeps near-zero
    gradients from dominating; pass ``fd_dtype="longdouble"`` to evaluate the
    differences in extended precision and afford a much smaller floor.
    """
    if batch.tgt_lens.size == 0 or np.any(batch.tgt_lens == 0):
        raise NeuralError("gradient check needs nonempty targets")
    _, grads = compute_grads(model, batch)
    probe = model if fd_dtype is None else with_dtype(model, fd_dtype)
    eps = probe.dtype.type(epsilon)
    per = {}
    for name, t in probe.params.items():
        worst = 0.0
        flat = t.data.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            lp = probe.loss(batch).data
            flat[i] = old - eps
            lm = probe.loss(batch).data
            flat[i] = old
            num = float((lp - lm) / (2 * eps))
            err = abs(g[i] - num) / max(abs(g[i]), abs(num), floor)
            worst = max(worst, err)
        per[name] = worst
    return max(per.values()), per


# -- checkpoints -------------------------------------------------------------

_MAGIC = "bilingseg-checkpoint 1"


def save_model(model: AttentionModel, path: str | Path) -> None:
    """Text header (config, vocabularies, tensor names and shapes), then raw little-endian float32."""
    path = Path(path)
    arrays = model.arrays()
    head = io.StringIO()
    head.write(_MAGIC + "\n")
    for k, v in asdict(model.config).items():
        head.write(f"config {k} {v}\n")
    for side, voc in (("src", model.src_vocab), ("tgt", model.tgt_vocab)):
        head.write(f"vocab {side} {len(voc)}\n")
        for tok in voc.itos:
            head.write(tok + "\n")
    for name, a in arrays.items():
        head.write(f"tensor {name} {' '.join(map(str, a.shape))}\n")
    head.write("end\n")
    with open(path, "wb") as f:
        f.write(head.getvalue().encode("utf-8"))
        for a in arrays.values():
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_model(path: str | Path) -> AttentionModel:
    with open(path, "rb") as f:
        raw = f.read()
    lines, pos = [], 0
    while True:
        nl = raw.index(b"\n", pos)
        line = raw[pos:nl].decode("utf-8")
        pos = nl + 1
        lines.append(line)
        if line == "end":
            break
    if lines[0] != _MAGIC:
        raise NeuralError(f"{path}: not a checkpoint")
    cfg, vocabs, shapes = {}, {}, []
    i = 1
    while lines[i] != "end":
        kind, rest = lines[i].split(" ", 1)
        if kind == "config":
            k, v = rest.split(" ", 1)
            cfg[k] = v if k == "dtype" else int(v)
            i += 1
        elif kind == "vocab":
            side, n = rest.split()
            vocabs[side] = Vocab(tuple(lines[i + 1:i + 1 + int(n)]))
            i += 1 + int(n)
        elif kind == "tensor":
            name, *dims = rest.split()
            shapes.append((name, tuple(int(d) for d in dims)))
            i += 1
        else:
            raise NeuralError(f"{path}: bad header line {lines[i]!r}")
    config = ModelConfig(**cfg)
    params = {}
    for name, shape in shapes:
        n = int(np.prod(shape))
        params[name] = np.frombuffer(raw, "<f4", count=n, offset=pos).reshape(shape).astype(config.dtype)
        pos += 4 * n
    if pos != len(raw):
        raise NeuralError(f"{path}: {len(raw) - pos} trailing bytes")
    return AttentionModel(vocabs["src"], vocabs["tgt"], config, params=params)


def with_dtype(model: AttentionModel, dtype: str) -> AttentionModel:
    cfg = replace(model.config, dtype=dtype)
    return AttentionModel(model.src_vocab, model.tgt_vocab, cfg,
                          params={k: v.astype(dtype) for k, v in model.arrays().items()})
