"""Monolingual word segmentation with a Dirichlet-process unigram lexicon.

Words are drawn from a Chinese-restaurant-process predictive distribution
whose base measure generates phoneme strings with a geometric length
distribution. Boundaries are resampled one position at a time with an
annealed Gibbs sampler.
"""

from __future__ import annotations

import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import ParallelCorpus, Segmentation

logger = logging.getLogger(__name__)

# Phonemes are mapped to private-use code points so a word is a plain str:
# cheap to slice, hash and count.
_CODE_BASE = 0xF0000


class BayesError(ValueError):
    pass


@dataclass(frozen=True)
class BayesHyperparams:
    alpha0: float = 20.0
    p_hash: float = 0.5
    phoneme_base: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise BayesError(f"alpha0 must be > 0, got {self.alpha0}")
        if not 0 < self.p_hash < 1:
            raise BayesError(f"p_hash must be in (0, 1), got {self.p_hash}")
        if any(v < 0 for v in self.phoneme_base.values()):
            raise BayesError("negative phoneme base probability")
        if self.phoneme_base and abs(sum(self.phoneme_base.values()) - 1.0) > 1e-9:
            raise BayesError("phoneme base probabilities must sum to 1")

    @classmethod
    def uniform(cls, inventory: Sequence[str], alpha0: float = 20.0, p_hash: float = 0.5) -> "BayesHyperparams":
        inv = sorted(set(inventory))
        return cls(alpha0, p_hash, {s: 1.0 / len(inv) for s in inv})


@dataclass
class LexiconState:
    """Word-type counts; ``total`` is always the sum of ``counts``."""

    counts: dict = field(default_factory=dict)
    total: int = 0

    def add(self, word) -> None:
        self.counts[word] = self.counts.get(word, 0) + 1
        self.total += 1

    def remove(self, word) -> None:
        c = self.counts[word] - 1
        if c:
            self.counts[word] = c
        else:
            del self.counts[word]
        self.total -= 1

    def check(self) -> None:
        if self.total != sum(self.counts.values()) or any(c <= 0 for c in self.counts.values()):
            raise BayesError("lexicon counts inconsistent")


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler schedule. ``annealing`` lists (temperature, sweep-count) stages."""

    sweeps: int = 2000
    annealing: tuple[tuple[float, int], ...] = ()
    seed: int = 0
    init_boundary_prob: float = 0.3

    def __post_init__(self):
        if self.sweeps < 1:
            raise BayesError("sweeps must be >= 1")
        if not self.annealing:
            object.__setattr__(self, "annealing", default_schedule(self.sweeps))
        if any(t <= 0 for t, _ in self.annealing):
            raise BayesError("temperatures must be > 0")
        if sum(n for _, n in self.annealing) != self.sweeps:
            raise BayesError("annealing stages must add up to `sweeps`")


def default_schedule(sweeps: int) -> tuple[tuple[float, int], ...]:
    temps = (2.0, 1.5, 1.2, 1.0)
    fracs = (0.1, 0.2, 0.2, 0.5)
    counts = [int(sweeps * f) for f in fracs[:-1]]
    counts.append(sweeps - sum(counts))
    return tuple((t, n) for t, n in zip(temps, counts) if n > 0)


def base_prob(word: Sequence[str], hp: BayesHyperparams) -> float:
    """Geometric-length base measure: p#(1-p#)^(|w|-1) times the phoneme probabilities."""
    if not word:
        raise BayesError("empty word")
    p = hp.p_hash * (1.0 - hp.p_hash) ** (len(word) - 1)
    for ph in word:
        try:
            p *= hp.phoneme_base[ph]
        except KeyError:
            raise BayesError(f"unknown phoneme {ph!r}") from None
    return p


def crp_word_prob(word: Sequence[str], state: LexiconState, hp: BayesHyperparams) -> float:
    """Predictive probability (n_w + alpha0 P0(w)) / (n + alpha0)."""
    n_w = state.counts.get(tuple(word), 0)
    return (n_w + hp.alpha0 * base_prob(word, hp)) / (state.total + hp.alpha0)


class _Encoded:
    """Utterances as code-point strings plus per-utterance prefix sums of log P(phoneme)."""

    def __init__(self, utterances: Sequence[Sequence[str]], hp: BayesHyperparams):
        symbols = sorted(hp.phoneme_base)
        self.code = {s: chr(_CODE_BASE + i) for i, s in enumerate(symbols)}
        self.symbol = {c: s for s, c in self.code.items()}
        logp = {}
        for s in symbols:
            p = hp.phoneme_base[s]
            logp[self.code[s]] = math.log(p) if p > 0 else -math.inf
        self.texts = []
        self.prefix = []
        for utt in utterances:
            try:
                text = "".join(self.code[s] for s in utt)
            except KeyError as e:
                raise BayesError(f"unknown phoneme {e.args[0]!r}") from None
            acc = [0.0]
            for c in text:
                acc.append(acc[-1] + logp[c])
            self.texts.append(text)
            self.prefix.append(acc)
        self.log_hash = math.log(hp.p_hash)
        self.log_cont = math.log1p(-hp.p_hash)

    def p0(self, u: int, i: int, j: int) -> float:
        pre = self.prefix[u]
        return math.exp(self.log_hash + (j - i - 1) * self.log_cont + pre[j] - pre[i])

    def decode(self, word: str) -> tuple[str, ...]:
        return tuple(self.symbol[c] for c in word)


def _words(text: str, flags: Sequence[int]) -> list[str]:
    out, start = [], 0
    for k in range(1, len(text) + 1):
        if flags[k]:
            out.append(text[start:k])
            start = k
    return out


def _state_from(enc: _Encoded, flags: Sequence[bytearray]) -> LexiconState:
    counts = Counter()
    for text, f in zip(enc.texts, flags):
        counts.update(_words(text, f))
    return LexiconState(dict(counts), sum(counts.values()))


def _sweep(enc: _Encoded, flags: list[bytearray], state: LexiconState, hp: BayesHyperparams,
           temperature: float, rng: random.Random) -> None:
    counts = state.counts
    alpha = hp.alpha0
    power = 1.0 / temperature
    sharpen = temperature != 1.0
    for u, text in enumerate(enc.texts):
        f = flags[u]
        T = len(text)
        for k in range(1, T):
            left = k - 1
            while not f[left]:
                left -= 1
            right = k + 1
            while not f[right]:
                right += 1
            w = text[left:right]
            w1 = text[left:k]
            w2 = text[k:right]
            # remove the current word(s) over [left, right)
            if f[k]:
                for x in (w1, w2):
                    c = counts[x] - 1
                    if c:
                        counts[x] = c
                    else:
                        del counts[x]
                n = state.total - 2
            else:
                c = counts[w] - 1
                if c:
                    counts[w] = c
                else:
                    del counts[w]
                n = state.total - 1
            p_join = (counts.get(w, 0) + alpha * enc.p0(u, left, right)) / (n + alpha)
            p_split = ((counts.get(w1, 0) + alpha * enc.p0(u, left, k)) / (n + alpha)
                       * (counts.get(w2, 0) + (w1 == w2) + alpha * enc.p0(u, k, right)) / (n + 1 + alpha))
            if sharpen and p_join > 0 and p_split > 0:
                # P(split) = 1 / (1 + (p_join/p_split)^(1/T)), kept finite for small T
                z = power * math.log(p_join / p_split)
                p_boundary = 0.0 if z > 700 else 1.0 / (1.0 + math.exp(z))
                split = rng.random() < p_boundary
            else:
                split = rng.random() * (p_join + p_split) < p_split
            if split:
                f[k] = 1
                counts[w1] = counts.get(w1, 0) + 1
                counts[w2] = counts.get(w2, 0) + 1
                state.total = n + 2
            else:
                f[k] = 0
                counts[w] = counts.get(w, 0) + 1
                state.total = n + 1


def _flags_from(segs: Sequence[Segmentation]) -> list[bytearray]:
    out = []
    for s in segs:
        f = bytearray(s.length + 1)
        f[0] = f[s.length] = 1
        for b in s.boundaries:
            f[b] = 1
        out.append(f)
    return out


def _segs_from(flags: Sequence[bytearray]) -> list[Segmentation]:
    return [Segmentation(tuple(k for k in range(1, len(f) - 1) if f[k]), len(f) - 1) for f in flags]


def gibbs_sweep(
    utterances: Sequence[Sequence[str]],
    segmentations: Sequence[Segmentation],
    state: LexiconState,
    hp: BayesHyperparams,
    temperature: float,
    rng: random.Random,
    check: bool = True,
) -> tuple[list[Segmentation], LexiconState]:
    """One pass over every interior position of every utterance.

    ``state`` must hold exactly the words induced by ``segmentations`` (as
    tuples of phonemes). Returns fresh segmentations and a fresh state; the
    inputs are not modified.
    """
    if temperature <= 0:
        raise BayesError("temperature must be > 0")
    enc = _Encoded(utterances, hp)
    flags = _flags_from(segmentations)
    internal = _state_from(enc, flags)
    if check:
        expected = Counter({tuple(enc.decode(w)): c for w, c in internal.counts.items()})
        if Counter(state.counts) != expected or state.total != internal.total:
            raise BayesError("lexicon state does not match the segmentations")
    _sweep(enc, flags, internal, hp, temperature, rng)
    out = LexiconState({enc.decode(w): c for w, c in internal.counts.items()}, internal.total)
    return _segs_from(flags), out


def state_from_segmentations(utterances: Sequence[Sequence[str]], segs: Sequence[Segmentation]) -> LexiconState:
    counts = Counter(w for utt, s in zip(utterances, segs) for w in s.words(utt))
    return LexiconState(dict(counts), sum(counts.values()))


def joint_log_prob(state: LexiconState, hp: BayesHyperparams) -> float:
    """log P(word sequence) under the DP, from type counts (order-free by exchangeability).

    The base measure is discrete, so each type contributes
    Gamma(n_w + a P0) / Gamma(a P0) rather than (n_w - 1)! a P0.
    """
    a, n = hp.alpha0, state.total
    lp = math.lgamma(a) - math.lgamma(a + n)
    for w, c in state.counts.items():
        ap0 = a * base_prob(w, hp)
        lp += math.lgamma(c + ap0) - math.lgamma(ap0)
    return lp


@dataclass
class BayesResult:
    segmentations: dict[str, Segmentation]
    state: LexiconState
    log: list[dict]


def segment_utterances(
    utterances: Sequence[Sequence[str]],
    hp: BayesHyperparams | None = None,
    cfg: GibbsConfig | None = None,
) -> tuple[list[Segmentation], LexiconState, list[dict]]:
    cfg = cfg or GibbsConfig()
    if not utterances:
        raise BayesError("nothing to segment")
    if hp is None:
        hp = BayesHyperparams.uniform({s for u in utterances for s in u})
    elif not hp.phoneme_base:
        hp = BayesHyperparams.uniform({s for u in utterances for s in u}, hp.alpha0, hp.p_hash)
    rng = random.Random(cfg.seed)
    enc = _Encoded(utterances, hp)
    flags = []
    for text in enc.texts:
        f = bytearray(len(text) + 1)
        f[0] = f[-1] = 1
        for k in range(1, len(text)):
            f[k] = rng.random() < cfg.init_boundary_prob
        flags.append(f)
    state = _state_from(enc, flags)
    log = []
    done = 0
    for temperature, n_sweeps in cfg.annealing:
        for _ in range(n_sweeps):
            _sweep(enc, flags, state, hp, temperature, rng)
            done += 1
        decoded = LexiconState({enc.decode(w): c for w, c in state.counts.items()}, state.total)
        lp = joint_log_prob(decoded, hp)
        log.append({"temperature": temperature, "sweeps": done, "log_prob": lp,
                    "types": len(state.counts), "tokens": state.total})
        logger.info("T=%.2f sweeps=%d logP=%.2f types=%d tokens=%d",
                    temperature, done, lp, len(state.counts), state.total)
    final = LexiconState({enc.decode(w): c for w, c in state.counts.items()}, state.total)
    return _segs_from(flags), final, log


def segment_corpus(
    corpus: ParallelCorpus,
    hp: BayesHyperparams | None = None,
    cfg: GibbsConfig | None = None,
) -> BayesResult:
    """Segment the target side of ``corpus``; deterministic given ``cfg.seed``."""
    if not len(corpus):
        raise BayesError("empty corpus")
    segs, state, log = segment_utterances([p.target_phonemes for p in corpus], hp, cfg)
    return BayesResult({p.id: s for p, s in zip(corpus, segs)}, state, log)
