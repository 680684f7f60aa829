"""Synthetic corpora with known word boundaries, for experiments and tests."""

from __future__ import annotations

import string

import numpy as np

from .corpus import ParallelCorpus, Segmentation, UtterancePair

PHONEMES = tuple("aeioubdfgklmnprstvz")


def random_lexicon(
    n_words: int,
    min_len: int,
    max_len: int,
    rng: np.random.Generator,
    inventory: tuple[str, ...] = PHONEMES,
) -> list[tuple[str, ...]]:
    """Distinct phoneme strings with lengths uniform in [min_len, max_len]."""
    seen, out = set(), []
    while len(out) < n_words:
        n = int(rng.integers(min_len, max_len + 1))
        w = tuple(inventory[i] for i in rng.integers(0, len(inventory), size=n))
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _pair(uid: str, source: list[str], words: list[tuple[str, ...]]) -> UtterancePair:
    phonemes = tuple(p for w in words for p in w)
    return UtterancePair(uid, tuple(source), phonemes, Segmentation.from_lengths([len(w) for w in words]))


def zipf_corpus(
    n_utterances: int = 5000,
    n_words: int = 100,
    min_len: int = 2,
    max_len: int = 6,
    max_words: int = 6,
    exponent: float = 1.0,
    seed: int = 0,
) -> ParallelCorpus:
    """Utterances of 1..max_words words drawn from a Zipfian unigram lexicon.

    The source side just names the lexicon entries; it is not used by the
    monolingual sampler.
    """
    rng = np.random.default_rng(seed)
    lexicon = random_lexicon(n_words, min_len, max_len, rng)
    weights = 1.0 / np.arange(1, n_words + 1) ** exponent
    weights /= weights.sum()
    pairs = []
    for u in range(n_utterances):
        k = int(rng.integers(1, max_words + 1))
        idx = rng.choice(n_words, size=k, p=weights)
        pairs.append(_pair(f"z{u:05d}", [f"w{i}" for i in idx], [lexicon[i] for i in idx]))
    return ParallelCorpus(tuple(pairs), "lex", "syn")


def bilingual_corpus(
    n_sentences: int = 3000,
    n_words: int = 50,
    min_len: int = 3,
    max_len: int = 8,
    min_words: int = 3,
    max_words: int = 10,
    seed: int = 0,
) -> ParallelCorpus:
    """Word-for-word parallel corpus.

    Every source word maps to one fixed phoneme string; a target sentence is
    the concatenation of the translations of its source words, in order.
    Source spellings are random letter strings, so their lengths carry no
    information about phoneme counts.
    """
    rng = np.random.default_rng(seed)
    lexicon = random_lexicon(n_words, min_len, max_len, rng)
    letters = string.ascii_uppercase
    sources, seen = [], set()
    while len(sources) < n_words:
        n = int(rng.integers(2, 9))
        w = "".join(letters[i] for i in rng.integers(0, len(letters), size=n))
        if w not in seen:
            seen.add(w)
            sources.append(w)
    pairs = []
    for s in range(n_sentences):
        k = int(rng.integers(min_words, max_words + 1))
        idx = rng.integers(0, n_words, size=k)
        pairs.append(_pair(f"b{s:05d}", [sources[i] for i in idx], [lexicon[i] for i in idx]))
    return ParallelCorpus(tuple(pairs), "src", "tgt")


def copy_corpus(n_pairs: int = 500, vocab: int = 8, min_len: int = 3, max_len: int = 8, seed: int = 0) -> ParallelCorpus:
    """Source tokens equal target symbols, one target word per source token."""
    rng = np.random.default_rng(seed)
    symbols = [chr(ord("a") + i) for i in range(vocab)]
    pairs = []
    for s in range(n_pairs):
        n = int(rng.integers(min_len, max_len + 1))
        toks = [symbols[i] for i in rng.integers(0, vocab, size=n)]
        pairs.append(_pair(f"c{s:05d}", toks, [(t,) for t in toks]))
    return ParallelCorpus(tuple(pairs), "copy", "copy")
