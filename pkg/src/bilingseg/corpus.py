"""Parallel corpus ingestion, filtering, splitting and soft-boundary handling.

Corpus files are UTF-8 TSV with exactly three fields per line::

    id<TAB>source words<TAB>target phonemes, words separated by spaces

Spaces in the third field mark the gold word boundaries of the target side.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

DEFAULT_MARKER = "‹B›"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Segmentation:
    """Boundary positions over a sequence of ``length`` phonemes.

    A boundary ``b`` sits after the ``b``-th phoneme, so ``0 < b < length``.
    """

    boundaries: tuple[int, ...]
    length: int

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if self.length < 0:
            raise CorpusError(f"negative segmentation length {self.length}")
        for prev, cur in zip(b, b[1:]):
            if cur <= prev:
                raise CorpusError(f"boundaries not strictly increasing: {b}")
        if b and (b[0] <= 0 or b[-1] >= self.length):
            raise CorpusError(f"boundaries {b} outside (0, {self.length})")

    @classmethod
    def from_positions(cls, positions: Iterable[int], length: int) -> "Segmentation":
        """Build from an unordered collection; edges and duplicates are dropped."""
        return cls(tuple(sorted({p for p in positions if 0 < p < length})), length)

    @classmethod
    def from_lengths(cls, lengths: Sequence[int]) -> "Segmentation":
        pos, acc = [], 0
        for n in lengths[:-1]:
            acc += n
            pos.append(acc)
        return cls(tuple(pos), sum(lengths))

    def spans(self) -> list[tuple[int, int]]:
        cuts = (0, *self.boundaries, self.length)
        return list(zip(cuts, cuts[1:])) if self.length else []

    def words(self, symbols: Sequence[str]) -> list[tuple[str, ...]]:
        if len(symbols) != self.length:
            raise CorpusError(f"{len(symbols)} symbols for segmentation of length {self.length}")
        return [tuple(symbols[i:j]) for i, j in self.spans()]

    def render(self, symbols: Sequence[str]) -> str:
        """Field-3 style string: phonemes joined, words separated by spaces."""
        return " ".join("".join(w) for w in self.words(symbols))


@dataclass(frozen=True)
class UtterancePair:
    id: str
    source_tokens: tuple[str, ...]
    target_phonemes: tuple[str, ...]
    gold_boundaries: Segmentation | None = None

    def __post_init__(self):
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        object.__setattr__(self, "target_phonemes", tuple(self.target_phonemes))
        if not self.source_tokens:
            raise CorpusError(f"{self.id}: empty source side")
        if not self.target_phonemes:
            raise CorpusError(f"{self.id}: empty target side")
        if self.gold_boundaries is not None and self.gold_boundaries.length != len(self.target_phonemes):
            raise CorpusError(f"{self.id}: gold segmentation length does not match target")

    def gold_words(self) -> list[tuple[str, ...]]:
        seg = self.gold_boundaries or Segmentation((), len(self.target_phonemes))
        return seg.words(self.target_phonemes)


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[UtterancePair, ...]
    source_language: str = "src"
    target_language: str = "tgt"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        index = {}
        for i, p in enumerate(self.pairs):
            if p.id in index:
                raise CorpusError(f"duplicate id {p.id!r}")
            index[p.id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, key: str) -> UtterancePair:
        return self.pairs[self._index[key]]

    def __contains__(self, key: str) -> bool:
        return key in self._index

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.pairs]

    def subset(self, ids: Iterable[str]) -> "ParallelCorpus":
        keep = set(ids)
        return self.with_pairs(p for p in self.pairs if p.id in keep)

    def with_pairs(self, pairs: Iterable[UtterancePair]) -> "ParallelCorpus":
        return ParallelCorpus(tuple(pairs), self.source_language, self.target_language)


def load_inventory(path: str | Path) -> list[str]:
    """Read a phoneme inventory sidecar: one symbol per line, blank lines ignored."""
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def tokenize_phonemes(word: str, inventory: Sequence[str] | None = None) -> list[str]:
    """Split a joined phoneme word into symbols.

    Without an inventory every character is a symbol. With one, the longest
    inventory symbol matching at each position wins.
    """
    if inventory is None:
        return list(word)
    symbols = sorted(set(inventory), key=len, reverse=True)
    out, i = [], 0
    while i < len(word):
        for s in symbols:
            if word.startswith(s, i):
                out.append(s)
                i += len(s)
                break
        else:
            raise CorpusError(f"no inventory symbol matches {word[i:]!r} in {word!r}")
    return out


def parse_line(line: str, lineno: int, inventory: Sequence[str] | None = None) -> UtterancePair:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 3:
        raise CorpusError(f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}")
    uid, src, tgt = fields
    phonemes, lengths = [], []
    for word in tgt.split():
        symbols = tokenize_phonemes(word, inventory)
        phonemes.extend(symbols)
        lengths.append(len(symbols))
    try:
        return UtterancePair(uid, tuple(src.split()), tuple(phonemes), Segmentation.from_lengths(lengths))
    except CorpusError as e:
        raise CorpusError(f"line {lineno}: {e}") from None


def load_corpus(
    path: str | Path,
    source_lang: str,
    target_lang: str,
    inventory: Sequence[str] | str | Path | None = None,
) -> ParallelCorpus:
    if isinstance(inventory, (str, Path)):
        inventory = load_inventory(inventory)
    pairs, seen = [], {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            pair = parse_line(line, lineno, inventory)
            if pair.id in seen:
                raise CorpusError(f"line {lineno}: duplicate id {pair.id!r} (first on line {seen[pair.id]})")
            seen[pair.id] = lineno
            pairs.append(pair)
    logger.info("loaded %d pairs from %s", len(pairs), path)
    return ParallelCorpus(tuple(pairs), source_lang, target_lang)


def format_pair(pair: UtterancePair, seg: Segmentation | None = None) -> str:
    seg = seg or pair.gold_boundaries or Segmentation((), len(pair.target_phonemes))
    return f"{pair.id}\t{' '.join(pair.source_tokens)}\t{seg.render(pair.target_phonemes)}"


def write_corpus(
    path: str | Path,
    corpus: ParallelCorpus,
    segmentations: dict[str, Segmentation] | None = None,
) -> None:
    """Write pairs in TSV form; field 3 is spaced by ``segmentations`` when given."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in corpus:
            seg = segmentations[p.id] if segmentations is not None else None
            f.write(format_pair(p, seg) + "\n")


def filter_by_length(corpus: ParallelCorpus, pivot: ParallelCorpus, max_tokens: int = 100) -> ParallelCorpus:
    """Keep pairs whose pivot-language sentence has at most ``max_tokens`` tokens."""
    missing = [i for i in corpus.ids if i not in pivot]
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise CorpusError(f"{len(missing)} ids missing from pivot: {shown}")
    return corpus.with_pairs(p for p in corpus if len(pivot[p.id].source_tokens) <= max_tokens)


def _split_key(uid: str, seed: int) -> bytes:
    return hashlib.sha256(f"{seed}\x00{uid}".encode("utf-8")).digest()


def split_ids(ids: Iterable[str], valid_fraction: float = 0.1, seed: int = 0) -> tuple[list[str], list[str]]:
    """Split an id set into (train, valid) as a function of the ids and seed only."""
    ids = sorted(set(ids))
    if not 0 < valid_fraction < 1:
        raise CorpusError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    if len(ids) < 2:
        raise CorpusError("need at least 2 pairs to split")
    n_valid = int(round(valid_fraction * len(ids)))
    ranked = sorted(ids, key=lambda u: _split_key(u, seed))
    valid = set(ranked[:n_valid])
    return [u for u in ids if u not in valid], [u for u in ids if u in valid]


def split_train_valid(
    corpus: ParallelCorpus, valid_fraction: float = 0.1, seed: int = 0
) -> tuple[ParallelCorpus, ParallelCorpus]:
    train_ids, valid_ids = split_ids(corpus.ids, valid_fraction, seed)
    return corpus.subset(train_ids), corpus.subset(valid_ids)


def insert_soft_boundaries(
    phonemes: Sequence[str],
    seg: Segmentation,
    marker: str = DEFAULT_MARKER,
    inventory: Iterable[str] | None = None,
) -> list[str]:
    """Insert ``marker`` after each boundary position of ``seg``."""
    inv = set(phonemes) if inventory is None else set(inventory)
    if marker in inv:
        raise CorpusError(f"marker {marker!r} collides with the phoneme inventory")
    if seg.length != len(phonemes):
        raise CorpusError(f"segmentation length {seg.length} != {len(phonemes)} phonemes")
    out: list[str] = []
    cuts = set(seg.boundaries)
    for i, ph in enumerate(phonemes):
        if i in cuts:
            out.append(marker)
        out.append(ph)
    return out


def remove_soft_boundaries(spans: Sequence[Sequence[str]], marker: str = DEFAULT_MARKER) -> Segmentation:
    """Map a segmentation of an augmented sequence back onto the bare phonemes.

    Markers are deleted. A marker inside a hypothesized word contributes
    nothing; a hypothesized boundary next to a marker lands between the
    flanking phonemes. Coinciding boundaries collapse into one.
    """
    ends, n = [], 0
    for span in spans:
        n += sum(1 for s in span if s != marker)
        ends.append(n)
    return Segmentation.from_positions(ends, n)


def strip_marker(symbols: Iterable[str], marker: str = DEFAULT_MARKER) -> list[str]:
    return [s for s in symbols if s != marker]


def corpus_stats(corpus: ParallelCorpus, side: str) -> dict[str, float]:
    """Types, tokens, mean token length and mean tokens per sentence.

    On the source side a token is a word and its length counts characters. On
    the target side tokens are the gold words and length counts phonemes;
    ``symbols_per_sentence`` gives phonemes per sentence.
    """
    if not len(corpus):
        raise CorpusError("statistics of an empty corpus")
    if side == "source":
        sentences = [list(p.source_tokens) for p in corpus]
        lengths = [len(t) for s in sentences for t in s]
        symbols = sum(lengths)
    elif side == "target":
        sentences = [["".join(w) for w in p.gold_words()] for p in corpus]
        lengths = [len(w) for p in corpus for w in p.gold_words()]
        symbols = sum(len(p.target_phonemes) for p in corpus)
    else:
        raise CorpusError(f"side must be 'source' or 'target', got {side!r}")
    counts = Counter(t for s in sentences for t in s)
    n_tokens = sum(counts.values())
    return {
        "types": len(counts),
        "tokens": n_tokens,
        "mean_token_length": sum(lengths) / n_tokens,
        "tokens_per_sentence": n_tokens / len(sentences),
        "symbols_per_sentence": symbols / len(sentences),
    }


def pair_corpus(source: ParallelCorpus, target: ParallelCorpus) -> ParallelCorpus:
    """Join two language files by id: words of ``source``, phonemes of ``target``.

    Each language file carries its own text in field 2 and its own
    phonemization in field 3. Order follows ``target``.
    """
    missing = [i for i in target.ids if i not in source]
    extra = [i for i in source.ids if i not in target]
    if missing or extra:
        raise CorpusError(
            f"{source.source_language}/{target.target_language}: ids differ "
            f"({len(missing)} missing from source, {len(extra)} missing from target)")
    pairs = (UtterancePair(p.id, source[p.id].source_tokens, p.target_phonemes, p.gold_boundaries) for p in target)
    return ParallelCorpus(tuple(pairs), source.source_language, target.target_language)
