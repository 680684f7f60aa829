"""Segmentation and alignment from soft-alignment matrices, plus confidence ranking."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Collection, Iterable, Sequence

import numpy as np

from .corpus import DEFAULT_MARKER, Segmentation, remove_soft_boundaries
from .neural import SoftAlignmentMatrix


@dataclass(frozen=True)
class AlignedSegmentation:
    segmentation: Segmentation
    span_alignments: tuple[int, ...]
    source_tokens: tuple[str, ...]
    target_symbols: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.span_alignments) != len(self.segmentation.spans()):
            raise ValueError("one source index per span required")
        if any(not 0 <= i < len(self.source_tokens) for i in self.span_alignments):
            raise ValueError("span aligned outside the source sentence")

    def pairs(self) -> list[tuple[str, str]]:
        """(target span string, source token) for every span."""
        words = self.segmentation.words(self.target_symbols)
        return [("".join(w), self.source_tokens[i]) for w, i in zip(words, self.span_alignments)]


@dataclass(frozen=True)
class ConfidenceEntry:
    span: str
    source: str
    ane: float
    frequency: int = 1


def _argmax_rows(entries: np.ndarray, column_mask: np.ndarray | None) -> np.ndarray:
    e = entries
    if column_mask is not None:
        e = np.where(column_mask[None, :], e, -np.inf)
    return np.argmax(e, axis=1)  # first maximum wins: ties go to the lowest index


def source_mask(source_tokens: Sequence[str], masked: Collection[str]) -> np.ndarray | None:
    """Column mask excluding ``masked`` tokens (e.g. punctuation); None if nothing masked
    or if masking would leave no column."""
    if not masked:
        return None
    m = np.array([t not in masked for t in source_tokens])
    return m if m.any() else None


def attention_segment(matrix: SoftAlignmentMatrix, masked_sources: Collection[str] = ()) -> AlignedSegmentation:
    """Cut between adjacent target positions whose attention peaks at different source tokens."""
    peaks = _argmax_rows(matrix.entries, source_mask(matrix.source_tokens, masked_sources))
    T = len(peaks)
    cuts = [t for t in range(1, T) if peaks[t] != peaks[t - 1]]
    starts = [0, *cuts]
    return AlignedSegmentation(Segmentation(tuple(cuts), T), tuple(int(peaks[s]) for s in starts),
                               matrix.source_tokens, matrix.target_symbols)


def hybrid_segment(matrix: SoftAlignmentMatrix, marker: str = DEFAULT_MARKER,
                   masked_sources: Collection[str] = ()) -> AlignedSegmentation:
    """Attention segmentation of a marker-augmented target, mapped back to the bare phonemes.

    Each surviving span is aligned to the source token with the largest
    summed attention over the span's phoneme rows (marker rows excluded).
    """
    aug = attention_segment(matrix, masked_sources)
    symbols = matrix.target_symbols
    seg = remove_soft_boundaries(aug.segmentation.words(symbols), marker)
    keep = [t for t, s in enumerate(symbols) if s != marker]
    rows = matrix.entries[keep]
    mask = source_mask(matrix.source_tokens, masked_sources)
    if mask is not None:
        rows = np.where(mask[None, :], rows, -np.inf)
    links = tuple(int(np.argmax(rows[i:j].sum(axis=0))) for i, j in seg.spans())
    return AlignedSegmentation(seg, links, matrix.source_tokens, tuple(symbols[t] for t in keep))


def proportional_segment(source_lengths: Sequence[int], T: int) -> Segmentation:
    """Share ``T`` phonemes among source words in proportion to their letter counts.

    Boundary after word k sits at round-half-up(T * cumlen_k / total).
    """
    if not source_lengths or any(n < 1 for n in source_lengths) or T < 1:
        raise ValueError("need positive source word lengths and T >= 1")
    total = sum(source_lengths)
    cuts, acc = [], 0
    for n in source_lengths[:-1]:
        acc += n
        cuts.append(math.floor(Fraction(T * acc, total) + Fraction(1, 2)))
    return Segmentation.from_positions(cuts, T)


def proportional_align(source_tokens: Sequence[str], T: int, target_symbols: Sequence[str] = ()) -> AlignedSegmentation:
    """Proportional segmentation; boundaries that collapse leave later words unaligned."""
    seg = proportional_segment([len(t) for t in source_tokens], T)
    total = sum(len(t) for t in source_tokens)
    ends, acc = [], 0
    for t in source_tokens:
        acc += len(t)
        ends.append(Fraction(T * acc, total))
    links = []
    for i, j in seg.spans():
        mid = Fraction(i + j, 2)
        links.append(next(k for k, e in enumerate(ends) if mid <= e))
    return AlignedSegmentation(seg, tuple(links), tuple(source_tokens), tuple(target_symbols))


def average_normalized_entropy(matrix: SoftAlignmentMatrix | np.ndarray) -> float:
    """Mean over rows of entropy / ln(A); 0 for a single source token."""
    e = matrix.entries if isinstance(matrix, SoftAlignmentMatrix) else np.asarray(matrix, dtype=float)
    T, A = e.shape
    if A == 1 or T == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(e > 0, e * np.log(e), 0.0).sum(axis=1)
    return float(np.clip(h.mean() / math.log(A), 0.0, 1.0))


def rank_alignments(items: Iterable[tuple[AlignedSegmentation, float]]) -> list[ConfidenceEntry]:
    """Aggregate (span, source) pairs over sentences, most confident first.

    ``items`` holds each sentence's aligned segmentation with its ANE. A pair
    seen in several sentences keeps its lowest ANE and counts occurrences.
    """
    best: dict[tuple[str, str], float] = {}
    freq: dict[tuple[str, str], int] = defaultdict(int)
    for aligned, ane in items:
        for key in aligned.pairs():
            freq[key] += 1
            if key not in best or ane < best[key]:
                best[key] = ane
    entries = [ConfidenceEntry(s, src, best[(s, src)], freq[(s, src)]) for s, src in best]
    entries.sort(key=lambda e: (e.ane, -e.frequency, e.span, e.source))
    return entries


@dataclass(frozen=True)
class IntersectionResult:
    percentage: float
    k: int
    truncated: bool


def _top_correct(ranking: Sequence[ConfidenceEntry], gold: Collection[str], k: int) -> list[str]:
    out, seen = [], set()
    for e in ranking:
        if e.span in gold and e.span not in seen:
            seen.add(e.span)
            out.append(e.span)
            if len(out) == k:
                break
    return out


def topk_type_intersection(ranking_a: Sequence[ConfidenceEntry], ranking_b: Sequence[ConfidenceEntry],
                           gold_lexicon: Collection[str], k: int = 200) -> IntersectionResult:
    """Share of the top-k gold-correct types common to both rankings, in percent.

    When either ranking has fewer than k correct types the smaller count is
    used as k and the result is flagged ``truncated``.
    """
    a = _top_correct(ranking_a, gold_lexicon, k)
    b = _top_correct(ranking_b, gold_lexicon, k)
    k_used = min(k, len(a), len(b))
    if k_used == 0:
        return IntersectionResult(0.0, 0, True)
    common = len(set(a[:k_used]) & set(b[:k_used]))
    return IntersectionResult(100.0 * common / k_used, k_used, k_used < k)


def format_ranking(entries: Iterable[ConfidenceEntry]) -> str:
    return "".join(f"{e.ane!r}\t{e.frequency}\t{e.span}\t{e.source}\n" for e in entries)
