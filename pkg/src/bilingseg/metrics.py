"""Segmentation, translation and correlation scores."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from scipy import special

from .corpus import Segmentation


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass(frozen=True)
class BoundaryScore:
    proposed: int
    gold: int
    correct: int

    @property
    def precision(self) -> float:
        return self.correct / self.proposed if self.proposed else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        return _f1(self.precision, self.recall)

    def __add__(self, other: "BoundaryScore") -> "BoundaryScore":
        return BoundaryScore(self.proposed + other.proposed, self.gold + other.gold, self.correct + other.correct)


def boundary_prf(gold: Segmentation, hyp: Segmentation) -> BoundaryScore:
    """Counts over interior boundaries; utterance edges never count."""
    if gold.length != hyp.length:
        raise ValueError(f"length mismatch: gold {gold.length}, hyp {hyp.length}")
    g, h = set(gold.boundaries), set(hyp.boundaries)
    return BoundaryScore(len(h), len(g), len(g & h))


def corpus_boundary_prf(gold: Iterable[Segmentation], hyp: Iterable[Segmentation]) -> BoundaryScore:
    total = BoundaryScore(0, 0, 0)
    for g, h in zip(gold, hyp, strict=True):
        total = total + boundary_prf(g, h)
    return total


@dataclass(frozen=True)
class TypeScore:
    precision: float
    recall: float
    f1: float
    correct: frozenset
    hyp_types: int
    gold_types: int


def segmentation_types(symbols: Iterable[Sequence[str]], segs: Iterable[Segmentation]) -> set[str]:
    return {"".join(w) for s, seg in zip(symbols, segs, strict=True) for w in seg.words(s)}


def type_metrics(gold_types: Iterable[str], hyp_types: Iterable[str]) -> TypeScore:
    """Type retrieval: correct = hypothesized types that are gold types."""
    g, h = set(gold_types), set(hyp_types)
    correct = g & h
    p = len(correct) / len(h) if h else 0.0
    r = len(correct) / len(g) if g else 0.0
    return TypeScore(p, r, _f1(p, r), frozenset(correct), len(h), len(g))


def type_intersection(a: Iterable[str], b: Iterable[str]) -> int:
    return len(set(a) & set(b))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU-4 on a 0-100 scale: unsmoothed modified precisions and brevity penalty."""
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references differ in count")
    if not hypotheses:
        raise ValueError("empty hypothesis set")
    match = [0] * 4
    total = [0] * 4
    hyp_len = ref_len = 0
    for h, r in zip(hypotheses, references):
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, 5):
            hn, rn = _ngrams(h, n), _ngrams(r, n)
            match[n - 1] += sum(min(c, rn[g]) for g, c in hn.items())
            total[n - 1] += max(len(h) - n + 1, 0)
    if min(match) == 0:
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(match, total)) / 4
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """Correlation and two-tailed p-value from Student's t with N-2 degrees of freedom."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("xs and ys differ in length")
    if n < 3:
        raise ValueError("need at least 3 points")
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t2 = r * r * df / (1 - r * r)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return r, float(special.betainc(df / 2, 0.5, df / (df + t2)))


def mean_token_length(segs: Iterable[Segmentation]) -> float:
    lengths = [j - i for s in segs for i, j in s.spans()]
    if not lengths:
        raise ValueError("no tokens")
    return sum(lengths) / len(lengths)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    proposed: int
    gold: int
    correct: int
    type_precision: float
    type_recall: float
    type_f1: float
    types: int
    mean_token_length: float
    bleu: float | None = None
    ane_mean: float | None = None
    ane_min: float | None = None
    ane_max: float | None = None

    def to_tsv(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}\t{'' if v is None else repr(v)}\n")
        return "".join(lines)

    @classmethod
    def from_tsv(cls, text: str) -> "EvalReport":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for line in text.splitlines():
            k, v = line.split("\t")
            if v == "":
                kw[k] = None
            elif types[k] == "int":
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)


def evaluate(
    symbols: Sequence[Sequence[str]],
    gold: Sequence[Segmentation],
    hyp: Sequence[Segmentation],
    bleu: float | None = None,
    anes: Sequence[float] | None = None,
) -> EvalReport:
    b = corpus_boundary_prf(gold, hyp)
    ts = type_metrics(segmentation_types(symbols, gold), segmentation_types(symbols, hyp))
    kw = {}
    if anes:
        kw = {"ane_mean": sum(anes) / len(anes), "ane_min": min(anes), "ane_max": max(anes)}
    return EvalReport(b.precision, b.recall, b.f1, b.proposed, b.gold, b.correct,
                      ts.precision, ts.recall, ts.f1, ts.hyp_types, mean_token_length(hyp), bleu, **kw)
