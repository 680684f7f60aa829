"""Unsupervised word segmentation of phoneme sequences with sentence-aligned translations."""

from .corpus import DEFAULT_MARKER, ParallelCorpus, Segmentation, UtterancePair, load_corpus
from .neural import SoftAlignmentMatrix

__all__ = ["DEFAULT_MARKER", "ParallelCorpus", "Segmentation", "SoftAlignmentMatrix", "UtterancePair", "load_corpus"]
__version__ = "0.1.0"
