import numpy as np
import pytest

from bilingseg.corpus import ParallelCorpus, Segmentation, UtterancePair


def make_pair(uid, source, words):
    phonemes = tuple(p for w in words for p in w)
    return UtterancePair(uid, tuple(source.split()), phonemes, Segmentation.from_lengths([len(w) for w in words]))


@pytest.fixture
def toy_corpus():
    return ParallelCorpus((
        make_pair("u1", "the cat", ["D@", "kat"]),
        make_pair("u2", "a dog barks", ["@", "dOg", "barks"]),
    ), "en-text", "en")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
