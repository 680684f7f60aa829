import pytest
from hypothesis import given, strategies as st

from bilingseg.corpus import (
    CorpusError, DEFAULT_MARKER, ParallelCorpus, Segmentation, corpus_stats, filter_by_length,
    insert_soft_boundaries, load_corpus, load_inventory, pair_corpus, remove_soft_boundaries,
    split_train_valid, tokenize_phonemes, write_corpus,
)
from conftest import make_pair

B = DEFAULT_MARKER


def write(tmp_path, text, name="c.tsv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_single_line(tmp_path):
    c = load_corpus(write(tmp_path, "u1\tthe cat\tD@ kat\n"), "en", "en")
    p = c["u1"]
    assert p.source_tokens == ("the", "cat")
    assert p.target_phonemes == ("D", "@", "k", "a", "t")
    assert p.gold_boundaries.boundaries == (2,)


def test_load_wrong_field_count_names_line(tmp_path):
    with pytest.raises(CorpusError, match="line 1"):
        load_corpus(write(tmp_path, "u1\tonly-two-fields\n"), "en", "en")


def test_load_duplicate_id(tmp_path):
    with pytest.raises(CorpusError, match="duplicate"):
        load_corpus(write(tmp_path, "u1\ta\tb\nu1\tc\td\n"), "en", "en")


def test_load_empty_file(tmp_path):
    assert len(load_corpus(write(tmp_path, ""), "en", "en")) == 0


def test_inventory_multichar_symbols(tmp_path):
    inv = write(tmp_path, "tS\na\nt\nS\n", "inv.txt")
    c = load_corpus(write(tmp_path, "u1\tchat\ttSat\n"), "en", "en", inventory=inv)
    assert c["u1"].target_phonemes == ("tS", "a", "t")
    assert load_inventory(inv) == ["tS", "a", "t", "S"]


def test_inventory_unknown_symbol():
    with pytest.raises(CorpusError):
        tokenize_phonemes("ax", ["a"])


def test_write_then_load_round_trip(tmp_path, toy_corpus):
    path = tmp_path / "out.tsv"
    write_corpus(path, toy_corpus)
    again = load_corpus(path, "en-text", "en")
    assert again.pairs == toy_corpus.pairs


def test_filter_by_length_inclusive():
    corpus = ParallelCorpus((make_pair("a", "x", ["ab"]), make_pair("b", "x", ["ab"])))
    pivot = ParallelCorpus((make_pair("a", " ".join(["w"] * 100), ["x"]),
                            make_pair("b", " ".join(["w"] * 101), ["x"])))
    kept = filter_by_length(corpus, pivot, 100)
    assert kept.ids == ["a"]


def test_filter_missing_pivot_ids():
    corpus = ParallelCorpus((make_pair("a", "x", ["ab"]), make_pair("zz", "x", ["ab"])))
    pivot = ParallelCorpus((make_pair("a", "w", ["x"]),))
    with pytest.raises(CorpusError, match="zz"):
        filter_by_length(corpus, pivot)


def _corpus(n, prefix="s"):
    return ParallelCorpus(tuple(make_pair(f"{prefix}{i:04d}", "w", ["ab"]) for i in range(n)))


def test_split_sizes():
    train, valid = split_train_valid(_corpus(10), 0.1, seed=3)
    assert (len(train), len(valid)) == (9, 1)


def test_split_same_ids_same_split():
    a = _corpus(50)
    b = ParallelCorpus(tuple(make_pair(p.id, "other words", ["xyz"]) for p in reversed(a.pairs)))
    assert set(split_train_valid(a, 0.1, 7)[1].ids) == set(split_train_valid(b, 0.1, 7)[1].ids)


def test_split_seed_changes_valid_set():
    c = _corpus(1000)
    assert set(split_train_valid(c, 0.1, 1)[1].ids) != set(split_train_valid(c, 0.1, 2)[1].ids)


def test_split_errors():
    with pytest.raises(CorpusError):
        split_train_valid(_corpus(1), 0.1, 0)
    with pytest.raises(CorpusError):
        split_train_valid(_corpus(10), 1.0, 0)


@given(st.integers(2, 300), st.floats(0.01, 0.99), st.integers(0, 2**31))
def test_split_partitions(n, frac, seed):
    c = _corpus(n)
    train, valid = split_train_valid(c, frac, seed)
    assert set(train.ids) | set(valid.ids) == set(c.ids)
    assert not set(train.ids) & set(valid.ids)
    assert len(valid) == round(frac * n)


def test_insert_soft_boundaries_figure_example():
    seg = Segmentation((1,), 7)
    assert insert_soft_boundaries(list("aintrat"), seg, B) == ["a", B, "i", "n", "t", "r", "a", "t"]


def test_insert_identity_and_two_markers():
    assert insert_soft_boundaries(list("abc"), Segmentation((), 3), B) == list("abc")
    assert insert_soft_boundaries(list("abc"), Segmentation((1, 2), 3), B) == ["a", B, "b", B, "c"]


def test_insert_marker_collision():
    with pytest.raises(CorpusError):
        insert_soft_boundaries(["a", "#"], Segmentation((1,), 2), "#")


def test_remove_soft_boundaries_kept_boundary():
    seg = remove_soft_boundaries([["a", B], list("intrat")], B)
    assert seg == Segmentation((1,), 7)


def test_remove_soft_boundaries_interior_marker():
    word = ["u", "r", "a", "t", B, "d", "e", "b", "i", "n", "e"]
    assert remove_soft_boundaries([word], B).boundaries == ()


def test_remove_marker_free_identity():
    assert remove_soft_boundaries([["a"], ["b"]], B) == Segmentation((1,), 2)


def test_remove_collapses_duplicates():
    assert remove_soft_boundaries([["a"], [B], ["b"]], B) == Segmentation((1,), 2)


@st.composite
def seq_and_seg(draw):
    n = draw(st.integers(1, 30))
    phonemes = draw(st.lists(st.sampled_from("abcdefg"), min_size=n, max_size=n))
    cuts = draw(st.sets(st.integers(1, max(n - 1, 1)), max_size=n)) if n > 1 else set()
    return phonemes, Segmentation.from_positions(cuts, n)


@given(seq_and_seg(), st.booleans())
def test_soft_boundary_round_trip(data, marker_alone):
    phonemes, seg = data
    aug = insert_soft_boundaries(phonemes, seg, B)
    spans, cur = [], []
    for s in aug:
        if s == B:
            if marker_alone:
                spans.extend([cur, [B]])
                cur = []
            else:
                spans.append(cur + [B])
                cur = []
        else:
            cur.append(s)
    spans.append(cur)
    spans = [s for s in spans if s]
    assert remove_soft_boundaries(spans, B) == seg


@given(seq_and_seg())
def test_gold_render_round_trip(data):
    phonemes, seg = data
    line = " ".join("".join(w) for w in seg.words(phonemes))
    assert seg.render(phonemes) == line
    assert Segmentation.from_lengths([len(w) for w in line.split()]) == seg


@given(st.lists(st.integers(0, 150), min_size=1, max_size=30), st.integers(0, 150))
def test_filter_is_subsequence(lengths, max_tokens):
    corpus = ParallelCorpus(tuple(make_pair(f"i{k}", "x", ["a"]) for k in range(len(lengths))))
    pivot = ParallelCorpus(tuple(make_pair(f"i{k}", " ".join(["w"] * max(n, 1)), ["a"]) for k, n in enumerate(lengths)))
    kept = filter_by_length(corpus, pivot, max_tokens).ids
    it = iter(corpus.ids)
    assert all(k in it for k in kept)


def test_corpus_stats_arithmetic():
    c = ParallelCorpus((make_pair("1", "a b", ["x"]), make_pair("2", "a", ["y"])))
    s = corpus_stats(c, "source")
    assert s["types"] == 2 and s["tokens"] == 3
    assert s["tokens_per_sentence"] == 1.5
    assert s["mean_token_length"] == 1.0


def test_corpus_stats_target_side(toy_corpus):
    s = corpus_stats(toy_corpus, "target")
    assert s["tokens"] == 5 and s["types"] == 5
    assert s["mean_token_length"] == pytest.approx(14 / 5)
    assert s["symbols_per_sentence"] == pytest.approx(7.0)


def test_corpus_stats_empty():
    with pytest.raises(CorpusError):
        corpus_stats(ParallelCorpus(()), "source")


def test_segmentation_invariants():
    with pytest.raises(CorpusError):
        Segmentation((0,), 3)
    with pytest.raises(CorpusError):
        Segmentation((2, 1), 3)
    assert Segmentation((1, 3), 5).spans() == [(0, 1), (1, 3), (3, 5)]


def test_pair_corpus_joins_by_id(toy_corpus):
    fr = ParallelCorpus((make_pair("u2", "un chien", ["9"]), make_pair("u1", "le chat", ["l@", "Sa"])))
    pc = pair_corpus(fr, toy_corpus)
    assert pc.ids == ["u1", "u2"]
    assert pc["u1"].source_tokens == ("le", "chat")
    assert pc["u1"].target_phonemes == tuple("D@kat")
    with pytest.raises(CorpusError):
        pair_corpus(fr.subset(["u1"]), toy_corpus)
