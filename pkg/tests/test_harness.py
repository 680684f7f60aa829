import dataclasses
import warnings

import numpy as np
import pytest

from bilingseg import cli, harness
from bilingseg.corpus import load_corpus
from bilingseg.harness import (
    HarnessError, Manifest, RunReport, emit_grid_report, load_manifest, load_matrix, run_grid,
    run_pair, save_matrix,
)
from bilingseg.neural import SoftAlignmentMatrix

LANG_A = {
    "s1": ("the cat sleeps", "D@ kat slips"),
    "s2": ("a dog", "@ dOg"),
    "s3": ("the dog sleeps", "D@ dOg slips"),
    "s4": ("a cat", "@ kat"),
    "s5": ("the cat", "D@ kat"),
}
LANG_B = {
    "s1": ("le chat dort", "l@ Sa dOR"),
    "s2": ("un chien", "9 SjE"),
    "s3": ("le chien dort", "l@ SjE dOR"),
    "s4": ("un chat", "9 Sa"),
    "s5": ("le chat", "l@ Sa"),
}
TINY_MODEL = {"src_emb": 8, "tgt_emb": 4, "enc_hidden": 8, "dec_hidden": 8, "att_hidden": 8}
FAST_NEURAL = {"epochs": 2, "batch_size": 2}


def write_lang(path, rows):
    path.write_text("".join(f"{k}\t{w}\t{p}\n" for k, (w, p) in rows.items()), encoding="utf-8")
    return str(path)


@pytest.fixture
def manifest(tmp_path):
    corpora = {"aa": write_lang(tmp_path / "aa.tsv", LANG_A), "bb": write_lang(tmp_path / "bb.tsv", LANG_B)}
    return Manifest(corpora=corpora, output=str(tmp_path / "runs"), mode="proportional",
                    valid_fraction=0.2, bayes={"sweeps": 20}, neural=FAST_NEURAL, model=TINY_MODEL)


# -- matrix files

def test_matrix_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    e = rng.random((3, 4))
    e /= e.sum(axis=1, keepdims=True)
    m = SoftAlignmentMatrix(e, ("w", "x", "y", "z"), ("a", "b", "c"))
    save_matrix(m, tmp_path / "m.mat")
    back = load_matrix(tmp_path / "m.mat")
    assert np.array_equal(back.entries, m.entries)
    assert back.source_tokens == m.source_tokens and back.target_symbols == m.target_symbols
    assert (tmp_path / "m.mat").read_text().splitlines()[0] == "3 4"


def test_matrix_header_mismatch(tmp_path):
    p = tmp_path / "bad.mat"
    p.write_text("3 2\n0.5 0.5\n1 0\nx y\na b c\n")
    with pytest.raises(HarnessError):
        load_matrix(p)


def test_matrix_malformed_header(tmp_path):
    p = tmp_path / "bad.mat"
    p.write_text("three two\n")
    with pytest.raises(HarnessError):
        load_matrix(p)


def test_matrix_invalid_row_warns(tmp_path):
    p = tmp_path / "m.mat"
    p.write_text("2 2\n0.5 0.3\n1 0\nx y\na b\n")
    with pytest.warns(UserWarning):
        m = load_matrix(p)
    assert m.invalid_rows == (0,)


# -- manifest

def test_load_manifest(tmp_path):
    write_lang(tmp_path / "aa.tsv", LANG_A)
    write_lang(tmp_path / "bb.tsv", LANG_B)
    (tmp_path / "m.ini").write_text(
        "[corpora]\naa = aa.tsv\nbb = bb.tsv\n"
        "[experiment]\nmode = hybrid\noutput = out\npairs = aa>bb\nseeds = 3 4\npivot = aa\n"
        "[neural]\nepochs = 5\nlearning_rate = 0.01\n[model]\nsrc_emb = 8\n")
    m = load_manifest(tmp_path / "m.ini")
    assert m.mode == "hybrid" and m.pairs == [("aa", "bb")] and m.seeds == [3, 4]
    assert m.corpora["aa"] == str(tmp_path / "aa.tsv")
    tc = m.train_config(4)
    assert (tc.epochs, tc.learning_rate, tc.seed) == (5, 0.01, 4)
    assert m.model_config().src_emb == 8


def test_manifest_validation(tmp_path):
    with pytest.raises(HarnessError):
        Manifest(corpora={"a": "x"}, output="o", mode="magic")
    with pytest.raises(HarnessError):
        Manifest(corpora={"a": "x", "b": "y"}, output="o", pairs=[("a", "c")])
    with pytest.raises(HarnessError):
        Manifest(corpora={"a": "x"}, output="o", mode="neural", seeds=[])


def test_default_pairs_all_ordered():
    m = Manifest(corpora={k: k for k in "abcd"}, output="o")
    assert len(m.pair_list()) == 12


def test_job_name_changes_with_settings(manifest):
    a = manifest.job_name("aa", "bb")
    b = dataclasses.replace(manifest, max_tokens=50).job_name("aa", "bb")
    assert a != b and a.startswith("aa-bb_proportional_sna_")


# -- reports

def test_run_report_tsv_round_trip():
    r = RunReport("a", "b", "neural", "ok", 0.5, 0.25, 1 / 3, 0.1, 12.0, 7, 3.5, 0.2, (1, 2), "", 9.9)
    back = RunReport.from_tsv(r.to_tsv())
    assert back == dataclasses.replace(r, wall_time=0.0)
    assert "wall_time" not in r.to_tsv()


def test_proportional_run_pair_deterministic(manifest, tmp_path):
    a = run_pair(manifest, "aa", "bb")
    other = dataclasses.replace(manifest, output=str(tmp_path / "runs2"))
    b = run_pair(other, "aa", "bb")
    assert a.status == "ok" and a.to_tsv() == b.to_tsv()
    d1 = tmp_path / "runs" / manifest.job_name("aa", "bb")
    d2 = tmp_path / "runs2" / manifest.job_name("aa", "bb")
    for name in ("report.tsv", "segmentation.tsv"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_segmentation_output_loads_back(manifest, tmp_path):
    run_pair(manifest, "aa", "bb")
    seg = load_corpus(tmp_path / "runs" / manifest.job_name("aa", "bb") / "segmentation.tsv", "aa", "bb")
    assert seg.ids == sorted(LANG_A)


def test_grid_two_languages_and_resume(manifest, monkeypatch):
    reports = run_grid(manifest, workers=1)
    assert [(r.source, r.target) for r in reports] == [("aa", "bb"), ("bb", "aa")]
    assert all(r.status == "ok" for r in reports)

    def boom(*a, **k):
        raise AssertionError("recomputed a finished pair")

    monkeypatch.setattr(harness, "execute_pair", boom)
    again = run_grid(manifest, workers=1)
    assert [r.to_tsv() for r in again] == [r.to_tsv() for r in reports]


def test_failure_isolated(manifest, tmp_path):
    (tmp_path / "cc.tsv").write_text("s1\tx\ty\n", encoding="utf-8")   # ids do not match
    man = dataclasses.replace(manifest, corpora={**manifest.corpora, "cc": str(tmp_path / "cc.tsv")},
                              pairs=[("aa", "bb"), ("aa", "cc")])
    reports = run_grid(man, workers=1)
    assert [r.status for r in reports] == ["ok", "failed"]
    assert "aa>cc" in (tmp_path / "runs" / "failures.tsv").read_text()
    assert not (tmp_path / "runs" / man.job_name("aa", "cc")).exists()


def test_grid_parallel_matches_serial(manifest, tmp_path):
    serial = run_grid(manifest, workers=1)
    par = run_grid(dataclasses.replace(manifest, output=str(tmp_path / "par")), workers=2)
    assert [r.to_tsv() for r in par] == [r.to_tsv() for r in serial]


def test_bayes_mode(manifest):
    rep = run_pair(manifest, "aa", "bb", mode="bayes")
    assert rep.status == "ok" and rep.bleu is None and 0 <= rep.f1 <= 1


def test_neural_repeated_seed_equals_single(manifest):
    one = run_pair(dataclasses.replace(manifest, mode="neural", seeds=[7]), "aa", "bb")
    two = run_pair(dataclasses.replace(manifest, mode="neural", seeds=[7, 7]), "aa", "bb")
    assert one.status == two.status == "ok"
    for k in harness.METRICS:
        assert getattr(one, k) == pytest.approx(getattr(two, k), abs=1e-12), k


def test_hybrid_has_no_marker(manifest, tmp_path):
    man = dataclasses.replace(manifest, mode="hybrid", seeds=[1])
    rep = run_pair(man, "aa", "bb")
    assert rep.status == "ok"
    job = tmp_path / "runs" / man.job_name("aa", "bb")
    assert man.marker not in (job / "segmentation.tsv").read_text(encoding="utf-8")
    assert man.marker in (job / "matrices" / "000000.mat").read_text(encoding="utf-8")


def test_hybrid_bleu_inputs_stripped(manifest):
    man = dataclasses.replace(manifest, mode="hybrid", seeds=[1], soft_boundaries="gold")
    res = harness.execute_pair(man, "aa", "bb")
    assert res.bleu_inputs
    assert all(man.marker not in h and man.marker not in r for h, r in res.bleu_inputs)
    assert all(man.marker not in "".join(a.target_symbols) for a in res.aligned.values())


# -- grid report

def _reports():
    return [RunReport("aa", "bb", "neural", f1=0.5, bleu=10.0), RunReport("bb", "aa", "neural", f1=0.25, bleu=20.0)]


def test_emit_grid_report_shape():
    matrix, long = emit_grid_report(_reports(), "f1")
    rows = [r.split("\t") for r in matrix.splitlines()]
    assert rows == [["", "aa", "bb"], ["aa", "", "0.5"], ["bb", "0.25", ""]]
    assert len(long.splitlines()) == 3
    bleu_rows = [r.split("\t") for r in emit_grid_report(_reports(), "bleu")[0].splitlines()]
    assert len(bleu_rows) == len(rows) and bleu_rows != rows


def test_emit_grid_report_unknown_metric():
    with pytest.raises(HarnessError, match="valid: precision"):
        emit_grid_report(_reports(), "accuracy")


# -- CLI

def test_cli_segment_prop_and_evaluate(tmp_path, capsys):
    corpus = write_lang(tmp_path / "pair.tsv", LANG_A)
    out = tmp_path / "seg.tsv"
    assert cli.main(["segment-prop", "--corpus", corpus, "--out", str(out)]) == 0
    assert cli.main(["evaluate", "--gold", corpus, "--hyp", str(out)]) == 0
    assert "f1\t" in capsys.readouterr().out


def test_cli_segment_bayes(tmp_path):
    corpus = write_lang(tmp_path / "pair.tsv", LANG_A)
    out = tmp_path / "seg.tsv"
    assert cli.main(["segment-bayes", "--corpus", corpus, "--sweeps", "10", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 5


def test_cli_train_segment_rank(tmp_path):
    corpus = write_lang(tmp_path / "pair.tsv", LANG_A)
    ckpt = tmp_path / "m.ckpt"
    assert cli.main(["train", "--corpus", corpus, "--epochs", "1", "--valid-fraction", "0.2",
                     "--out", str(ckpt)]) == 0
    seg, mats = tmp_path / "attn.tsv", tmp_path / "mats"
    assert cli.main(["segment-attn", "--corpus", corpus, "--model", str(ckpt), "--model", str(ckpt),
                     "--matrices", str(mats), "--out", str(seg)]) == 0
    assert len(list(mats.glob("*.mat"))) == 5
    assert cli.main(["rank", "--matrices", str(mats), "--out", str(tmp_path / "rank.tsv")]) == 0
    first = (tmp_path / "rank.tsv").read_text().splitlines()[0].split("\t")
    assert len(first) == 4


def test_cli_grid_and_report(tmp_path):
    write_lang(tmp_path / "aa.tsv", LANG_A)
    write_lang(tmp_path / "bb.tsv", LANG_B)
    ini = tmp_path / "m.ini"
    ini.write_text("[corpora]\naa = aa.tsv\nbb = bb.tsv\n[experiment]\nmode = proportional\noutput = runs\n")
    assert cli.main(["grid", "--manifest", str(ini)]) == 0
    out = tmp_path / "f1.tsv"
    assert cli.main(["report", "--manifest", str(ini), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert (tmp_path / "f1.long.tsv").exists()
    assert cli.main(["report", "--runs", str(tmp_path / "runs"), "--metric", "nope", "--out", str(out)]) == 1


def test_cli_bad_corpus_exit_code(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("just one field\n")
    assert cli.main(["segment-prop", "--corpus", str(bad), "--out", str(tmp_path / "o")]) == 1
