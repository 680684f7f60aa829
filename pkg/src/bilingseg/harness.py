"""Experiment orchestration over language pairs.

A manifest names one corpus file per language (field 2: that language's
words, field 3: its phonemization), a mode and the hyperparameters. Each
(source, target) job writes into its own directory, keyed by pair, mode,
seeds and a hash of the settings, so finished jobs are skipped on rerun.
"""

from __future__ import annotations

import configparser
import hashlib
import logging
import os
import shutil
import tempfile
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import align, bayes, corpus as corpus_mod, metrics, neural
from .corpus import DEFAULT_MARKER, ParallelCorpus, Segmentation, UtterancePair

logger = logging.getLogger(__name__)

MODES = ("bayes", "neural", "hybrid", "proportional")
WORKERS_ENV = "BILINGSEG_WORKERS"


class HarnessError(ValueError):
    pass


# -- soft-alignment matrix files --------------------------------------------

def format_matrix(matrix: neural.SoftAlignmentMatrix) -> str:
    T, A = matrix.shape
    rows = [" ".join(f"{x:.17g}" for x in row) for row in matrix.entries]
    return "\n".join([f"{T} {A}", *rows, " ".join(matrix.source_tokens), " ".join(matrix.target_symbols)]) + "\n"


def save_matrix(matrix: neural.SoftAlignmentMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_matrix(matrix))


def load_matrix(path: str | Path, tol: float = 1e-5) -> neural.SoftAlignmentMatrix:
    """Read a matrix file; rows that are not distributions are warned about and flagged."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    try:
        T, A = (int(x) for x in lines[0].split())
    except (ValueError, IndexError):
        raise HarnessError(f"{path}: malformed header") from None
    if len(lines) != T + 3:
        raise HarnessError(f"{path}: header says {T}x{A} but file has {len(lines) - 3} data rows")
    rows = []
    for i, line in enumerate(lines[1:T + 1]):
        vals = [float(x) for x in line.split()]
        if len(vals) != A:
            raise HarnessError(f"{path}: row {i} has {len(vals)} values, expected {A}")
        rows.append(vals)
    src, tgt = lines[T + 1].split(), lines[T + 2].split()
    entries = np.array(rows, dtype=np.float64).reshape(T, A)
    m = neural.SoftAlignmentMatrix(entries, src, tgt)
    bad = m.bad_rows(tol)
    if bad:
        warnings.warn(f"{path}: rows {bad} are not probability distributions", stacklevel=2)
        m = replace(m, invalid_rows=tuple(bad))
    return m


# -- manifest ----------------------------------------------------------------

@dataclass
class Manifest:
    corpora: dict[str, str]
    output: str
    mode: str = "neural"
    pivot: str | None = None
    pairs: list[tuple[str, str]] | None = None
    seeds: list[int] = field(default_factory=lambda: [1, 2])
    inventories: dict[str, str] = field(default_factory=dict)
    max_tokens: int = 100
    valid_fraction: float = 0.1
    split_seed: int = 0
    marker: str = DEFAULT_MARKER
    soft_boundaries: str = "bayes"
    masked_sources: tuple[str, ...] = ()
    bayes: dict[str, float] = field(default_factory=dict)
    neural: dict[str, float] = field(default_factory=dict)
    model: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise HarnessError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.soft_boundaries not in ("bayes", "gold"):
            raise HarnessError("soft_boundaries must be 'bayes' or 'gold'")
        if self.mode in ("neural", "hybrid") and not self.seeds:
            raise HarnessError("neural and hybrid modes need at least one seed")
        langs = set(self.corpora)
        if self.pivot is not None and self.pivot not in langs:
            raise HarnessError(f"pivot {self.pivot!r} is not a declared language")
        for s, t in self.pair_list():
            if s not in langs or t not in langs:
                raise HarnessError(f"pair {s}>{t} uses an undeclared language")

    def pair_list(self) -> list[tuple[str, str]]:
        if self.pairs is not None:
            return list(self.pairs)
        langs = sorted(self.corpora)
        return [(s, t) for s in langs for t in langs if s != t]

    def bayes_settings(self) -> tuple[bayes.BayesHyperparams, bayes.GibbsConfig]:
        b = self.bayes
        hp = bayes.BayesHyperparams(float(b.get("alpha0", 20.0)), float(b.get("p_hash", 0.5)))
        cfg = bayes.GibbsConfig(sweeps=int(b.get("sweeps", 2000)), seed=int(b.get("seed", 0)))
        return hp, cfg

    def train_config(self, seed: int) -> neural.TrainConfig:
        kw = {f.name: f.type for f in fields(neural.TrainConfig)}
        vals = {k: (int(v) if kw[k] == "int" else float(v)) for k, v in self.neural.items() if k in kw}
        return neural.TrainConfig(**{**vals, "seed": seed})

    def model_config(self) -> neural.ModelConfig:
        return neural.ModelConfig(**{k: (str(v) if k == "dtype" else int(v)) for k, v in self.model.items()})

    def settings_hash(self) -> str:
        relevant = {
            "max_tokens": self.max_tokens, "pivot": self.pivot, "valid_fraction": self.valid_fraction,
            "split_seed": self.split_seed, "masked": list(self.masked_sources),
        }
        if self.mode in ("bayes", "hybrid"):
            relevant["bayes"] = sorted(self.bayes.items())
        if self.mode in ("neural", "hybrid"):
            relevant["neural"] = sorted(self.neural.items())
            relevant["model"] = sorted(self.model.items())
        if self.mode == "hybrid":
            relevant["marker"] = self.marker
            relevant["soft"] = self.soft_boundaries
        return hashlib.sha256(repr(sorted(relevant.items())).encode("utf-8")).hexdigest()[:10]

    def job_name(self, source: str, target: str) -> str:
        seeds = "-".join(map(str, self.seeds)) if self.mode in ("neural", "hybrid") else "na"
        return f"{source}-{target}_{self.mode}_s{seeds}_{self.settings_hash()}"


def load_manifest(path: str | Path) -> Manifest:
    """Parse an INI manifest; relative paths are resolved against its directory.

    Sections: ``[corpora]`` lang = path, optional ``[inventories]``,
    ``[experiment]`` (mode, output, pivot, pairs, seeds, max_tokens,
    valid_fraction, split_seed, marker, soft_boundaries, masked_sources),
    ``[bayes]``, ``[neural]`` and ``[model]`` overrides.
    """
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    with open(path, encoding="utf-8") as f:
        cp.read_file(f)
    base = path.parent

    def resolve(p):
        return str(p if Path(p).is_absolute() else (base / p))

    if not cp.has_section("corpora"):
        raise HarnessError(f"{path}: missing [corpora] section")
    ex = cp["experiment"] if cp.has_section("experiment") else {}
    pairs = None
    if ex.get("pairs"):
        pairs = []
        for item in ex["pairs"].split():
            s, _, t = item.partition(">")
            if not t:
                raise HarnessError(f"{path}: bad pair {item!r}, expected SRC>TGT")
            pairs.append((s, t))
    return Manifest(
        corpora={k: resolve(v) for k, v in cp["corpora"].items()},
        inventories={k: resolve(v) for k, v in cp["inventories"].items()} if cp.has_section("inventories") else {},
        output=resolve(ex.get("output", "runs")),
        mode=ex.get("mode", "neural"),
        pivot=ex.get("pivot") or None,
        pairs=pairs,
        seeds=[int(s) for s in ex.get("seeds", "1 2").split()],
        max_tokens=int(ex.get("max_tokens", 100)),
        valid_fraction=float(ex.get("valid_fraction", 0.1)),
        split_seed=int(ex.get("split_seed", 0)),
        marker=ex.get("marker", DEFAULT_MARKER),
        soft_boundaries=ex.get("soft_boundaries", "bayes"),
        masked_sources=tuple(ex.get("masked_sources", "").split()),
        bayes=dict(cp["bayes"]) if cp.has_section("bayes") else {},
        neural=dict(cp["neural"]) if cp.has_section("neural") else {},
        model=dict(cp["model"]) if cp.has_section("model") else {},
    )


# -- reports -----------------------------------------------------------------

@dataclass
class RunReport:
    source: str
    target: str
    mode: str
    status: str = "ok"
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    type_f1: float | None = None
    bleu: float | None = None
    types: int | None = None
    mean_token_length: float | None = None
    ane_mean: float | None = None
    seeds: tuple[int, ...] = ()
    error: str = ""
    wall_time: float = 0.0

    @property
    def pair_id(self) -> str:
        return f"{self.source}>{self.target}"

    def to_tsv(self) -> str:
        """Key-value lines. Wall time is kept out so reruns compare byte-identical."""
        out = []
        for f in fields(self):
            if f.name == "wall_time":
                continue
            v = getattr(self, f.name)
            if f.name == "seeds":
                v = " ".join(map(str, v))
            elif v is None:
                v = ""
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{f.name}\t{v}\n")
        return "".join(out)

    @classmethod
    def from_tsv(cls, text: str) -> "RunReport":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for line in text.splitlines():
            k, _, v = line.partition("\t")
            t = types[k]
            if k == "seeds":
                kw[k] = tuple(int(s) for s in v.split())
            elif t == "str":
                kw[k] = v
            elif v == "":
                kw[k] = None
            elif t.startswith("int"):
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)


METRICS = ("precision", "recall", "f1", "type_f1", "bleu", "types", "mean_token_length", "ane_mean")


# -- pair execution ----------------------------------------------------------

def _load_language(manifest: Manifest, lang: str) -> ParallelCorpus:
    return corpus_mod.load_corpus(manifest.corpora[lang], lang, lang, manifest.inventories.get(lang))


def build_pair_corpus(manifest: Manifest, source: str, target: str) -> ParallelCorpus:
    src = _load_language(manifest, source)
    tgt = _load_language(manifest, target)
    pc = corpus_mod.pair_corpus(src, tgt)
    if manifest.pivot is not None:
        pivot = src if manifest.pivot == source else _load_language(manifest, manifest.pivot)
        pc = corpus_mod.filter_by_length(pc, pivot, manifest.max_tokens)
    return pc


def augment(pc: ParallelCorpus, soft: dict[str, Segmentation], marker: str) -> ParallelCorpus:
    """Targets with ``marker`` inserted at the soft boundaries; gold dropped."""
    inventory = {s for p in pc for s in p.target_phonemes}
    return pc.with_pairs(
        UtterancePair(p.id, p.source_tokens, corpus_mod.insert_soft_boundaries(p.target_phonemes, soft[p.id], marker, inventory))
        for p in pc)


@dataclass
class PairResult:
    report: RunReport
    segmentations: dict[str, Segmentation]
    matrices: dict[str, neural.SoftAlignmentMatrix] = field(default_factory=dict)
    aligned: dict[str, align.AlignedSegmentation] = field(default_factory=dict)
    bleu_inputs: list[tuple[list[str], list[str]]] = field(default_factory=list)
    logs: dict[str, list] = field(default_factory=dict)


def _neural_path(manifest: Manifest, pc: ParallelCorpus, train_ids, valid_ids, marker: str | None):
    """Train one model per seed; average forced-decode matrices; BLEU averaged over seeds."""
    per_seed, bleus, logs, bleu_inputs = [], [], {}, []
    train, valid = pc.subset(train_ids), pc.subset(valid_ids)
    extra = (marker,) if marker else ()
    for seed in manifest.seeds:
        model, log = neural.train_model(train, valid, manifest.train_config(seed), manifest.model_config(),
                                        extra_target_symbols=extra)
        logs[f"seed{seed}"] = log.epochs
        per_seed.append(neural.forced_decode_matrices(model, list(pc)))
        hyps, refs = [], []
        for p in valid:
            out = neural.greedy_decode(model, p.source_tokens, max_len=2 * len(p.target_phonemes) + 10)
            ref = list(p.target_phonemes)
            if marker:
                out, ref = corpus_mod.strip_marker(out, marker), corpus_mod.strip_marker(ref, marker)
            hyps.append(out)
            refs.append(ref)
        bleu_inputs.extend(zip(hyps, refs))
        bleus.append(metrics.bleu4(hyps, refs) if hyps else float("nan"))
    averaged = {p.id: neural.average_matrices([ms[i] for ms in per_seed]) for i, p in enumerate(pc)}
    return averaged, float(np.mean(bleus)), logs, bleu_inputs


def execute_pair(manifest: Manifest, source: str, target: str, mode: str | None = None,
                 pc: ParallelCorpus | None = None) -> PairResult:
    """Run one pair without touching disk. Raises on failure."""
    mode = mode or manifest.mode
    if pc is None:
        pc = build_pair_corpus(manifest, source, target)
    if not len(pc):
        raise HarnessError(f"{source}>{target}: empty corpus after filtering")
    train_ids, valid_ids = corpus_mod.split_ids(pc.ids, manifest.valid_fraction, manifest.split_seed)
    matrices, aligned, bleu, logs, bleu_inputs = {}, {}, None, {}, []
    masked = manifest.masked_sources
    if mode == "bayes":
        hp, cfg = manifest.bayes_settings()
        res = bayes.segment_corpus(pc, hp, cfg)
        segs = res.segmentations
        logs["bayes"] = res.log
    elif mode == "proportional":
        for p in pc:
            aligned[p.id] = align.proportional_align(p.source_tokens, len(p.target_phonemes), p.target_phonemes)
        segs = {k: a.segmentation for k, a in aligned.items()}
    elif mode == "neural":
        matrices, bleu, logs, bleu_inputs = _neural_path(manifest, pc, train_ids, valid_ids, None)
        aligned = {k: align.attention_segment(m, masked) for k, m in matrices.items()}
        segs = {k: a.segmentation for k, a in aligned.items()}
    elif mode == "hybrid":
        if manifest.soft_boundaries == "gold":
            soft = {p.id: p.gold_boundaries for p in pc}
        else:
            hp, cfg = manifest.bayes_settings()
            res = bayes.segment_corpus(pc, hp, cfg)
            soft = res.segmentations
            logs["bayes"] = res.log
        aug = augment(pc, soft, manifest.marker)
        matrices, bleu, nlogs, bleu_inputs = _neural_path(manifest, aug, train_ids, valid_ids, manifest.marker)
        logs.update(nlogs)
        aligned = {k: align.hybrid_segment(m, manifest.marker, masked) for k, m in matrices.items()}
        segs = {k: a.segmentation for k, a in aligned.items()}
    else:
        raise HarnessError(f"unknown mode {mode!r}")
    symbols = [p.target_phonemes for p in pc]
    anes = [align.average_normalized_entropy(m) for m in matrices.values()] or None
    ev = metrics.evaluate(symbols, [p.gold_boundaries for p in pc], [segs[p.id] for p in pc], bleu, anes)
    report = RunReport(source, target, mode, "ok", ev.precision, ev.recall, ev.f1, ev.type_f1, bleu,
                       ev.types, ev.mean_token_length, ev.ane_mean,
                       tuple(manifest.seeds) if mode in ("neural", "hybrid") else ())
    return PairResult(report, segs, matrices, aligned, bleu_inputs, logs)


def _write_job(job_dir: Path, pc: ParallelCorpus, result: PairResult) -> None:
    job_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{job_dir.name}.", dir=job_dir.parent))
    try:
        corpus_mod.write_corpus(tmp / "segmentation.tsv", pc, result.segmentations)
        if result.matrices:
            (tmp / "matrices").mkdir()
            for i, p in enumerate(pc):
                save_matrix(result.matrices[p.id], tmp / "matrices" / f"{i:06d}.mat")
            ranking = align.rank_alignments(
                (result.aligned[k], align.average_normalized_entropy(m)) for k, m in result.matrices.items())
            (tmp / "ranking.tsv").write_text(align.format_ranking(ranking), encoding="utf-8")
        for name, rows in result.logs.items():
            if rows:
                keys = list(rows[0])
                text = "\t".join(keys) + "\n" + "".join(
                    "\t".join("" if r[k] is None else repr(r[k]) for k in keys) + "\n" for r in rows)
                (tmp / f"log_{name}.tsv").write_text(text, encoding="utf-8")
        (tmp / "timing.tsv").write_text(f"wall_time\t{result.report.wall_time!r}\n", encoding="utf-8")
        # report last: its presence marks a finished job
        (tmp / "report.tsv").write_text(result.report.to_tsv(), encoding="utf-8")
        if job_dir.exists():
            shutil.rmtree(job_dir)
        os.replace(tmp, job_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def run_pair(manifest: Manifest, source: str, target: str, mode: str | None = None) -> RunReport:
    """Execute and persist one pair; failures come back as a report with status 'failed'."""
    mode = mode or manifest.mode
    if mode != manifest.mode:
        manifest = replace(manifest, mode=mode)
    job_dir = Path(manifest.output) / manifest.job_name(source, target)
    start = time.perf_counter()
    try:
        pc = build_pair_corpus(manifest, source, target)
        result = execute_pair(manifest, source, target, mode, pc)
        result.report.wall_time = time.perf_counter() - start
        _write_job(job_dir, pc, result)
        return result.report
    except Exception as e:  # isolate the pair
        logger.error("%s>%s %s failed: %s", source, target, mode, e)
        logger.debug(traceback.format_exc())
        return RunReport(source, target, mode, "failed", error=f"{type(e).__name__}: {e}",
                         seeds=tuple(manifest.seeds) if mode in ("neural", "hybrid") else (),
                         wall_time=time.perf_counter() - start)


def _run_pair_job(args):
    manifest, s, t = args
    return run_pair(manifest, s, t)


def read_report(manifest: Manifest, source: str, target: str) -> RunReport | None:
    path = Path(manifest.output) / manifest.job_name(source, target) / "report.tsv"
    if path.exists():
        return RunReport.from_tsv(path.read_text(encoding="utf-8"))
    return None


def run_grid(manifest: Manifest, workers: int | None = None) -> list[RunReport]:
    """Run every pair of the manifest, skipping pairs whose report already exists."""
    if len(manifest.corpora) < 2:
        raise HarnessError("a grid needs at least 2 languages")
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    pairs = manifest.pair_list()
    reports: dict[tuple[str, str], RunReport] = {}
    todo = []
    for s, t in pairs:
        done = read_report(manifest, s, t)
        if done is not None:
            logger.info("%s>%s: report exists, skipping", s, t)
            reports[(s, t)] = done
        else:
            todo.append((s, t))
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (s, t), rep in zip(todo, pool.map(_run_pair_job, [(manifest, s, t) for s, t in todo])):
                reports[(s, t)] = rep
    else:
        for s, t in todo:
            reports[(s, t)] = run_pair(manifest, s, t)
    out = [reports[p] for p in pairs]
    failed = [r for r in out if r.status != "ok"]
    if failed:
        Path(manifest.output).mkdir(parents=True, exist_ok=True)
        with open(Path(manifest.output) / "failures.tsv", "w", encoding="utf-8") as f:
            for r in failed:
                f.write(f"{r.pair_id}\t{r.mode}\t{r.error}\n")
    return out


def collect_reports(output_dir: str | Path) -> list[RunReport]:
    """All finished reports under an output directory, in job-name order."""
    return [RunReport.from_tsv(p.read_text(encoding="utf-8"))
            for p in sorted(Path(output_dir).glob("*/report.tsv"))]


def emit_grid_report(reports: Sequence[RunReport], metric: str) -> tuple[str, str]:
    """(matrix TSV, long-form TSV). Rows are source languages, columns targets."""
    if metric not in METRICS:
        raise HarnessError(f"unknown metric {metric!r}; valid: {', '.join(METRICS)}")
    modes = {r.mode for r in reports}
    if len(modes) > 1:
        raise HarnessError(f"reports mix modes {sorted(modes)}")
    langs = sorted({r.source for r in reports} | {r.target for r in reports})
    cell = {(r.source, r.target): getattr(r, metric) for r in reports if r.status == "ok"}

    def fmt(v):
        return "" if v is None else repr(v)

    lines = ["\t".join([""] + langs)]
    for s in langs:
        lines.append("\t".join([s] + ["" if s == t else fmt(cell.get((s, t))) for t in langs]))
    matrix = "\n".join(lines) + "\n"
    long_lines = ["source\ttarget\tmode\tstatus\t" + metric]
    for r in sorted(reports, key=lambda r: (r.source, r.target)):
        long_lines.append(f"{r.source}\t{r.target}\t{r.mode}\t{r.status}\t{fmt(getattr(r, metric))}")
    return matrix, "\n".join(long_lines) + "\n"


def write_grid_report(reports: Sequence[RunReport], metric: str, path: str | Path) -> tuple[Path, Path]:
    matrix, long = emit_grid_report(reports, metric)
    path = Path(path)
    long_path = path.with_name(path.stem + ".long.tsv")
    path.write_text(matrix, encoding="utf-8")
    long_path.write_text(long, encoding="utf-8")
    return path, long_path
