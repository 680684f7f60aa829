"""Command-line entry point: ``bilingseg <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import align, bayes, corpus as corpus_mod, harness, metrics, neural

logger = logging.getLogger("bilingseg")


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("corpus")
    g.add_argument("--corpus", help="pair TSV: field 2 source words, field 3 target phonemes")
    g.add_argument("--source-corpus", help="language TSV whose words are the source side")
    g.add_argument("--target-corpus", help="language TSV whose phonemes are the target side")
    g.add_argument("--source-lang", default="src")
    g.add_argument("--target-lang", default="tgt")
    g.add_argument("--inventory", help="target phoneme inventory, one symbol per line")
    g.add_argument("--pivot-corpus", help="filter by this file's sentence lengths")
    g.add_argument("--max-tokens", type=int, default=100)


def _load_pair(args) -> corpus_mod.ParallelCorpus:
    if args.corpus:
        pc = corpus_mod.load_corpus(args.corpus, args.source_lang, args.target_lang, args.inventory)
    elif args.source_corpus and args.target_corpus:
        src = corpus_mod.load_corpus(args.source_corpus, args.source_lang, args.source_lang)
        tgt = corpus_mod.load_corpus(args.target_corpus, args.target_lang, args.target_lang, args.inventory)
        pc = corpus_mod.pair_corpus(src, tgt)
    else:
        raise SystemExit("give --corpus, or both --source-corpus and --target-corpus")
    if args.pivot_corpus:
        pivot = corpus_mod.load_corpus(args.pivot_corpus, "pivot", "pivot")
        pc = corpus_mod.filter_by_length(pc, pivot, args.max_tokens)
    return pc


def _add_train_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=150)
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--learning-rate", type=float, default=1e-3)
    g.add_argument("--patience", type=int, default=10)
    g.add_argument("--valid-fraction", type=float, default=0.1)
    g.add_argument("--split-seed", type=int, default=0)


def _add_bayes_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("bayes")
    g.add_argument("--alpha0", type=float, default=20.0)
    g.add_argument("--p-hash", type=float, default=0.5)
    g.add_argument("--sweeps", type=int, default=2000)
    g.add_argument("--bayes-seed", type=int, default=0)


def _read_segmentations(path, pc: corpus_mod.ParallelCorpus, inventory=None) -> dict[str, corpus_mod.Segmentation]:
    seg = corpus_mod.load_corpus(path, "x", "x", inventory)
    out = {}
    for p in pc:
        if p.id not in seg:
            raise SystemExit(f"{path}: no segmentation for {p.id}")
        s = seg[p.id]
        if s.target_phonemes != p.target_phonemes:
            raise SystemExit(f"{path}: phonemes of {p.id} differ from the corpus")
        out[p.id] = s.gold_boundaries
    return out


def cmd_segment_bayes(args) -> int:
    pc = _load_pair(args)
    hp = bayes.BayesHyperparams(args.alpha0, args.p_hash)
    res = bayes.segment_corpus(pc, hp, bayes.GibbsConfig(sweeps=args.sweeps, seed=args.bayes_seed))
    corpus_mod.write_corpus(args.out, pc, res.segmentations)
    for row in res.log:
        logger.info("%s", row)
    return 0


def _augmented(args, pc):
    if not args.soft_boundaries:
        return pc, ()
    soft = _read_segmentations(args.soft_boundaries, pc, args.inventory)
    return harness.augment(pc, soft, args.marker), (args.marker,)


def cmd_train(args) -> int:
    pc, extra = _augmented(args, _load_pair(args))
    train_ids, valid_ids = corpus_mod.split_ids(pc.ids, args.valid_fraction, args.split_seed)
    cfg = neural.TrainConfig(args.epochs, args.batch_size, args.learning_rate, args.seed, args.patience)
    model, log = neural.train_model(pc.subset(train_ids), pc.subset(valid_ids), cfg, extra_target_symbols=extra)
    neural.save_model(model, args.out)
    logger.info("best epoch %d, valid loss %.4f", log.best_epoch, log.best_valid)
    return 0


def cmd_segment_attn(args) -> int:
    pc0 = _load_pair(args)
    pc, extra = _augmented(args, pc0)
    models = [neural.load_model(m) for m in args.model]
    per = [neural.forced_decode_matrices(m, list(pc)) for m in models]
    mats = [neural.average_matrices([ms[i] for ms in per]) for i in range(len(pc))]
    masked = tuple(args.mask_source or ())
    if extra:
        aligned = [align.hybrid_segment(m, args.marker, masked) for m in mats]
    else:
        aligned = [align.attention_segment(m, masked) for m in mats]
    corpus_mod.write_corpus(args.out, pc0, {p.id: a.segmentation for p, a in zip(pc0, aligned)})
    if args.matrices:
        d = Path(args.matrices)
        d.mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(mats):
            harness.save_matrix(m, d / f"{i:06d}.mat")
    if args.ranking:
        ranking = align.rank_alignments((a, align.average_normalized_entropy(m)) for a, m in zip(aligned, mats))
        Path(args.ranking).write_text(align.format_ranking(ranking), encoding="utf-8")
    return 0


def cmd_segment_prop(args) -> int:
    pc = _load_pair(args)
    segs = {p.id: align.proportional_segment([len(t) for t in p.source_tokens], len(p.target_phonemes)) for p in pc}
    corpus_mod.write_corpus(args.out, pc, segs)
    return 0


def cmd_hybrid(args) -> int:
    if not (args.source_corpus and args.target_corpus):
        raise SystemExit("hybrid needs --source-corpus and --target-corpus")
    corpora = {args.source_lang: args.source_corpus, args.target_lang: args.target_corpus}
    man = harness.Manifest(
        corpora=corpora, output=args.out, mode="hybrid", pairs=[(args.source_lang, args.target_lang)],
        seeds=args.seeds, inventories={args.target_lang: args.inventory} if args.inventory else {},
        valid_fraction=args.valid_fraction, split_seed=args.split_seed, marker=args.marker,
        soft_boundaries=args.soft, bayes={"alpha0": args.alpha0, "p_hash": args.p_hash, "sweeps": args.sweeps,
                                          "seed": args.bayes_seed},
        neural={"epochs": args.epochs, "batch_size": args.batch_size, "learning_rate": args.learning_rate,
                "patience": args.patience})
    rep = harness.run_pair(man, args.source_lang, args.target_lang)
    sys.stdout.write(rep.to_tsv())
    return 0 if rep.status == "ok" else 1


def cmd_evaluate(args) -> int:
    gold = corpus_mod.load_corpus(args.gold, "g", "g", args.inventory)
    hyp = _read_segmentations(args.hyp, gold, args.inventory)
    ids = gold.ids
    rep = metrics.evaluate([gold[i].target_phonemes for i in ids], [gold[i].gold_boundaries for i in ids],
                           [hyp[i] for i in ids])
    text = rep.to_tsv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_rank(args) -> int:
    items = []
    for path in sorted(Path(args.matrices).glob("*.mat")):
        m = harness.load_matrix(path)
        a = (align.hybrid_segment(m, args.marker) if args.marker in m.target_symbols
             else align.attention_segment(m))
        items.append((a, align.average_normalized_entropy(m)))
    text = align.format_ranking(align.rank_alignments(items))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_grid(args) -> int:
    man = harness.load_manifest(args.manifest)
    if args.mode:
        man = replace(man, mode=args.mode)
    reports = harness.run_grid(man, args.workers)
    for r in reports:
        logger.info("%s %s %s f1=%s", r.pair_id, r.mode, r.status, r.f1)
    return 0 if all(r.status == "ok" for r in reports) else 1


def cmd_report(args) -> int:
    if args.manifest:
        man = harness.load_manifest(args.manifest)
        if args.mode:
            man = replace(man, mode=args.mode)
        reports = [r for r in (harness.read_report(man, s, t) for s, t in man.pair_list()) if r is not None]
    else:
        reports = harness.collect_reports(args.runs)
        if args.mode:
            reports = [r for r in reports if r.mode == args.mode]
    matrix_path, long_path = harness.write_grid_report(reports, args.metric, args.out)
    sys.stdout.write(matrix_path.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bilingseg", description="bilingual unsupervised word segmentation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment-bayes", help="monolingual Gibbs segmentation of the target phonemes")
    _add_corpus_args(p)
    _add_bayes_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment_bayes)

    p = sub.add_parser("train", help="train one attention model")
    _add_corpus_args(p)
    _add_train_args(p)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--soft-boundaries", help="segmentation TSV whose boundaries become marker tokens")
    p.add_argument("--marker", default=corpus_mod.DEFAULT_MARKER)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment-attn", help="segment from averaged attention matrices")
    _add_corpus_args(p)
    p.add_argument("--model", action="append", required=True, help="checkpoint; repeat to average")
    p.add_argument("--soft-boundaries")
    p.add_argument("--marker", default=corpus_mod.DEFAULT_MARKER)
    p.add_argument("--mask-source", action="append", help="source token excluded from argmax")
    p.add_argument("--matrices", help="directory for matrix files")
    p.add_argument("--ranking", help="write the confidence ranking here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment_attn)

    p = sub.add_parser("segment-prop", help="proportional baseline")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment_prop)

    p = sub.add_parser("hybrid", help="Bayesian soft boundaries, then the neural path, for one pair")
    _add_corpus_args(p)
    _add_train_args(p)
    _add_bayes_args(p)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2])
    p.add_argument("--marker", default=corpus_mod.DEFAULT_MARKER)
    p.add_argument("--soft", choices=("bayes", "gold"), default="bayes")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_hybrid)

    p = sub.add_parser("evaluate", help="score a segmentation TSV against gold spacing")
    p.add_argument("--gold", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--inventory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="rank alignments of a matrix directory by average normalized entropy")
    p.add_argument("--matrices", required=True)
    p.add_argument("--marker", default=corpus_mod.DEFAULT_MARKER)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("grid", help="run every pair of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=harness.MODES)
    p.add_argument("--workers", type=int, help=f"default: ${harness.WORKERS_ENV} or 1")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="metric table over finished runs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--runs", help="output directory of a grid")
    p.add_argument("--mode", choices=harness.MODES)
    p.add_argument("--metric", default="f1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
